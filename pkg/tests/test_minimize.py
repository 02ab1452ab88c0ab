import csv
import io
import math

import numpy as np
import pytest

from helfrich import shapes
from helfrich.curvature import helfrich_energy, willmore_energy
from helfrich.errors import DegenerateConstraintsError
from helfrich.mesh import Constraints, area, enclosed_volume
from helfrich.minimize import (
    LOG_COLUMNS,
    OptimizerState,
    descend,
    el_residual,
    energy_gradient,
    fit_multipliers,
    minimize,
    project_gradient,
    restore_constraints,
)
from helfrich.varifold import area_gradient, first_variation_area, first_variation_volume, volume_gradient

from conftest import FOUR_PI, rel


@pytest.fixture(scope="module")
def small():
    return shapes.perturbed_sphere(2, 0.1)


@pytest.fixture(scope="module")
def sphere_run(perturbed3, ico3):
    """Perturbed sphere restored to the round icosphere's area and volume, then descended."""
    tg = Constraints.of(ico3)
    start = restore_constraints(perturbed3, tg)
    st = descend(OptimizerState(start, tg), keep_meshes=True)
    return start, st


# -- gradient -----------------------------------------------------------------


@pytest.mark.parametrize("h0", [0.0, 1.3])
def test_gradient_modes_agree(small, h0):
    ga = energy_gradient(small, h0, "analytic")
    gf = energy_gradient(small, h0, "fd")
    assert np.linalg.norm(ga - gf) <= 1e-4 * np.linalg.norm(ga)


def test_gradient_unknown_mode(small):
    with pytest.raises(ValueError):
        energy_gradient(small, 0.0, "spectral")


def test_gradient_sphere_spontaneous_curvature(ico4):
    g = energy_gradient(ico4, 2.0)
    assert np.linalg.norm(g) <= 1e-3 * math.sqrt(area(ico4))


@pytest.mark.parametrize("h0", [0.0, 0.8])
def test_directional_derivative(small, h0):
    g = energy_gradient(small, h0)
    rng = np.random.default_rng(3)
    eps = 1e-6
    for _ in range(10):
        d = rng.normal(size=small.vertices.shape)
        d /= np.linalg.norm(d)
        wp = helfrich_energy(small.moved(small.vertices + eps * d), h0)
        wm = helfrich_energy(small.moved(small.vertices - eps * d), h0)
        fd = (wp - wm) / (2 * eps)
        assert np.sum(g * d) == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_willmore_gradient_orthogonal_to_dilation(small, torus32):
    for m in (small, torus32):
        g = 0.25 * energy_gradient(m, 0.0)
        x = m.vertices
        assert abs(np.sum(g * x)) <= 1e-6 * np.linalg.norm(g) * np.linalg.norm(x)


# -- projection ---------------------------------------------------------------


def test_project_area_gradient_vanishes(small):
    gA = area_gradient(small)
    d, _ = project_gradient(small, gA)
    assert np.linalg.norm(d) <= 1e-10 * np.linalg.norm(gA)


def test_project_orthogonal_field_unchanged(small):
    rng = np.random.default_rng(0)
    gA, gV = area_gradient(small), volume_gradient(small)
    Q, _ = np.linalg.qr(np.column_stack([gA.ravel(), gV.ravel()]))
    v = rng.normal(size=gA.size)
    v = (v - Q @ (Q.T @ v)).reshape(gA.shape)
    d, (a, b) = project_gradient(small, v)
    assert np.linalg.norm(d - v) <= 1e-10 * np.linalg.norm(v)
    assert abs(a) <= 1e-10 and abs(b) <= 1e-10


def test_projected_field_preserves_constraints(small):
    d, _ = project_gradient(small, energy_gradient(small, 0.5))
    field = lambda x: d  # noqa: E731
    assert abs(first_variation_area(small, field)) <= 1e-8 * area(small)
    assert abs(first_variation_volume(small, field)) <= 1e-8 * abs(enclosed_volume(small))


def test_project_degenerate_gram():
    m = shapes.icosphere(2)
    x = m.vertices
    # a rank-one metric makes the Gram matrix of the constraint gradients singular
    with pytest.raises(DegenerateConstraintsError):
        project_gradient(m, x, metric=lambda v: np.sum(v * x) * x)


# -- Euler-Lagrange residual --------------------------------------------------


@pytest.mark.parametrize("level", [3, 4, 5])
def test_sphere_multiplier_identity(level):
    la, lv = fit_multipliers(shapes.icosphere(level), 0.0)
    assert abs(lv - 2 * la) <= 0.05 * (abs(la) + abs(lv) + 1)


@pytest.mark.xfail(strict=True, reason="both residuals are discretization noise on a round "
                   "icosphere and their ratio grows under refinement (0.10, 0.31, 0.50 at levels 3-5)")
def test_sphere_best_fit_against_zero_multipliers(ico4):
    assert el_residual(ico4, 0.0) <= 0.05 * el_residual(ico4, 0.0, (0.0, 0.0))


def test_sphere_best_fit_against_wrong_multipliers(ico4):
    # (1, 1) violates lambda_V = 2 lambda_A and leaves the constant residual -1 at every vertex
    wrong = el_residual(ico4, 0.0, (1.0, 1.0))
    assert wrong == pytest.approx(1.0, rel=0.02)
    assert el_residual(ico4, 0.0) <= 0.05 * wrong


def test_el_residual_positive_off_stationary(small):
    assert el_residual(small, 0.0) > 0.01


def test_el_residual_nonnegative(small):
    for h0 in (-1.0, 0.0, 2.0):
        assert el_residual(small, h0) >= 0.0
        assert el_residual(small, h0, (1.0, -3.0)) >= el_residual(small, h0) - 1e-12


# -- descent ------------------------------------------------------------------


def test_descent_reaches_sphere(perturbed3, sphere_run):
    start, st = sphere_run
    assert st.converged
    assert rel(willmore_energy(st.mesh), FOUR_PI) <= 0.01
    assert el_residual(st.mesh) <= 0.1 * el_residual(perturbed3)
    assert el_residual(st.mesh) < el_residual(start)


def test_descent_monotone_and_feasible(sphere_run):
    _, st = sphere_run
    h = st.energy_history
    assert all(b < a for a, b in zip(h, h[1:]))
    tg = st.constraints
    for m in st.meshes:
        assert abs(area(m) - tg.area0) <= 1e-8 * tg.area0
        assert abs(enclosed_volume(m) - tg.vol0) <= 1e-8 * abs(tg.vol0)


def test_lower_semicontinuity_harness(sphere_run):
    _, st = sphere_run
    energies = [helfrich_energy(m, 0.0) for m in st.meshes]
    assert helfrich_energy(st.mesh, 0.0) <= min(energies) + 1e-9


def test_refinement_cauchy():
    w = [helfrich_energy(shapes.perturbed_sphere(level, 0.05), 0.0) for level in (3, 4, 5)]
    for a, b in zip(w, w[1:]):
        assert rel(b, a) <= 0.02


def test_gauss_bonnet_term_changes_nothing(sphere_run, ico3):
    start, _ = sphere_run
    tg = Constraints.of(ico3)
    runs = [descend(OptimizerState(start, tg), max_steps=3, kappa=k, keep_meshes=True)
            for k in (0.0, 1.0)]
    assert len(runs[0].meshes) == len(runs[1].meshes) > 1
    for a, b in zip(runs[0].meshes, runs[1].meshes):
        assert np.array_equal(a.vertices, b.vertices)


def test_round_sphere_is_stationary(ico3):
    st = minimize(ico3, Constraints.of(ico3))
    assert st.n_accepted == 0
    assert st.stationary


def test_zero_steps_echo_state(perturbed3):
    tg = Constraints.of(perturbed3)
    st = descend(OptimizerState(perturbed3, tg), max_steps=0)
    assert st.mesh is perturbed3
    assert st.n_accepted == 0
    assert st.energy_history == [helfrich_energy(perturbed3, 0.0)]


def test_run_log_columns(sphere_run):
    _, st = sphere_run
    rows = list(csv.reader(io.StringIO(st.log_csv())))
    assert rows[0] == LOG_COLUMNS
    accepted = [r for r in rows[1:] if r[-1] == "1"]
    assert len(accepted) == st.n_accepted + 1
    assert float(accepted[-1][1]) == st.energy_history[-1]
    s = st.summary()
    assert s["accepted_steps"] == st.n_accepted
