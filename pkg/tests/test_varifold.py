import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helfrich import shapes
from helfrich.correction import BumpField
from helfrich.errors import PointOnSurfaceError
from helfrich.mesh import area, enclosed_volume
from helfrich.varifold import (
    OrientedSampleCloud,
    cloud_area,
    cloud_from_mesh,
    cloud_volume,
    current_rep,
    first_variation_area,
    first_variation_volume,
    point_triangle_distance,
    ray_parity,
    volume_via_current,
    winding_numbers,
)

from conftest import FOUR_PI, rel


def random_bump(rng, mesh, radius=0.6):
    c = mesh.vertices[rng.integers(mesh.n_vertices)] + 0.1 * rng.normal(size=3)
    d = rng.normal(size=3)
    return BumpField(c, radius, d / np.linalg.norm(d))


def fd(fun, mesh, field, h=1e-5):
    v = field(mesh.vertices)
    return (fun(mesh.moved(mesh.vertices + h * v)) - fun(mesh.moved(mesh.vertices - h * v))) / (2 * h)


# -- clouds -------------------------------------------------------------------


def test_cloud_mass_and_volume(ico4):
    c = cloud_from_mesh(ico4)
    assert cloud_area(c) == area(ico4)
    assert rel(cloud_area(c), FOUR_PI) < 0.01
    assert rel(cloud_volume(c), FOUR_PI / 3) < 0.01
    assert cloud_volume(c) == pytest.approx(enclosed_volume(ico4), rel=1e-12)


def test_cloud_multiplicity_and_flip(ico3):
    c1, c2 = cloud_from_mesh(ico3), cloud_from_mesh(ico3, multiplicity=2)
    assert cloud_volume(c2) == pytest.approx(2 * cloud_volume(c1), rel=1e-14)
    f = cloud_from_mesh(ico3, flip=True)
    assert cloud_volume(f) == -cloud_volume(c1)
    assert cloud_area(f) == cloud_area(c1)
    merged = c1.merge(f)
    assert abs(cloud_volume(merged)) <= 1e-12
    assert cloud_area(merged) == pytest.approx(2 * cloud_area(c1))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_cloud_volume_translation_invariant(c):
    cl = cloud_from_mesh(shapes.perturbed_sphere(2, 0.1))
    v0 = cloud_volume(cl)
    assert abs(cloud_volume(cl.translated(c)) - v0) <= 1e-9 * max(1.0, np.linalg.norm(c)) * abs(v0)


def test_cloud_validation():
    p = np.zeros((1, 3))
    n = np.array([[0, 0, 1.0]])
    with pytest.raises(ValueError):
        OrientedSampleCloud(p, n, np.array([0.0]), np.array([1]), np.array([0]))
    with pytest.raises(ValueError):
        OrientedSampleCloud(p, n, np.array([1.0]), np.array([0]), np.array([0]))
    with pytest.raises(ValueError):
        cloud_from_mesh(shapes.icosphere(0), multiplicity=0)


def test_cloud_csv(ico3):
    c = cloud_from_mesh(ico3)
    rows = list(csv.reader(io.StringIO(c.to_csv())))
    assert rows[0] == ["x", "y", "z", "nx", "ny", "nz", "w", "theta_plus", "theta_minus"]
    assert len(rows) == ico3.n_faces + 1
    assert float(rows[1][6]) == c.weights[0]


# -- currents -----------------------------------------------------------------


def test_theta_sign_convention(ico3):
    rep = current_rep(ico3)
    assert rep([0, 0, 0]) == -1
    assert rep([10, 0, 0]) == 0
    assert current_rep(ico3.flipped())([0, 0, 0]) == 1


def test_doubled_sphere_against_ray_parity():
    inner, outer = shapes.icosphere(2), shapes.icosphere(2, radius=2.0)
    both = shapes.combine(inner, outer)
    rep = current_rep(both)
    assert rep([0, 0, 0]) == -2
    assert rep([0, 0, 1.5]) == -1
    for p in ([0, 0, 0], [0.3, 0.1, -0.2], [0, 1.5, 0]):
        parity = ray_parity(inner, p) + ray_parity(outer, p)
        assert -rep(p) == parity


def test_point_on_surface(ico3):
    rep = current_rep(ico3, resolution=32)
    rep2 = type(rep)(rep.mesh, rep.lo, rep.hi, rep.resolution, max_retries=0)
    with pytest.raises(PointOnSurfaceError):
        rep2(ico3.vertices[0])
    # with retries the query is nudged off the surface and gets an integer value
    assert rep(ico3.vertices[0]) in (0, -1)


def test_winding_integer_off_surface(perturbed3):
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1.3, 1.3, size=(400, 3))
    d = np.array([point_triangle_distance(p, perturbed3.corners).min() for p in pts])
    w = winding_numbers(perturbed3, pts[d > 1e-6])
    assert np.max(np.abs(w - np.rint(w))) < 1e-8


@pytest.mark.parametrize("make,expected,tol", [
    (lambda: shapes.icosphere(4), FOUR_PI / 3, 0.02),
    (lambda: shapes.icosphere(4).flipped(), -FOUR_PI / 3, 0.02),
    (lambda: shapes.torus(2.0, 0.5, 48, 32), 2 * math.pi**2 * 2.0 * 0.25, 0.03),
])
def test_volume_via_current(make, expected, tol):
    m = make()
    v = volume_via_current(current_rep(m, 64))
    assert rel(v, expected) < tol
    rep = current_rep(m, 64)
    cell_diag = float(np.linalg.norm(rep.spacing))
    assert abs(v - enclosed_volume(m)) <= 3 * cell_diag * area(m)


def test_volume_via_current_needs_resolution(ico3):
    with pytest.raises(ValueError):
        volume_via_current(current_rep(ico3, 16))


def test_grid_matches_pointwise_evaluation(perturbed3):
    rep = current_rep(perturbed3, 32)
    g = rep.grid_values()
    xs, ys, zs = rep.cell_centers()
    rng = np.random.default_rng(2)
    idx = rng.integers(0, 32, size=(60, 3))
    pts = np.stack([xs[idx[:, 0]], ys[idx[:, 1]], zs[idx[:, 2]]], axis=1)
    assert np.array_equal(rep(pts), g[idx[:, 0], idx[:, 1], idx[:, 2]])


# -- first variations ---------------------------------------------------------


def test_first_variation_dilation_and_translation(ico4):
    A, V = area(ico4), enclosed_volume(ico4)
    assert first_variation_area(ico4, lambda x: x) == pytest.approx(2 * A, rel=1e-8)
    assert abs(first_variation_area(ico4, lambda x: np.ones_like(x) * [1, 2, 3])) <= 1e-10 * A
    assert first_variation_volume(ico4, lambda x: x / 3) == pytest.approx(V, rel=1e-10)
    c = np.array([0.3, -2.0, 1.0])
    assert abs(first_variation_volume(ico4, lambda x: np.broadcast_to(c, x.shape))) <= (
        1e-10 * np.linalg.norm(c) * A)


@pytest.mark.parametrize("make", [lambda: shapes.icosphere(3), lambda: shapes.torus(2, 0.5, 24, 16),
                                  lambda: shapes.perturbed_sphere(3, 0.05)])
def test_first_variation_matches_fd(make):
    m = make()
    rng = np.random.default_rng(7)
    for _ in range(10):
        X = random_bump(rng, m)
        for fun, var in ((area, first_variation_area), (enclosed_volume, first_variation_volume)):
            exact = var(m, X)
            approx = fd(fun, m, X)
            assert abs(exact - approx) <= 1e-6 * max(abs(exact), 1e-3 * area(m))


def _smooth_field(rng):
    a = rng.normal(size=(3, 3))
    b = rng.normal(size=3)
    c = rng.normal(size=3)
    w = rng.uniform(0.5, 2.0)

    def g(x):
        return np.sin(x @ a.T * w + b) * np.exp(-np.sum((x - c) ** 2, axis=1))[:, None]

    return g


def test_volume_variation_is_oriented_surface_integral(perturbed3):
    """The exact identity integrates the linear interpolant of g over each face."""
    m = perturbed3
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = _smooth_field(rng)
        gv = g(m.vertices)[m.faces].mean(axis=1)
        surface = float(np.sum(np.einsum("ij,ij->i", gv, m.face_normals) * m.face_areas))
        assert first_variation_volume(m, g) == pytest.approx(surface, rel=1e-8, abs=1e-12)


def test_volume_variation_centroid_quadrature_converges():
    """One-point centroid quadrature of the same integral converges at second order."""
    rng = np.random.default_rng(4)
    gs = [_smooth_field(rng) for _ in range(5)]
    errs = []
    for level in (2, 3, 4):
        m = shapes.perturbed_sphere(level, 0.05)
        e = 0.0
        for g in gs:
            surface = float(np.sum(np.einsum("ij,ij->i", g(m.face_centroids), m.face_normals)
                                   * m.face_areas))
            e = max(e, abs(first_variation_volume(m, g) - surface))
        errs.append(e)
    assert errs[1] < errs[0] / 3 and errs[2] < errs[1] / 3
