"""Constrained descent of the Helfrich energy at fixed area and enclosed volume.

Each iteration takes a projected (Sobolev-preconditioned) gradient step, then
restores area and volume exactly with the two-parameter flow correction.  A
step is accepted only if the corrected mesh satisfies the Armijo condition.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import splu

from .correction import make_pair, pick_fields, solve_correction
from .curvature import (
    COT_CLAMP,
    compute_curvature,
    cotangent_laplacian,
    face_geometry,
    gauss_bonnet_total,
    helfrich_energy,
    mixed_area_terms,
)
from .errors import (
    DegenerateConstraintsError,
    DegenerateTriangleError,
    HelfrichError,
    LineSearchStalledError,
    NoConvergenceError,
)
from .parallel import pmap
from .mesh import Constraints, TriMesh, area, atomic_write_text, enclosed_volume
from .varifold import area_gradient, volume_gradient

logger = logging.getLogger(__name__)


# -- energy gradient ----------------------------------------------------------


def _helfrich_and_gradient(mesh: TriMesh, h0: float):
    """Lumped Helfrich energy and its exact gradient with respect to the vertices."""
    x = mesh.vertices
    f = mesh.faces
    nv = mesh.n_vertices
    c = mesh.corners
    fg = face_geometry(mesh)
    N = fg.normal2
    s = np.linalg.norm(N, axis=1)
    terms = mixed_area_terms(fg)
    A = np.bincount(f.ravel(), weights=terms.ravel(), minlength=nv)
    L = cotangent_laplacian(mesh, fg)
    Lx = L @ x
    m = np.zeros((nv, 3))
    for k in range(3):
        np.add.at(m, f[:, k], N)
    mn = np.linalg.norm(m, axis=1)
    n = m / mn[:, None]
    y = np.einsum("ij,ij->i", Lx, n)
    H = y / A
    E = float(np.sum((H - h0) ** 2 * A))

    gy = 2 * (H - h0)
    gA = h0**2 - H**2
    gLx = gy[:, None] * n
    gn = gy[:, None] * Lx
    gm = (gn - np.einsum("ij,ij->i", gn, n)[:, None] * n) / mn[:, None]

    gc = np.zeros_like(c)  # per-corner position gradients (F, 3, 3)
    gcot = np.zeros_like(fg.cot)
    gs = np.zeros(len(f))
    # Laplacian term: corner k weights edge (k+1, k+2) by cot_k / 2
    for k in range(3):
        a, b = (k + 1) % 3, (k + 2) % 3
        diff = c[:, a] - c[:, b]
        gdiff = gLx[f[:, a]] - gLx[f[:, b]]
        om = 0.5 * fg.cot[:, k]
        gc[:, a] += om[:, None] * gdiff
        gc[:, b] -= om[:, None] * gdiff
        gcot[:, k] += 0.5 * np.einsum("ij,ij->i", gdiff, diff)
    # vertex normals accumulate the face cross products
    gN = gm[f].sum(axis=1)
    # mixed areas
    gT = gA[f]
    obtuse = (fg.dots < 0).any(axis=1)
    gsq = np.zeros_like(fg.sqlen)
    for k in range(3):
        k1, k2 = (k + 1) % 3, (k + 2) % 3
        g = np.where(obtuse, 0.0, gT[:, k] / 8.0)
        gcot[:, k2] += g * fg.sqlen[:, k2]
        gsq[:, k2] += g * fg.cot[:, k2]
        gcot[:, k1] += g * fg.sqlen[:, k1]
        gsq[:, k1] += g * fg.cot[:, k1]
    coef = np.where(fg.dots < 0, 0.25, 0.125)
    gs += np.where(obtuse, np.sum(gT * coef, axis=1), 0.0)
    # squared edge lengths: sqlen_k = |p_{k+2} - p_{k+1}|^2
    for k in range(3):
        k1, k2 = (k + 1) % 3, (k + 2) % 3
        d = c[:, k2] - c[:, k1]
        gc[:, k2] += 2 * gsq[:, k, None] * d
        gc[:, k1] -= 2 * gsq[:, k, None] * d
    # cotangents: cot_k = dot_k / s (clamped entries are constant)
    gcot = np.where(fg.clamped, 0.0, gcot)
    gdot = gcot / s[:, None]
    gs -= np.sum(gcot * fg.dots, axis=1) / s**2
    for k in range(3):
        k1, k2 = (k + 1) % 3, (k + 2) % 3
        u = c[:, k1] - c[:, k]
        w = c[:, k2] - c[:, k]
        gc[:, k1] += gdot[:, k, None] * w
        gc[:, k2] += gdot[:, k, None] * u
        gc[:, k] -= gdot[:, k, None] * (u + w)
    gN += (gs / s)[:, None] * N
    # N = (p1 - p0) x (p2 - p0)
    e1, e2 = c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]
    g1 = np.cross(e2, gN)
    g2 = np.cross(gN, e1)
    gc[:, 1] += g1
    gc[:, 2] += g2
    gc[:, 0] -= g1 + g2

    grad = np.zeros((nv, 3))
    for k in range(3):
        np.add.at(grad, f[:, k], gc[:, k])
    return E, grad


def energy_gradient(mesh: TriMesh, h0: float = 0.0, mode: str = "analytic") -> np.ndarray:
    """Gradient of :func:`helfrich_energy` with respect to the vertex positions.

    ``mode="analytic"`` differentiates the cotangent / mixed-area
    discretization exactly; ``mode="fd"`` uses central differences with step
    ``1e-6`` times the bounding-box diagonal, parallel over vertices.
    """
    if mode == "analytic":
        return _helfrich_and_gradient(mesh, h0)[1]
    if mode != "fd":
        raise ValueError(f"unknown gradient mode {mode!r}")
    eps = 1e-6 * mesh.bbox_diagonal
    x0 = np.array(mesh.vertices)

    def column(i):
        x = x0.copy()
        out = np.zeros(3)
        for k in range(3):
            x[i, k] = x0[i, k] + eps
            ep = helfrich_energy(TriMesh(x, mesh.faces, validate=False), h0)
            x[i, k] = x0[i, k] - eps
            em = helfrich_energy(TriMesh(x, mesh.faces, validate=False), h0)
            x[i, k] = x0[i, k]
            out[k] = (ep - em) / (2 * eps)
        return out

    return np.array(pmap(column, range(mesh.n_vertices)))


# -- projection ---------------------------------------------------------------


def rigid_normal_speeds(mesh: TriMesh) -> np.ndarray:
    """(V, 6) normal speeds ``<e, n>`` and ``<e x x, n>`` of translations and rotations."""
    n = mesh.vertex_normals
    x = mesh.vertices - mesh.vertices.mean(axis=0)
    cols = [n[:, k] for k in range(3)]
    cols += [np.einsum("ij,ij->i", np.cross(np.eye(3)[k], x), n) for k in range(3)]
    return np.column_stack(cols)


def smooth_basis(mesh: TriMesh, degree: int = 7, exclude_rigid: bool = True,
                 tau: float | None = None):
    """Smooth normal-speed subspace spanned by ambient polynomials.

    The columns are the monomials of total degree ``<= degree`` in the
    normalized vertex coordinates ``(x - centroid) / radius``, orthonormalized
    in the lumped mass inner product.  Because the functions are smooth in
    space rather than on the mesh, mesh-scale oscillations (along which the
    discrete energy is nearly flat) are excluded.  With ``exclude_rigid`` the
    normal speeds of rigid motions are removed as well, since moving a mesh
    rigidly along its vertex normals only redistributes the vertices.

    Returns ``(B, Ginv)``: the (V, k) basis and the inverse of the Sobolev
    metric ``M + tau L M^{-1} L`` in its coordinates.
    """
    Mv = compute_curvature(mesh).vertex_area
    x = mesh.vertices - mesh.vertices.mean(axis=0)
    x = x / np.sqrt(np.mean(np.sum(x * x, axis=1)))
    cols = [np.prod(x ** np.array(e), axis=1)
            for d in range(degree + 1)
            for e in _exponents(d)]
    Phi = np.column_stack(cols)
    w = np.sqrt(Mv)[:, None]
    if exclude_rigid:
        R = rigid_normal_speeds(mesh)
        qr, _ = np.linalg.qr(w * R)
        Phi = Phi - (qr @ (qr.T @ (w * Phi))) / w
    u, sv, _ = np.linalg.svd(w * Phi, full_matrices=False)
    keep = sv > 1e-8 * sv.max()
    B = u[:, keep] / w
    L = cotangent_laplacian(mesh)
    tau = area(mesh) / (4 * math.pi) if tau is None else tau
    LB = L @ B
    G = B.T @ (Mv[:, None] * B) + tau * LB.T @ (LB / Mv[:, None])
    return B, np.linalg.inv(G)


def _exponents(d: int):
    return [(i, j, d - i - j) for i in range(d, -1, -1) for j in range(d - i, -1, -1)]


def sobolev_metric(mesh: TriMesh, tau: float | None = None):
    """Factorized ``G = M + tau L M^{-1} L`` (lumped mass ``M``, cotangent ``L``).

    ``tau`` defaults to ``area / (4 pi)``, a squared length scale of the mesh.
    Returns a callable applying ``G^{-1}`` to (V,) or (V, 3) arrays.
    """
    Mv = compute_curvature(mesh).vertex_area
    L = cotangent_laplacian(mesh)
    tau = area(mesh) / (4 * math.pi) if tau is None else tau
    G = (diags(Mv) + tau * (L @ diags(1.0 / Mv) @ L)).tocsc()
    lu = splu(G)
    return lambda v: lu.solve(np.asarray(v, dtype=float))


def _project(grad, gA, gV, P, singular: str = "raise"):
    d0, dA, dV = P(grad), P(gA), P(gV)
    gram = np.array([[np.sum(gA * dA), np.sum(gA * dV)],
                     [np.sum(gV * dA), np.sum(gV * dV)]])
    rhs = np.array([np.sum(gA * d0), np.sum(gV * d0)])
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e14:
        if singular == "raise":
            raise DegenerateConstraintsError("constraint gradients are linearly dependent")
        a, b = np.linalg.lstsq(gram, rhs, rcond=1e-12)[0]
    else:
        a, b = np.linalg.solve(gram, rhs)
    return d0 - a * dA - b * dV, (float(a), float(b)), dA, dV


def project_gradient(mesh: TriMesh, grad, metric=None):
    """Remove the area and volume directions from ``grad``.

    Returns ``(direction, (a, b))`` where ``direction = P(grad - a dA - b dV)``
    for the inverse metric ``P`` (identity when ``metric`` is None), and
    ``(a, b)`` make the first variations of area and volume along
    ``direction`` vanish.

    Raises
    ------
    DegenerateConstraintsError
        if the Gram matrix of the constraint gradients is singular.
    """
    P = (lambda v: v) if metric is None else metric
    d, coef, _, _ = _project(np.asarray(grad, dtype=float), area_gradient(mesh),
                             volume_gradient(mesh), P)
    return d, coef


# -- Euler-Lagrange residual --------------------------------------------------


def _el_terms(mesh: TriMesh, h0: float):
    c = compute_curvature(mesh)
    H, K, A = c.mean_curvature, c.gauss_curvature, c.vertex_area
    lap_H = -(cotangent_laplacian(mesh) @ H) / A
    base = 2 * lap_H + 4 * H * (0.25 * H**2 - K) - 2 * h0 * K - h0**2 * H
    return base, H, A


def fit_multipliers(mesh: TriMesh, h0: float = 0.0):
    """Area-weighted least-squares ``(lambda_A, lambda_V)`` for the EL residual.

    Minimizes ``sum_i A_i (base_i - lambda_A H_i + lambda_V)^2`` (minimum-norm
    solution when the two columns are dependent, as on a round sphere).
    """
    base, H, A = _el_terms(mesh, h0)
    w = np.sqrt(A)
    M = np.column_stack([H, -np.ones_like(H)]) * w[:, None]
    lam = np.linalg.lstsq(M, base * w, rcond=None)[0]
    return float(lam[0]), float(lam[1])


def el_residual(mesh: TriMesh, h0: float = 0.0, multipliers=None) -> float:
    """Area-normalized L2 norm of the discrete Euler-Lagrange residual.

    ``R = 2 Lap H + 4 H (H^2/4 - K) - 2 h0 K - h0^2 H - lambda_A H + lambda_V``
    with the cotangent Laplace-Beltrami operator; the multipliers are fitted
    by :func:`fit_multipliers` when not given.
    """
    if multipliers is None:
        multipliers = fit_multipliers(mesh, h0)
    la, lv = multipliers
    base, H, A = _el_terms(mesh, h0)
    R = base - la * H + lv
    return float(np.sqrt(np.sum(R**2 * A) / np.sum(A)))


# -- descent ------------------------------------------------------------------


LOG_COLUMNS = ["step", "energy", "area", "vol", "grad_norm", "el_residual", "s", "t", "accepted"]


@dataclass
class OptimizerState:
    mesh: TriMesh
    constraints: Constraints
    step: float = 0.0
    energy_history: list = field(default_factory=list)
    multipliers: tuple = (0.0, 0.0)
    projection_coefficients: tuple = (0.0, 0.0)
    basis: tuple | None = field(default=None, repr=False)
    stationary: bool = False
    converged: bool = False
    stop_reason: str = ""
    n_accepted: int = 0
    meshes: list = field(default_factory=list, repr=False)
    log: list = field(default_factory=list, repr=False)

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for row in self.log:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:8]] + [int(row[8])])
        return buf.getvalue()

    def save_log(self, path) -> None:
        atomic_write_text(path, self.log_csv())

    def summary(self) -> dict:
        return {
            "final_energy": self.energy_history[-1] if self.energy_history else None,
            "initial_energy": self.energy_history[0] if self.energy_history else None,
            "accepted_steps": self.n_accepted,
            "stationary": self.stationary,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "area": area(self.mesh),
            "vol": enclosed_volume(self.mesh),
            "lambda_A": self.multipliers[0],
            "lambda_V": self.multipliers[1],
        }

    def summary_json(self, extra: dict | None = None) -> str:
        d = self.summary()
        if extra:
            d.update(extra)
        return json.dumps(d, sort_keys=True, indent=2) + "\n"


def _objective(mesh: TriMesh, h0: float, kappa: float) -> float:
    W = helfrich_energy(mesh, h0)
    if kappa:
        W += kappa * gauss_bonnet_total(mesh)
    return W


def _constraints_ok(mesh: TriMesh, tg: Constraints, tol: float) -> bool:
    return (abs(area(mesh) - tg.area0) <= tol * tg.area0
            and abs(enclosed_volume(mesh) - tg.vol0) <= tol * abs(tg.vol0))


def _restore(mesh: TriMesh, dirs, tg: Constraints, tol: float, max_iter: int = 10) -> TriMesh:
    """Newton on ``x + a u + b v`` (``u, v`` = ``dirs``) towards the constraint targets.

    Stops at ``tol`` relative residual or after ``max_iter`` steps; the
    result is not guaranteed to be feasible (the flow correction follows).
    """
    goal = np.array([tg.area0, tg.vol0])
    scale = np.array([tg.area0, abs(tg.vol0)])
    u, v = dirs
    for _ in range(max_iter):
        r = goal - np.array([area(mesh), enclosed_volume(mesh)])
        if np.all(np.abs(r) <= tol * scale):
            break
        gA, gV = area_gradient(mesh), volume_gradient(mesh)
        J = np.array([[np.sum(gA * u), np.sum(gA * v)], [np.sum(gV * u), np.sum(gV * v)]])
        a, b = np.linalg.solve(J, r)
        mesh = mesh.moved(mesh.vertices + a * u + b * v)
    return mesh


def _smooth_directions(mesh: TriMesh, basis, n):
    """Constraint-restoring directions ``P dA`` and ``P dV`` in the smooth subspace."""
    B, Ginv = basis
    a = B.T @ np.einsum("ij,ij->i", area_gradient(mesh), n)
    v = B.T @ np.einsum("ij,ij->i", volume_gradient(mesh), n)
    return (B @ (Ginv @ a))[:, None] * n, (B @ (Ginv @ v))[:, None] * n


def restore_constraints(mesh: TriMesh, constraints: Constraints, degree: int = 4,
                        directions=None, tol: float = 1e-12, max_iter: int = 50) -> TriMesh:
    """Move ``mesh`` onto the constraint set with a smooth normal displacement.

    Newton's method on the two minimal-norm (Sobolev metric) smooth normal
    speeds that change area and volume, recomputed every iteration.

    Raises
    ------
    NoConvergenceError
        if the relative residual is still above ``tol`` after ``max_iter`` steps.
    """
    basis = smooth_basis(mesh, degree)
    tg = constraints
    for _ in range(max_iter):
        if _constraints_ok(mesh, tg, tol):
            return mesh
        n = mesh.vertex_normals if directions is None else directions
        mesh = _restore(mesh, _smooth_directions(mesh, basis, n), tg, tol, max_iter=1)
    if _constraints_ok(mesh, tg, tol):
        return mesh
    raise NoConvergenceError("smooth constraint restoration did not converge")


def _direction(mesh: TriMesh, g, state: OptimizerState, degree, normal_only, directions, tau):
    """Projected descent direction and the two constraint-restoring directions.

    At constraint-critical meshes (round spheres) the two constraint
    gradients are parallel; the projection then removes their common span.
    """
    gA, gV = area_gradient(mesh), volume_gradient(mesh)
    if degree is None and not normal_only:
        d, coef, rA, rV = _project(g, gA, gV, sobolev_metric(mesh, tau), "pinv")
        return d, coef, (rA, rV)
    n = mesh.vertex_normals if directions is None else directions
    proj = [np.einsum("ij,ij->i", v, n) for v in (g, gA, gV)]
    if degree is None:
        phi, coef, rA, rV = _project(*proj, sobolev_metric(mesh, tau), "pinv")
    else:
        if state.basis is None or state.basis[0].shape[0] != mesh.n_vertices:
            state.basis = smooth_basis(mesh, degree, tau=tau)
        B, Ginv = state.basis
        c, coef, cA, cV = _project(*(B.T @ v for v in proj), lambda v: Ginv @ v, "pinv")
        phi, rA, rV = B @ c, B @ cA, B @ cV
    return phi[:, None] * n, coef, (rA[:, None] * n, rV[:, None] * n)


def descend(state: OptimizerState, max_steps: int = 200, step_tol: float = 1e-7,
            energy_tol: float = 1e-9, grad_tol: float = 1e-6, armijo: float = 1e-4,
            max_step_frac: float = 0.01, kappa: float = 0.0, tau: float | None = None,
            degree: int | None = 4, normal_only: bool = True, directions=None,
            restore_tol: float = 1e-12, correction_tol: float = 1e-10,
            guarantee: bool = True, gradient_mode: str = "analytic",
            keep_meshes: bool = False) -> OptimizerState:
    """Projected, preconditioned gradient descent with exact constraint restoration.

    Each trial step ``x - alpha d`` (``d`` the projected gradient in the
    Sobolev metric ``M + tau L M^{-1} L``, its largest vertex displacement
    capped at ``max_step_frac`` times the bounding-box diagonal) is brought
    back to the constraint set in two stages: Newton's method along the two
    smooth constraint directions down to ``restore_tol``, then
    :func:`solve_correction` with the compactly supported flow fields down to
    ``correction_tol``.  Correction failures and Armijo violations halve
    ``alpha``.  The first stage keeps the flow correction tiny, so the large
    higher derivatives of the bump fields do not imprint on the curvature.

    Search space: with ``normal_only`` the displacement is ``phi_i n_i`` along
    the vertex normals (or the fixed unit ``directions``); with ``degree`` the
    normal speed ``phi`` is restricted to :func:`smooth_basis` of that
    polynomial degree, built on the first mesh of the run.  ``degree=None``
    and ``normal_only=False`` give the plain vertex-space gradient.

    The objective is ``W_h0 + kappa * (total angle defect)``; the second term
    is constant on closed meshes and its gradient vanishes identically.
    ``gradient_mode`` is passed to :func:`energy_gradient`.

    Stopping (recorded in ``state.stop_reason``): ``"gradient"`` when the
    first-order decrease over a full step is below ``grad_tol`` times the
    energy; ``"energy"`` when an accepted step lowers the energy by less than
    ``energy_tol`` relative; ``"stalled"`` when no step above ``step_tol``
    times the diagonal passes; ``"max_steps"``.  The first three set
    ``converged``; ``"gradient"`` and ``"stalled"`` also set ``stationary``.
    """
    tg = state.constraints
    h0 = tg.h0
    mesh = state.mesh
    diag = mesh.bbox_diagonal
    W = _objective(mesh, h0, kappa)
    if not state.energy_history:
        state.energy_history.append(W)
        state.log.append([0, W, area(mesh), enclosed_volume(mesh), float("nan"),
                          el_residual(mesh, h0), 0.0, 0.0, 1])
    if keep_meshes and not state.meshes:
        state.meshes.append(mesh)
    state.stop_reason = "max_steps"
    pair = None
    trust = None
    alpha = state.step if state.step > 0 else None
    trial_no = 0
    while state.n_accepted < max_steps:
        g = energy_gradient(mesh, h0, gradient_mode)
        d, coef, dirs = _direction(mesh, g, state, degree, normal_only, directions, tau)
        state.projection_coefficients = coef
        slope = float(np.sum(g * d))
        dmax = float(np.abs(d).max())
        full = max_step_frac * diag / max(dmax, 1e-300)
        if slope <= 0 or slope * full < grad_tol * max(abs(W), 1e-300):
            state.stop_reason = "gradient"
            break
        alpha = full if alpha is None else min(full, 2 * alpha)
        new = None
        while alpha * dmax >= step_tol * diag:
            trial_no += 1
            try:
                trial = _restore(mesh.moved(mesh.vertices - alpha * d), dirs, tg, restore_tol)
                if pair is None:
                    pair = pick_fields(trial)
                else:
                    pair = make_pair(trial, pair.field_x.center, pair.field_y.center,
                                     pair.field_x.radius)
                res = solve_correction(trial, pair, tg, tol=correction_tol,
                                       guarantee=guarantee, trust_hint=trust)
                trust = res.report.trust_radius or trust
                cand = res[2]
                if not _constraints_ok(cand, tg, 1e-8):
                    raise DegenerateConstraintsError("constraint residual above 1e-8")
                W_new = _objective(cand, h0, kappa)
            except (DegenerateTriangleError, DegenerateConstraintsError) as exc:
                logger.debug("trial %d rejected: %s", trial_no, exc)
                pair = None
                alpha *= 0.5
                continue
            except HelfrichError as exc:
                logger.debug("trial %d rejected: %s", trial_no, exc)
                alpha *= 0.5
                continue
            if W_new <= W - armijo * alpha * slope and W_new < W:
                new = cand
                break
            state.log.append([state.n_accepted + 1, W_new, area(cand), enclosed_volume(cand),
                              math.sqrt(slope), float("nan"), res[0], res[1], 0])
            alpha *= 0.5
        if new is None:
            state.stop_reason = "stalled"
            state.step = alpha
            logger.info("line search stalled after %d accepted steps", state.n_accepted)
            break
        decrease = (W - W_new) / max(abs(W), 1e-300)
        mesh, W = new, W_new
        state.n_accepted += 1
        state.mesh = mesh
        state.step = alpha
        state.energy_history.append(W)
        if keep_meshes:
            state.meshes.append(mesh)
        state.log.append([state.n_accepted, W, area(mesh), enclosed_volume(mesh),
                          math.sqrt(slope), el_residual(mesh, h0), res[0], res[1], 1])
        if decrease < energy_tol:
            state.stop_reason = "energy"
            break
    state.converged = state.stop_reason != "max_steps"
    state.stationary = state.stop_reason in ("gradient", "stalled")
    state.mesh = mesh
    state.multipliers = fit_multipliers(mesh, h0)
    return state


def minimize(mesh: TriMesh, constraints: Constraints, raise_on_stall: bool = False,
             **kwargs) -> OptimizerState:
    """Build a state and run :func:`descend`.

    With ``raise_on_stall`` a stalled line search raises
    :class:`LineSearchStalledError` (carrying the state as ``.state``) instead
    of returning the state flagged stationary.
    """
    st = descend(OptimizerState(mesh, constraints), **kwargs)
    if raise_on_stall and st.stop_reason == "stalled":
        err = LineSearchStalledError(
            f"line search stalled after {st.n_accepted} accepted steps")
        err.state = st
        raise err
    return st
