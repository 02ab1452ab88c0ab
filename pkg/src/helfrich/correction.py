"""Two-parameter flow correction of area and enclosed volume.

Two compactly supported bump fields ``X`` and ``Y`` define the deformation
``Phi(s, t, x) = Phi_X(s, Phi_Y(t, x))``.  The constraint map
``F(s, t) = (area, volume)`` of the deformed mesh is inverted by Newton's
method on a trust ball whose radius is chosen so that the normalized Jacobian
``DF(0,0)^{-1} DF`` varies by less than ``delta0`` on it.  By the quantitative
inverse function theorem every target in the ball of radius ``(1 - delta0) T``
(normalized coordinates) is then attained.

The flows are integrated with a fixed number of RK4 steps over unit time of the
scaled field ``s X``.  Derivatives with respect to ``s`` and ``t`` are obtained
by integrating the variational equations with the same scheme, so ``DF`` is the
exact Jacobian of the discrete map.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .curvature import compute_curvature, helfrich_energy
from .errors import DegenerateConstraintsError, NoConvergenceError, OutOfRadiusError
from .mesh import Constraints, TriMesh, area, atomic_write_text, enclosed_volume
from .varifold import area_gradient, volume_gradient


def _profile_slope_bound() -> float:
    """``max_r |b'(r)|`` for the unit-radius bump ``b(r) = exp(1 - 1/(1 - r^2))``."""

    def neg_slope(r):
        q = r * r
        return -2 * r * math.exp(1 - 1 / (1 - q)) / (1 - q) ** 2

    res = minimize_scalar(neg_slope, bounds=(0.0, 0.999), method="bounded",
                          options={"xatol": 1e-12})
    return -float(res.fun)


PROFILE_SLOPE = _profile_slope_bound()  # about 2.1704


@dataclass(frozen=True)
class BumpField:
    """``X(x) = amplitude * b(|x - center|) * direction`` with support ``B_radius(center)``."""

    center: np.ndarray
    radius: float
    direction: np.ndarray
    amplitude: float = 1.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "direction", d / np.linalg.norm(d))
        if not self.radius > 0:
            raise ValueError("bump radius must be positive")

    @property
    def max_derivative(self) -> float:
        """Sup norm of ``DX`` (the profile slope bound over the radius)."""
        return abs(self.amplitude) * PROFILE_SLOPE / self.radius

    def profile(self, x):
        """Return ``b`` and ``grad b`` at the points ``x`` (N, 3)."""
        d = np.asarray(x, dtype=float) - self.center
        q = np.einsum("ij,ij->i", d, d) / self.radius**2
        inside = q < 1.0
        b = np.zeros(len(d))
        g = np.zeros_like(d)
        qi = q[inside]
        bi = np.exp(1.0 - 1.0 / (1.0 - qi))
        b[inside] = bi
        g[inside] = (bi * (-2.0 / self.radius**2) / (1.0 - qi) ** 2)[:, None] * d[inside]
        return b, g

    def __call__(self, x):
        b, _ = self.profile(np.atleast_2d(x))
        return self.amplitude * b[:, None] * self.direction

    def in_support(self, x) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.center
        return np.einsum("ij,ij->i", d, d) < self.radius**2


def _rk4(field: BumpField, x, s: float, steps: int, w=None, vs=()):
    """Integrate ``x' = s X(x)`` over unit time.

    Optionally carries ``w' = X(x) + s DX(x) w`` (derivative with respect to
    ``s``) and tangents ``v' = s DX(x) v``; the result is the exact linearization
    of the discrete RK4 map.
    """
    dt = 1.0 / steps
    amp, e = field.amplitude, field.direction
    track_w = w is not None
    vs = list(vs)

    def rhs(x, w, vs):
        b, g = field.profile(x)
        X = amp * b[:, None] * e
        kx = s * X
        kw = X + s * amp * np.einsum("ij,ij->i", g, w)[:, None] * e if track_w else None
        kv = [s * amp * np.einsum("ij,ij->i", g, v)[:, None] * e for v in vs]
        return kx, kw, kv

    for _ in range(steps):
        k1 = rhs(x, w, vs)
        k2 = rhs(x + 0.5 * dt * k1[0],
                 w + 0.5 * dt * k1[1] if track_w else None,
                 [v + 0.5 * dt * kv for v, kv in zip(vs, k1[2])])
        k3 = rhs(x + 0.5 * dt * k2[0],
                 w + 0.5 * dt * k2[1] if track_w else None,
                 [v + 0.5 * dt * kv for v, kv in zip(vs, k2[2])])
        k4 = rhs(x + dt * k3[0],
                 w + dt * k3[1] if track_w else None,
                 [v + dt * kv for v, kv in zip(vs, k3[2])])
        x = x + (dt / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        if track_w:
            w = w + (dt / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        vs = [v + (dt / 6.0) * (a + 2 * b + 2 * c + d)
              for v, a, b, c, d in zip(vs, k1[2], k2[2], k3[2], k4[2])]
    return x, w, vs


@dataclass(frozen=True)
class CorrectionPair:
    """Bump fields ``X`` (parameter ``s``) and ``Y`` (parameter ``t``)."""

    field_x: BumpField
    field_y: BumpField
    ode_steps: int
    jacobian0: np.ndarray
    max_trust: float

    @property
    def det0(self) -> float:
        return float(np.linalg.det(self.jacobian0))

    def for_trust(self, T: float) -> "CorrectionPair":
        """Same fields with the RK4 step count sized for ``|s|, |t| <= T``."""
        radius = min(self.field_x.radius, self.field_y.radius)
        return replace(self, ode_steps=_ode_steps(radius, T))


def _flow_points(x, pair: CorrectionPair, s: float, t: float, with_jacobian: bool = False):
    """Transport points; returns new positions and, optionally, ``d/ds`` and ``d/dt``."""
    x = np.array(x, dtype=float)
    ds = np.zeros_like(x)
    dt_ = np.zeros_like(x)
    fy, fx = pair.field_y, pair.field_x
    iy = np.flatnonzero(fy.in_support(x))
    if len(iy) and (t != 0.0 or with_jacobian):
        if with_jacobian:
            y, u, _ = _rk4(fy, x[iy], t, pair.ode_steps, w=np.zeros((len(iy), 3)))
            dt_[iy] = u
        else:
            y, _, _ = _rk4(fy, x[iy], t, pair.ode_steps)
        x[iy] = y
    ix = np.flatnonzero(fx.in_support(x))
    if len(ix) and (s != 0.0 or with_jacobian):
        if with_jacobian:
            z, w, (v,) = _rk4(fx, x[ix], s, pair.ode_steps, w=np.zeros((len(ix), 3)),
                              vs=[dt_[ix]])
            ds[ix] = w
            dt_[ix] = v
        else:
            z, _, _ = _rk4(fx, x[ix], s, pair.ode_steps)
        x[ix] = z
    if with_jacobian:
        return x, ds, dt_
    return x


def flow(mesh: TriMesh, pair: CorrectionPair, s: float, t: float) -> TriMesh:
    """Apply ``Phi(s, t, .)`` to the vertices; connectivity is unchanged.

    Vertices outside both supports are not touched, so they are bit-identical.
    """
    if s == 0.0 and t == 0.0:
        return mesh
    return mesh.moved(_flow_points(mesh.vertices, pair, s, t))


def _area_vol(vertices, faces):
    c = vertices[faces]
    n2 = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    a = 0.5 * np.linalg.norm(n2, axis=1).sum()
    v = np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0
    return float(a), float(v)


def constraint_map(mesh: TriMesh, pair: CorrectionPair, s: float, t: float):
    """``(area, enclosed volume)`` of the flowed mesh."""
    x = _flow_points(mesh.vertices, pair, s, t)
    return _area_vol(x, mesh.faces)


def constraint_jacobian(mesh: TriMesh, pair: CorrectionPair, s: float, t: float):
    """Return ``F(s, t)`` and its exact 2x2 Jacobian ``[[dA/ds, dA/dt], [dV/ds, dV/dt]]``."""
    x, ds, dt_ = _flow_points(mesh.vertices, pair, s, t, with_jacobian=True)
    moved = TriMesh(x, mesh.faces, validate=False)
    ga, gv = area_gradient(moved), volume_gradient(moved)
    J = np.array([[np.sum(ga * ds), np.sum(ga * dt_)],
                  [np.sum(gv * ds), np.sum(gv * dt_)]])
    return np.array(_area_vol(x, mesh.faces)), J


def _fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = math.pi * (3 - math.sqrt(5)) * k
    r = np.sqrt(1 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def default_bump_radius(mesh: TriMesh) -> float:
    return 0.6 * math.sqrt(area(mesh) / (4 * math.pi))


def _ode_steps(radius: float, trust: float) -> int:
    return max(16, math.ceil(20 * trust * PROFILE_SLOPE / radius))


def make_pair(mesh: TriMesh, center_x, center_y, radius: float,
              direction_x=None, direction_y=None, max_trust: float | None = None) -> CorrectionPair:
    """Build a pair from two vertex positions, using vertex normals by default."""
    def nearest_normal(c):
        i = int(np.argmin(np.linalg.norm(mesh.vertices - c, axis=1)))
        return mesh.vertex_normals[i]

    cx, cy = np.asarray(center_x, dtype=float), np.asarray(center_y, dtype=float)
    fx = BumpField(cx, radius, nearest_normal(cx) if direction_x is None else direction_x)
    fy = BumpField(cy, radius, nearest_normal(cy) if direction_y is None else direction_y)
    trust = radius if max_trust is None else max_trust
    ga, gv = area_gradient(mesh), volume_gradient(mesh)
    X, Y = fx(mesh.vertices), fy(mesh.vertices)
    J = np.array([[np.sum(ga * X), np.sum(ga * Y)], [np.sum(gv * X), np.sum(gv * Y)]])
    return CorrectionPair(fx, fy, _ode_steps(radius, trust), J, trust)


def _protected(protected_region):
    if protected_region is None:
        return None, 0.0
    c, r = protected_region
    return np.asarray(c, dtype=float), float(r)


def pick_fields(mesh: TriMesh, protected_region=None, candidates: int = 64,
                radius: float | None = None) -> CorrectionPair:
    """Choose two normal bump fields maximizing ``|det DF(0,0)|``.

    Candidate centres are the extreme mesh vertices in ``candidates``
    Fibonacci-sphere directions, restricted to vertices whose bump support
    misses ``protected_region`` (a ``(center, radius)`` ball or None).  Pairs
    must have disjoint supports.

    Raises
    ------
    DegenerateConstraintsError
        if every admissible pair has ``|det| < 1e-10 * area * |vol|^(1/3)``.
    """
    eps = default_bump_radius(mesh) if radius is None else float(radius)
    pc, pr = _protected(protected_region)
    x = mesh.vertices
    allowed = np.ones(mesh.n_vertices, dtype=bool)
    if pc is not None:
        allowed = np.linalg.norm(x - pc, axis=1) >= pr + eps
    if not allowed.any():
        raise DegenerateConstraintsError("protected region leaves no room for bump fields")
    centroid = x.mean(axis=0)
    idx = np.flatnonzero(allowed)
    centers = []
    for d in _fibonacci_sphere(candidates):
        i = int(idx[np.argmax((x[idx] - centroid) @ d)])
        if i not in centers:
            centers.append(i)
    centers = np.array(centers)
    ga, gv = area_gradient(mesh), volume_gradient(mesh)
    cols = np.empty((len(centers), 2))
    for k, i in enumerate(centers):
        X = BumpField(x[i], eps, mesh.vertex_normals[i])(x)
        cols[k] = np.sum(ga * X), np.sum(gv * X)
    det = cols[:, None, 0] * cols[None, :, 1] - cols[:, None, 1] * cols[None, :, 0]
    dist = np.linalg.norm(x[centers][:, None] - x[centers][None, :], axis=2)
    ok = np.triu(dist >= 2 * eps, k=1)
    A, V = area(mesh), enclosed_volume(mesh)
    thresh = 1e-10 * A * abs(V) ** (1.0 / 3.0)
    score = np.where(ok, np.abs(det), -1.0)
    a, b = np.unravel_index(int(np.argmax(score)), score.shape)
    if score[a, b] < thresh:
        raise DegenerateConstraintsError(
            f"max |det DF(0,0)| = {max(score.max(), 0.0):.3e} below threshold {thresh:.3e}"
        )
    i, j = centers[a], centers[b]
    # orient so that det > 0 is not required; keep the X field first
    return make_pair(mesh, x[i], x[j], eps)


# -- Newton solve -------------------------------------------------------------


@dataclass
class CorrectionReport:
    s: float
    t: float
    iterations: int
    residual_area: float
    residual_vol: float
    det_DF0: float
    delta0: float
    trust_radius: float
    residual_history: list

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("residual_history")
        return json.dumps(d, sort_keys=True, indent=2) + "\n"

    def save(self, path) -> None:
        atomic_write_text(path, self.to_json())


class CorrectionResult(tuple):
    """``(s, t, corrected_mesh)`` with the run report in ``.report``."""

    report: CorrectionReport

    def __new__(cls, s, t, mesh, report):
        obj = super().__new__(cls, (s, t, mesh))
        obj.report = report
        return obj


def _circle_samples(T: float, n: int = 8) -> np.ndarray:
    a = 2 * np.pi * np.arange(n) / n
    return np.vstack([[0.0, 0.0], T * np.stack([np.cos(a), np.sin(a)], 1)])


def jacobian_oscillation(mesh: TriMesh, pair: CorrectionPair, T: float,
                         inv0: np.ndarray | None = None) -> float:
    """Sampled ``max ||DF~(z) - DF~(z')||`` over the centre and 8 points of radius T."""
    inv0 = np.linalg.inv(pair.jacobian0) if inv0 is None else inv0
    mats = []
    for s, t in _circle_samples(T):
        try:
            _, J = constraint_jacobian(mesh, pair, s, t)
        except FloatingPointError:
            return math.inf
        mats.append(inv0 @ J)
    osc = 0.0
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            osc = max(osc, float(np.linalg.norm(mats[i] - mats[j], 2)))
    return osc


def trust_radius(mesh: TriMesh, pair: CorrectionPair, delta_target: float = 0.5,
                 max_halvings: int = 60, hint: float | None = None):
    """Trust radius on the ladder ``T = max_trust / 2^k``.

    Returns ``(T, delta, pair_T)`` where ``delta <= delta_target`` is the sampled
    Jacobian oscillation on ``B_T`` and ``pair_T`` carries the RK4 step count
    used for it.  Since the oscillation grows about linearly in ``T``, rungs
    that cannot pass are skipped.  A previous trust radius ``hint`` starts the
    ladder one rung above it.
    """
    if pair.det0 == 0.0:
        raise DegenerateConstraintsError("DF(0,0) is singular")
    inv0 = np.linalg.inv(pair.jacobian0)
    k = 0
    if hint is not None and 0 < hint < pair.max_trust:
        k = max(0, round(math.log2(pair.max_trust / hint)) - 1)
    while k <= max_halvings:
        T = pair.max_trust * 0.5**k
        p = pair.for_trust(T)
        d = jacobian_oscillation(mesh, p, T, inv0)
        if d <= delta_target:
            return T, d, p
        k += 1 if not math.isfinite(d) else max(1, math.ceil(math.log2(d / delta_target)))
    raise DegenerateConstraintsError("no trust radius with small Jacobian oscillation")


def solve_correction(mesh: TriMesh, pair: CorrectionPair, targets: Constraints,
                     tol: float = 1e-10, max_iter: int = 20,
                     delta_target: float = 0.5, guarantee: bool = True,
                     trust_hint: float | None = None) -> CorrectionResult:
    """Find ``(s, t)`` with ``F(s, t) = (area0, vol0)`` by Newton's method.

    Converged means ``|F - target| <= tol * (area0, |vol0|)`` componentwise.
    With ``guarantee=False`` the radius precondition is skipped and Newton is
    simply run from ``(0, 0)`` (the report then has ``trust_radius = 0``).
    ``trust_hint`` is forwarded to :func:`trust_radius`.

    Raises
    ------
    OutOfRadiusError
        if ``|DF(0,0)^{-1} (target - F(0,0))| > (1 - delta0) T``.
    NoConvergenceError
        if ``max_iter`` Newton steps do not reach the tolerance.
    """
    goal = np.array([targets.area0, targets.vol0], dtype=float)
    scale = np.array([targets.area0, abs(targets.vol0)])
    F0 = np.array(_area_vol(mesh.vertices, mesh.faces))
    det0 = pair.det0
    if np.all(np.abs(F0 - goal) <= tol * scale):
        rep = CorrectionReport(0.0, 0.0, 0, *(F0 - goal), det0, 0.0, 0.0, [])
        return CorrectionResult(0.0, 0.0, mesh, rep)
    if det0 == 0.0:
        raise DegenerateConstraintsError("DF(0,0) is singular")
    inv0 = np.linalg.inv(pair.jacobian0)
    if guarantee:
        T, delta, pair = trust_radius(mesh, pair, delta_target, hint=trust_hint)
        need = float(np.linalg.norm(inv0 @ (goal - F0)))
        if need > (1 - delta) * T:
            raise OutOfRadiusError(
                f"normalized target distance {need:.4g} exceeds guaranteed radius "
                f"{(1 - delta) * T:.4g} (T={T:.4g}, delta0={delta:.3f})"
            )
    else:
        T, delta = 0.0, float("nan")
    z = np.zeros(2)
    history = []
    F, J = F0, pair.jacobian0
    for it in range(1, max_iter + 1):
        z = z - np.linalg.solve(J, F - goal)
        F, J = constraint_jacobian(mesh, pair, z[0], z[1])
        r = F - goal
        history.append(float(np.max(np.abs(r) / scale)))
        if np.all(np.abs(r) <= tol * scale):
            out = flow(mesh, pair, z[0], z[1])
            rep = CorrectionReport(float(z[0]), float(z[1]), it, float(r[0]), float(r[1]),
                                   det0, delta, T, history)
            return CorrectionResult(float(z[0]), float(z[1]), out, rep)
    raise NoConvergenceError(f"Newton did not converge in {max_iter} iterations "
                             f"(last relative residual {history[-1]:.3e})")


def guaranteed_radius(mesh: TriMesh, pair: CorrectionPair, delta_target: float = 0.5) -> float:
    """Radius (in constraint space) of a ball of targets certainly reachable.

    The normalized ball ``(1 - delta) T`` is mapped back through ``DF(0,0)``;
    the returned value is its smallest semi-axis.
    """
    T, delta, _ = trust_radius(mesh, pair, delta_target)
    sv = np.linalg.svd(pair.jacobian0, compute_uv=False)
    return float((1 - delta) * T * sv.min())


def curvature_drift_bound(mesh: TriMesh, pair: CorrectionPair, T: float, samples: int = 25,
                          quantity: str = "sec_fund", h0: float = 0.0, seed: int = 0) -> float:
    """Empirical Lipschitz constant of a curvature integral along the flow.

    Samples ``samples`` points of the disc ``|(s, t)| <= T`` and returns
    ``max |Q(s, t) - Q(0, 0)| / |(s, t)|`` with ``Q`` the total ``|A|^2`` mass
    (``quantity="sec_fund"``) or the Helfrich energy (``quantity="helfrich"``).
    """

    def Q(m):
        if quantity == "helfrich":
            return helfrich_energy(m, h0)
        c = compute_curvature(m)
        return float(np.sum(c.sec_fund_sq * c.vertex_area))

    rng = np.random.default_rng(seed)
    r = T * np.sqrt(rng.uniform(0.05, 1.0, samples))
    a = rng.uniform(0, 2 * np.pi, samples)
    q0 = Q(mesh)
    best = 0.0
    for rr, aa in zip(r, a):
        s, t = rr * np.cos(aa), rr * np.sin(aa)
        best = max(best, abs(Q(flow(mesh, pair, s, t)) - q0) / rr)
    return best
