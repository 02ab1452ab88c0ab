"""Clamped biharmonic discs and graphical patch replacement.

A single-sheet region of a mesh over a disc is written as a height function
``u`` over a best-fit plane.  Its traces ``(u, du/dnu)`` on a circle of radius
``sigma`` define a clamped plate problem ``Delta^2 w = 0``, ``w = u``,
``dw/dnu = du/dnu`` that is solved by finite differences on a square grid
masked to the disc.  ``replace_patch`` cuts the region out of the mesh and
stitches in a triangulation of the graph of ``w``.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.interpolate import RectBivariateSpline
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree

from .curvature import compute_curvature, helfrich_energy
from .errors import MultiSheetError, NotAGraphError, SolverFailureError, StitchFailureError
from .mesh import TriMesh, area, atomic_write_text, enclosed_volume
from .varifold import point_triangle_distance

logger = logging.getLogger(__name__)

# -- graph patches ------------------------------------------------------------


@dataclass(frozen=True)
class GraphPatch:
    """A mesh region written as a graph over a plane.

    ``origin`` is the disc centre ``x0`` on the plane, ``(e1, e2, normal)`` a
    right-handed orthonormal frame.  ``height`` holds ``u`` on the square grid
    ``grid x grid`` (NaN where the disc is not covered).
    """

    mesh: TriMesh
    origin: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    normal: np.ndarray
    disc_radius: float
    faces: np.ndarray  # indices of the region faces
    grid: np.ndarray
    height: np.ndarray
    lipschitz: float
    sup_height: float

    def to_plane(self, x):
        d = np.atleast_2d(x) - self.origin
        return np.stack([d @ self.e1, d @ self.e2], axis=1), d @ self.normal

    def to_space(self, p, h):
        p = np.atleast_2d(p)
        return (self.origin + p[:, :1] * self.e1 + p[:, 1:2] * self.e2
                + np.asarray(h)[:, None] * self.normal)

    @property
    def _plane_data(self):
        c = self.mesh.corners[self.faces]
        d = c - self.origin
        p = np.stack([d @ self.e1, d @ self.e2], axis=-1)
        h = d @ self.normal
        vn = self.mesh.vertex_normals[self.mesh.faces[self.faces]]
        slope = -np.stack([vn @ self.e1, vn @ self.e2], axis=-1) / (vn @ self.normal)[..., None]
        return p, h, slope

    def sample(self, pts2d, chunk: int = 1_000_000):
        """Height and (vertex-normal based) gradient at plane points.

        Returns ``(u, grad_u, covered)``; uncovered points get NaN.
        """
        q = np.atleast_2d(np.asarray(pts2d, dtype=float))
        tri, h, slope = self._plane_data
        u = np.full(len(q), np.nan)
        g = np.full((len(q), 2), np.nan)
        a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
        det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
        step = max(1, chunk // max(len(tri), 1))
        for s in range(0, len(q), step):
            x = q[s:s + step, None, :]
            l1 = ((x[..., 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (c[:, 0] - a[:, 0]) * (x[..., 1] - a[:, 1])) / det
            l2 = ((b[:, 0] - a[:, 0]) * (x[..., 1] - a[:, 1])
                  - (x[..., 0] - a[:, 0]) * (b[:, 1] - a[:, 1])) / det
            l0 = 1 - l1 - l2
            inside = (l0 >= -1e-12) & (l1 >= -1e-12) & (l2 >= -1e-12)
            hit = inside.any(axis=1)
            f = np.argmax(inside, axis=1)
            rows = np.flatnonzero(hit)
            ff = f[rows]
            lam = np.stack([l0[rows, ff], l1[rows, ff], l2[rows, ff]], axis=1)
            u[s + rows] = np.einsum("ij,ij->i", lam, h[ff])
            g[s + rows] = np.einsum("ij,ijk->ik", lam, slope[ff])
        return u, g, ~np.isnan(u)


    def smooth_sample(self, pts2d, n_neighbors: int = 24):
        """Height and gradient from weighted local quadratic fits to the vertices.

        Unlike :meth:`sample` this does not inherit the chordal bias of the
        piecewise-linear surface, and the gradient is continuous.
        """
        q = np.atleast_2d(np.asarray(pts2d, dtype=float))
        vid = np.unique(self.mesh.faces[self.faces])
        p, h = self.to_plane(self.mesh.vertices[vid])
        tree = cKDTree(p)
        k = min(n_neighbors, len(vid))
        dist, idx = tree.query(q, k=k)
        u = np.empty(len(q))
        g = np.empty((len(q), 2))
        for i in range(len(q)):
            d = p[idx[i]] - q[i]
            scale = dist[i].max()
            wt = np.exp(-((dist[i] / scale) ** 2))
            A = np.column_stack([np.ones(k), d[:, 0], d[:, 1],
                                 d[:, 0] ** 2, d[:, 0] * d[:, 1], d[:, 1] ** 2])
            coef = np.linalg.lstsq(A * wt[:, None], h[idx[i]] * wt, rcond=None)[0]
            u[i] = coef[0]
            g[i] = coef[1:3]
        return u, g


def _fit_plane(mesh: TriMesh, center, radius, normal=None):
    sel = np.linalg.norm(mesh.face_centroids - center, axis=1) < radius
    if not sel.any():
        sel = np.zeros(mesh.n_faces, dtype=bool)
        sel[np.argmin(np.linalg.norm(mesh.face_centroids - center, axis=1))] = True
    w = mesh.face_areas[sel]
    c = mesh.face_centroids[sel]
    m = (w[:, None] * c).sum(0) / w.sum()
    if normal is None:
        d = c - m
        cov = (w[:, None, None] * d[:, :, None] * d[:, None, :]).sum(0)
        evals, evecs = np.linalg.eigh(cov)
        n = evecs[:, 0]
        if n @ mesh.face_vectors[sel].sum(0) < 0:
            n = -n
    else:
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
    axis = np.eye(3)[np.argmin(np.abs(n))]
    e1 = axis - (axis @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    x0 = center - ((center - m) @ n) * n
    return x0, e1, e2, n


def _face_components(mesh: TriMesh, faces: np.ndarray) -> int:
    if len(faces) == 0:
        return 0
    local = -np.ones(mesh.n_faces, dtype=int)
    local[faces] = np.arange(len(faces))
    h = (3 * faces[:, None] + np.arange(3)).ravel()
    other = local[mesh.twin[h] // 3]
    mine = np.repeat(np.arange(len(faces)), 3)
    keep = other >= 0
    g = sparse.coo_matrix((np.ones(keep.sum()), (mine[keep], other[keep])),
                          shape=(len(faces), len(faces)))
    return int(csgraph.connected_components(g, directed=False)[0])


def extract_patch(mesh: TriMesh, center, radius: float, normal=None,
                  grid_n: int = 65) -> GraphPatch:
    """Write the sheet of ``mesh`` over the disc ``B_radius(center)`` as a graph.

    The plane is an area-weighted PCA fit of the faces within ``radius`` of
    ``center`` (``normal`` overrides its direction).  The region is the set of
    faces whose projection meets the disc and whose centroid lies within
    ``2 * radius`` of ``center``.

    Raises
    ------
    MultiSheetError
        if the region has more than one edge-connected component.
    NotAGraphError
        if a region face is not oriented along the plane normal (projection fold).
    """
    center = np.asarray(center, dtype=float)
    x0, e1, e2, n = _fit_plane(mesh, center, radius, normal)
    near = np.flatnonzero(np.linalg.norm(mesh.face_centroids - center, axis=1) < 2 * radius)
    c = mesh.corners[near] - x0
    proj = np.stack([c @ e1, c @ e2, np.zeros(c.shape[:2])], axis=-1)
    dist = point_triangle_distance(np.zeros(3), proj)
    region = near[dist < radius]
    if len(region) == 0:
        raise NotAGraphError("no mesh faces over the disc")
    ncomp = _face_components(mesh, region)
    if ncomp > 1:
        raise MultiSheetError(f"{ncomp} sheets cross the cylinder over the disc")
    up = mesh.face_vectors[region] @ n
    if np.any(up <= 1e-12 * mesh.face_areas[region]):
        raise NotAGraphError("surface folds over the projection plane inside the cylinder")
    grid = np.linspace(-radius, radius, grid_n)
    P = np.stack(np.meshgrid(grid, grid, indexing="ij"), -1).reshape(-1, 2)
    inside = np.einsum("ij,ij->i", P, P) <= radius**2
    height = np.full(len(P), np.nan)
    tmp = GraphPatch(mesh, x0, e1, e2, n, float(radius), region, grid,
                     height.reshape(grid_n, grid_n), 0.0, 0.0)
    u, _, _ = tmp.sample(P[inside])
    height[inside] = u
    # exact slopes of the piecewise-linear graph, faces over the disc
    fn = mesh.face_normals[region]
    slopes = np.hypot(fn @ e1, fn @ e2) / (fn @ n)
    lip = float(slopes.max())
    sup = float(np.nanmax(np.abs(height))) if np.isfinite(height).any() else 0.0
    if sup / radius + lip > 1:
        logger.warning("graph outside the small-Lipschitz regime: |u|/r + |Du| = %.3g",
                       sup / radius + lip)
    return GraphPatch(mesh, x0, e1, e2, n, float(radius), region, grid,
                      height.reshape(grid_n, grid_n), lip, sup)


# -- choice of the cut radius -------------------------------------------------


def level_set_integral(mesh: TriMesh, phi: np.ndarray, values: np.ndarray, level: float) -> float:
    """Line integral of a piecewise-linear vertex function over ``{phi = level}``.

    The level set is traced face by face (marching triangles).
    """
    f = mesh.faces
    s = phi[f] - level
    pos = s > 0
    npos = pos.sum(1)
    cut = np.flatnonzero((npos == 1) | (npos == 2))
    total = 0.0
    for fi in cut:
        pts, vals = [], []
        for k in range(3):
            a, b = k, (k + 1) % 3
            if pos[fi, a] != pos[fi, b]:
                t = s[fi, a] / (s[fi, a] - s[fi, b])
                va, vb = f[fi, a], f[fi, b]
                pts.append((1 - t) * mesh.vertices[va] + t * mesh.vertices[vb])
                vals.append((1 - t) * values[va] + t * values[vb])
        total += np.linalg.norm(pts[1] - pts[0]) * 0.5 * (vals[0] + vals[1])
    return float(total)


def radius_candidates(rho: float) -> np.ndarray:
    """Sixteen cell midpoints of ``(rho/2, 3 rho/4)``."""
    return rho / 2 + (2 * np.arange(16) + 1) * rho / 128


def good_radius(mesh: TriMesh, center, rho: float, return_profile: bool = False):
    """Cut radius in ``(rho/2, 3 rho/4)`` with the smallest ``int_{S_sigma} |A|^2``.

    The first minimum wins ties.  If no vertex lies in the annulus the
    default ``5 rho / 8`` is returned with a warning.
    """
    center = np.asarray(center, dtype=float)
    d = np.linalg.norm(mesh.vertices - center, axis=1)
    cands = radius_candidates(rho)
    if not np.any((d > rho / 2) & (d < 3 * rho / 4)):
        warnings.warn("no mesh vertices in the annulus; using sigma = 5 rho / 8", stacklevel=2)
        sigma = 5 * rho / 8
        return (sigma, cands, np.full(16, np.nan)) if return_profile else sigma
    a2 = compute_curvature(mesh).sec_fund_sq
    vals = np.array([level_set_integral(mesh, d, a2, s) for s in cands])
    sigma = float(cands[int(np.argmin(vals))])
    return (sigma, cands, vals) if return_profile else sigma


# -- clamped plate solve ------------------------------------------------------


@dataclass
class BiharmonicPatch:
    """Discrete clamped-plate solution on ``B_sigma(0)`` in plane coordinates."""

    sigma: float
    grid: np.ndarray  # 1-d node coordinates, shared by both axes
    w: np.ndarray  # node values including the ghost layer
    unknown: np.ndarray  # bool mask of solved nodes
    boundary_u: np.ndarray
    boundary_du: np.ndarray
    residual: float
    estimate_report: dict = field(default_factory=dict)

    def __post_init__(self):
        self._spline = RectBivariateSpline(self.grid, self.grid, self.w, kx=3, ky=3, s=0)

    def __call__(self, x, y, dx: int = 0, dy: int = 0):
        return self._spline.ev(x, y, dx=dx, dy=dy)

    @property
    def boundary_angles(self):
        return 2 * np.pi * np.arange(len(self.boundary_u)) / len(self.boundary_u)


class _TrigInterpolant:
    """Trigonometric interpolant of samples at the angles ``2 pi k / M``.

    Exact for trigonometric polynomials of degree below ``M / 2`` (in
    particular for the traces of affine functions) and spectrally accurate
    for smooth periodic data.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        m = len(values)
        c = np.fft.rfft(values) / m
        k = np.arange(len(c))
        w = np.full(len(c), 2.0)
        w[0] = 1.0
        if m % 2 == 0:
            w[-1] = 1.0
        self.k = k
        self.a = w * c.real
        self.b = -w * c.imag

    def __call__(self, ang, nu: int = 0):
        ang = np.asarray(ang, dtype=float)
        kt = np.multiply.outer(ang, self.k)
        ck, sk = np.cos(kt), np.sin(kt)
        if nu == 0:
            return ck @ self.a + sk @ self.b
        if nu == 1:
            return (-sk * self.k) @ self.a + (ck * self.k) @ self.b
        raise ValueError("only nu in (0, 1) is supported")


def _periodic(values):
    return _TrigInterpolant(values)


def _stencil_matrix(n: int):
    """Unscaled 5-point Laplacian rows for every node not on the outer frame."""
    idx = np.arange(n * n).reshape(n, n)
    inner = idx[1:-1, 1:-1].ravel()
    rows = np.arange(len(inner))
    r = np.concatenate([rows] * 5)
    c = np.concatenate([inner, inner - n, inner + n, inner - 1, inner + 1])
    v = np.concatenate([np.full(len(inner), -4.0), np.ones(4 * len(inner))])
    return sparse.csr_matrix((v, (r, c)), shape=(len(inner), n * n))


def solve_biharmonic(u_trace, du_trace, sigma: float, grid_n: int = 65,
                     boundary_A2: float | None = None) -> BiharmonicPatch:
    """Solve ``Delta^2 w = 0`` on ``B_sigma(0)`` with clamped data.

    Parameters
    ----------
    u_trace, du_trace : values of ``u`` and ``du/dnu`` at ``M >= 64`` uniformly
        spaced angles ``2 pi k / M`` on the circle of radius ``sigma``.
    grid_n : nodes across the disc diameter (``>= 33``); three ghost layers
        are added on each side.
    boundary_A2 : optional ``int |A|^2 dH^1`` over the graph of ``u`` on the
        circle, used for the Hessian-energy constant.

    Nodes outside the open disc are ghosts with the first-order Taylor value
    ``u(xb) + d du/dnu(xb)`` at the radial projection ``xb`` (``d`` the distance
    to the circle); this is exact for affine data.  The 13-point operator
    restricted to the disc is ``L^T L`` with ``L`` the 5-point Laplacian, so the
    system is symmetric positive definite.
    """
    u_trace = np.asarray(u_trace, dtype=float)
    du_trace = np.asarray(du_trace, dtype=float)
    if len(u_trace) < 64 or len(du_trace) != len(u_trace):
        raise ValueError("need at least 64 matching boundary samples")
    if grid_n < 33:
        raise ValueError("grid_n must be at least 33")
    if not (np.all(np.isfinite(u_trace)) and np.all(np.isfinite(du_trace))):
        raise SolverFailureError("non-finite boundary data")
    h = 2 * sigma / (grid_n - 1)
    pad = 3
    n = grid_n + 2 * pad
    grid = -sigma + (np.arange(n) - pad) * h
    X, Y = np.meshgrid(grid, grid, indexing="ij")
    R = np.hypot(X, Y)
    unknown = R < sigma - 1e-12 * sigma
    su, sdu = _periodic(u_trace), _periodic(du_trace)
    phi = np.mod(np.arctan2(Y, X), 2 * np.pi)
    ghost = su(phi) + (R - sigma) * sdu(phi)
    vals = np.where(unknown, 0.0, ghost).ravel()
    L = _stencil_matrix(n)
    U = np.flatnonzero(unknown.ravel())
    LU = L[:, U]
    A = (LU.T @ LU).tocsc()
    rhs = -(LU.T @ (L @ vals))
    sol = spsolve(A, rhs)
    full = vals.copy()
    full[U] = sol
    res_vec = (L.T @ (L @ full))[U]
    scale = max(1.0, float(np.abs(full).max()))
    residual = float(np.abs(res_vec).max() / scale)
    if not np.isfinite(residual) or residual > 1e-8:
        raise SolverFailureError(f"biharmonic residual {residual:.3e}")
    patch = BiharmonicPatch(sigma, grid, full.reshape(n, n), unknown, u_trace, du_trace,
                            residual)
    patch.estimate_report = lemma_estimates(patch, boundary_A2)
    return patch


def lemma_estimates(patch: BiharmonicPatch, boundary_A2: float | None = None,
                    n_r: int = 48, n_t: int = 128) -> dict:
    """Fitted constants of the comparison estimates and the clamped-data errors.

    ``c_sup``: ``|w|_inf / sigma`` over ``|u|_inf / sigma + |Du|_inf`` (boundary);
    ``c_grad``: ``|Dw|_inf / |Du|_inf``; ``c_hess``: ``int |D^2 w|^2`` over
    ``sigma * int |A|^2 dH^1`` (only with ``boundary_A2``); ``c_trace``: the
    larger relative trace error (value against ``|u|_inf + sigma |Du|_inf``,
    normal derivative against ``|Du|_inf``) divided by the first-order rate
    ``h / sigma`` of the ghost-node boundary treatment.
    """
    s = patch.sigma
    ang = patch.boundary_angles
    su = _periodic(patch.boundary_u)
    du_t = su(ang, 1) / s
    du_abs = np.sqrt(du_t**2 + patch.boundary_du**2)
    sup_u = float(np.abs(patch.boundary_u).max())
    sup_du = float(du_abs.max())

    xg, wg = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * s * (xg + 1)
    wr = 0.5 * s * wg
    t = 2 * np.pi * np.arange(n_t) / n_t
    Rr, Tt = np.meshgrid(r, t, indexing="ij")
    x, y = Rr * np.cos(Tt), Rr * np.sin(Tt)
    w = patch(x, y)
    wx, wy = patch(x, y, 1, 0), patch(x, y, 0, 1)
    wxx, wxy, wyy = patch(x, y, 2, 0), patch(x, y, 1, 1), patch(x, y, 0, 2)
    hess2 = wxx**2 + 2 * wxy**2 + wyy**2
    hess_energy = float(np.sum(hess2 * Rr * wr[:, None]) * 2 * np.pi / n_t)
    sup_w = float(np.abs(w).max())
    sup_dw = float(np.hypot(wx, wy).max())

    bx, by = s * np.cos(ang), s * np.sin(ang)
    wb = patch(bx, by)
    dwn = patch(bx, by, 1, 0) * np.cos(ang) + patch(bx, by, 0, 1) * np.sin(ang)
    tiny = np.finfo(float).tiny
    rep = {
        "sup_w": sup_w,
        "sup_Dw": sup_dw,
        "hessian_energy": hess_energy,
        "sup_u_boundary": sup_u,
        "sup_Du_boundary": sup_du,
        "c_sup": (sup_w / s) / max(sup_u / s + sup_du, tiny) if sup_w > 0 else 0.0,
        "c_grad": sup_dw / max(sup_du, tiny) if sup_dw > 0 else 0.0,
        "c_hess": None,
        "trace_error_u": float(np.abs(wb - patch.boundary_u).max()),
        "trace_error_du": float(np.abs(dwn - patch.boundary_du).max()),
    }
    rate = (patch.grid[1] - patch.grid[0]) / s
    rel_u = rep["trace_error_u"] / max(sup_u + s * sup_du, tiny)
    rel_du = rep["trace_error_du"] / max(sup_du, tiny)
    rep["c_trace"] = max(rel_u, rel_du) / rate if (sup_u + sup_du) > 0 else 0.0
    if boundary_A2 is not None:
        rep["boundary_A2"] = float(boundary_A2)
        rep["c_hess"] = hess_energy / max(s * boundary_A2, tiny) if hess_energy > 0 else 0.0
    return rep


# -- replacement --------------------------------------------------------------


@dataclass
class DeltaReport:
    sigma: float
    d_area: float
    d_vol: float
    d_helfrich: float
    solver_residual: float
    fitted_constants: dict

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, indent=2) + "\n"

    def save(self, path) -> None:
        atomic_write_text(path, self.to_json())


def _boundary_loop(mesh: TriMesh, removed: np.ndarray):
    """Ordered vertex loop bounding the removed faces (counterclockwise about them)."""
    rem = np.zeros(mesh.n_faces, dtype=bool)
    rem[removed] = True
    h = (3 * removed[:, None] + np.arange(3)).ravel()
    tw = mesh.twin[h]
    bnd = h[~rem[tw // 3]]
    if len(bnd) == 0:
        raise StitchFailureError("removed region has no boundary")
    f = mesh.faces.ravel()
    tail = f[bnd]
    head = f[mesh.next[bnd]]
    succ = {}
    for a, b in zip(tail, head):
        if a in succ:
            raise StitchFailureError("removed region boundary is not a simple loop")
        succ[a] = b
    start = int(tail[0])
    loop = [start]
    while True:
        nxt = int(succ[loop[-1]])
        if nxt == start:
            break
        loop.append(nxt)
        if len(loop) > len(succ):
            raise StitchFailureError("boundary chain does not close")
    if len(loop) != len(succ):
        raise StitchFailureError("removed region has more than one boundary loop")
    return np.array(loop)


def replace_patch(mesh: TriMesh, center, rho: float, grid_n: int = 65,
                  sigma: float | None = None, h0: float = 0.0, normal=None):
    """Replace the sheet over ``B_sigma`` by the biharmonic graph with the same traces.

    Faces of the sheet with a vertex projecting into ``B_sigma`` are cut out;
    the cut region must be a disc whose boundary loop winds once around the
    centre.  The graph of ``w`` is triangulated by the projections of the cut
    vertices, so it joins the untouched mesh along the boundary loop.
    ``sigma`` defaults to :func:`good_radius`.  Returns ``(new_mesh, DeltaReport)``.

    Raises
    ------
    NotAGraphError, MultiSheetError
        from :func:`extract_patch` at radius ``rho``.
    StitchFailureError
        if the removed faces do not form a disc or its boundary is not
        star-shaped about the centre.
    """
    center = np.asarray(center, dtype=float)
    if sigma is None:
        sigma = good_radius(mesh, center, rho)
    patch = extract_patch(mesh, center, max(rho, sigma * 4 / 3), normal=normal)
    region = patch.faces
    vp, _ = patch.to_plane(mesh.vertices)
    rproj = np.hypot(vp[:, 0], vp[:, 1])
    removed = region[(rproj[mesh.faces[region]] < sigma).any(axis=1)]
    if len(removed) == 0:
        raise StitchFailureError("no faces inside the cut radius")
    fr = mesh.faces[removed]
    nv_r = len(np.unique(fr))
    ne_r = len({tuple(sorted(e)) for t in fr for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0]))})
    if nv_r - ne_r + len(removed) != 1:
        raise StitchFailureError("removed faces do not form a disc")
    loop = _boundary_loop(mesh, removed)
    ang = np.arctan2(vp[loop, 1], vp[loop, 0])
    steps = np.mod(np.diff(np.append(ang, ang[0])), 2 * np.pi)
    if np.any(steps > np.pi) or not np.isclose(steps.sum(), 2 * np.pi):
        raise StitchFailureError("boundary loop does not wind once around the centre")

    # traces on the cut circle
    M = max(64, 4 * len(loop))
    phi = 2 * np.pi * np.arange(M) / M
    bp = sigma * np.stack([np.cos(phi), np.sin(phi)], axis=1)
    _, _, ok = patch.sample(bp)
    if not ok.all():
        raise StitchFailureError("cut circle leaves the graph region")
    u, g = patch.smooth_sample(bp)
    du = g[:, 0] * np.cos(phi) + g[:, 1] * np.sin(phi)
    a2 = compute_curvature(mesh).sec_fund_sq
    A2_line = level_set_integral(mesh, rproj, a2, sigma)
    bh = solve_biharmonic(u, du, sigma, grid_n, boundary_A2=A2_line)

    # lift the removed vertices onto the graph of w; connectivity is kept, so
    # the projected triangulation of the disc is reused and stitching is exact
    interior = np.setdiff1d(np.unique(fr), loop)
    verts = np.array(mesh.vertices)
    pin = vp[interior]
    verts[interior] = patch.to_space(pin, bh(pin[:, 0], pin[:, 1]))
    try:
        new_mesh = mesh.moved(verts)
    except Exception as exc:  # pragma: no cover - defensive
        raise StitchFailureError(f"replaced mesh is invalid: {exc}") from exc

    d_area = area(new_mesh) - area(mesh)
    d_vol = enclosed_volume(new_mesh) - enclosed_volume(mesh)
    d_helf = helfrich_energy(new_mesh, h0) - helfrich_energy(mesh, h0)
    consts = dict(bh.estimate_report)
    consts["area_over_sigma2"] = abs(d_area) / sigma**2
    consts["vol_over_sigma2"] = abs(d_vol) / sigma**2
    consts = {k: (None if v is None else float(v)) for k, v in consts.items()}
    rep = DeltaReport(float(sigma), float(d_area), float(d_vol), float(d_helf),
                      bh.residual, consts)
    return new_mesh, rep
