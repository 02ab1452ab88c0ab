"""Oriented sample clouds, the integer volume representative and first variations.

A closed oriented mesh is discretized as one weighted sample per face (centroid,
unit normal, area, multiplicities).  The volume representative ``theta_R`` is
minus the generalized winding number of the mesh, so for an outward sphere it
is ``-1`` inside and ``0`` outside, and ``-sum theta_R dV`` is the enclosed
volume.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import PointOnSurfaceError
from .mesh import TriMesh, atomic_write_text

# -- oriented sample clouds ---------------------------------------------------


@dataclass(frozen=True)
class OrientedSampleCloud:
    """Weighted oriented samples ``(x, n, w, theta_plus, theta_minus)``."""

    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    theta_plus: np.ndarray
    theta_minus: np.ndarray

    def __post_init__(self):
        n = len(self.points)
        for name in ("normals", "weights", "theta_plus", "theta_minus"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has wrong length")
        if np.any(self.weights <= 0):
            raise ValueError("sample weights must be positive")
        if np.any(self.theta_plus < 0) or np.any(self.theta_minus < 0):
            raise ValueError("multiplicities must be nonnegative")
        if np.any(self.theta_plus + self.theta_minus < 1):
            raise ValueError("every sample needs total multiplicity >= 1")

    def __len__(self):
        return len(self.points)

    def merge(self, other: "OrientedSampleCloud") -> "OrientedSampleCloud":
        return OrientedSampleCloud(
            *(np.concatenate([getattr(self, k), getattr(other, k)])
              for k in ("points", "normals", "weights", "theta_plus", "theta_minus"))
        )

    def translated(self, c) -> "OrientedSampleCloud":
        return OrientedSampleCloud(self.points + np.asarray(c, dtype=float), self.normals,
                                   self.weights, self.theta_plus, self.theta_minus)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "z", "nx", "ny", "nz", "w", "theta_plus", "theta_minus"])
        for p, n, wt, tp, tm in zip(self.points, self.normals, self.weights,
                                    self.theta_plus, self.theta_minus):
            w.writerow([*map(repr, map(float, p)), *map(repr, map(float, n)),
                        repr(float(wt)), int(tp), int(tm)])
        return buf.getvalue()

    def save_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv())


def cloud_from_mesh(mesh: TriMesh, multiplicity: int = 1, flip: bool = False) -> OrientedSampleCloud:
    """One sample per face at its centroid, weighted by face area.

    ``flip`` negates the sample normals, i.e. the image is covered with the
    opposite orientation.
    """
    if multiplicity < 1:
        raise ValueError("multiplicity must be a positive integer")
    n = mesh.face_normals * (-1.0 if flip else 1.0)
    F = mesh.n_faces
    return OrientedSampleCloud(
        np.array(mesh.face_centroids), np.array(n), np.array(mesh.face_areas),
        np.full(F, int(multiplicity)), np.zeros(F, dtype=int),
    )


def cloud_area(cloud: OrientedSampleCloud) -> float:
    return float(np.sum(cloud.weights * (cloud.theta_plus + cloud.theta_minus)))


def cloud_volume(cloud: OrientedSampleCloud) -> float:
    """``(1/3) sum w <x, n> (theta_plus - theta_minus)``."""
    xn = np.einsum("ij,ij->i", cloud.points, cloud.normals)
    return float(np.sum(cloud.weights * xn * (cloud.theta_plus - cloud.theta_minus)) / 3.0)


# -- winding numbers ----------------------------------------------------------


def solid_angles(corners: np.ndarray, points: np.ndarray, chunk: int = 2_000_000) -> np.ndarray:
    """Sum over triangles of the signed solid angle subtended at each point.

    Uses the Van Oosterom-Strackee formula; returns an array of length
    ``len(points)``.  Division by ``4 pi`` gives the winding number.
    """
    points = np.atleast_2d(points)
    out = np.empty(len(points))
    F = len(corners)
    step = max(1, chunk // max(F, 1))
    for s in range(0, len(points), step):
        p = points[s:s + step, None, None, :]
        r = corners[None, :, :, :] - p  # (P, F, 3, 3)
        a, b, c = r[..., 0, :], r[..., 1, :], r[..., 2, :]
        la, lb, lc = (np.linalg.norm(v, axis=-1) for v in (a, b, c))
        det = np.einsum("pfi,pfi->pf", a, np.cross(b, c))
        den = (la * lb * lc + np.einsum("pfi,pfi->pf", a, b) * lc
               + np.einsum("pfi,pfi->pf", a, c) * lb + np.einsum("pfi,pfi->pf", b, c) * la)
        out[s:s + step] = 2.0 * np.arctan2(det, den).sum(axis=1)
    return out


def winding_numbers(mesh: TriMesh, points) -> np.ndarray:
    """Generalized (real-valued) winding number of the mesh around each point."""
    return solid_angles(mesh.corners, np.asarray(points, dtype=float)) / (4 * np.pi)


def point_triangle_distance(p, corners) -> np.ndarray:
    """Euclidean distance from one point to each triangle in ``corners`` (F, 3, 3)."""
    p = np.asarray(p, dtype=float)
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    # interior by default, then overwrite by region (Ericson, Real-Time Collision Detection)
    den = va + vb + vc
    den = np.where(den == 0, 1.0, den)
    q = a + (vb / den)[:, None] * ab + (vc / den)[:, None] * ac

    def put(mask, val):
        q[mask] = val[mask]

    with np.errstate(divide="ignore", invalid="ignore"):
        # edge regions
        m = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        t = np.where(m, (d4 - d3) / ((d4 - d3) + (d5 - d6)), 0)
        put(m, b + t[:, None] * (c - b))
        m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        t = np.where(m, d2 / (d2 - d6), 0)
        put(m, a + t[:, None] * ac)
        m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        t = np.where(m, d1 / (d1 - d3), 0)
        put(m, a + t[:, None] * ab)
    # vertex regions
    put((d6 >= 0) & (d5 <= d6), c)
    put((d3 >= 0) & (d4 <= d3), b)
    put((d1 <= 0) & (d2 <= 0), a)
    return np.linalg.norm(q - p, axis=1)


def ray_parity(mesh: TriMesh, point, direction=(0.5773, 0.5774, 0.5774003)) -> int:
    """Number of ray crossings modulo 2 (Moller-Trumbore); an embedded-mesh oracle."""
    o = np.asarray(point, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    c = mesh.corners
    e1, e2 = c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]
    h = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(det) > 1e-14
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = o - c[:, 0]
    u = inv * np.einsum("ij,ij->i", s, h)
    q = np.cross(s, e1)
    v = inv * (q @ d)
    t = inv * np.einsum("ij,ij->i", e2, q)
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)
    return int(hit.sum()) % 2


@dataclass(frozen=True)
class CurrentRep:
    """Integer volume representative ``theta_R = -winding number``.

    Attributes
    ----------
    mesh : source surface (``surface_density`` is its oriented sample cloud).
    lo, hi : integration box (mesh bounding box padded by 5% per side).
    resolution : number of cells per axis for grid integration.
    """

    mesh: TriMesh
    lo: np.ndarray
    hi: np.ndarray
    resolution: int = 64
    max_retries: int = 3
    _grid_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @cached_property
    def surface_density(self) -> OrientedSampleCloud:
        return cloud_from_mesh(self.mesh)

    @property
    def perturbation(self) -> float:
        return 1e-7 * self.mesh.bbox_diagonal

    def _round_checked(self, w, pts, idx):
        """Round winding numbers; re-evaluate non-integral ones at shifted points."""
        theta = np.rint(w)
        bad = np.flatnonzero(np.abs(w - theta) > 0.1)
        shift = np.array([0.48, 0.62, 0.62]) * self.perturbation
        for attempt in range(self.max_retries):
            if not len(bad):
                break
            q = pts[bad] + (attempt + 1) * shift
            wb = winding_numbers(self.mesh, q)
            tb = np.rint(wb)
            good = np.abs(wb - tb) <= 0.1
            theta[bad[good]] = tb[good]
            bad = bad[~good]
        if len(bad):
            raise PointOnSurfaceError(f"point {pts[bad[0]]} (index {idx[bad[0]]}) lies on the surface")
        return theta.astype(np.int64)

    def __call__(self, points) -> np.ndarray:
        """Evaluate ``theta_R`` at one point (returns int) or an array of points."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        out = np.zeros(len(pts), dtype=np.int64)
        inbox = np.all((pts >= self.lo) & (pts <= self.hi), axis=1)
        idx = np.flatnonzero(inbox)
        if len(idx):
            q = pts[idx].copy()
            corners = self.mesh.corners
            for k, p in enumerate(q):
                for attempt in range(self.max_retries + 1):
                    if point_triangle_distance(p, corners).min() >= 1e-9:
                        break
                    if attempt == self.max_retries:
                        raise PointOnSurfaceError(f"point {pts[idx[k]]} lies on the surface")
                    p = p + np.array([0.48, 0.62, 0.62]) * self.perturbation
                q[k] = p
            out[idx] = -self._round_checked(winding_numbers(self.mesh, q), q, idx)
        return int(out[0]) if single else out

    @property
    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / self.resolution

    def cell_centers(self):
        h = self.spacing
        return [self.lo[a] + (np.arange(self.resolution) + 0.5) * h[a] for a in range(3)]

    def grid_values(self) -> np.ndarray:
        """``theta_R`` at all cell centres, shape ``(n, n, n)``.

        For a closed mesh the winding number at ``p`` equals the signed count
        of crossings of the upward ray from ``p`` (``+1`` where the crossed face
        normal points up).  Each vertical grid column is intersected with all
        faces once; columns that graze an edge or vertex, or pass within
        ``1e-9`` of the surface at a cell centre, are evaluated by solid angles
        instead.
        """
        if "theta" in self._grid_cache:
            return self._grid_cache["theta"]
        n = self.resolution
        h = self.spacing
        xs, ys, zs = self.cell_centers()
        acc = np.zeros((n, n, n + 1), dtype=np.int64)
        bad_col = np.zeros((n, n), dtype=bool)

        c = self.mesh.corners
        area2 = ((c[:, 1, 0] - c[:, 0, 0]) * (c[:, 2, 1] - c[:, 0, 1])
                 - (c[:, 2, 0] - c[:, 0, 0]) * (c[:, 1, 1] - c[:, 0, 1]))
        tol = 1e-12 * self.mesh.bbox_diagonal**2
        use = np.abs(area2) > tol
        fidx = np.flatnonzero(use)
        cu = c[fidx]
        i0 = np.clip(np.ceil((cu[:, :, 0].min(1) - xs[0]) / h[0]).astype(int), 0, n)
        i1 = np.clip(np.floor((cu[:, :, 0].max(1) - xs[0]) / h[0]).astype(int) + 1, 0, n)
        j0 = np.clip(np.ceil((cu[:, :, 1].min(1) - ys[0]) / h[1]).astype(int), 0, n)
        j1 = np.clip(np.floor((cu[:, :, 1].max(1) - ys[0]) / h[1]).astype(int) + 1, 0, n)
        ni, nj = np.maximum(i1 - i0, 0), np.maximum(j1 - j0, 0)
        cnt = ni * nj
        if cnt.sum():
            face = np.repeat(np.arange(len(fidx)), cnt)
            local = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            ci = i0[face] + local // nj[face]
            cj = j0[face] + local % nj[face]
            px, py = xs[ci], ys[cj]
            t = cu[face]
            a2 = area2[fidx][face]
            # barycentric coordinates of the column in the projected triangle
            l0 = ((t[:, 1, 0] - px) * (t[:, 2, 1] - py) - (t[:, 2, 0] - px) * (t[:, 1, 1] - py)) / a2
            l1 = ((t[:, 2, 0] - px) * (t[:, 0, 1] - py) - (t[:, 0, 0] - px) * (t[:, 2, 1] - py)) / a2
            l2 = 1.0 - l0 - l1
            lam = np.stack([l0, l1, l2], 1)
            graze = np.any(np.abs(lam) < 1e-10, axis=1) & np.all(lam > -1e-10, axis=1)
            bad_col[ci[graze], cj[graze]] = True
            hit = np.all(lam > 0, axis=1) & ~graze
            zc = np.einsum("ij,ij->i", lam[hit], t[hit][:, :, 2])
            sgn = np.sign(a2[hit]).astype(np.int64)
            kc = np.searchsorted(zs, zc)
            near = np.abs(zc - zs[np.clip(kc, 0, n - 1)]) < 1e-9
            near |= np.abs(zc - zs[np.clip(kc - 1, 0, n - 1)]) < 1e-9
            bad_col[ci[hit][near], cj[hit][near]] = True
            np.add.at(acc, (ci[hit], cj[hit], kc), sgn)
        # winding at z_k = sum of signs of crossings above z_k
        theta = -np.cumsum(acc[:, :, ::-1], axis=2)[:, :, ::-1][:, :, 1:]
        for i, j in np.argwhere(bad_col):
            pts = np.stack([np.full(n, xs[i]), np.full(n, ys[j]), zs], axis=1)
            theta[i, j] = -self._round_checked(winding_numbers(self.mesh, pts), pts,
                                               np.arange(n))
        theta = np.ascontiguousarray(theta)
        theta.flags.writeable = False
        self._grid_cache["theta"] = theta
        return theta


def current_rep(mesh: TriMesh, resolution: int = 64, pad: float = 0.05) -> CurrentRep:
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    ext = hi - lo
    ext = np.where(ext > 0, ext, ext.max())
    return CurrentRep(mesh, lo - pad * ext, hi + pad * ext, int(resolution))


def volume_via_current(rep: CurrentRep) -> float:
    """Midpoint rule for ``-int theta_R dL^3`` on the representative's grid."""
    if rep.resolution < 32:
        raise ValueError("grid resolution must be at least 32")
    return float(-rep.grid_values().sum() * np.prod(rep.spacing))


# -- first variations ---------------------------------------------------------


def area_gradient(mesh: TriMesh) -> np.ndarray:
    """``dArea/dx_i`` as a (V, 3) array (exact for the piecewise-linear surface)."""
    c = mesh.corners
    n = mesh.face_normals
    g = np.zeros((mesh.n_vertices, 3))
    for k in range(3):
        b, cc = c[:, (k + 1) % 3], c[:, (k + 2) % 3]
        np.add.at(g, mesh.faces[:, k], 0.5 * np.cross(b - cc, n))
    return g


def volume_gradient(mesh: TriMesh) -> np.ndarray:
    """``dVol/dx_i`` as a (V, 3) array: each face adds ``(1/6) x_j x x_k``."""
    c = mesh.corners
    g = np.zeros((mesh.n_vertices, 3))
    for k in range(3):
        np.add.at(g, mesh.faces[:, k], np.cross(c[:, (k + 1) % 3], c[:, (k + 2) % 3]) / 6.0)
    return g


def _velocities(mesh: TriMesh, field) -> np.ndarray:
    if callable(field):
        v = np.asarray(field(mesh.vertices), dtype=float)
    else:
        v = np.asarray(field, dtype=float)
    if v.shape != mesh.vertices.shape:
        v = np.broadcast_to(v, mesh.vertices.shape)
    return v


def first_variation_area(mesh: TriMesh, field) -> float:
    """Derivative of the mesh area when vertices move with velocity ``field(x_i)``.

    ``field`` is a callable mapping (N, 3) points to (N, 3) vectors, or an
    array of per-vertex velocities.
    """
    return float(np.sum(area_gradient(mesh) * _velocities(mesh, field)))


def first_variation_volume(mesh: TriMesh, field) -> float:
    """Derivative of the enclosed volume under the vertex velocity field."""
    return float(np.sum(volume_gradient(mesh) * _velocities(mesh, field)))
