"""Regularity diagnostics: density ratios, tilt and height excess, good points.

Areas of ``mesh ∩ B_r(x)`` are computed exactly: each triangle meets the ball
in a disc of its own plane, and the triangle/disc intersection area is summed
edge by edge from triangles with apex at the disc centre (straight pieces
inside the disc, circular sectors outside).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from .curvature import compute_curvature, willmore_energy
from .mesh import TriMesh, area, atomic_write_text
from .parallel import pmap

# -- exact triangle / ball clipping ------------------------------------------


def _disc_edge_area(a, b, R):
    """Signed area of triangle ``(0, a, b)`` intersected with the disc ``|p| < R``.

    ``a``, ``b`` are (N, 2); ``R`` is (N,).
    """
    d = b - a
    A = np.einsum("ij,ij->i", d, d)
    B = np.einsum("ij,ij->i", a, d)
    C = np.einsum("ij,ij->i", a, a) - R**2
    disc = B * B - A * C
    ok = (disc > 0) & (A > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    Asafe = np.where(A > 0, A, 1.0)
    t1 = np.where(ok, np.clip((-B - sq) / Asafe, 0.0, 1.0), 1.0)
    t2 = np.where(ok, np.clip((-B + sq) / Asafe, 0.0, 1.0), 1.0)
    p1 = a + t1[:, None] * d
    p2 = a + t2[:, None] * d

    def cross(p, q):
        return p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0]

    def sector(p, q):
        ang = np.arctan2(cross(p, q), np.einsum("ij,ij->i", p, q))
        return 0.5 * R**2 * ang

    return sector(a, p1) + 0.5 * cross(p1, p2) + sector(p2, b)


def clipped_areas(corners: np.ndarray, center, radius: float) -> np.ndarray:
    """Area of each triangle (F, 3, 3) inside the open ball ``B_radius(center)``."""
    corners = np.asarray(corners, dtype=float)
    out = np.zeros(len(corners))
    if len(corners) == 0:
        return out
    x = np.asarray(center, dtype=float)
    p = corners - x
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    nn = np.linalg.norm(n, axis=1)
    good = nn > 0
    n = n[good] / nn[good, None]
    p = p[good]
    h = np.einsum("ij,ij->i", p[:, 0], n)
    R2 = radius**2 - h**2
    cen = p.mean(axis=1)
    reach = np.max(np.linalg.norm(p - cen[:, None, :], axis=2), axis=1)
    # triangles whose bounding sphere misses the ball contribute exactly zero
    hit = (R2 > 0) & (np.linalg.norm(cen, axis=1) - reach < radius)
    if not np.any(hit):
        return out
    p, n, R = p[hit], n[hit], np.sqrt(R2[hit])
    # orthonormal frame of each triangle's plane, origin at the projected centre
    e1 = p[:, 1] - p[:, 0]
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(n, e1)
    q = p - (np.einsum("ij,ij->i", p[:, 0], n)[:, None, None] * n[:, None, :])
    uv = np.stack([np.einsum("fkj,fj->fk", q, e1), np.einsum("fkj,fj->fk", q, e2)], axis=-1)
    total = np.zeros(len(p))
    for k in range(3):
        total += _disc_edge_area(uv[:, k], uv[:, (k + 1) % 3], R)
    idx = np.flatnonzero(good)[hit]
    out[idx] = np.abs(total)
    return out


def _candidate_faces(mesh: TriMesh, x, r: float) -> np.ndarray:
    """Faces whose circumscribing sphere (about the centroid) can meet ``B_r(x)``."""
    c = mesh.face_centroids
    ext = np.max(np.linalg.norm(mesh.corners - c[:, None, :], axis=2), axis=1)
    return np.flatnonzero(np.linalg.norm(c - np.asarray(x, dtype=float), axis=1) < r + ext)


def ball_area(mesh: TriMesh, x, r: float) -> float:
    """Exact area of ``mesh ∩ B_r(x)``."""
    f = _candidate_faces(mesh, x, r)
    return float(clipped_areas(mesh.corners[f], x, r).sum())


def density_ratio(mesh: TriMesh, x, sigma: float) -> float:
    """``area(mesh ∩ B_sigma(x)) / (pi sigma^2)`` with exact clipping."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return ball_area(mesh, x, sigma) / (math.pi * sigma**2)


# -- excess ------------------------------------------------------------------


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def best_fit_plane(mesh: TriMesh, x, omega: float) -> np.ndarray:
    """Unit normal of the area-weighted PCA plane of ``mesh ∩ B_omega(x)`` (through ``x``).

    Uses clipped face areas as weights on face normals (the plane orthogonal to
    the dominant eigenvector of ``sum a_f n_f n_f^T``).
    """
    f = _candidate_faces(mesh, x, omega)
    a = clipped_areas(mesh.corners[f], x, omega)
    n = mesh.face_normals[f]
    S = (a[:, None, None] * n[:, :, None] * n[:, None, :]).sum(axis=0)
    w, v = np.linalg.eigh(S)
    return v[:, -1]


def tilt_excess(mesh: TriMesh, x, omega: float, normal=None) -> float:
    """``omega^-2 sum_f |P_f - P_T|_F^2 area(f ∩ B_omega(x))``.

    ``P`` are orthogonal projections onto the face planes and onto the plane
    ``T`` with unit ``normal`` (best-fit by default); ``|P_f - P_T|_F^2 =
    2 sin^2`` of the angle between the planes.
    """
    n = best_fit_plane(mesh, x, omega) if normal is None else _unit(normal)
    f = _candidate_faces(mesh, x, omega)
    a = clipped_areas(mesh.corners[f], x, omega)
    c = mesh.face_normals[f] @ n
    return float(np.sum(a * 2.0 * (1.0 - c**2)) / omega**2)


_QUAD_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def _height_integral(tri, x, omega, n, depth):
    """Integral of ``<xi - x, n>^2`` over ``tri ∩ B_omega(x)`` for (F, 3, 3) triangles."""
    if len(tri) == 0:
        return 0.0
    d = np.linalg.norm(tri - x, axis=2)
    inside = np.all(d < omega, axis=1)
    total = 0.0
    if np.any(inside):
        t = tri[inside]
        ar = 0.5 * np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)
        pts = np.einsum("qk,fkj->fqj", _QUAD_BARY, t)
        h = (pts - x) @ n
        total += float(np.sum(ar * np.mean(h**2, axis=1)))
    rest = tri[~inside]
    if len(rest) == 0:
        return total
    a = clipped_areas(rest, x, omega)
    rest, a = rest[a > 0], a[a > 0]
    if len(rest) == 0:
        return total
    if depth == 0:
        cen = rest.mean(axis=1)
        return total + float(np.sum(a * ((cen - x) @ n) ** 2))
    m01 = 0.5 * (rest[:, 0] + rest[:, 1])
    m12 = 0.5 * (rest[:, 1] + rest[:, 2])
    m20 = 0.5 * (rest[:, 2] + rest[:, 0])
    sub = np.concatenate([
        np.stack([rest[:, 0], m01, m20], 1),
        np.stack([m01, rest[:, 1], m12], 1),
        np.stack([m20, m12, rest[:, 2]], 1),
        np.stack([m01, m12, m20], 1),
    ])
    return total + _height_integral(sub, x, omega, n, depth - 1)


def height_excess(mesh: TriMesh, x, omega: float, normal=None, depth: int = 4) -> float:
    """``omega^-4 ∫_{B_omega(x)} dist(xi - x, T)^2``.

    Triangles inside the ball use a rule exact for quadratics; triangles
    crossing the sphere are subdivided ``depth`` times and the remaining
    crossing pieces use their exact clipped area at the centroid value.
    """
    n = best_fit_plane(mesh, x, omega) if normal is None else _unit(normal)
    x = np.asarray(x, dtype=float)
    f = _candidate_faces(mesh, x, omega)
    return _height_integral(mesh.corners[f], x, omega, n, depth) / omega**4


@dataclass(frozen=True)
class ExcessReport:
    center: np.ndarray
    radius: float
    normal: np.ndarray
    tilt: float
    height: float
    density_ratio: float

    def to_dict(self) -> dict:
        return {
            "center": [float(v) for v in self.center],
            "radius": float(self.radius),
            "normal": [float(v) for v in self.normal],
            "tilt": self.tilt,
            "height": self.height,
            "density_ratio": self.density_ratio,
        }


def excess_report(mesh: TriMesh, x, omega: float, normal=None) -> ExcessReport:
    """Tilt, height excess and density ratio at ``(x, omega)`` for one plane."""
    x = np.asarray(x, dtype=float)
    n = best_fit_plane(mesh, x, omega) if normal is None else _unit(normal)
    return ExcessReport(x, float(omega), n, tilt_excess(mesh, x, omega, n),
                        height_excess(mesh, x, omega, n), density_ratio(mesh, x, omega))


# -- good points and diameter ------------------------------------------------


def local_curvature_masses(mesh: TriMesh, rho: float, curv=None) -> np.ndarray:
    """``sum |A|^2 A_j`` over vertices ``j`` with ``|x_j - x_i| < rho``, for every ``i``."""
    c = compute_curvature(mesh) if curv is None else curv
    dens = c.sec_fund_sq * c.vertex_area
    tree = cKDTree(mesh.vertices)
    pairs = tree.query_pairs(rho, output_type="ndarray")
    out = dens.copy()
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        d = np.linalg.norm(mesh.vertices[i] - mesh.vertices[j], axis=1)
        keep = d < rho
        np.add.at(out, i[keep], dens[j[keep]])
        np.add.at(out, j[keep], dens[i[keep]])
    return out


def good_point_map(mesh: TriMesh, eps0: float, rho: float, curv=None):
    """Vertices whose local curvature mass within ``rho`` is below ``eps0**2``.

    Returns ``(good, n_bad)`` with ``good`` a boolean array.
    """
    if not (eps0 > 0 and rho > 0):
        raise ValueError("eps0 and rho must be positive")
    good = local_curvature_masses(mesh, rho, curv) < eps0**2
    return good, int(np.sum(~good))


def diameter(mesh: TriMesh) -> float:
    """Largest distance between two vertices (over the convex hull)."""
    x = mesh.vertices
    try:
        x = x[ConvexHull(x).vertices]
    except Exception:  # flat or tiny inputs: fall back to all vertices
        pass
    d = x[:, None, :] - x[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))


def diameter_check(mesh: TriMesh) -> float:
    """``diam / sqrt(area * W_Will)``; dilation invariant."""
    return diameter(mesh) / math.sqrt(area(mesh) * willmore_energy(mesh))


def vertex_diagnostics_csv(mesh: TriMesh, eps0: float = 1.0, rho: float = 0.3) -> str:
    """Per-vertex table ``x,y,z,local_A2,good,density_ratio`` (density at radius ``rho``)."""
    curv = compute_curvature(mesh)
    mass = local_curvature_masses(mesh, rho, curv)
    good = mass < eps0**2
    dens = pmap(lambda p: density_ratio(mesh, p, rho), mesh.vertices)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "z", "local_A2", "good", "density_ratio"])
    for i, p in enumerate(mesh.vertices):
        w.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(p[2])),
                    repr(float(mass[i])), int(good[i]), repr(float(dens[i]))])
    return buf.getvalue()


def save_vertex_diagnostics(mesh: TriMesh, path, eps0: float = 1.0, rho: float = 0.3) -> None:
    atomic_write_text(path, vertex_diagnostics_csv(mesh, eps0, rho))
