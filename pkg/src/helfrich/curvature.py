"""Discrete curvature operators and bending energies.

The mean-curvature vector uses the cotangent formula
``H_i = (1 / (2 A_i)) sum_j (cot a_ij + cot b_ij) (x_i - x_j)`` with mixed
Voronoi vertex areas ``A_i`` (obtuse-safe).  The scalar mean curvature is the
projection onto the area-weighted vertex normal, so a round sphere of radius
``r`` with outward orientation has ``H = 2 / r``.  Energies are lumped at the
vertices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DegenerateTriangleError
from .mesh import TriMesh

COT_CLAMP = 1e8


@dataclass(frozen=True)
class FaceGeometry:
    """Per-face quantities shared by curvature and its gradient.

    ``cot[f, k]`` is the cotangent of the angle at corner ``k``; that angle is
    opposite the edge ``(faces[f, k+1], faces[f, k+2])``.
    """

    normal2: np.ndarray  # (F, 3) cross product (p1-p0) x (p2-p0), length 2*area
    dots: np.ndarray  # (F, 3) dot product of the two edges leaving each corner
    cot: np.ndarray  # (F, 3) clamped cotangents
    clamped: np.ndarray  # (F, 3) bool
    angles: np.ndarray  # (F, 3) interior angles
    sqlen: np.ndarray  # (F, 3) squared length of the edge opposite each corner


def face_geometry(mesh: TriMesh) -> FaceGeometry:
    c = mesh.corners
    n2 = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    s = np.linalg.norm(n2, axis=1)
    dots = np.empty((mesh.n_faces, 3))
    sqlen = np.empty((mesh.n_faces, 3))
    for k in range(3):
        u = c[:, (k + 1) % 3] - c[:, k]
        w = c[:, (k + 2) % 3] - c[:, k]
        dots[:, k] = np.einsum("ij,ij->i", u, w)
        d = c[:, (k + 2) % 3] - c[:, (k + 1) % 3]
        sqlen[:, k] = np.einsum("ij,ij->i", d, d)
    if not np.all(np.isfinite(dots)):
        raise DegenerateTriangleError("non-finite vertex coordinates")
    raw = dots / np.maximum(s, np.finfo(float).tiny)[:, None]
    clamped = np.abs(raw) > COT_CLAMP
    cot = np.clip(raw, -COT_CLAMP, COT_CLAMP)
    angles = np.arctan2(s[:, None], dots)
    return FaceGeometry(n2, dots, cot, clamped, angles, sqlen)


def mixed_area_terms(fg: FaceGeometry) -> np.ndarray:
    """(F, 3) contribution of each face to the mixed area of each corner vertex."""
    farea = 0.5 * np.linalg.norm(fg.normal2, axis=1)
    out = np.empty_like(fg.cot)
    for k in range(3):
        # Voronoi part: edges k-(k+1) and k-(k+2), opposite corners k+2 and k+1
        out[:, k] = 0.125 * (
            fg.sqlen[:, (k + 2) % 3] * fg.cot[:, (k + 2) % 3]
            + fg.sqlen[:, (k + 1) % 3] * fg.cot[:, (k + 1) % 3]
        )
    obtuse = fg.dots < 0  # angle > pi/2 at that corner
    any_obt = obtuse.any(axis=1)
    out[any_obt] = np.where(obtuse[any_obt], 0.5, 0.25) * farea[any_obt, None]
    return out


def vertex_areas(mesh: TriMesh, fg: FaceGeometry | None = None) -> np.ndarray:
    """Mixed Voronoi vertex areas; they sum to the mesh area."""
    fg = face_geometry(mesh) if fg is None else fg
    a = np.bincount(mesh.faces.ravel(), weights=mixed_area_terms(fg).ravel(),
                    minlength=mesh.n_vertices)
    if np.any(a <= 0):
        raise DegenerateTriangleError("nonpositive vertex area")
    return a


def cotangent_laplacian(mesh: TriMesh, fg: FaceGeometry | None = None) -> sparse.csr_matrix:
    """Positive semidefinite cotangent stiffness matrix ``L``.

    ``(L x)_i = 1/2 sum_j (cot a_ij + cot b_ij) (x_i - x_j)``.
    """
    fg = face_geometry(mesh) if fg is None else fg
    f = mesh.faces
    n = mesh.n_vertices
    rows, cols, vals = [], [], []
    for k in range(3):
        a, b = f[:, (k + 1) % 3], f[:, (k + 2) % 3]
        w = 0.5 * fg.cot[:, k]
        rows += [a, b, a, b]
        cols += [b, a, a, b]
        vals += [-w, -w, w, w]
    L = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return L.tocsr()


def angle_defects(mesh: TriMesh, fg: FaceGeometry | None = None) -> np.ndarray:
    fg = face_geometry(mesh) if fg is None else fg
    s = np.bincount(mesh.faces.ravel(), weights=fg.angles.ravel(), minlength=mesh.n_vertices)
    return 2 * np.pi - s


@dataclass(frozen=True)
class CurvatureField:
    """Per-vertex curvature data of a mesh.

    ``sec_fund_sq`` is defined as ``mean_curvature**2 - 2 * gauss_curvature``.
    """

    mean_curvature_vector: np.ndarray
    mean_curvature: np.ndarray
    gauss_curvature: np.ndarray
    vertex_area: np.ndarray
    sec_fund_sq: np.ndarray
    normals: np.ndarray


def compute_curvature(mesh: TriMesh) -> CurvatureField:
    fg = face_geometry(mesh)
    A = vertex_areas(mesh, fg)
    L = cotangent_laplacian(mesh, fg)
    hvec = (L @ mesh.vertices) / A[:, None]
    n = mesh.vertex_normals
    hbar = np.einsum("ij,ij->i", hvec, n)
    K = angle_defects(mesh, fg) / A
    return CurvatureField(hvec, hbar, K, A, hbar**2 - 2 * K, n)


def gauss_bonnet_total(mesh: TriMesh) -> float:
    """Total angle defect; equals ``2 pi chi`` for any closed mesh."""
    return float(np.sum(angle_defects(mesh)))


def helfrich_energy(mesh: TriMesh, h0: float = 0.0, curv: CurvatureField | None = None) -> float:
    """Lumped ``sum_i (H_i - h0)^2 A_i``."""
    c = compute_curvature(mesh) if curv is None else curv
    return float(np.sum((c.mean_curvature - h0) ** 2 * c.vertex_area))


def willmore_energy(mesh: TriMesh, curv: CurvatureField | None = None) -> float:
    return 0.25 * helfrich_energy(mesh, 0.0, curv)


def local_curvature_mass(mesh: TriMesh, center, radius: float,
                         curv: CurvatureField | None = None) -> float:
    """Sum of ``|A|^2 A_i`` over vertices strictly inside the ball."""
    c = compute_curvature(mesh) if curv is None else curv
    d = np.linalg.norm(mesh.vertices - np.asarray(center, dtype=float), axis=1)
    inside = d < radius
    return float(np.sum(c.sec_fund_sq[inside] * c.vertex_area[inside]))
