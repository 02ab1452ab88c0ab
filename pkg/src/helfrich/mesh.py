"""Closed oriented triangle meshes: validation, area, enclosed volume, topology, I/O.

Orientation convention: faces are wound counterclockwise when viewed from
outside, so face normals point outward and embedded bodies have positive
enclosed volume.  Self-intersecting immersions are accepted; only local
validity (closedness, consistent winding, nondegenerate faces) is enforced.
"""

from __future__ import annotations

import logging
import math
import os
import tempfile
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import (
    DegenerateTriangleError,
    DisconnectedError,
    MeshError,
    NonManifoldError,
    OpenBoundaryError,
    ParseError,
)

logger = logging.getLogger(__name__)

DEGENERATE_REL = 1e-14


def _readonly(a):
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable closed oriented triangle mesh.

    Parameters
    ----------
    vertices : (V, 3) float array
    faces : (F, 3) int array, counterclockwise seen from outside.
    validate : run the topology and geometry checks (default True).

    Halfedge ``h = 3*f + k`` runs from ``faces[f, k]`` to ``faces[f, (k+1) % 3]``;
    ``twin``, ``next`` and ``prev`` are stored as integer arrays.
    """

    vertices: np.ndarray
    faces: np.ndarray
    validate: bool = True

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        f = np.array(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must have shape (V, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"faces must have shape (F, 3), got {f.shape}")
        object.__setattr__(self, "vertices", _readonly(v))
        object.__setattr__(self, "faces", _readonly(f))
        if self.validate:
            self._check()

    # -- construction helpers -------------------------------------------------

    def moved(self, vertices) -> "TriMesh":
        """Same connectivity, new vertex positions.  Topology checks are reused;
        only face degeneracy is re-checked."""
        new = TriMesh(vertices, self.faces, validate=False)
        new.__dict__["_halfedges"] = self._halfedges
        new._check_degenerate()
        return new

    def flipped(self) -> "TriMesh":
        """Reverse every face winding (negates normals and volume)."""
        return TriMesh(self.vertices, self.faces[:, ::-1])

    def translated(self, c) -> "TriMesh":
        return self.moved(self.vertices + np.asarray(c, dtype=float))

    def scaled(self, lam: float) -> "TriMesh":
        return self.moved(self.vertices * float(lam))

    # -- validation -----------------------------------------------------------

    def _check(self):
        v, f = self.vertices, self.faces
        nv = len(v)
        if len(f) == 0:
            raise MeshError("mesh has no faces")
        if f.min() < 0 or f.max() >= nv:
            raise MeshError("face index out of range")
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise MeshError("face with repeated vertex")
        used = np.zeros(nv, dtype=bool)
        used[f.ravel()] = True
        if not used.all():
            raise MeshError(f"{int((~used).sum())} vertices not referenced by any face")
        self._halfedges  # builds and checks twins
        self._check_degenerate()
        chi = self.euler_characteristic
        if chi % 2 != 0 or chi > 2 * self.n_components:
            raise MeshError(f"Euler characteristic {chi} impossible for closed oriented surface")

    def _check_degenerate(self):
        thresh = DEGENERATE_REL * self.bbox_diagonal**2
        bad = np.flatnonzero(self.face_areas <= thresh)
        if len(bad):
            raise DegenerateTriangleError(
                f"{len(bad)} faces with area <= {thresh:.3g} (first: face {bad[0]})"
            )

    @cached_property
    def _halfedges(self):
        f = self.faces
        nv = len(self.vertices)
        tail = f.ravel()
        head = np.roll(f, -1, axis=1).ravel()
        key = tail * nv + head
        order = np.argsort(key, kind="stable")
        skey = key[order]
        dup = np.flatnonzero(skey[1:] == skey[:-1])
        if len(dup):
            a, b = divmod(int(skey[dup[0]]), nv)
            raise NonManifoldError(
                f"directed edge ({a}, {b}) used twice: non-manifold edge or inconsistent orientation"
            )
        rkey = head * nv + tail
        pos = np.searchsorted(skey, rkey)
        pos = np.minimum(pos, len(skey) - 1)
        found = skey[pos] == rkey
        if not found.all():
            h = int(np.flatnonzero(~found)[0])
            raise OpenBoundaryError(f"halfedge ({tail[h]}, {head[h]}) has no twin")
        twin = order[pos]
        k = np.arange(3 * len(f))
        nxt = 3 * (k // 3) + (k + 1) % 3
        prv = 3 * (k // 3) + (k + 2) % 3
        return _readonly(twin), _readonly(nxt), _readonly(prv)

    @property
    def twin(self):
        return self._halfedges[0]

    @property
    def next(self):
        return self._halfedges[1]

    @property
    def prev(self):
        return self._halfedges[2]

    # -- geometry -------------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def corners(self):
        """(F, 3, 3) array of face corner positions."""
        return self.vertices[self.faces]

    @cached_property
    def face_vectors(self):
        """Area vectors ``0.5 (v1 - v0) x (v2 - v0)``; length = face area."""
        c = self.corners
        return _readonly(0.5 * np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]))

    @cached_property
    def face_areas(self):
        return _readonly(np.linalg.norm(self.face_vectors, axis=1))

    @cached_property
    def face_normals(self):
        return _readonly(self.face_vectors / self.face_areas[:, None])

    @cached_property
    def face_centroids(self):
        return _readonly(self.corners.mean(axis=1))

    @cached_property
    def edges(self):
        """Undirected edges as (E, 2) array, one row per twin pair."""
        f = self.faces
        tail = f.ravel()
        head = np.roll(f, -1, axis=1).ravel()
        keep = tail < head
        return _readonly(np.stack([tail[keep], head[keep]], axis=1))

    @cached_property
    def bbox_diagonal(self) -> float:
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))

    @cached_property
    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges) + self.n_faces

    @cached_property
    def adjacency(self):
        e = self.edges
        n = self.n_vertices
        a = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        return (a + a.T).tocsr()

    @cached_property
    def n_components(self) -> int:
        return int(csgraph.connected_components(self.adjacency, directed=False)[0])

    @cached_property
    def vertex_normals(self):
        """Area-weighted unit vertex normals."""
        n = np.zeros((self.n_vertices, 3))
        for k in range(3):
            np.add.at(n, self.faces[:, k], self.face_vectors)
        return _readonly(n / np.linalg.norm(n, axis=1)[:, None])


@dataclass(frozen=True)
class Constraints:
    """Prescribed area, enclosed volume and spontaneous curvature."""

    area0: float
    vol0: float
    h0: float = 0.0

    def __post_init__(self):
        if not self.area0 > 0:
            raise ValueError(f"area0 must be positive, got {self.area0}")
        if self.vol0 == 0 or not math.isfinite(self.vol0):
            raise ValueError("vol0 must be a nonzero real number")
        if not self.isoperimetric_ok:
            logger.warning(
                "|vol0|=%.6g exceeds the isoperimetric bound %.6g for area0=%.6g",
                abs(self.vol0), self.isoperimetric_bound, self.area0,
            )

    @property
    def isoperimetric_bound(self) -> float:
        return self.area0**1.5 / (6 * math.sqrt(math.pi))

    @property
    def isoperimetric_ok(self) -> bool:
        return abs(self.vol0) <= self.isoperimetric_bound

    @classmethod
    def of(cls, mesh: TriMesh, h0: float = 0.0) -> "Constraints":
        return cls(area(mesh), enclosed_volume(mesh), h0)


def area(mesh: TriMesh) -> float:
    return float(np.sum(mesh.face_areas))


def enclosed_volume(mesh: TriMesh) -> float:
    """Signed volume ``(1/6) sum det[v0, v1, v2]``.

    For flat faces this is exactly ``(1/3) int <x, nu> dA``.  Negative when
    the faces are wound inward.
    """
    c = mesh.corners
    return float(np.sum(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2]))) / 6.0)


def genus(mesh: TriMesh) -> int:
    if mesh.n_components != 1:
        raise DisconnectedError(f"mesh has {mesh.n_components} connected components")
    return (2 - mesh.euler_characteristic) // 2


# -- I/O ----------------------------------------------------------------------


def _fmt(x: float) -> str:
    # repr is the shortest string that round-trips a float exactly
    return repr(float(x))


def _format_of(path, format):
    if format is None:
        format = Path(path).suffix.lstrip(".")
    format = format.upper()
    if format not in ("OFF", "OBJ"):
        raise ParseError(f"unsupported mesh format {format!r}")
    return format


def load_mesh(path, format: str | None = None) -> TriMesh:
    """Read an OFF or OBJ file; the format defaults to the file suffix."""
    format = _format_of(path, format)
    with open(path) as fh:
        text = fh.read()
    if format == "OFF":
        v, f = _parse_off(text)
    else:
        v, f = _parse_obj(text)
    return TriMesh(v, f)


def _parse_off(text):
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("OFF"):
        raise ParseError("missing OFF header")
    rest = lines[0][3:].split()
    tokens_iter = iter(([" ".join(rest)] if rest else []) + lines[1:])
    try:
        counts = next(tokens_iter).split()
        nv, nf = int(counts[0]), int(counts[1])
        v = [[float(t) for t in next(tokens_iter).split()[:3]] for _ in range(nv)]
        f = []
        for _ in range(nf):
            tok = next(tokens_iter).split()
            if int(tok[0]) != 3:
                raise ParseError(f"only triangles supported, got a {tok[0]}-gon")
            f.append([int(t) for t in tok[1:4]])
    except (StopIteration, ValueError, IndexError) as exc:
        raise ParseError(f"malformed OFF file: {exc}") from exc
    return np.array(v, dtype=float).reshape(-1, 3), np.array(f, dtype=np.int64).reshape(-1, 3)


def _parse_obj(text):
    v, f = [], []
    try:
        for ln in text.splitlines():
            tok = ln.split("#", 1)[0].split()
            if not tok:
                continue
            if tok[0] == "v":
                v.append([float(t) for t in tok[1:4]])
            elif tok[0] == "f":
                idx = [int(t.split("/")[0]) for t in tok[1:]]
                if len(idx) != 3:
                    raise ParseError(f"only triangles supported, got {len(idx)} vertices")
                f.append([i - 1 if i > 0 else len(v) + i for i in idx])
    except ValueError as exc:
        raise ParseError(f"malformed OBJ file: {exc}") from exc
    return np.array(v, dtype=float).reshape(-1, 3), np.array(f, dtype=np.int64).reshape(-1, 3)


def mesh_to_string(mesh: TriMesh, format: str = "OFF") -> str:
    format = format.upper()
    out = []
    if format == "OFF":
        out.append("OFF")
        out.append(f"{mesh.n_vertices} {mesh.n_faces} {len(mesh.edges)}")
        out += [" ".join(_fmt(x) for x in p) for p in mesh.vertices]
        out += [f"3 {a} {b} {c}" for a, b, c in mesh.faces]
    elif format == "OBJ":
        out += ["v " + " ".join(_fmt(x) for x in p) for p in mesh.vertices]
        out += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    else:
        raise ParseError(f"unsupported mesh format {format!r}")
    return "\n".join(out) + "\n"


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_mesh(mesh: TriMesh, path, format: str | None = None) -> None:
    atomic_write_text(path, mesh_to_string(mesh, _format_of(path, format)))
