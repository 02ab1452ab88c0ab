"""Mesh generators used by tests, demos and the command line."""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh, enclosed_volume


def _outward(v, f):
    """Flip all faces if the signed volume is negative (simple closed bodies only)."""
    if enclosed_volume(TriMesh(v, f, validate=False)) < 0:
        f = f[:, ::-1]
    return TriMesh(v, f)


def tetrahedron(edge: float = 1.0) -> TriMesh:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    v *= edge / (2 * np.sqrt(2))
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return _outward(v, f)


def cube(size: float = 1.0) -> TriMesh:
    """Axis-aligned cube ``[0, size]^3`` with 12 triangles."""
    return grid_cube(1, size)


def grid_cube(n: int, size: float = 1.0) -> TriMesh:
    """Cube ``[0, size]^3`` whose faces are each split into an n x n grid of quads."""
    index = {}
    verts = []

    def vid(p):
        if p not in index:
            index[p] = len(verts)
            verts.append(p)
        return index[p]

    faces = []
    for axis in range(3):
        a1, a2 = (axis + 1) % 3, (axis + 2) % 3
        for side in (0, n):
            for i in range(n):
                for j in range(n):
                    quad = []
                    for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        p = [0, 0, 0]
                        p[axis], p[a1], p[a2] = side, i + di, j + dj
                        quad.append(vid(tuple(p)))
                    # (a1, a2, axis) is right-handed, so this quad faces +axis
                    if side == 0:
                        quad = quad[::-1]
                    faces.append([quad[0], quad[1], quad[2]])
                    faces.append([quad[0], quad[2], quad[3]])
    v = np.array(verts, dtype=float) * (size / n)
    return TriMesh(v, np.array(faces))


def subdivide(mesh: TriMesh, project=None) -> TriMesh:
    """1-to-4 midpoint subdivision; ``project`` optionally maps the new points."""
    f = mesh.faces
    edges = mesh.edges
    nv = mesh.n_vertices
    key = np.minimum(edges[:, 0], edges[:, 1]) * nv + np.maximum(edges[:, 0], edges[:, 1])
    order = np.argsort(key)
    skey = key[order]

    def mid(a, b):
        k = np.minimum(a, b) * nv + np.maximum(a, b)
        return nv + order[np.searchsorted(skey, k)]

    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    if project is not None:
        mids = project(mids)
    v = np.vstack([mesh.vertices, mids])
    a, b, c = f[:, 0], f[:, 1], f[:, 2]
    ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
    nf = np.concatenate(
        [
            np.stack([a, ab, ca], 1),
            np.stack([ab, b, bc], 1),
            np.stack([ca, bc, c], 1),
            np.stack([ab, bc, ca], 1),
        ]
    )
    return TriMesh(v, nf)


def icosphere(level: int = 3, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Subdivided icosahedron with all vertices on the sphere; ``V = 10*4**level + 2``."""
    t = (1 + np.sqrt(5)) / 2
    v = np.array(
        [[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
         [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
         [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]],
        dtype=float,
    )
    v /= np.linalg.norm(v, axis=1)[:, None]
    f = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
         [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
         [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
         [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    )
    m = _outward(v, f)

    def unit(p):
        return p / np.linalg.norm(p, axis=1)[:, None]

    for _ in range(level):
        m = subdivide(m, project=unit)
    return TriMesh(m.vertices * radius + np.asarray(center, dtype=float), m.faces)


def _grid_faces(n_u, n_v, wrap_v=True):
    """Triangles of an (n_u periodic) x n_v grid, index ``i * n_v + j``."""
    faces = []
    jmax = n_v if wrap_v else n_v - 1
    for i in range(n_u):
        i1 = (i + 1) % n_u
        for j in range(jmax):
            j1 = (j + 1) % n_v
            p00, p10, p11, p01 = i * n_v + j, i1 * n_v + j, i1 * n_v + j1, i * n_v + j1
            faces.append([p00, p10, p11])
            faces.append([p00, p11, p01])
    return np.array(faces)


def torus(R: float = 2.0, r: float = 0.5, n_major: int = 32, n_minor: int = 32,
          center=(0.0, 0.0, 0.0), half_cell: bool = False) -> TriMesh:
    """Torus of revolution about the z axis; genus 1.

    ``half_cell`` shifts the grid so the quad spanning indices 0..1 is centred
    on the outer equator point ``(R + r, 0, 0)``.
    """
    off = -0.5 if half_cell else 0.0
    u = 2 * np.pi * (np.arange(n_major) + off) / n_major
    w = 2 * np.pi * (np.arange(n_minor) + off) / n_minor
    U, W = np.meshgrid(u, w, indexing="ij")
    rho = R + r * np.cos(W)
    v = np.stack([rho * np.cos(U), rho * np.sin(U), r * np.sin(W)], -1).reshape(-1, 3)
    return TriMesh(v + np.asarray(center, dtype=float), _grid_faces(n_major, n_minor))


def revolve(rz, n_theta: int = 48) -> TriMesh:
    """Surface of revolution about z from a profile ``[(r0, z0), ..., (rN, zN)]``.

    The first and last profile points must lie on the axis (r = 0); the profile
    runs from the bottom pole to the top pole.
    """
    rz = np.asarray(rz, dtype=float)
    if rz[0, 0] != 0 or rz[-1, 0] != 0:
        raise ValueError("profile must start and end on the axis")
    rings = rz[1:-1]
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    pts = [[0.0, 0.0, rz[0, 1]]]
    for r, z in rings:
        pts += [[r * np.cos(t), r * np.sin(t), z] for t in th]
    pts.append([0.0, 0.0, rz[-1, 1]])
    v = np.array(pts)
    nr = len(rings)
    top = len(v) - 1

    def ring(k, j):
        return 1 + k * n_theta + j % n_theta

    faces = []
    for j in range(n_theta):
        faces.append([0, ring(0, j + 1), ring(0, j)])
    for k in range(nr - 1):
        for j in range(n_theta):
            a, b = ring(k, j), ring(k, j + 1)
            c, d = ring(k + 1, j + 1), ring(k + 1, j)
            faces.append([a, b, c])
            faces.append([a, c, d])
    for j in range(n_theta):
        faces.append([ring(nr - 1, j), ring(nr - 1, j + 1), top])
    return _outward(v, np.array(faces))


def capped_cylinder(radius: float = 1.0, height: float = 4.0, n_theta: int = 64,
                    n_side: int = 48, n_cap: int = 8) -> TriMesh:
    """Cylinder with flat disc caps, axis along z, centred at the origin."""
    h = height / 2
    prof = [(0.0, -h)]
    prof += [(radius * k / n_cap, -h) for k in range(1, n_cap + 1)]
    prof += [(radius, -h + height * k / n_side) for k in range(1, n_side)]
    prof += [(radius * k / n_cap, h) for k in range(n_cap, 0, -1)]
    prof.append((0.0, h))
    return revolve(prof, n_theta)


def capsule(length: float = 10.0, radius: float = 0.5, n_theta: int = 48,
            n_cap: int = 12, n_side: int = 60) -> TriMesh:
    """Cylinder of total length ``length`` closed by hemispheres."""
    h = length / 2 - radius
    prof = [(0.0, -h - radius)]
    for k in range(1, n_cap + 1):
        a = -np.pi / 2 + (np.pi / 2) * k / n_cap
        prof.append((radius * np.cos(a), -h + radius * np.sin(a)))
    prof += [(radius, -h + 2 * h * k / n_side) for k in range(1, n_side)]
    for k in range(n_cap, 0, -1):
        a = np.pi / 2 - (np.pi / 2) * k / n_cap
        prof.append((radius * np.cos(a), h + radius * np.sin(a)))
    prof.append((0.0, h + radius))
    return revolve(prof, n_theta)


def combine(*meshes: TriMesh) -> TriMesh:
    """Disjoint union of meshes (multiple components)."""
    vs, fs, off = [], [], 0
    for m in meshes:
        vs.append(m.vertices)
        fs.append(m.faces + off)
        off += m.n_vertices
    return TriMesh(np.vstack(vs), np.vstack(fs))


def double_torus(R: float = 1.0, r: float = 0.4, n_major: int = 32, n_minor: int = 16,
                 gap: float = 0.4) -> TriMesh:
    """Genus-2 surface: two tori with one quad removed each, joined by a square tube."""
    c = R + r + gap / 2
    a = torus(R, r, n_major, n_minor, half_cell=True)
    va = a.vertices - [c, 0, 0]
    fa = a.faces
    # torus B is the mirror image of A in the plane x = 0
    vb = va * [-1, 1, 1]
    fb = a.faces[:, ::-1] + len(va)
    n_v = n_minor
    quad = [0 * n_v + 0, 1 * n_v + 0, 1 * n_v + 1, 0 * n_v + 1]  # a00, a10, a11, a01
    hole = {0 * n_v + 0, 1 * n_v + 0, 1 * n_v + 1, 0 * n_v + 1}

    def keep(faces, offset):
        s = {x + offset for x in hole}
        return np.array([f for f in faces if not set(f) <= s])

    fa = keep(fa, 0)
    fb = keep(fb, len(va))
    qa = quad
    qb = [q + len(va) for q in quad]
    tube = []
    for k in range(4):
        p, q = qa[k], qa[(k + 1) % 4]
        rr, s = qb[(k + 1) % 4], qb[k]
        tube.append([p, q, rr])
        tube.append([p, rr, s])
    return TriMesh(np.vstack([va, vb]), np.vstack([fa, fb, np.array(tube)]))


def sphere_point_normal_displacement(mesh: TriMesh, amplitude: float, func) -> TriMesh:
    """Move each vertex along its radial direction by ``amplitude * func(unit)``."""
    x = mesh.vertices
    u = x / np.linalg.norm(x, axis=1)[:, None]
    return mesh.moved(x + amplitude * func(u)[:, None] * u)


def lowmode_field(u):
    """Smooth test function on the unit sphere, max |.| = 1, mixing l = 2 and l = 3."""
    x, y, z = u[:, 0], u[:, 1], u[:, 2]
    g = 0.5 * (3 * z**2 - 1) + 0.6 * x * y + 0.4 * x * (x**2 - 3 * y**2)
    return g / 1.3


def perturbed_sphere(level: int = 4, amplitude: float = 0.05, radius: float = 1.0) -> TriMesh:
    """Icosphere with a smooth radial displacement of the given amplitude."""
    return sphere_point_normal_displacement(icosphere(level, radius), amplitude, lowmode_field)


def spiked_sphere(level: int = 4, height: float = 0.4, width: float = 0.12,
                  tip=(0.0, 0.0, 1.0)) -> TriMesh:
    """Unit icosphere with a narrow Gaussian spike of relative ``height`` at ``tip``.

    The spike is resolved by the mesh (``width`` a few edge lengths), so its
    curvature is concentrated but smooth.
    """
    s = icosphere(level)
    u = s.vertices
    t = np.asarray(tip, dtype=float)
    t = t / np.linalg.norm(t)
    d = np.linalg.norm(u - t, axis=1)
    return s.moved(u * (1 + height * np.exp(-(d / width) ** 2))[:, None])



def add_ripple(mesh: TriMesh, tip, amplitude: float = 0.01, wavelength: float = 0.1,
               width: float = 0.12) -> TriMesh:
    """Displace ``mesh`` along its vertex normals by concentric ripples around ``tip``.

    The displacement is ``amplitude * cos(2 pi d / wavelength) * exp(-(d / width)^4)``
    with ``d`` the distance to ``tip``.
    """
    x = mesh.vertices
    d = np.linalg.norm(x - np.asarray(tip, dtype=float), axis=1)
    f = amplitude * np.cos(2 * np.pi * d / wavelength) * np.exp(-((d / width) ** 4))
    return mesh.moved(x + f[:, None] * mesh.vertex_normals)


def rippled_sphere(level: int = 5, amplitude: float = 0.01, wavelength: float = 0.1,
                   width: float = 0.12, tip=(0.0, 0.0, 1.0)) -> TriMesh:
    """Unit icosphere with ripples (see :func:`add_ripple`) near the unit vector ``tip``."""
    t = np.asarray(tip, dtype=float)
    return add_ripple(icosphere(level), t / np.linalg.norm(t), amplitude, wavelength, width)
