"""Procedural test and demo geometry: planar grids, icospheres, boxes."""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh


def planar_grid(nx=16, ny=None, spacing=1.0, origin=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Regular triangulated grid in the z=0 plane.

    ``nx`` and ``ny`` count vertices per side. Cell diagonals alternate with
    cell parity so the triangulation has no preferred direction; a fixed
    diagonal noticeably skews discrete operators on the lattice. Vertex
    ``(i, j)`` has index ``j * nx + i``.
    """
    if ny is None:
        ny = nx
    xs = np.arange(nx) * spacing + origin[0]
    ys = np.arange(ny) * spacing + origin[1]
    xx, yy = np.meshgrid(xs, ys)
    verts = np.stack([xx.ravel(), yy.ravel(), np.full(nx * ny, origin[2])], axis=1)
    faces = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i
            b = a + 1
            c = a + nx
            d = c + 1
            if (i + j) % 2 == 0:
                faces.append([a, b, d])
                faces.append([a, d, c])
            else:
                faces.append([a, b, c])
                faces.append([b, d, c])
    return TriangleMesh(verts, np.asarray(faces, dtype=np.int64))


def icosahedron(radius=1.0) -> tuple[np.ndarray, np.ndarray]:
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    verts *= radius / np.linalg.norm(verts[0])
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return verts, faces


def icosphere(subdivisions=2, radius=1.0) -> TriangleMesh:
    """Subdivided icosahedron projected onto the sphere.

    Each subdivision maps (V, E, F) to (V + E, 2E + 3F, 4F), so counts grow
    from (12, 30, 20) to 162 vertices / 320 faces at two subdivisions and
    10242 vertices at five.
    """
    verts, faces = icosahedron(radius)
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
        verts = verts * (radius / np.linalg.norm(verts, axis=1))[:, None]
    return TriangleMesh(verts, faces)


def _subdivide(verts, faces):
    verts = list(map(np.asarray, verts))
    midpoint = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in midpoint:
            midpoint[key] = len(verts)
            verts.append(0.5 * (verts[a] + verts[b]))
        return midpoint[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        out.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]])
    return np.asarray(verts), np.asarray(out, dtype=np.int64)


def box(extents=(1.0, 1.0, 1.0), subdivisions=0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Axis-aligned closed box, optionally with subdivided faces.

    ``subdivisions`` n splits each face into a (n+1)x(n+1) quad grid before
    triangulation, which keeps patches on box surfaces reasonably isotropic.
    """
    n = subdivisions + 1
    ex, ey, ez = [float(e) / 2.0 for e in extents]
    planes = [
        (np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), ez, ex, ey),
        (np.array([0, 0, -1.0]), np.array([0, 1.0, 0]), np.array([1.0, 0, 0]), ez, ey, ex),
        (np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]), ex, ey, ez),
        (np.array([-1.0, 0, 0]), np.array([0, 0, 1.0]), np.array([0, 1.0, 0]), ex, ez, ey),
        (np.array([0, 1.0, 0]), np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), ey, ez, ex),
        (np.array([0, -1.0, 0]), np.array([1.0, 0, 0]), np.array([0, 0, 1.0]), ey, ex, ez),
    ]
    verts = []
    faces = []
    for normal, u, v, dn, du, dv in planes:
        base = len(verts)
        us = np.linspace(-du, du, n + 1)
        vs = np.linspace(-dv, dv, n + 1)
        for b in vs:
            for a in us:
                verts.append(normal * dn + u * a + v * b)
        for j in range(n):
            for i in range(n):
                p = base + j * (n + 1) + i
                q = p + 1
                r = p + (n + 1)
                s = r + 1
                faces.append([p, q, s])
                faces.append([p, s, r])
    verts = np.asarray(verts) + np.asarray(center, dtype=np.float64)
    from .meshio import clean_geometry

    verts, faces = clean_geometry(verts, np.asarray(faces, dtype=np.int64))
    return TriangleMesh(verts, faces)
