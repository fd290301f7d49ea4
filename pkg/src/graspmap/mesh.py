"""Manifold triangle mesh with half-edge connectivity and spatial queries.

The mesh is immutable after construction: connectivity, normals and tangent
bases are computed once and shared read-only by every downstream module.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


class MeshError(ValueError):
    """Raised for meshes that violate a structural precondition."""


class TriangleMesh:
    """Indexed triangle mesh with half-edge connectivity.

    Half-edge ``h = 3*f + i`` runs from ``faces[f, i]`` to
    ``faces[f, (i+1) % 3]``. ``twin[h]`` is the opposite half-edge or -1 on
    the boundary; ``next`` is implicit (``3*f + (i+1) % 3``).

    Parameters
    ----------
    vertices : (n, 3) float array
        Vertex positions.
    faces : (m, 3) int array
        Triangles, consistently counterclockwise when viewed from outside.
    """

    def __init__(self, vertices, faces):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must be (n, 3)")
        if self.faces.size and (self.faces.ndim != 2 or self.faces.shape[1] != 3):
            raise MeshError("faces must be (m, 3)")
        if self.faces.size == 0:
            raise MeshError("empty mesh: no faces")
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise MeshError("face vertex index out of range")
        if np.any(
            (self.faces[:, 0] == self.faces[:, 1])
            | (self.faces[:, 1] == self.faces[:, 2])
            | (self.faces[:, 2] == self.faces[:, 0])
        ):
            raise MeshError("degenerate face with repeated vertex")
        self._build_connectivity()
        self._compute_face_data()
        self._compute_vertex_data()

    # ------------------------------------------------------------------
    # connectivity

    def _build_connectivity(self):
        nf = len(self.faces)
        nh = 3 * nf
        src = self.faces.reshape(-1)
        dst = self.faces[:, [1, 2, 0]].reshape(-1)
        self.he_src = src
        self.he_dst = dst

        index = {}
        twin = np.full(nh, -1, dtype=np.int64)
        self._edge_manifold = True
        self._duplicate_edges = []
        for h in range(nh):
            key = (src[h], dst[h])
            if key in index:
                # same directed edge twice: non-manifold or flipped winding
                self._edge_manifold = False
                self._duplicate_edges.append(key)
            index[key] = h
        for h in range(nh):
            t = index.get((dst[h], src[h]), -1)
            twin[h] = t
        self.twin = twin

        # undirected edge count (uniques over sorted pairs)
        und = np.sort(np.stack([src, dst], axis=1), axis=1)
        self._edges = np.unique(und, axis=0)

        # one outgoing half-edge per vertex (lowest id, refined to the most
        # clockwise one for boundary vertices so CCW fans start at the rim)
        out = np.full(len(self.vertices), -1, dtype=np.int64)
        for h in range(nh - 1, -1, -1):
            out[src[h]] = h
        self.vertex_out = out
        self._orient_boundary_starts()
        self._check_vertex_manifold()

    def _orient_boundary_starts(self):
        for v in range(len(self.vertices)):
            h = self.vertex_out[v]
            if h < 0:
                continue
            # walk clockwise until hitting the boundary or wrapping around
            start = h
            steps = 0
            while True:
                t = self.twin[h]
                if t < 0:
                    self.vertex_out[v] = h
                    break
                h = 3 * (t // 3) + (t % 3 + 1) % 3  # next(twin(h))
                steps += 1
                if h == start or steps > 3 * len(self.faces):
                    break

    def _check_vertex_manifold(self):
        counts = np.bincount(self.he_src, minlength=len(self.vertices))
        bad = []
        for v in range(len(self.vertices)):
            if counts[v] == 0:
                continue
            if len(self.outgoing_halfedges(v)) != counts[v]:
                bad.append(v)
        self._non_manifold_vertices = bad
        self._vertex_manifold = not bad

    def outgoing_halfedges(self, v):
        """Outgoing half-edges of ``v`` in counterclockwise order."""
        h = self.vertex_out[v]
        if h < 0:
            return []
        fan = []
        start = h
        while True:
            fan.append(h)
            prev = 3 * (h // 3) + (h % 3 + 2) % 3
            t = self.twin[prev]
            if t < 0 or t == start:
                break
            h = t
            if len(fan) > 3 * len(self.faces):
                break
        return fan

    def vertex_neighbors(self, v):
        """Neighbor vertex ids of ``v`` in counterclockwise fan order."""
        fan = [self.he_dst[h] for h in self.outgoing_halfedges(v)]
        if self.is_boundary_vertex(v) and fan:
            # the open fan misses the trailing rim neighbor
            last = self.outgoing_halfedges(v)[-1]
            prev = 3 * (last // 3) + (last % 3 + 2) % 3
            fan.append(self.he_src[prev])
        return fan

    def is_boundary_vertex(self, v):
        h = self.vertex_out[v]
        if h < 0:
            return False
        prev = 3 * (h // 3) + (h % 3 + 2) % 3
        return self.twin[prev] < 0 or any(
            self.twin[g] < 0 for g in self.outgoing_halfedges(v)
        )

    # ------------------------------------------------------------------
    # geometry

    def _compute_face_data(self):
        p = self.vertices[self.faces]
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        norms = np.linalg.norm(cross, axis=1)
        self.face_areas = 0.5 * norms
        safe = np.where(norms > 0, norms, 1.0)
        self.face_normals = cross / safe[:, None]

    def _compute_vertex_data(self):
        n = len(self.vertices)
        acc = np.zeros((n, 3))
        # cross products are area-weighted face normals (factor 2 uniform)
        p = self.vertices[self.faces]
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        for i in range(3):
            np.add.at(acc, self.faces[:, i], cross)
        lens = np.linalg.norm(acc, axis=1)
        self.vertex_ok = np.bincount(self.he_src, minlength=n) > 0
        self.vertex_ok &= lens > 1e-300
        safe = np.where(lens > 1e-300, lens, 1.0)
        self.vertex_normals = acc / safe[:, None]
        self.vertex_normals[~self.vertex_ok] = 0.0

        # tangent basis: e1 = fan-start outgoing edge projected to the
        # tangent plane, e2 = n x e1
        t1 = np.zeros((n, 3))
        t2 = np.zeros((n, 3))
        for v in range(n):
            if not self.vertex_ok[v]:
                continue
            h = self.vertex_out[v]
            e = self.vertices[self.he_dst[h]] - self.vertices[v]
            nv = self.vertex_normals[v]
            e = e - np.dot(e, nv) * nv
            ln = np.linalg.norm(e)
            if ln < 1e-300:
                # edge parallel to the normal; fall back to any orthogonal
                e = np.cross(nv, [1.0, 0.0, 0.0])
                if np.linalg.norm(e) < 1e-8:
                    e = np.cross(nv, [0.0, 1.0, 0.0])
                ln = np.linalg.norm(e)
            t1[v] = e / ln
            t2[v] = np.cross(nv, t1[v])
        self.vertex_tangents = t1
        self.vertex_bitangents = t2

    # ------------------------------------------------------------------
    # derived quantities

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_edges(self):
        return len(self._edges)

    @property
    def edges(self):
        """Undirected edges as a sorted (e, 2) index array."""
        return self._edges

    @property
    def n_boundary_edges(self):
        return int(np.sum(self.twin < 0))

    @property
    def is_edge_manifold(self):
        return self._edge_manifold

    @property
    def is_vertex_manifold(self):
        return self._vertex_manifold

    @property
    def is_manifold(self):
        return self._edge_manifold and self._vertex_manifold

    @property
    def is_closed(self):
        return self.n_boundary_edges == 0

    def defect_report(self):
        """Structural defects by offending element, for ingest diagnostics."""
        return {
            "duplicate_directed_edges": [
                (int(a), int(b)) for a, b in self._duplicate_edges
            ],
            "non_manifold_vertices": [int(v) for v in self._non_manifold_vertices],
            "isolated_vertices": [int(v) for v in np.nonzero(self.vertex_out < 0)[0]],
        }

    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces

    def edge_lengths(self):
        e = self._edges
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    def mean_edge_length(self):
        return float(self.edge_lengths().mean())

    def bbox_diagonal(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def corner_angles(self):
        """Per-face corner angles, shape (m, 3); entry i is at faces[:, i]."""
        p = self.vertices[self.faces]
        ang = np.empty((len(self.faces), 3))
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            na = np.linalg.norm(a, axis=1)
            nb = np.linalg.norm(b, axis=1)
            cosang = np.einsum("ij,ij->i", a, b) / np.maximum(na * nb, 1e-300)
            ang[:, i] = np.arccos(np.clip(cosang, -1.0, 1.0))
        return ang

    def transformed(self, rotation=None, translation=None, scale=1.0):
        """Return a copy with vertices mapped through ``scale*R*x + t``."""
        v = self.vertices * float(scale)
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=np.float64).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=np.float64)
        return TriangleMesh(v, self.faces)


class SpatialIndex:
    """Exact nearest-neighbor index over a fixed point set.

    Backed by a KD-tree; queries return the true minimum distance, with
    ties resolved to the lowest point id.
    """

    def __init__(self, points):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        if self.points.ndim != 2 or len(self.points) == 0:
            raise ValueError("index requires a non-empty (n, d) point set")
        self._tree = cKDTree(self.points)

    def __len__(self):
        return len(self.points)

    def nearest(self, query):
        """Return ``(point id, distance)`` of the nearest indexed point."""
        query = np.asarray(query, dtype=np.float64)
        d, i = self._tree.query(query)
        # re-query a shell around the minimum so exact ties break to low ids
        ids = self._tree.query_ball_point(query, d * (1.0 + 1e-12) + 1e-300)
        if ids:
            dists = np.linalg.norm(self.points[ids] - query, axis=1)
            close = [j for j, dj in zip(ids, dists) if dj <= d + 1e-15 * (1.0 + d)]
            if close:
                i = min(close)
        return int(i), float(d)

    def nearest_many(self, queries):
        """Vectorized nearest query without tie-break refinement."""
        d, i = self._tree.query(np.asarray(queries, dtype=np.float64))
        return i.astype(np.int64), d


def nearest_vertex(index: SpatialIndex, query):
    """Exact nearest point id and distance (ties to the lowest id)."""
    return index.nearest(query)
