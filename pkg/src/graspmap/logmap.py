"""Discrete logarithmic maps: per-vertex polar coordinates about a root.

Two backends compute charts of (r, phi) for every mesh vertex:

* a fast heat backend — geodesic distance from short-time heat diffusion
  plus a connection-Laplacian solve that parallel-transports the reference
  tangent direction, so the angular coordinate is the angle between the
  transported reference and the outward radial field;
* a slow graph oracle — Dijkstra edge-graph distances with the angle taken
  from the first edge of each shortest path at the root.

All angles live in normalized intrinsic vertex coordinates: corner angles
around a vertex are rescaled to sum to 2*pi (pi on the boundary), which
keeps parallel transport well defined at vertices with angle defect.
"""

from __future__ import annotations

import json

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .mesh import MeshError, TriangleMesh

TWO_PI = 2.0 * np.pi

CHART_JSON_VERSION = 1

# a vertex whose area-weighted radial directions cancel below this fraction
# sits on the cut locus; well-formed vertices stay near 1
_RADIAL_CANCEL_TOL = 0.5


class LogmapError(ValueError):
    pass


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = np.asarray(a, dtype=np.float64)
    out = -((-a + np.pi) % TWO_PI - np.pi)
    return out


class LogmapChart:
    """Polar coordinates (r, phi) of every vertex about ``root``.

    ``phi`` is measured counterclockwise (about the root normal) from
    ``ref_dir``, the user-chosen tangent direction at the root. The root
    itself stores phi = 0 by convention; its direction is undefined.
    """

    def __init__(self, root, ref_dir, r, phi, valid):
        self.root = int(root)
        self.ref_dir = np.asarray(ref_dir, dtype=np.float64)
        self.r = np.asarray(r, dtype=np.float64)
        self.phi = np.asarray(phi, dtype=np.float64)
        self.valid = np.asarray(valid, dtype=bool)

    def __len__(self):
        return len(self.r)

    def to_point(self, vertex):
        """Stored (r, phi) of ``vertex``; raises on invalid entries."""
        vertex = int(vertex)
        if vertex < 0 or vertex >= len(self.r):
            raise LogmapError(f"vertex {vertex} outside chart of {len(self.r)}")
        if not self.valid[vertex]:
            raise LogmapError(
                f"vertex {vertex} has no valid log-map entry in chart rooted at {self.root}"
            )
        return float(self.r[vertex]), float(self.phi[vertex])

    def plane_points(self):
        """Chart-plane Cartesian embedding (r cos phi, r sin phi), (n, 2)."""
        return np.stack(
            [self.r * np.cos(self.phi), self.r * np.sin(self.phi)], axis=1
        )

    def to_json_dict(self):
        return {
            "version": CHART_JSON_VERSION,
            "root": self.root,
            "ref_dir": [float(x) for x in self.ref_dir],
            "entries": [
                {
                    "vertex": int(i),
                    "r": float(self.r[i]),
                    "phi": float(self.phi[i]),
                    "valid": bool(self.valid[i]),
                }
                for i in range(len(self.r))
            ],
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, data):
        if data.get("version") != CHART_JSON_VERSION:
            raise LogmapError(f"unsupported chart version {data.get('version')!r}")
        n = len(data["entries"])
        r = np.zeros(n)
        phi = np.zeros(n)
        valid = np.zeros(n, dtype=bool)
        for e in data["entries"]:
            i = e["vertex"]
            r[i], phi[i], valid[i] = e["r"], e["phi"], e["valid"]
        return cls(data["root"], data["ref_dir"], r, phi, valid)


# ----------------------------------------------------------------------
# intrinsic vertex fans


class VertexFans:
    """Per-vertex outgoing edge directions with normalized intrinsic angles.

    For vertex v the outgoing edges are listed counterclockwise; each gets a
    raw angle (projection into the extrinsic tangent plane) and a normalized
    angle (cumulative corner angles rescaled to 2*pi, or pi on the boundary).
    The map raw -> normalized is a piecewise-linear circle bijection used to
    express arbitrary tangent vectors in intrinsic coordinates.
    """

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        n = mesh.n_vertices
        self.neighbors = [None] * n
        self.raw = [None] * n
        self.normalized = [None] * n
        corner = mesh.corner_angles()
        for v in range(n):
            if not mesh.vertex_ok[v]:
                continue
            fan = mesh.outgoing_halfedges(v)
            nbrs = [mesh.he_dst[h] for h in fan]
            boundary = mesh.is_boundary_vertex(v)
            wedges = []
            for h in fan:
                f, i = divmod(h, 3)
                wedges.append(corner[f, i])
            if boundary:
                # trailing rim neighbor closes the open fan
                prev = 3 * (fan[-1] // 3) + (fan[-1] % 3 + 2) % 3
                nbrs.append(mesh.he_src[prev])
            total = float(np.sum(wedges))
            if total <= 0:
                continue
            scale = (np.pi if boundary else TWO_PI) / total
            norm = np.concatenate([[0.0], np.cumsum(wedges) * scale])
            if not boundary:
                norm = norm[:-1]  # cyclic: last wedge closes back to edge 0

            # raw projected angles, forced monotone CCW starting at 0
            nv = mesh.vertex_normals[v]
            t1 = mesh.vertex_tangents[v]
            t2 = mesh.vertex_bitangents[v]
            dirs = mesh.vertices[nbrs] - mesh.vertices[v]
            raw = np.arctan2(dirs @ t2, dirs @ t1)
            raw = np.mod(raw - raw[0], TWO_PI)
            for k in range(1, len(raw)):
                while raw[k] <= raw[k - 1] - 1e-12:
                    raw[k] += TWO_PI
            raw = np.minimum(raw, TWO_PI - 1e-12)

            self.neighbors[v] = np.asarray(nbrs, dtype=np.int64)
            self.raw[v] = raw
            self.normalized[v] = norm
            del nv

    def edge_angle(self, v, neighbor):
        """Normalized intrinsic angle at ``v`` of the edge toward ``neighbor``."""
        nbrs = self.neighbors[v]
        hits = np.nonzero(nbrs == neighbor)[0]
        if len(hits) == 0:
            raise LogmapError(f"{neighbor} is not adjacent to {v}")
        return float(self.normalized[v][hits[0]])

    def vector_angle(self, v, direction):
        """Normalized intrinsic angle of an extrinsic tangent vector at ``v``."""
        if self.neighbors[v] is None:
            raise LogmapError(f"vertex {v} has no tangent fan")
        t1 = self.mesh.vertex_tangents[v]
        t2 = self.mesh.vertex_bitangents[v]
        raw = float(np.mod(np.arctan2(direction @ t2, direction @ t1)
                           - self._raw0(v), TWO_PI))
        return self._raw_to_normalized(v, raw)

    def _raw0(self, v):
        # raw angles are stored relative to the first fan edge
        d = self.mesh.vertices[self.neighbors[v][0]] - self.mesh.vertices[v]
        return np.arctan2(d @ self.mesh.vertex_bitangents[v],
                          d @ self.mesh.vertex_tangents[v])

    def _raw_to_normalized(self, v, raw):
        raws = self.raw[v]
        norms = self.normalized[v]
        k = len(raws)
        j = int(np.searchsorted(raws, raw, side="right")) - 1
        j = max(0, min(j, k - 1))
        r0 = raws[j]
        n0 = norms[j]
        if j + 1 < k:
            r1, n1 = raws[j + 1], norms[j + 1]
        else:
            r1, n1 = TWO_PI, TWO_PI  # closure wedge back to edge 0
        span = max(r1 - r0, 1e-12)
        return float(np.mod(n0 + (raw - r0) / span * (n1 - n0), TWO_PI))


# ----------------------------------------------------------------------
# operators


def _cotan_laplacian(mesh: TriangleMesh):
    """PSD stiffness matrix L and lumped mass M (both n x n, real)."""
    faces = mesh.faces
    n = mesh.n_vertices
    angles = mesh.corner_angles()
    cot = 1.0 / np.tan(np.clip(angles, 1e-12, np.pi - 1e-12))
    rows, cols, vals = [], [], []
    for c in range(3):
        i = faces[:, (c + 1) % 3]
        j = faces[:, (c + 2) % 3]
        w = 0.5 * cot[:, c]
        rows.extend([i, j, i, j])
        cols.extend([j, i, i, j])
        vals.extend([-w, -w, w, w])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    L = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mass = np.zeros(n)
    third = mesh.face_areas / 3.0
    for c in range(3):
        np.add.at(mass, faces[:, c], third)
    M = sp.diags(np.maximum(mass, 1e-300))
    return L, M


def _connection_laplacian(mesh: TriangleMesh, fans: VertexFans):
    """Complex Hermitian connection Laplacian with cotan weights."""
    faces = mesh.faces
    n = mesh.n_vertices
    angles = mesh.corner_angles()
    cot = 1.0 / np.tan(np.clip(angles, 1e-12, np.pi - 1e-12))

    # normalized edge angles for both endpoints of every directed edge
    angle_at = {}
    for v in range(n):
        if fans.neighbors[v] is None:
            continue
        for nbr, a in zip(fans.neighbors[v], fans.normalized[v]):
            angle_at[(v, int(nbr))] = a

    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for c in range(3):
        i = faces[:, (c + 1) % 3]
        j = faces[:, (c + 2) % 3]
        w = 0.5 * cot[:, c]
        for fi, (a, b) in enumerate(zip(i, j)):
            wij = w[fi]
            # transport from b to a: rotate by (angle of edge a->b) + pi
            # minus (angle of edge b->a)
            rho = angle_at[(a, b)] + np.pi - angle_at[(b, a)]
            rot = np.exp(1j * rho)
            rows.extend([a, b])
            cols.extend([b, a])
            vals.extend([-wij * rot, -wij * np.conj(rot)])
            diag[a] += wij
            diag[b] += wij
    Lc = sp.csr_matrix(
        (np.asarray(vals, dtype=np.complex128), (rows, cols)), shape=(n, n)
    )
    Lc = Lc + sp.diags(diag.astype(np.complex128))
    return Lc


def _face_gradients(mesh: TriangleMesh, u):
    """Per-face gradient of a vertex scalar field, shape (m, 3)."""
    p = mesh.vertices[mesh.faces]
    N = mesh.face_normals
    A = np.maximum(mesh.face_areas, 1e-300)
    grad = np.zeros((mesh.n_faces, 3))
    for c in range(3):
        edge = p[:, (c + 2) % 3] - p[:, (c + 1) % 3]  # edge opposite corner c
        grad += u[mesh.faces[:, c]][:, None] * np.cross(N, edge)
    return grad / (2.0 * A)[:, None]


def _integrated_divergence(mesh: TriangleMesh, X):
    """Integrated divergence of a per-face vector field at each vertex."""
    p = mesh.vertices[mesh.faces]
    angles = mesh.corner_angles()
    cot = 1.0 / np.tan(np.clip(angles, 1e-12, np.pi - 1e-12))
    div = np.zeros(mesh.n_vertices)
    for c in range(3):
        i = mesh.faces[:, c]
        j = mesh.faces[:, (c + 1) % 3]
        k = mesh.faces[:, (c + 2) % 3]
        e1 = p[:, (c + 1) % 3] - p[:, c]
        e2 = p[:, (c + 2) % 3] - p[:, c]
        # cot of angle opposite each edge within the face
        contrib = 0.5 * (
            cot[:, (c + 2) % 3] * np.einsum("ij,ij->i", e1, X)
            + cot[:, (c + 1) % 3] * np.einsum("ij,ij->i", e2, X)
        )
        np.add.at(div, i, contrib)
        del j, k
    return div


# ----------------------------------------------------------------------
# heat backend


class LogmapSolver:
    """Heat-method log maps with factorizations shared across roots.

    The three sparse systems (scalar heat, connection heat, Poisson) are
    factorized once per mesh; every chart afterwards costs only
    back-substitutions, so sweeping many roots stays fast.

    Parameters
    ----------
    mesh : TriangleMesh
    t_scale : float
        Heat time is ``t_scale * mean_edge_length ** 2``.
    boundary : {"average", "neumann"}
        Scalar-heat boundary handling. The default blends the zero-Neumann
        and zero-Dirichlet solutions, which keeps distance level sets from
        bending parallel to open boundaries; plain Neumann is kept as the
        cheaper option for closed meshes (where the two are identical).
    """

    def __init__(self, mesh: TriangleMesh, t_scale=1.0, boundary="average"):
        if not mesh.is_manifold:
            raise LogmapError(
                "log maps need an edge- and vertex-manifold mesh; "
                "run the defect report on the input"
            )
        if t_scale <= 0:
            raise LogmapError("t_scale must be positive")
        if boundary not in ("neumann", "average"):
            raise LogmapError(f"unknown boundary mode {boundary!r}")
        self.mesh = mesh
        self.t_scale = float(t_scale)
        self.boundary = boundary
        self.fans = VertexFans(mesh)
        h = mesh.mean_edge_length()
        self.t = self.t_scale * h * h

        L, M = _cotan_laplacian(mesh)
        self._L = L
        self._M = M
        try:
            self._heat = spla.splu((M + self.t * L).tocsc())
            # tiny diagonal shift removes the constant-vector nullspace
            shift = 1e-10 * float(M.diagonal().mean())
            self._poisson = spla.splu((L + shift * sp.identity(L.shape[0])).tocsc())
            Lc = _connection_laplacian(mesh, self.fans)
            Mc = M.astype(np.complex128)
            self._vector_heat = spla.splu((Mc + self.t * Lc).tocsc())
        except RuntimeError as exc:
            raise LogmapError(f"singular heat system ({exc}); "
                              "check for degenerate faces") from exc

        self._boundary_mask = np.array(
            [mesh.is_boundary_vertex(v) for v in range(mesh.n_vertices)]
        )
        self._dirichlet = None
        if boundary == "average" and self._boundary_mask.any():
            interior = np.nonzero(~self._boundary_mask)[0]
            self._interior = interior
            A = (M + self.t * L).tocsr()[interior][:, interior].tocsc()
            self._dirichlet = spla.splu(A)

        adj = sp.csr_matrix(
            (
                np.ones(len(mesh.edges)),
                (mesh.edges[:, 0], mesh.edges[:, 1]),
            ),
            shape=(mesh.n_vertices, mesh.n_vertices),
        )
        _, self._component = csgraph.connected_components(adj, directed=False)

    # ..................................................................

    def _heat_solution(self, root):
        n = self.mesh.n_vertices
        delta = np.zeros(n)
        delta[root] = 1.0
        u = self._heat.solve(delta)
        if self._dirichlet is not None:
            ud = np.zeros(n)
            rhs = delta[self._interior]
            ud[self._interior] = self._dirichlet.solve(rhs)
            u = 0.5 * (u + ud)
        return u

    def distance(self, root):
        """Heat-method geodesic distance from ``root`` to every vertex."""
        u = self._heat_solution(root)
        grad = _face_gradients(self.mesh, u)
        norms = np.linalg.norm(grad, axis=1)
        X = -grad / np.maximum(norms, 1e-300)[:, None]
        X[norms < 1e-300] = 0.0
        div = _integrated_divergence(self.mesh, X)
        # stiffness L here discretizes the negative Laplacian, so the
        # Poisson step solves L r = -div for increasing distance
        r = self._poisson.solve(-div)
        r = r - r[root]
        return r, X

    def chart(self, root, ref_dir) -> LogmapChart:
        mesh = self.mesh
        root = int(root)
        if root < 0 or root >= mesh.n_vertices or not mesh.vertex_ok[root]:
            raise LogmapError(f"invalid root vertex {root}")
        e0 = self._project_ref(root, ref_dir)

        r, X = self.distance(root)
        same = self._component == self._component[root]
        valid = mesh.vertex_ok & same
        r = np.where(valid, np.maximum(r, 0.0), np.nan)

        # transported reference direction (complex, intrinsic coordinates)
        n = mesh.n_vertices
        b = np.zeros(n, dtype=np.complex128)
        b[root] = np.exp(1j * self.fans.vector_angle(root, e0))
        h = self._vector_heat.solve(b)
        mag = np.abs(h)
        ok = mag > 1e-300
        href = np.where(ok, h / np.where(ok, mag, 1.0), 0.0)

        # outward radial direction per vertex from area-weighted face field
        radial = np.zeros((n, 3))
        wsum = np.zeros(n)
        w = mesh.face_areas[:, None] * X
        for c in range(3):
            np.add.at(radial, mesh.faces[:, c], w)
            np.add.at(wsum, mesh.faces[:, c], mesh.face_areas)

        phi = np.zeros(n)
        for v in range(n):
            if not valid[v] or v == root:
                continue
            if not ok[v]:
                valid[v] = False
                continue
            nv = mesh.vertex_normals[v]
            rv = radial[v] - np.dot(radial[v], nv) * nv
            ln = np.linalg.norm(rv)
            if ln < _RADIAL_CANCEL_TOL * wsum[v]:
                # adjacent unit radial directions cancel: the vertex sits on
                # the cut locus (e.g. a sphere antipode), where the geodesic
                # direction is genuinely ambiguous
                valid[v] = False
                continue
            ang_r = self.fans.vector_angle(v, rv / ln)
            phi[v] = wrap_angle(ang_r - np.angle(href[v]))

        r = np.where(valid, r, 0.0)
        r[root] = 0.0
        phi[root] = 0.0
        return LogmapChart(root, e0, r, phi, valid)

    def _project_ref(self, root, ref_dir):
        if ref_dir is None:
            return self.mesh.vertex_tangents[root].copy()
        ref = np.asarray(ref_dir, dtype=np.float64)
        if ref.shape != (3,) or not np.all(np.isfinite(ref)):
            raise LogmapError("reference direction must be a finite 3-vector")
        nrm = self.mesh.vertex_normals[root]
        ref = ref - np.dot(ref, nrm) * nrm
        ln = np.linalg.norm(ref)
        if ln < 1e-12:
            raise LogmapError(
                "reference direction vanishes in the root tangent plane"
            )
        return ref / ln


def compute_logmap_heat(mesh, root, ref_dir, t_scale=1.0, boundary="average"):
    """One-shot heat-backend chart; reuse :class:`LogmapSolver` for sweeps."""
    return LogmapSolver(mesh, t_scale=t_scale, boundary=boundary).chart(root, ref_dir)


# ----------------------------------------------------------------------
# graph oracle backend


def _unfolded_shortcuts(mesh: TriangleMesh):
    """Apex-to-apex arcs across each interior edge, at unfolded flat length.

    Rotating one face of an adjacent pair into the plane of the other turns
    the two-face strip into flat geometry; when the straight apex-to-apex
    segment crosses the shared edge, its length is a genuine surface path.
    Adding these arcs to the edge graph roughly halves the graph-metric
    stretch, which pure edge paths pay on any triangulation.

    Returns (src, dst, weight, direction) arrays; ``direction`` is the unit
    3D start direction of the arc inside the face incident to ``src``.
    """
    h = np.nonzero(mesh.twin >= 0)[0]
    h = h[h < mesh.twin[h]]
    if len(h) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0), np.zeros((0, 3))
    t = mesh.twin[h]
    nxt = lambda a: 3 * (a // 3) + (a % 3 + 1) % 3
    i = mesh.he_src[h]
    j = mesh.he_dst[h]
    k = mesh.he_dst[nxt(h)]
    l = mesh.he_dst[nxt(t)]

    vi = mesh.vertices[i]
    vj = mesh.vertices[j]
    vk = mesh.vertices[k]
    vl = mesh.vertices[l]
    n1 = mesh.face_normals[h // 3]
    n2 = mesh.face_normals[t // 3]

    lij = np.linalg.norm(vj - vi, axis=1)
    ok = lij > 1e-300
    axis = (vj - vi) / np.maximum(lij, 1e-300)[:, None]

    # rotate face 2 about the shared edge until coplanar with face 1;
    # both normals are perpendicular to the edge, so the rotation angle
    # comes straight from their dot and axis-projected cross products
    cos_t = np.einsum("ij,ij->i", n1, n2)
    sin_t = np.einsum("ij,ij->i", axis, np.cross(n2, n1))

    def rotate(p, base, s):
        # Rodrigues rotation of (p - base) about axis by +/- theta
        d = p - base
        para = np.einsum("ij,ij->i", d, axis)[:, None] * axis
        perp = d - para
        return base + para + cos_t[:, None] * perp + s[:, None] * np.cross(axis, perp)

    l_in_1 = rotate(vl, vi, sin_t)
    k_in_2 = rotate(vk, vi, -sin_t)

    # keep only arcs whose straight segment actually crosses the shared edge
    y_hat = np.cross(n1, axis)
    kx = np.einsum("ij,ij->i", vk - vi, axis)
    ky = np.einsum("ij,ij->i", vk - vi, y_hat)
    lx = np.einsum("ij,ij->i", l_in_1 - vi, axis)
    ly = np.einsum("ij,ij->i", l_in_1 - vi, y_hat)
    ok &= (ky > 0) & (ly < 0)
    frac = ky / np.maximum(ky - ly, 1e-300)
    xc = kx + (lx - kx) * frac
    ok &= (xc >= 0.0) & (xc <= lij)

    w = np.linalg.norm(l_in_1 - vk, axis=1)
    ok &= w > 1e-300
    d_kl = (l_in_1 - vk) / np.maximum(w, 1e-300)[:, None]
    d_lk = (k_in_2 - vl) / np.maximum(w, 1e-300)[:, None]

    src = np.concatenate([k[ok], l[ok]])
    dst = np.concatenate([l[ok], k[ok]])
    weight = np.concatenate([w[ok], w[ok]])
    direction = np.concatenate([d_kl[ok], d_lk[ok]])
    return src, dst, weight, direction


def compute_logmap_oracle(mesh: TriangleMesh, root, ref_dir) -> LogmapChart:
    """Shortest-path log map: Dijkstra distances, first-hop angles.

    Runs on the edge graph augmented with unfolded apex-to-apex shortcuts,
    which keeps the graph-metric overestimate of true geodesics to a few
    percent. Slower and coarser than the heat backend but independent of
    it, which makes the pair a useful cross-check.
    """
    root = int(root)
    if root < 0 or root >= mesh.n_vertices or not mesh.vertex_ok[root]:
        raise LogmapError(f"invalid root vertex {root}")
    fans = VertexFans(mesh)
    if ref_dir is None:
        ref = mesh.vertex_tangents[root].copy()
    else:
        nrm = mesh.vertex_normals[root]
        ref = np.asarray(ref_dir, dtype=np.float64)
        ref = ref - np.dot(ref, nrm) * nrm
        ln = np.linalg.norm(ref)
        if ln < 1e-12:
            raise LogmapError(
                "reference direction vanishes in the root tangent plane"
            )
        ref = ref / ln
    ref_angle = fans.vector_angle(root, ref)

    e = mesh.edges
    lengths = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
    s_src, s_dst, s_w, s_dir = _unfolded_shortcuts(mesh)
    src = np.concatenate([e[:, 0], e[:, 1], s_src])
    dst = np.concatenate([e[:, 1], e[:, 0], s_dst])
    wgt = np.concatenate([lengths, lengths, s_w])

    # parallel arcs (an apex pair can also share a mesh edge) must keep the
    # minimum weight; coo duplicate handling would sum them instead
    n = mesh.n_vertices
    key = src * n + dst
    order = np.lexsort((wgt, key))
    key, src, dst, wgt = key[order], src[order], dst[order], wgt[order]
    keep = np.ones(len(key), dtype=bool)
    keep[1:] = key[1:] != key[:-1]
    src, dst, wgt = src[keep], dst[keep], wgt[keep]

    graph = sp.csr_matrix((wgt, (src, dst)), shape=(n, n))
    dist, pred = csgraph.dijkstra(
        graph, directed=True, indices=root, return_predecessors=True
    )

    # fan angle of every arc leaving the root, for the first-hop convention;
    # a mesh edge is never longer than an unfolded strip path to the same
    # vertex, so edges take precedence over shortcuts
    root_angle = {}
    from_root = np.nonzero(s_src == root)[0]
    from_root = from_root[np.argsort(s_w[from_root])[::-1]]
    for a in from_root:
        root_angle[int(s_dst[a])] = fans.vector_angle(root, s_dir[a])
    for v in mesh.vertex_neighbors(root):
        root_angle[int(v)] = fans.edge_angle(root, v)

    valid = np.isfinite(dist) & mesh.vertex_ok
    # first hop of each shortest path, filled in order of increasing distance
    first = np.full(n, -1, dtype=np.int64)
    order = np.argsort(dist)
    for v in order:
        if v == root or not valid[v]:
            continue
        p = pred[v]
        if p == root:
            first[v] = v
        elif p >= 0:
            first[v] = first[p]

    phi = np.zeros(n)
    for v in range(n):
        if not valid[v] or v == root:
            continue
        if first[v] < 0 or first[v] not in root_angle:
            valid[v] = False
            continue
        phi[v] = wrap_angle(root_angle[first[v]] - ref_angle)

    r = np.where(valid, dist, 0.0)
    r[root] = 0.0
    phi[root] = 0.0
    return LogmapChart(root, ref, r, phi, valid)


def logmap_to_point(chart: LogmapChart, vertex):
    """Stored (r, phi) for ``vertex``; errors name the vertex and chart."""
    return chart.to_point(vertex)
