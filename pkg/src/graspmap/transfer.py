"""Patch transfer between surfaces by log-map coordinate matching.

A patch on the object and a target site on the skin each get a log-map
chart; every interpolation-boundary vertex then maps to the skin vertex
whose chart coordinates are closest. Matching happens in the chart plane
(r cos phi, r sin phi), which dodges the angular seam and weights angle
error by radius. Four user parameters steer the whole thing: the two chart
roots and the two reference tangent directions.
"""

from __future__ import annotations

import warnings

import numpy as np

from .logmap import LogmapChart
from .mesh import SpatialIndex, TriangleMesh
from .patch import ContactPatch

DEFAULT_RADIUS_MULTIPLIER = 1.5


class TransferError(ValueError):
    pass


class TransferWarning(UserWarning):
    """Non-fatal transfer degradations (unreachable members)."""


class TransferSpec:
    """The four user-adjustable transfer parameters plus the search budget.

    ``object_dir`` and ``skin_dir`` are reference tangent directions at the
    two roots; arbitrary vectors are accepted and projected/normalized on
    validation against the meshes.
    """

    def __init__(self, object_root, skin_root, object_dir, skin_dir,
                 radius_multiplier=DEFAULT_RADIUS_MULTIPLIER):
        self.object_root = int(object_root)
        self.skin_root = int(skin_root)
        self.object_dir = np.asarray(object_dir, dtype=np.float64)
        self.skin_dir = np.asarray(skin_dir, dtype=np.float64)
        self.radius_multiplier = float(radius_multiplier)
        if self.radius_multiplier <= 0:
            raise TransferError("radius multiplier must be positive")

    def validated(self, object_mesh: TriangleMesh, skin_mesh: TriangleMesh):
        """Return a copy with directions projected into the tangent planes."""
        if not (0 <= self.object_root < object_mesh.n_vertices):
            raise TransferError(f"object root {self.object_root} out of range")
        if not (0 <= self.skin_root < skin_mesh.n_vertices):
            raise TransferError(f"skin root {self.skin_root} out of range")
        obj_dir = _project_unit(self.object_dir,
                                object_mesh.vertex_normals[self.object_root],
                                "object")
        skin_dir = _project_unit(self.skin_dir,
                                 skin_mesh.vertex_normals[self.skin_root],
                                 "skin")
        return TransferSpec(self.object_root, self.skin_root, obj_dir, skin_dir,
                            self.radius_multiplier)

    def to_json_dict(self):
        return {
            "object_root": self.object_root,
            "skin_root": self.skin_root,
            "object_dir": [float(x) for x in self.object_dir],
            "skin_dir": [float(x) for x in self.skin_dir],
            "radius_multiplier": self.radius_multiplier,
        }

    @classmethod
    def from_json_dict(cls, data):
        return cls(
            data["object_root"], data["skin_root"],
            data["object_dir"], data["skin_dir"],
            data.get("radius_multiplier", DEFAULT_RADIUS_MULTIPLIER),
        )


def _project_unit(vec, normal, which):
    v = vec - np.dot(vec, normal) * normal
    ln = np.linalg.norm(v)
    if ln < 1e-12:
        raise TransferError(
            f"{which} tangent direction vanishes in the root tangent plane"
        )
    return v / ln


class Correspondence:
    """Matched (object vertex, skin vertex) pairs with chart-plane residuals.

    The first pair is always root-to-root with residual 0. Pairs whose
    target had no candidate within the search radius carry
    ``reachable = False`` and a skin vertex of -1; downstream consumers drop
    them (with a warning at transfer time).
    """

    def __init__(self, pairs, residuals, reachable):
        self.pairs = [(int(a), int(b)) for a, b in pairs]
        self.residuals = np.asarray(residuals, dtype=np.float64)
        self.reachable = np.asarray(reachable, dtype=bool)
        if len(self.pairs) != len(self.residuals) or len(self.pairs) != len(
            self.reachable
        ):
            raise TransferError("pairs, residuals and flags must align")

    def __len__(self):
        return len(self.pairs)

    def reachable_pairs(self):
        return [p for p, ok in zip(self.pairs, self.reachable) if ok]

    def to_json_dict(self):
        return {
            "pairs": [[a, b] for a, b in self.pairs],
            "residuals": [float(x) for x in self.residuals],
            "reachable": [bool(x) for x in self.reachable],
        }

    @classmethod
    def from_json_dict(cls, data):
        return cls(data["pairs"], data["residuals"], data["reachable"])


def transfer_patch(patch: ContactPatch, spec: TransferSpec,
                   object_chart: LogmapChart,
                   skin_chart: LogmapChart) -> Correspondence:
    """Map the patch root and every IB member onto the skin (one pair each).

    Matching minimizes squared chart-plane distance over skin vertices whose
    chart radius is at most ``radius_multiplier`` times the largest patch
    radius; ties go to the lowest vertex id. A member whose nearest
    candidate is farther than that same search radius (or whose own chart
    entry is invalid) is flagged unreachable and warned about, not failed.
    """
    if object_chart.root != spec.object_root:
        raise TransferError(
            f"object chart rooted at {object_chart.root}, spec says "
            f"{spec.object_root}"
        )
    if skin_chart.root != spec.skin_root:
        raise TransferError(
            f"skin chart rooted at {skin_chart.root}, spec says {spec.skin_root}"
        )

    members = [int(v) for v in patch.ib]
    obj_pts = object_chart.plane_points()

    patch_radius = 0.0
    member_ok = []
    for v in members:
        if object_chart.valid[v]:
            patch_radius = max(patch_radius, float(object_chart.r[v]))
            member_ok.append(True)
        else:
            member_ok.append(False)
    search_radius = spec.radius_multiplier * patch_radius

    # candidate ids are ascending, so the index's positional tie-break
    # (lowest position) is exactly the lowest-vertex-id rule
    cand = np.nonzero(skin_chart.valid & (skin_chart.r <= search_radius))[0]
    skin_pts = skin_chart.plane_points()
    index = None
    if len(cand):
        flat = np.zeros((len(cand), 3))
        flat[:, :2] = skin_pts[cand]
        index = SpatialIndex(flat)

    pairs = [(spec.object_root, spec.skin_root)]
    residuals = [0.0]
    reachable = [True]
    for v, ok in zip(members, member_ok):
        if not ok or index is None:
            pairs.append((v, -1))
            residuals.append(np.inf)
            reachable.append(False)
            continue
        q = np.zeros(3)
        q[:2] = obj_pts[v]
        pos, dist = index.nearest(q)
        if dist > search_radius:
            pairs.append((v, -1))
            residuals.append(np.inf)
            reachable.append(False)
        else:
            pairs.append((v, int(cand[pos])))
            residuals.append(dist)
            reachable.append(True)

    corr = Correspondence(pairs, residuals, reachable)
    dropped = np.count_nonzero(~corr.reachable)
    if dropped:
        warnings.warn(
            f"{dropped} of {len(members)} transferred members unreachable "
            f"within search radius {search_radius:.4g}; they will be dropped",
            TransferWarning,
            stacklevel=2,
        )
    return corr
