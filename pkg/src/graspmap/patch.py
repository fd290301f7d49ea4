"""Contact patches: root vertex, boundary set, and interpolation boundary.

A patch marks a contact region on a mesh by its root vertex (the chart
anchor), the full boundary vertex set, and a small ordered subset of the
boundary (the interpolation boundary) that downstream transfer actually
matches. Patches arrive from annotation files or from per-vertex contact
scalars; this module only validates and downsamples, it does not segment.
"""

from __future__ import annotations

import json

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .mesh import TriangleMesh

PATCH_JSON_VERSION = 1

IB_MIN = 20
IB_MAX = 30
IB_DEFAULT = 25


class PatchError(ValueError):
    pass


class ContactPatch:
    """Contact region: root ``pr``, boundary ``pb``, interpolation set ``ib``.

    ``ib`` is an ordered subset of ``pb`` with between ``IB_MIN`` and
    ``IB_MAX`` members, except that boundaries smaller than ``IB_MIN`` are
    kept whole. Order is by angle about the boundary centroid so that a
    patch produces the same correspondence sequence on every run.
    """

    def __init__(self, mesh: TriangleMesh, pr, pb, ib=None, label=None):
        self.mesh = mesh
        self.pr = int(pr)
        self.pb = np.asarray(pb, dtype=np.int64)
        self.label = label
        if self.pb.size == 0:
            raise PatchError(f"patch {label!r}: empty boundary")
        n = mesh.n_vertices
        if not (0 <= self.pr < n):
            raise PatchError(f"patch {label!r}: root {self.pr} out of range")
        if self.pb.min() < 0 or self.pb.max() >= n:
            raise PatchError(f"patch {label!r}: boundary id out of range")
        if len(np.unique(self.pb)) != len(self.pb):
            raise PatchError(f"patch {label!r}: duplicate boundary ids")

        if ib is None:
            k = min(IB_DEFAULT, len(self.pb))
            self.ib = downsample_boundary(self.pb, mesh, k)
        else:
            self.ib = np.asarray(ib, dtype=np.int64)
        self._validate_ib()

    def _validate_ib(self):
        if not np.isin(self.ib, self.pb).all():
            raise PatchError(f"patch {self.label!r}: ib is not a subset of pb")
        if len(np.unique(self.ib)) != len(self.ib):
            raise PatchError(f"patch {self.label!r}: duplicate ib ids")
        if len(self.pb) < IB_MIN:
            if len(self.ib) != len(self.pb):
                raise PatchError(
                    f"patch {self.label!r}: boundary smaller than {IB_MIN} "
                    "must keep ib = pb"
                )
        elif not (IB_MIN <= len(self.ib) <= IB_MAX):
            raise PatchError(
                f"patch {self.label!r}: |ib| = {len(self.ib)} outside "
                f"[{IB_MIN}, {IB_MAX}]"
            )

    def to_json_dict(self):
        return {
            "label": self.label,
            "pr": self.pr,
            "pb": [int(v) for v in self.pb],
            "ib": [int(v) for v in self.ib],
        }


def downsample_boundary(boundary, mesh: TriangleMesh, k) -> np.ndarray:
    """Farthest-point subsample of ``boundary``, ordered about its centroid.

    Sampling starts at the lowest boundary id and greedily adds the point
    farthest (Euclidean) from the chosen set, which spreads samples evenly
    over the boundary. The result is then sorted by angle about the boundary
    centroid (in its average-normal plane) for a reproducible traversal
    order; angle ties fall back to vertex id.
    """
    boundary = np.asarray(sorted(set(int(v) for v in boundary)), dtype=np.int64)
    if boundary.size == 0:
        raise PatchError("empty boundary")
    k = int(k)
    if k < 1:
        raise PatchError("k must be >= 1")
    pts = mesh.vertices[boundary]

    if k >= len(boundary):
        chosen = np.arange(len(boundary))
    else:
        chosen = [0]  # lowest id comes first after the sort above
        d = np.linalg.norm(pts - pts[0], axis=1)
        while len(chosen) < k:
            far = int(np.argmax(d))
            chosen.append(far)
            d = np.minimum(d, np.linalg.norm(pts - pts[far], axis=1))
        chosen = np.asarray(chosen)

    sel = boundary[chosen]
    c = pts.mean(axis=0)
    nrm = mesh.vertex_normals[boundary].sum(axis=0)
    ln = np.linalg.norm(nrm)
    if ln < 1e-12:
        # degenerate normal average (e.g. closed tube); any fixed axis works
        nrm = np.array([0.0, 0.0, 1.0])
    else:
        nrm = nrm / ln
    e1 = _plane_basis(nrm)
    e2 = np.cross(nrm, e1)
    rel = mesh.vertices[sel] - c
    ang = np.arctan2(rel @ e2, rel @ e1)
    order = np.lexsort((sel, ang))
    return sel[order]


def _plane_basis(n):
    e = np.cross(n, [1.0, 0.0, 0.0])
    if np.linalg.norm(e) < 1e-8:
        e = np.cross(n, [0.0, 1.0, 0.0])
    return e / np.linalg.norm(e)


# ----------------------------------------------------------------------
# serialization


def load_patches(path, mesh: TriangleMesh):
    """Read a patch JSON file and validate every patch against ``mesh``."""
    with open(path) as fh:
        data = json.load(fh)
    if data.get("version") != PATCH_JSON_VERSION:
        raise PatchError(f"unsupported patch file version {data.get('version')!r}")
    patches = []
    labels = set()
    for entry in data.get("patches", []):
        label = entry.get("label")
        if label is not None:
            if label in labels:
                raise PatchError(f"duplicate patch label {label!r}")
            labels.add(label)
        patches.append(
            ContactPatch(mesh, entry["pr"], entry["pb"], entry.get("ib"), label)
        )
    if not patches:
        raise PatchError(f"{path}: no patches")
    return patches


def save_patches(patches, path, mesh_id=""):
    data = {
        "version": PATCH_JSON_VERSION,
        "mesh_id": mesh_id,
        "patches": [p.to_json_dict() for p in patches],
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)


# ----------------------------------------------------------------------
# contact-scalar importer (ContactDB-style annotations)


def patches_from_scalars(mesh: TriangleMesh, scalars, threshold=0.5, label_prefix="contact"):
    """Segment per-vertex contact scalars into patches.

    Vertices with scalar > ``threshold`` form the contact set; each
    connected component (over mesh edges) becomes one patch whose boundary
    is the whole component and whose root is the vertex nearest the
    component centroid. The root rule is a convention of this importer, not
    a property of the annotation format.
    """
    scalars = np.asarray(scalars, dtype=np.float64)
    if scalars.shape != (mesh.n_vertices,):
        raise PatchError("scalars must be one value per vertex")
    hot = scalars > threshold
    if not hot.any():
        return []
    e = mesh.edges
    keep = hot[e[:, 0]] & hot[e[:, 1]]
    e = e[keep]
    adj = coo_matrix(
        (np.ones(len(e)), (e[:, 0], e[:, 1])),
        shape=(mesh.n_vertices, mesh.n_vertices),
    )
    _, comp = connected_components(adj, directed=False)
    patches = []
    idx = 0
    for c in np.unique(comp[hot]):
        members = np.nonzero(hot & (comp == c))[0]
        centroid = mesh.vertices[members].mean(axis=0)
        pr = members[int(np.argmin(np.linalg.norm(mesh.vertices[members] - centroid,
                                                  axis=1)))]
        patches.append(
            ContactPatch(mesh, pr, members, label=f"{label_prefix}-{idx}")
        )
        idx += 1
    return patches
