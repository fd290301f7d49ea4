import itertools
import json

import numpy as np
import numpy.testing as npt
import pytest

from graspmap.mesh import TriangleMesh
from graspmap.patch import (
    ContactPatch,
    PatchError,
    downsample_boundary,
    load_patches,
    patches_from_scalars,
    save_patches,
)
from graspmap.shapes import icosphere, planar_grid


@pytest.fixture(scope="module")
def grid():
    return planar_grid(20)


def ring_mesh(n=100, radius=1.0):
    """Disk fan: vertex 0 at the center, 1..n on a circle."""
    ang = 2 * np.pi * np.arange(n) / n
    rim = np.stack([radius * np.cos(ang), radius * np.sin(ang), np.zeros(n)], axis=1)
    verts = np.vstack([[[0.0, 0.0, 0.0]], rim])
    faces = np.array([[0, 1 + k, 1 + (k + 1) % n] for k in range(n)])
    return TriangleMesh(verts, faces)


# ----------------------------------------------------------------------
# ContactPatch invariants


def test_patch_validates_ids(grid):
    with pytest.raises(PatchError, match="root"):
        ContactPatch(grid, grid.n_vertices, [1, 2, 3])
    with pytest.raises(PatchError, match="out of range"):
        ContactPatch(grid, 0, [1, grid.n_vertices])
    with pytest.raises(PatchError, match="empty"):
        ContactPatch(grid, 0, [])
    with pytest.raises(PatchError, match="duplicate"):
        ContactPatch(grid, 0, [1, 2, 2])


def test_small_boundary_keeps_ib_equal_pb(grid):
    p = ContactPatch(grid, 5, np.arange(12))
    assert sorted(p.ib) == sorted(p.pb)


def test_large_boundary_downsamples_to_bounds(grid):
    p = ContactPatch(grid, 5, np.arange(1, 41))
    assert 20 <= len(p.ib) <= 30
    assert set(p.ib) <= set(p.pb)


def test_explicit_ib_must_be_subset(grid):
    with pytest.raises(PatchError, match="subset"):
        ContactPatch(grid, 0, np.arange(25), ib=[100, 101] + list(range(18)))


def test_ib_size_enforced(grid):
    with pytest.raises(PatchError, match="outside"):
        ContactPatch(grid, 0, np.arange(40), ib=np.arange(5))


# ----------------------------------------------------------------------
# farthest-point downsampling


def test_k1_returns_lowest_id(grid):
    out = downsample_boundary([17, 3, 99, 45], grid, 1)
    npt.assert_array_equal(out, [3])


def test_k_at_least_boundary_returns_all(grid):
    out = downsample_boundary([9, 4, 30], grid, 7)
    assert sorted(out) == [4, 9, 30]


def test_circle_quadrants_match_bruteforce():
    m = ring_mesh(100)
    rim = np.arange(1, 101)
    out = downsample_boundary(rim, m, 4)
    assert len(out) == 4
    # brute force: the best max-min 4-subset containing the seed (vertex 1)
    pts = m.vertices[rim]
    seed = 0
    best, best_val = None, -1.0
    for combo in itertools.combinations(range(1, 100), 3):
        sel = np.array((seed,) + combo)
        d = np.linalg.norm(pts[sel][:, None] - pts[sel][None], axis=2)
        val = d[np.triu_indices(4, 1)].min()
        if val > best_val:
            best_val, best = val, sel
    # greedy FPS is near-optimal: every chosen point within one rim spacing
    # of some optimal choice
    spacing = 2 * np.pi / 100
    chosen = m.vertices[out]
    optimal = pts[best]
    for p in chosen:
        assert np.linalg.norm(optimal - p, axis=1).min() <= 2 * np.sin(spacing)


def test_downsampling_deterministic(grid):
    b = np.arange(40, 120)
    a = downsample_boundary(b, grid, 24)
    c = downsample_boundary(b, grid, 24)
    npt.assert_array_equal(a, c)


def test_coverage_non_increasing_in_k():
    m = ring_mesh(60)
    rim = np.arange(1, 61)
    pts = m.vertices[rim]
    prev = np.inf
    for k in (2, 4, 8, 16, 32):
        out = downsample_boundary(rim, m, k)
        d = np.linalg.norm(pts[:, None] - m.vertices[out][None], axis=2)
        cover = d.min(axis=1).max()
        assert cover <= prev + 1e-12
        prev = cover


def test_ordered_about_centroid():
    m = ring_mesh(50)
    out = downsample_boundary(np.arange(1, 51), m, 10)
    pos = m.vertices[out]
    ang = np.unwrap(np.arctan2(pos[:, 1], pos[:, 0]))
    assert np.all(np.diff(ang) > 0) or np.all(np.diff(ang) < 0)


# ----------------------------------------------------------------------
# serialization


def test_round_trip(tmp_path, grid):
    patches = [
        ContactPatch(grid, 5, np.arange(1, 41), label="thumb"),
        ContactPatch(grid, 100, np.arange(90, 140), label="palm"),
    ]
    path = tmp_path / "patches.json"
    save_patches(patches, path, mesh_id="grid20")
    back = load_patches(path, grid)
    assert len(back) == 2
    for a, b in zip(patches, back):
        assert a.pr == b.pr and a.label == b.label
        npt.assert_array_equal(a.pb, b.pb)
        npt.assert_array_equal(a.ib, b.ib)


def test_load_recomputes_missing_ib(tmp_path, grid):
    data = {
        "version": 1,
        "mesh_id": "",
        "patches": [{"label": "x", "pr": 5, "pb": list(range(1, 41))}],
    }
    path = tmp_path / "p.json"
    path.write_text(json.dumps(data))
    (p,) = load_patches(path, grid)
    assert 20 <= len(p.ib) <= 30


def test_load_rejects_duplicates_and_bad_version(tmp_path, grid):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({
        "version": 1,
        "patches": [
            {"label": "a", "pr": 0, "pb": [1, 2, 3]},
            {"label": "a", "pr": 4, "pb": [5, 6, 7]},
        ],
    }))
    with pytest.raises(PatchError, match="duplicate patch label"):
        load_patches(path, grid)
    path.write_text(json.dumps({"version": 2, "patches": []}))
    with pytest.raises(PatchError, match="version"):
        load_patches(path, grid)


# ----------------------------------------------------------------------
# contact-scalar importer


def test_scalar_importer_segments_components():
    m = icosphere(3)
    scalars = np.zeros(m.n_vertices)
    # two antipodal caps
    scalars[m.vertices[:, 2] > 0.9] = 1.0
    scalars[m.vertices[:, 2] < -0.9] = 1.0
    patches = patches_from_scalars(m, scalars)
    assert len(patches) == 2
    for p in patches:
        signs = np.sign(m.vertices[p.pb][:, 2])
        assert len(set(signs)) == 1  # components do not mix caps
        # root sits near the component centroid (the pole)
        assert abs(m.vertices[p.pr][2]) > 0.95


def test_scalar_importer_empty_and_shape(grid):
    assert patches_from_scalars(grid, np.zeros(grid.n_vertices)) == []
    with pytest.raises(PatchError, match="per vertex"):
        patches_from_scalars(grid, np.zeros(3))
