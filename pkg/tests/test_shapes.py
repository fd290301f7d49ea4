import numpy as np
import numpy.testing as npt
import pytest

from graspmap.shapes import box, icosphere, planar_grid


def test_grid_indexing_and_size():
    g = planar_grid(5, 4, spacing=0.5)
    assert g.n_vertices == 20
    assert g.n_faces == 2 * 4 * 3
    npt.assert_allclose(g.vertices[2 * 5 + 3], [1.5, 1.0, 0.0])
    assert g.is_manifold and not g.is_closed


def test_grid_has_no_preferred_diagonal():
    # alternating cells: both diagonal orientations appear equally often
    g = planar_grid(9)
    d = g.vertices[g.edges[:, 1]] - g.vertices[g.edges[:, 0]]
    diag = np.abs(d[:, 0] * d[:, 1]) > 1e-12
    signs = np.sign(d[diag, 0] * d[diag, 1])
    assert (signs > 0).sum() == (signs < 0).sum()


@pytest.mark.parametrize(
    "sub,nv,nf", [(0, 12, 20), (1, 42, 80), (2, 162, 320), (3, 642, 1280)]
)
def test_icosphere_subdivision_counts(sub, nv, nf):
    m = icosphere(sub)
    assert (m.n_vertices, m.n_faces) == (nv, nf)
    assert m.is_closed and m.is_manifold
    assert m.euler_characteristic() == 2


def test_icosphere_radius():
    m = icosphere(3, radius=2.5)
    npt.assert_allclose(np.linalg.norm(m.vertices, axis=1), 2.5, atol=1e-12)


def test_box_closed_and_outward():
    m = box((2.0, 1.0, 0.5), subdivisions=1)
    assert m.is_closed and m.is_manifold
    assert m.euler_characteristic() == 2
    # outward normals: positive dot with the direction away from center
    c = m.vertices.mean(axis=0)
    d = np.einsum("ij,ij->i", m.vertex_normals, m.vertices - c)
    assert d.min() > 0
    npt.assert_allclose(m.vertices.min(axis=0), [-1.0, -0.5, -0.25])
    npt.assert_allclose(m.vertices.max(axis=0), [1.0, 0.5, 0.25])


def test_box_center_offset():
    m = box((1.0, 1.0, 1.0), center=(5.0, 0.0, 0.0))
    npt.assert_allclose(m.vertices.mean(axis=0), [5.0, 0.0, 0.0], atol=1e-12)
