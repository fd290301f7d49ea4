import struct

import numpy as np
import numpy.testing as npt
import pytest

from graspmap.mesh import MeshError
from graspmap.meshio import clean_geometry, dump_obj, load_mesh
from graspmap.shapes import icosphere

TRI_OBJ = """\
# comment
v 0 0 0
v 1 0 0
v 0 1 0
f 1 2 3
"""

CUBE_OBJ = """\
v -1 -1 -1
v  1 -1 -1
v  1  1 -1
v -1  1 -1
v -1 -1  1
v  1 -1  1
v  1  1  1
v -1  1  1
f 1 4 3
f 1 3 2
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
"""


def test_single_triangle_obj(tmp_path):
    p = tmp_path / "tri.obj"
    p.write_text(TRI_OBJ)
    m = load_mesh(p)
    assert (m.n_vertices, m.n_faces, m.n_boundary_edges) == (3, 1, 3)


def test_cube_obj_closed_euler(tmp_path):
    p = tmp_path / "cube.obj"
    p.write_text(CUBE_OBJ)
    m = load_mesh(p)
    assert (m.n_vertices, m.n_faces) == (8, 12)
    assert m.is_closed and m.is_manifold
    assert m.euler_characteristic() == 2


def test_icosphere_obj_round_trip(tmp_path):
    src = icosphere(2)
    p = tmp_path / "s.obj"
    dump_obj(src, p)
    m = load_mesh(p)
    assert (m.n_vertices, m.n_faces) == (162, 320)
    assert m.is_closed
    npt.assert_allclose(m.vertices, src.vertices)
    npt.assert_array_equal(m.faces, src.faces)


def test_obj_negative_indices(tmp_path):
    p = tmp_path / "neg.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
    m = load_mesh(p)
    npt.assert_array_equal(m.faces, [[0, 1, 2]])


def test_obj_slash_tokens(tmp_path):
    p = tmp_path / "slash.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2/1/1 3/1/1\n")
    m = load_mesh(p)
    assert m.n_faces == 1


def test_quads_split_along_shorter_diagonal(tmp_path):
    # trapezoid where diagonal (v0, v2) is strictly shorter than (v1, v3)
    p = tmp_path / "quad.obj"
    p.write_text(
        "v 0 0 0\nv 2 0 0\nv 0.5 1 0\nv -2 1 0\nf 1 2 3 4\n"
    )
    m = load_mesh(p)
    assert m.n_faces == 2
    assert sorted(map(tuple, np.sort(m.faces, axis=1))) == [(0, 1, 2), (0, 2, 3)]


def test_rejects_large_polygons(tmp_path):
    p = tmp_path / "pent.obj"
    p.write_text(
        "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0.5 1.5 0\nv 0 1 0\nf 1 2 3 4 5\n"
    )
    with pytest.raises(MeshError, match="5 sides"):
        load_mesh(p)


def test_rejects_missing_and_empty(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_mesh(tmp_path / "absent.obj")
    p = tmp_path / "empty.obj"
    p.write_text("# nothing\n")
    with pytest.raises(MeshError):
        load_mesh(p)
    q = tmp_path / "weird.xyz"
    q.write_text("")
    with pytest.raises(MeshError, match="format"):
        load_mesh(q)


def test_weld_merges_exporter_duplicates():
    # two triangles sharing an edge, written with duplicated corner vertices
    v = np.array(
        [
            [0, 0, 0], [1, 0, 0], [0, 1, 0],
            [1, 0, 1e-12], [0, 1, -1e-12], [1, 1, 0],
        ],
        dtype=float,
    )
    f = np.array([[0, 1, 2], [3, 5, 4]])
    verts, faces = clean_geometry(v, f)
    assert len(verts) == 4
    assert len(faces) == 2
    # shared edge now uses the same indices in both faces
    assert set(faces[0]) & set(faces[1]) == {1, 2}


def test_weld_keeps_distinct_geometry():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 0.1]])
    f = np.array([[0, 1, 2], [0, 1, 3]])
    verts, faces = clean_geometry(v, f)
    assert len(verts) == 4


def test_degenerate_faces_dropped():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0]])
    f = np.array([[0, 1, 2], [0, 1, 3]])  # second face is collinear
    verts, faces = clean_geometry(v, f)
    assert len(faces) == 1


# ----------------------------------------------------------------------
# PLY


PLY_ASCII = """\
ply
format ascii 1.0
comment made by hand
element vertex 3
property float x
property float y
property float z
element face 1
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
0 1 0
3 0 1 2
"""


def test_ply_ascii(tmp_path):
    p = tmp_path / "tri.ply"
    p.write_text(PLY_ASCII)
    m = load_mesh(p)
    assert (m.n_vertices, m.n_faces) == (3, 1)
    npt.assert_allclose(m.vertices[1], [1, 0, 0])


def test_ply_ascii_extra_properties(tmp_path):
    text = (
        "ply\nformat ascii 1.0\n"
        "element vertex 3\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\n"
        "element face 1\nproperty list uchar int vertex_indices\n"
        "end_header\n"
        "0 0 0 255\n1 0 0 255\n0 1 0 255\n3 0 1 2\n"
    )
    p = tmp_path / "c.ply"
    p.write_text(text)
    m = load_mesh(p)
    assert m.n_faces == 1


@pytest.mark.parametrize("endian,fmt", [("<", "binary_little_endian"),
                                        (">", "binary_big_endian")])
def test_ply_binary(tmp_path, endian, fmt):
    header = (
        f"ply\nformat {fmt} 1.0\n"
        "element vertex 3\n"
        "property float x\nproperty float y\nproperty float z\n"
        "element face 1\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    ).encode("ascii")
    body = b"".join(
        struct.pack(endian + "fff", *v)
        for v in [(0, 0, 0), (1, 0, 0), (0, 1, 0)]
    )
    body += struct.pack(endian + "B", 3) + struct.pack(endian + "iii", 0, 1, 2)
    p = tmp_path / "b.ply"
    p.write_bytes(header + body)
    m = load_mesh(p)
    assert (m.n_vertices, m.n_faces) == (3, 1)
    npt.assert_allclose(m.vertices[2], [0, 1, 0])


def test_ply_rejects_garbage(tmp_path):
    p = tmp_path / "bad.ply"
    p.write_bytes(b"not a ply\n")
    with pytest.raises(MeshError, match="not a PLY"):
        load_mesh(p)
