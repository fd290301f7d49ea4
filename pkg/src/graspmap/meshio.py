"""OBJ and PLY ingest with weld/clean pass, plus a debug OBJ dump.

Readers keep positions and faces only; normals, uvs and other attributes
are dropped. Quads are split along their shorter diagonal; polygons with
more than four sides are rejected.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .mesh import MeshError, TriangleMesh

WELD_TOLERANCE_FACTOR = 1e-8  # times the bounding-box diagonal


def load_mesh(path, fmt=None) -> TriangleMesh:
    """Load and clean an OBJ or PLY file into a :class:`TriangleMesh`.

    Duplicate vertices are merged within ``1e-8 *`` bbox diagonal and
    zero-area faces dropped before connectivity is built.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    if fmt is None:
        fmt = path.suffix.lower().lstrip(".")
    if fmt == "obj":
        verts, faces = _read_obj(path)
    elif fmt == "ply":
        verts, faces = _read_ply(path)
    else:
        raise MeshError(f"unsupported mesh format: {fmt!r}")
    verts, faces = clean_geometry(verts, faces)
    if len(faces) == 0:
        raise MeshError(f"{path}: no usable faces after cleaning")
    return TriangleMesh(verts, faces)


def clean_geometry(vertices, faces):
    """Weld near-duplicate vertices and drop degenerate faces."""
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(vertices) == 0:
        return vertices, faces
    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    diag = float(np.linalg.norm(hi - lo))
    tol = WELD_TOLERANCE_FACTOR * diag
    if tol > 0:
        quant = np.round(vertices / tol).astype(np.int64)
        _, first, inverse = np.unique(
            quant, axis=0, return_index=True, return_inverse=True
        )
        order = np.argsort(first)
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        vertices = vertices[np.sort(first)]
        faces = rank[inverse][faces]
    # drop faces with repeated indices or (numerically) zero area
    keep = (
        (faces[:, 0] != faces[:, 1])
        & (faces[:, 1] != faces[:, 2])
        & (faces[:, 2] != faces[:, 0])
    )
    faces = faces[keep]
    if len(faces):
        p = vertices[faces]
        area2 = np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
        faces = faces[area2 > (1e-14 * max(diag, 1.0)) ** 2]
    return vertices, faces


def _split_polygon(idx):
    """Triangulate a 3- or 4-gon; reject anything larger."""
    if len(idx) == 3:
        return [idx]
    if len(idx) == 4:
        return [("quad", idx)]
    raise MeshError(f"polygon with {len(idx)} sides; triangulate the input mesh")


def _resolve_quads(vertices, polys):
    faces = []
    for item in polys:
        if isinstance(item, tuple):
            a, b, c, d = item[1]
            # split along the shorter diagonal for a deterministic result
            if np.linalg.norm(vertices[a] - vertices[c]) <= np.linalg.norm(
                vertices[b] - vertices[d]
            ):
                faces.append([a, b, c])
                faces.append([a, c, d])
            else:
                faces.append([a, b, d])
                faces.append([b, c, d])
        else:
            faces.append(list(item))
    return np.asarray(faces, dtype=np.int64)


def _read_obj(path):
    verts = []
    polys = []
    with open(path, "r", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshError(f"{path}:{lineno}: malformed vertex line")
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    s = tok.split("/")[0]
                    i = int(s)
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                polys.extend(_split_polygon(idx))
    if not verts:
        raise MeshError(f"{path}: no vertices")
    verts = np.asarray(verts, dtype=np.float64)
    if not polys:
        raise MeshError(f"{path}: no faces")
    faces = _resolve_quads(verts, polys)
    if faces.min() < 0 or faces.max() >= len(verts):
        raise MeshError(f"{path}: face index out of range")
    return verts, faces


_PLY_TYPES = {
    "char": "b", "int8": "b",
    "uchar": "B", "uint8": "B",
    "short": "h", "int16": "h",
    "ushort": "H", "uint16": "H",
    "int": "i", "int32": "i",
    "uint": "I", "uint32": "I",
    "float": "f", "float32": "f",
    "double": "d", "float64": "d",
}


def _read_ply(path):
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"ply":
            raise MeshError(f"{path}: not a PLY file")
        fmt = None
        elements = []  # (name, count, [(prop kind, type, name)])
        while True:
            line = fh.readline()
            if not line:
                raise MeshError(f"{path}: unterminated PLY header")
            tokens = line.decode("ascii", errors="replace").split()
            if not tokens or tokens[0] == "comment":
                continue
            if tokens[0] == "format":
                fmt = tokens[1]
            elif tokens[0] == "element":
                elements.append([tokens[1], int(tokens[2]), []])
            elif tokens[0] == "property":
                if tokens[1] == "list":
                    elements[-1][2].append(("list", tokens[2], tokens[3], tokens[4]))
                else:
                    elements[-1][2].append(("scalar", tokens[1], tokens[2]))
            elif tokens[0] == "end_header":
                break
        if fmt == "ascii":
            return _read_ply_ascii(fh, elements, path)
        if fmt in ("binary_little_endian", "binary_big_endian"):
            endian = "<" if fmt == "binary_little_endian" else ">"
            return _read_ply_binary(fh, elements, endian, path)
        raise MeshError(f"{path}: unknown PLY format {fmt!r}")


def _finish_ply(verts, polys, path):
    if not verts:
        raise MeshError(f"{path}: no vertices")
    verts = np.asarray(verts, dtype=np.float64)
    if not polys:
        raise MeshError(f"{path}: no faces")
    faces = _resolve_quads(verts, polys)
    if faces.min() < 0 or faces.max() >= len(verts):
        raise MeshError(f"{path}: face index out of range")
    return verts, faces


def _read_ply_ascii(fh, elements, path):
    verts = []
    polys = []
    text = fh.read().decode("ascii", errors="replace").split("\n")
    cursor = 0
    for name, count, props in elements:
        for _ in range(count):
            while cursor < len(text) and not text[cursor].strip():
                cursor += 1
            row = text[cursor].split()
            cursor += 1
            if name == "vertex":
                vals = {}
                col = 0
                for p in props:
                    if p[0] == "scalar":
                        vals[p[2]] = float(row[col])
                        col += 1
                    else:
                        col += 1 + int(row[col])
                verts.append([vals["x"], vals["y"], vals["z"]])
            elif name == "face":
                col = 0
                for p in props:
                    if p[0] == "list":
                        n = int(row[col])
                        idx = [int(x) for x in row[col + 1 : col + 1 + n]]
                        polys.extend(_split_polygon(idx))
                        col += 1 + n
                    else:
                        col += 1
    return _finish_ply(verts, polys, path)


def _read_ply_binary(fh, elements, endian, path):
    verts = []
    polys = []
    for name, count, props in elements:
        for _ in range(count):
            vals = {}
            for p in props:
                if p[0] == "scalar":
                    code = _PLY_TYPES[p[1]]
                    (x,) = struct.unpack(
                        endian + code, fh.read(struct.calcsize(code))
                    )
                    vals[p[2]] = x
                else:
                    ncode = _PLY_TYPES[p[1]]
                    icode = _PLY_TYPES[p[2]]
                    (n,) = struct.unpack(
                        endian + ncode, fh.read(struct.calcsize(ncode))
                    )
                    idx = struct.unpack(
                        endian + icode * n, fh.read(struct.calcsize(icode) * n)
                    )
                    vals[p[3]] = list(idx)
            if name == "vertex":
                verts.append([vals["x"], vals["y"], vals["z"]])
            elif name == "face":
                key = "vertex_indices" if "vertex_indices" in vals else "vertex_index"
                polys.extend(_split_polygon(vals[key]))
    return _finish_ply(verts, polys, path)


def dump_obj(mesh: TriangleMesh, path):
    """Write a minimal OBJ for debugging."""
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
