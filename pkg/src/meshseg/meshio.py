"""Mesh file I/O: OBJ and PLY loading, labeled PLY export, texture loading.

OBJ support covers v, vt, and f records with 1-based indices (f tokens may
be ``v``, ``v/vt``, ``v//vn``, or ``v/vt/vn``; only the v and vt parts are
used).  PLY support covers ascii and binary_little_endian, skipping any
extra properties.  Polygonal faces are fan-triangulated from the first
corner.
"""
from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DegenerateGeometry, IoError, ParseError, UnsupportedFormat
from .mesh import Bitmap, Mesh, check_labels_length, triangle_areas

log = logging.getLogger(__name__)

# Fixed 16-entry palette for labeled exports; label id -1 renders neutral gray.
PALETTE = (
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 212), (0, 128, 128), (220, 190, 255),
    (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
)
UNLABELED_COLOR = (128, 128, 128)

# Faces whose area is below this fraction of the squared bounding-box extent
# are dropped at load time as degenerate.
_DEGENERATE_REL_AREA = 1e-12


def label_color(label: int):
    if label < 0:
        return UNLABELED_COLOR
    return PALETTE[label % len(PALETTE)]


def load_texture(path) -> Bitmap:
    """Load an RGB texture bitmap from a PNG (or any Pillow-readable) file."""
    try:
        with Image.open(path) as im:
            return Bitmap(np.asarray(im.convert("RGB"), dtype=np.uint8))
    except FileNotFoundError as exc:
        raise IoError(f"texture not found: {path}") from exc
    except Exception as exc:
        raise ParseError(f"cannot decode texture: {exc}", path=str(path)) from exc


def load_mesh(path, texture_path=None) -> Mesh:
    """Load a triangle mesh from OBJ or PLY, optionally attaching a texture.

    Degenerate faces (repeated vertex indices or relatively zero area) are
    dropped with a warning; a mesh with no surviving face raises
    DegenerateGeometry.
    """
    path = Path(path)
    if not path.exists():
        raise IoError(f"mesh file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".obj":
        vertices, corners, uv_table, has_any_uv = _parse_obj(path)
    elif suffix == ".ply":
        vertices, corners, uv_table, has_any_uv = _parse_ply(path)
    else:
        raise UnsupportedFormat(f"unsupported mesh format: {path.suffix!r}")

    if not corners:
        raise DegenerateGeometry(f"{path}: no faces")
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)

    faces, face_uvs = _assemble_faces(vertices, corners, uv_table, has_any_uv, path)
    texture = load_texture(texture_path) if texture_path is not None else None
    if texture is not None and face_uvs is None:
        raise ParseError("texture given but mesh has no uv coordinates", path=str(path))
    return Mesh(vertices, faces, uvs=face_uvs, texture=texture)


def _assemble_faces(vertices, corners, uv_table, has_any_uv, path):
    """Validate per-corner (vertex, uv) indices, drop degenerate faces."""
    n = len(vertices)
    faces, uv_idx = [], []
    for line_no, tri in corners:
        vs = [c[0] for c in tri]
        if any(v < 0 or v >= n for v in vs):
            raise ParseError(f"vertex index out of range in face {tri}", line=line_no,
                             path=str(path))
        faces.append(vs)
        uv_idx.append([c[1] for c in tri])
    faces = np.asarray(faces, dtype=np.int64)

    distinct = ((faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2])
                & (faces[:, 0] != faces[:, 2]))
    extent = float(np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0)))
    keep = distinct.copy()
    if extent > 0:
        areas = np.zeros(len(faces))
        areas[distinct] = triangle_areas(vertices, faces[distinct])
        keep &= areas > _DEGENERATE_REL_AREA * extent * extent
    else:
        keep[:] = False
    dropped = int(len(faces) - keep.sum())
    if dropped:
        log.warning("%s: dropped %d degenerate faces", path, dropped)
    if not keep.any():
        raise DegenerateGeometry(f"{path}: all {len(faces)} faces are degenerate")
    faces = faces[keep]

    face_uvs = None
    if has_any_uv:
        uv_idx = [u for u, k in zip(uv_idx, keep) if k]
        if all(all(i is not None for i in tri) for tri in uv_idx):
            table = np.asarray(uv_table, dtype=np.float64).reshape(-1, 2)
            flat = np.asarray(uv_idx, dtype=np.int64)
            if flat.size and (flat.min() < 0 or flat.max() >= len(table)):
                raise ParseError("uv index out of range", path=str(path))
            face_uvs = table[flat]
        else:
            log.warning("%s: uvs present on only some faces; ignoring uvs", path)
    return faces, face_uvs


def _parse_obj(path):
    vertices, uv_table, corners = [], [], []
    has_any_uv = False
    with open(path, "r", errors="replace") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ParseError("vertex needs 3 coordinates", line=line_no, path=str(path))
                try:
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError as exc:
                    raise ParseError(f"bad vertex: {exc}", line=line_no, path=str(path)) from exc
            elif tag == "vt":
                if len(parts) < 3:
                    raise ParseError("vt needs 2 coordinates", line=line_no, path=str(path))
                try:
                    uv_table.append([float(parts[1]), float(parts[2])])
                except ValueError as exc:
                    raise ParseError(f"bad vt: {exc}", line=line_no, path=str(path)) from exc
            elif tag == "f":
                if len(parts) < 4:
                    raise ParseError("face needs at least 3 corners", line=line_no, path=str(path))
                poly = []
                for token in parts[1:]:
                    fields = token.split("/")
                    try:
                        vi = int(fields[0])
                    except ValueError as exc:
                        raise ParseError(f"bad face token {token!r}", line=line_no,
                                         path=str(path)) from exc
                    if vi < 1:
                        raise ParseError(f"face vertex index must be >= 1, got {vi}",
                                         line=line_no, path=str(path))
                    ti = None
                    if len(fields) > 1 and fields[1]:
                        try:
                            ti = int(fields[1])
                        except ValueError as exc:
                            raise ParseError(f"bad face token {token!r}", line=line_no,
                                             path=str(path)) from exc
                        if ti < 1:
                            raise ParseError(f"face uv index must be >= 1, got {ti}",
                                             line=line_no, path=str(path))
                        ti -= 1
                        has_any_uv = True
                    poly.append((vi - 1, ti))
                # fan triangulation from the first corner
                for i in range(1, len(poly) - 1):
                    corners.append((line_no, (poly[0], poly[i], poly[i + 1])))
            # other records (vn, o, g, s, usemtl, mtllib) are ignored
    return vertices, corners, uv_table, has_any_uv


_PLY_TYPES = {
    "char": ("b", 1), "int8": ("b", 1),
    "uchar": ("B", 1), "uint8": ("B", 1),
    "short": ("h", 2), "int16": ("h", 2),
    "ushort": ("H", 2), "uint16": ("H", 2),
    "int": ("i", 4), "int32": ("i", 4),
    "uint": ("I", 4), "uint32": ("I", 4),
    "float": ("f", 4), "float32": ("f", 4),
    "double": ("d", 8), "float64": ("d", 8),
}


def _parse_ply(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"ply"):
        raise UnsupportedFormat(f"{path}: not a PLY file")
    try:
        header_end = blob.index(b"end_header\n") + len(b"end_header\n")
    except ValueError:
        raise ParseError("missing end_header", path=str(path))
    header_lines = blob[:header_end].decode("ascii", errors="replace").splitlines()

    fmt = None
    elements = []  # (name, count, [(prop_name, type) | (prop_name, 'list', count_t, item_t)])
    for line_no, line in enumerate(header_lines, start=1):
        parts = line.split()
        if not parts or parts[0] in ("ply", "comment", "obj_info", "end_header"):
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError("property before element", line=line_no, path=str(path))
            if parts[1] == "list":
                elements[-1][2].append((parts[4], "list", parts[2], parts[3]))
            else:
                elements[-1][2].append((parts[2], parts[1]))
        else:
            raise ParseError(f"unknown header record {parts[0]!r}", line=line_no, path=str(path))
    if fmt not in ("ascii", "binary_little_endian"):
        raise UnsupportedFormat(f"{path}: unsupported PLY format {fmt!r}")

    body = blob[header_end:]
    if fmt == "ascii":
        rows = _ply_rows_ascii(body, elements, path)
    else:
        rows = _ply_rows_binary(body, elements, path)

    vertices, corners = [], []
    for (name, count, props), data in zip(elements, rows):
        if name == "vertex":
            idx = {p[0]: i for i, p in enumerate(props)}
            for key in ("x", "y", "z"):
                if key not in idx:
                    raise ParseError(f"vertex element lacks property {key!r}", path=str(path))
            for row in data:
                vertices.append([float(row[idx["x"]]), float(row[idx["y"]]),
                                 float(row[idx["z"]])])
        elif name == "face":
            list_pos = None
            for i, p in enumerate(props):
                if p[1] == "list" and p[0] in ("vertex_indices", "vertex_index"):
                    list_pos = i
            if list_pos is None:
                raise ParseError("face element lacks vertex_indices", path=str(path))
            for row in data:
                poly = [int(v) for v in row[list_pos]]
                if len(poly) < 3:
                    raise ParseError(f"face with {len(poly)} vertices", path=str(path))
                for i in range(1, len(poly) - 1):
                    corners.append((None, ((poly[0], None), (poly[i], None),
                                           (poly[i + 1], None))))
    return vertices, corners, [], False


def _ply_rows_ascii(body, elements, path):
    tokens = body.decode("ascii", errors="replace").split()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(tokens):
            raise ParseError("unexpected end of PLY data", path=str(path))
        out = tokens[pos:pos + n]
        pos += n
        return out

    all_rows = []
    for name, count, props in elements:
        rows = []
        for _ in range(count):
            row = []
            for p in props:
                if p[1] == "list":
                    k = int(take(1)[0])
                    row.append([_ply_scalar(t, p[3]) for t in take(k)])
                else:
                    row.append(_ply_scalar(take(1)[0], p[1]))
            rows.append(row)
        all_rows.append(rows)
    return all_rows


def _ply_scalar(token, typ):
    return float(token) if typ in ("float", "float32", "double", "float64") else int(token)


def _ply_rows_binary(body, elements, path):
    pos = 0
    all_rows = []
    for name, count, props in elements:
        rows = []
        for _ in range(count):
            row = []
            for p in props:
                if p[1] == "list":
                    cfmt, csize = _PLY_TYPES[p[2]]
                    ifmt, isize = _PLY_TYPES[p[3]]
                    (k,) = struct.unpack_from("<" + cfmt, body, pos)
                    pos += csize
                    row.append(list(struct.unpack_from(f"<{k}{ifmt}", body, pos)))
                    pos += isize * k
                else:
                    sfmt, size = _PLY_TYPES[p[1]]
                    (val,) = struct.unpack_from("<" + sfmt, body, pos)
                    pos += size
                    row.append(val)
            rows.append(row)
        if pos > len(body):
            raise ParseError("unexpected end of binary PLY data", path=str(path))
        all_rows.append(rows)
    return all_rows


def export_labeled_mesh(mesh: Mesh, labels, path) -> None:
    """Write an ascii PLY with one color per face from the fixed palette.

    Label -1 renders neutral gray.  Vertex coordinates are written with
    shortest-roundtrip precision so a reload reproduces them exactly.
    """
    labels = check_labels_length(labels, mesh)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.vertex_count}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {mesh.face_count}",
        "property list uchar int vertex_indices",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    for v in mesh.vertices:
        lines.append(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    for f, lab in zip(mesh.faces, labels):
        r, g, b = label_color(int(lab))
        lines.append(f"3 {f[0]} {f[1]} {f[2]} {r} {g} {b}")
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_face_colors(path):
    """Read per-face RGB colors back from a labeled PLY (testing/debug aid)."""
    path = Path(path)
    vertices, corners, _, _ = _parse_ply(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    header_end = blob.index(b"end_header\n") + len(b"end_header\n")
    header_lines = blob[:header_end].decode("ascii").splitlines()
    elements = []
    fmt = None
    for line in header_lines:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if parts[1] == "list":
                elements[-1][2].append((parts[4], "list", parts[2], parts[3]))
            else:
                elements[-1][2].append((parts[2], parts[1]))
    body = blob[header_end:]
    rows = _ply_rows_ascii(body, elements, path) if fmt == "ascii" \
        else _ply_rows_binary(body, elements, path)
    colors = []
    for (name, count, props), data in zip(elements, rows):
        if name != "face":
            continue
        idx = {p[0]: i for i, p in enumerate(props)}
        if not all(k in idx for k in ("red", "green", "blue")):
            return None
        for row in data:
            colors.append((int(row[idx["red"]]), int(row[idx["green"]]),
                           int(row[idx["blue"]])))
    return colors
