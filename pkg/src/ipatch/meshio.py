"""Triangle mesh file formats.

Readers: OBJ (``v``/``f`` records, 1-based or negative indices), PLY (ASCII,
binary little/big endian) and binary STL.  Writers: OBJ and binary PLY with
an optional per-vertex quality scalar plus 8-bit RGB color.

All readers return raw ``(vertices, faces)`` arrays; welding and cleanup
happen in :mod:`ipatch.mesh`.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .errors import IoError, ParseError

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# OBJ
# ---------------------------------------------------------------------------

def read_obj(path):
    verts: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    for ln, raw in enumerate(_read_bytes(path).decode("utf-8", "replace").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0]
        if key == "v":
            if len(parts) < 4:
                raise ParseError(f"{path}:{ln}: vertex record needs 3 coordinates")
            try:
                verts.append(tuple(float(x) for x in parts[1:4]))
            except ValueError as exc:
                raise ParseError(f"{path}:{ln}: bad vertex coordinate: {exc}") from None
        elif key == "f":
            if len(parts) < 4:
                raise ParseError(f"{path}:{ln}: face record needs at least 3 indices")
            idx = []
            for tok in parts[1:]:
                head = tok.split("/", 1)[0]
                try:
                    i = int(head)
                except ValueError:
                    raise ParseError(f"{path}:{ln}: bad face index {tok!r}") from None
                if i < 0:
                    i = len(verts) + i
                else:
                    i = i - 1
                if not (0 <= i < len(verts)):
                    raise ParseError(f"{path}:{ln}: face index {tok!r} out of range")
                idx.append(i)
            for k in range(1, len(idx) - 1):  # fan-triangulate n-gons
                faces.append((idx[0], idx[k], idx[k + 1]))
        # all other records (vn, vt, o, g, s, mtllib, usemtl, ...) are ignored
    return (
        np.asarray(verts, dtype=np.float64).reshape(-1, 3),
        np.asarray(faces, dtype=np.int64).reshape(-1, 3),
    )


def write_obj(path, vertices, faces):
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    out = io.StringIO()
    for v in vertices:
        out.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
    for f in faces:
        out.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
    try:
        Path(path).write_text(out.getvalue())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# PLY
# ---------------------------------------------------------------------------

def _parse_ply_header(data: bytes, path):
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise ParseError(f"{path}: not a PLY file")
    end = data.index(b"\n", end) + 1
    header = data[:end].decode("ascii", "replace")
    fmt = None
    elements = []  # (name, count, [props]); prop = ("scalar", dtype, name) | ("list", cdtype, idtype, name)
    for line in header.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError(f"{path}: property before element in header")
            if parts[1] == "list":
                if parts[2] not in _PLY_TYPES or parts[3] not in _PLY_TYPES:
                    raise ParseError(f"{path}: unknown list types {parts[2]}/{parts[3]}")
                elements[-1][2].append(("list", _PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]], parts[4]))
            else:
                if parts[1] not in _PLY_TYPES:
                    raise ParseError(f"{path}: unknown property type {parts[1]}")
                elements[-1][2].append(("scalar", _PLY_TYPES[parts[1]], parts[2]))
    if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
        raise ParseError(f"{path}: unsupported PLY format {fmt!r}")
    return fmt, elements, data[end:]


def read_ply(path):
    data = _read_bytes(path)
    fmt, elements, body = _parse_ply_header(data, path)
    if fmt == "ascii":
        return _read_ply_ascii(elements, body, path)
    endian = "<" if fmt == "binary_little_endian" else ">"
    return _read_ply_binary(elements, body, endian, path)


def _extract_vertex_faces(per_element, path):
    verts = faces = None
    for name, table in per_element.items():
        if name == "vertex":
            try:
                verts = np.stack([table["x"], table["y"], table["z"]], axis=1).astype(np.float64)
            except KeyError:
                raise ParseError(f"{path}: vertex element lacks x/y/z") from None
        elif name == "face":
            for key in ("vertex_indices", "vertex_index"):
                if key in table:
                    faces = table[key]
                    break
            if faces is None:
                raise ParseError(f"{path}: face element lacks vertex indices")
    if verts is None:
        raise ParseError(f"{path}: no vertex element")
    if faces is None:
        faces = []
    tris = []
    for poly in faces:
        if len(poly) < 3:
            raise ParseError(f"{path}: face with fewer than 3 vertices")
        for k in range(1, len(poly) - 1):
            tris.append((poly[0], poly[k], poly[k + 1]))
    tri = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    if tri.size and (tri.min() < 0 or tri.max() >= len(verts)):
        raise ParseError(f"{path}: face index out of range")
    return verts, tri


def _read_ply_ascii(elements, body, path):
    tokens = body.decode("ascii", "replace").split()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(tokens):
            raise ParseError(f"{path}: truncated PLY body")
        out = tokens[pos:pos + n]
        pos += n
        return out

    per_element = {}
    for name, count, props in elements:
        table: dict[str, list] = {p[-1]: [] for p in props}
        for _ in range(count):
            for p in props:
                if p[0] == "scalar":
                    table[p[2]].append(float(take(1)[0]))
                else:
                    n = int(take(1)[0])
                    table[p[3]].append([int(float(t)) for t in take(n)])
        per_element[name] = {
            k: (np.asarray(v) if v and not isinstance(v[0], list) else v)
            for k, v in table.items()
        }
    return _extract_vertex_faces(per_element, path)


def _read_ply_binary(elements, body, endian, path):
    per_element = {}
    off = 0
    for name, count, props in elements:
        if all(p[0] == "scalar" for p in props):
            dt = np.dtype([(p[2], endian + p[1]) for p in props])
            need = dt.itemsize * count
            if off + need > len(body):
                raise ParseError(f"{path}: truncated PLY body")
            rec = np.frombuffer(body, dtype=dt, count=count, offset=off)
            off += need
            per_element[name] = {p[2]: rec[p[2]] for p in props}
        else:
            table: dict[str, list] = {p[-1]: [] for p in props}
            for _ in range(count):
                for p in props:
                    if p[0] == "scalar":
                        dt = np.dtype(endian + p[1])
                        if off + dt.itemsize > len(body):
                            raise ParseError(f"{path}: truncated PLY body")
                        table[p[2]].append(
                            np.frombuffer(body, dtype=dt, count=1, offset=off)[0]
                        )
                        off += dt.itemsize
                    else:
                        cdt = np.dtype(endian + p[1])
                        idt = np.dtype(endian + p[2])
                        if off + cdt.itemsize > len(body):
                            raise ParseError(f"{path}: truncated PLY body")
                        n = int(np.frombuffer(body, dtype=cdt, count=1, offset=off)[0])
                        off += cdt.itemsize
                        if off + n * idt.itemsize > len(body):
                            raise ParseError(f"{path}: truncated PLY body")
                        table[p[3]].append(
                            np.frombuffer(body, dtype=idt, count=n, offset=off).tolist()
                        )
                        off += n * idt.itemsize
            per_element[name] = {
                k: (np.asarray(v) if v and not isinstance(v[0], list) else v)
                for k, v in table.items()
            }
    return _extract_vertex_faces(per_element, path)


def write_ply(path, vertices, faces, quality=None, colors=None):
    """Binary little-endian PLY; optional per-vertex quality + RGB color."""
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    props = [("x", "<f8"), ("y", "<f8"), ("z", "<f8")]
    header = [
        "ply",
        "format binary_little_endian 1.0",
        f"element vertex {len(vertices)}",
        "property double x",
        "property double y",
        "property double z",
    ]
    if quality is not None:
        quality = np.asarray(quality, dtype=np.float64)
        props.append(("quality", "<f8"))
        header.append("property double quality")
    if colors is not None:
        colors = np.asarray(colors, dtype=np.uint8)
        props += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header += [
        f"element face {len(faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    rec = np.zeros(len(vertices), dtype=np.dtype(props))
    rec["x"], rec["y"], rec["z"] = vertices.T
    if quality is not None:
        rec["quality"] = quality
    if colors is not None:
        rec["red"], rec["green"], rec["blue"] = colors.T
    face_rec = np.zeros(len(faces), dtype=np.dtype([("n", "u1"), ("i", "<i4", (3,))]))
    face_rec["n"] = 3
    face_rec["i"] = faces.astype(np.int32)
    try:
        with open(path, "wb") as fh:
            fh.write(("\n".join(header) + "\n").encode("ascii"))
            fh.write(rec.tobytes())
            fh.write(face_rec.tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# STL (binary)
# ---------------------------------------------------------------------------

def read_stl(path):
    data = _read_bytes(path)
    if len(data) < 84:
        raise ParseError(f"{path}: truncated STL header")
    (count,) = struct.unpack_from("<I", data, 80)
    need = 84 + count * 50
    if len(data) < need:
        if data[:5] == b"solid" and b"facet" in data[:400]:
            raise ParseError(f"{path}: ASCII STL is not supported, use binary STL")
        raise ParseError(f"{path}: truncated STL body ({len(data)} < {need} bytes)")
    rec = np.frombuffer(
        data, dtype=np.dtype([("n", "<f4", (3,)), ("v", "<f4", (3, 3)), ("attr", "<u2")]),
        count=count, offset=84,
    )
    verts = rec["v"].reshape(-1, 3).astype(np.float64)
    faces = np.arange(len(verts), dtype=np.int64).reshape(-1, 3)
    return verts, faces


# ---------------------------------------------------------------------------

_READERS = {".obj": read_obj, ".ply": read_ply, ".stl": read_stl}


def read_any(path):
    ext = Path(path).suffix.lower()
    reader = _READERS.get(ext)
    if reader is None:
        raise ParseError(f"{path}: unsupported mesh format {ext!r} (use .obj/.ply/.stl)")
    return reader(path)


# ---------------------------------------------------------------------------
# High-level exporters
# ---------------------------------------------------------------------------

def colormap_bgr(scalars) -> np.ndarray:
    """8-bit blue-to-green-to-red ramp over [0, max(scalars)].

    Zero maps to pure blue, the midpoint to green, the maximum to red; an
    all-zero input stays blue throughout.
    """
    s = np.asarray(scalars, dtype=np.float64)
    top = float(s.max()) if s.size else 0.0
    t = np.clip(s / top, 0.0, 1.0) if top > 0.0 else np.zeros_like(s)
    lower = t <= 0.5
    r = np.where(lower, 0.0, 2.0 * t - 1.0)
    g = np.where(lower, 2.0 * t, 2.0 - 2.0 * t)
    b = np.where(lower, 1.0 - 2.0 * t, 0.0)
    return np.clip(np.stack([r, g, b], axis=1) * 255.0 + 0.5, 0, 255).astype(np.uint8)


def export_mesh(mesh, path) -> None:
    """Write a plain mesh as OBJ."""
    write_obj(path, mesh.vertices, mesh.faces)


def export_colored(mesh, scalars, path) -> None:
    """Write a mesh as binary PLY with per-vertex ``quality`` and color.

    ``scalars`` is one value per vertex (deviations, usually); it lands in
    the ``quality`` property verbatim and drives the blue-green-red ramp.
    """
    scalars = np.asarray(scalars, dtype=np.float64)
    if len(scalars) != len(mesh.vertices):
        raise IoError(
            f"got {len(scalars)} scalars for {len(mesh.vertices)} vertices"
        )
    write_ply(path, mesh.vertices, mesh.faces, quality=scalars, colors=colormap_bgr(scalars))
