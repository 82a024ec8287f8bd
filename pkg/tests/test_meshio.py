"""File format round-trips and malformed-input handling."""

import struct

import numpy as np
import pytest

from ipatch import meshio
from ipatch.errors import IoError, ParseError

TRI_V = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.5]])
TRI_F = np.array([[0, 1, 2], [1, 3, 2]])


def test_obj_roundtrip(tmp_path):
    path = tmp_path / "m.obj"
    meshio.write_obj(path, TRI_V, TRI_F)
    v, f = meshio.read_obj(path)
    assert np.array_equal(v, TRI_V)
    assert np.array_equal(f, TRI_F)


def test_obj_negative_and_slashed_indices(tmp_path):
    path = tmp_path / "m.obj"
    path.write_text(
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\n"
        "f 1/1/1 2/2/2 3/3/3\n"
        "f -3 -2 -1\n"          # relative indices: vertices 2, 3, 4
        "f 1 2 3 4\n"           # quad, fan-triangulated
    )
    v, f = meshio.read_obj(path)
    assert len(v) == 4
    assert np.array_equal(f, [[0, 1, 2], [1, 2, 3], [0, 1, 2], [0, 2, 3]])


@pytest.mark.parametrize(
    "text",
    [
        "v 0 0\n",                       # too few coordinates
        "v 0 0 zero\n",                  # non-numeric coordinate
        "v 0 0 0\nf 1 2 3\n",            # index out of range
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2\n",   # face with 2 vertices
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n",  # junk index
    ],
)
def test_obj_malformed(tmp_path, text):
    path = tmp_path / "bad.obj"
    path.write_text(text)
    with pytest.raises(ParseError):
        meshio.read_obj(path)


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(IoError):
        meshio.read_obj(tmp_path / "nope.obj")


def test_ply_binary_roundtrip(tmp_path):
    path = tmp_path / "m.ply"
    quality = np.array([0.0, 0.25, 0.5, 1.0])
    colors = np.array([[0, 0, 255], [0, 255, 0], [255, 0, 0], [7, 8, 9]], dtype=np.uint8)
    meshio.write_ply(path, TRI_V, TRI_F, quality=quality, colors=colors)
    v, f = meshio.read_ply(path)
    assert np.array_equal(v, TRI_V)
    assert np.array_equal(f, TRI_F)
    head = path.read_bytes()[:200]
    assert b"binary_little_endian" in head
    assert b"property double quality" in head
    assert b"property uchar red" in head


def test_ply_ascii(tmp_path):
    path = tmp_path / "a.ply"
    path.write_text(
        "ply\nformat ascii 1.0\ncomment hand written\n"
        "element vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
        "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
        "0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"
    )
    v, f = meshio.read_ply(path)
    assert v.shape == (3, 3)
    assert np.array_equal(f, [[0, 1, 2]])


def test_ply_big_endian(tmp_path):
    path = tmp_path / "be.ply"
    header = (
        "ply\nformat binary_big_endian 1.0\n"
        "element vertex 3\nproperty double x\nproperty double y\nproperty double z\n"
        "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
    ).encode()
    verts = TRI_V[:3].astype(">f8").tobytes()
    face = struct.pack(">B3i", 3, 0, 1, 2)
    path.write_bytes(header + verts + face)
    v, f = meshio.read_ply(path)
    assert np.allclose(v, TRI_V[:3])
    assert np.array_equal(f, [[0, 1, 2]])


def test_ply_quad_face_fan(tmp_path):
    path = tmp_path / "q.ply"
    path.write_text(
        "ply\nformat ascii 1.0\n"
        "element vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
        "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
        "0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n"
    )
    _, f = meshio.read_ply(path)
    assert np.array_equal(f, [[0, 1, 2], [0, 2, 3]])


def test_ply_truncated(tmp_path):
    path = tmp_path / "t.ply"
    meshio.write_ply(path, TRI_V, TRI_F)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 10])
    with pytest.raises(ParseError):
        meshio.read_ply(path)


def test_ply_not_a_ply(tmp_path):
    path = tmp_path / "x.ply"
    path.write_text("off\n3 1 0\n")
    with pytest.raises(ParseError):
        meshio.read_ply(path)


def _stl_bytes(triangles):
    blob = b"\x00" * 80 + struct.pack("<I", len(triangles))
    for tri in triangles:
        blob += struct.pack("<3f", 0.0, 0.0, 1.0)
        for p in tri:
            blob += struct.pack("<3f", *p)
        blob += struct.pack("<H", 0)
    return blob


def test_stl_binary(tmp_path):
    path = tmp_path / "m.stl"
    tris = [
        [(0, 0, 0), (1, 0, 0), (0, 1, 0)],
        [(1, 0, 0), (1, 1, 0), (0, 1, 0)],
    ]
    path.write_bytes(_stl_bytes(tris))
    v, f = meshio.read_stl(path)
    assert len(v) == 6 and len(f) == 2  # raw soup; welding happens in TriMesh


def test_stl_truncated(tmp_path):
    path = tmp_path / "t.stl"
    path.write_bytes(_stl_bytes([[(0, 0, 0), (1, 0, 0), (0, 1, 0)]])[:-7])
    with pytest.raises(ParseError):
        meshio.read_stl(path)


def test_stl_ascii_rejected(tmp_path):
    path = tmp_path / "a.stl"
    path.write_text(
        "solid a\nfacet normal 0 0 1\nouter loop\n"
        "vertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\n"
        "endloop\nendfacet\nendsolid a\n"
    )
    with pytest.raises(ParseError):
        meshio.read_stl(path)


def test_unknown_extension(tmp_path):
    path = tmp_path / "m.step"
    path.write_text("")
    with pytest.raises(ParseError):
        meshio.read_any(path)


# ---------------------------------------------------------------------------
# High-level exporters
# ---------------------------------------------------------------------------

def test_colormap_endpoints_and_midpoint():
    rgb = meshio.colormap_bgr([0.0, 0.5, 1.0])
    assert np.array_equal(rgb[0], [0, 0, 255])      # zero -> blue
    assert np.array_equal(rgb[1], [0, 255, 0])      # midpoint -> green
    assert np.array_equal(rgb[2], [255, 0, 0])      # max -> red


def test_colormap_all_zero_stays_blue():
    rgb = meshio.colormap_bgr(np.zeros(5))
    assert np.array_equal(rgb, np.tile([0, 0, 255], (5, 1)))


def test_export_colored_roundtrip_quality(tmp_path):
    from ipatch.mesh import TriMesh

    mesh = TriMesh(TRI_V, TRI_F)
    q = np.array([0.0, 0.25, 0.5, 1.0])
    path = tmp_path / "dev.ply"
    meshio.export_colored(mesh, q, path)
    data = path.read_bytes()
    header = data[: data.index(b"end_header")].decode()
    assert "property double quality" in header
    assert "property uchar red" in header

    verts, faces = meshio.read_ply(path)
    assert np.allclose(verts, mesh.vertices)
    assert len(faces) == len(mesh.faces)


def test_export_colored_constant_scalars_single_color(tmp_path):
    rgb = meshio.colormap_bgr(np.full(4, 2.5))
    assert (rgb == rgb[0]).all()                    # one color everywhere


def test_export_colored_length_mismatch(tmp_path):
    from ipatch.mesh import TriMesh

    mesh = TriMesh(TRI_V, TRI_F)
    with pytest.raises(IoError):
        meshio.export_colored(mesh, np.zeros(3), tmp_path / "bad.ply")


def test_export_mesh_writes_obj(tmp_path):
    from ipatch.mesh import TriMesh

    mesh = TriMesh(TRI_V, TRI_F)
    path = tmp_path / "m.obj"
    meshio.export_mesh(mesh, path)
    v, f = meshio.read_obj(path)
    assert np.array_equal(v, mesh.vertices)
    assert np.array_equal(f, mesh.faces)
