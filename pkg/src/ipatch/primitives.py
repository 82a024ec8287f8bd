"""Synthetic meshes and curve-network fixtures.

These generators back the test-suite and the ``synth`` CLI subcommand, so
demos and tests do not depend on external data files.
"""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def icosphere(subdivisions: int = 3, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Geodesic sphere from a subdivided icosahedron.

    ``subdivisions=3`` gives 642 vertices / 1280 triangles.
    """
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=np.int64,
    )
    for _ in range(subdivisions):
        edge_mid: dict[tuple[int, int], int] = {}
        verts_list = list(verts)

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            idx = edge_mid.get(key)
            if idx is None:
                m = verts_list[i] + verts_list[j]
                m = m / np.linalg.norm(m)
                idx = len(verts_list)
                verts_list.append(m)
                edge_mid[key] = idx
            return idx

        new_faces = []
        for i, j, k in faces:
            a = midpoint(i, j)
            b = midpoint(j, k)
            c = midpoint(k, i)
            new_faces += [(i, a, c), (j, b, a), (k, c, b), (a, b, c)]
        verts = np.stack(verts_list)
        faces = np.asarray(new_faces, dtype=np.int64)
    verts = verts * radius + np.asarray(center, dtype=np.float64)
    return TriMesh(verts, faces)


def ellipsoid(semi_axes=(1.0, 0.8, 0.6), subdivisions: int = 3) -> TriMesh:
    sphere = icosphere(subdivisions)
    return TriMesh(sphere.vertices * np.asarray(semi_axes, dtype=np.float64), sphere.faces)


def torus(major: float = 1.0, minor: float = 0.35, n_major: int = 64, n_minor: int = 32) -> TriMesh:
    u = np.linspace(0.0, 2 * np.pi, n_major, endpoint=False)
    v = np.linspace(0.0, 2 * np.pi, n_minor, endpoint=False)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = (major + minor * np.cos(vv)) * np.cos(uu)
    y = (major + minor * np.cos(vv)) * np.sin(uu)
    z = minor * np.sin(vv)
    verts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)

    def vid(i, j):
        return (i % n_major) * n_minor + (j % n_minor)

    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            faces.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
            faces.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
    return TriMesh(verts, np.asarray(faces, dtype=np.int64))


def hemisphere(radius: float = 1.0, subdivisions: int = 3) -> TriMesh:
    """Open upper half of a sphere (``z >= 0``); has one boundary loop."""
    sphere = icosphere(subdivisions, radius=radius)
    centroid_z = sphere.vertices[sphere.faces].mean(axis=1)[:, 2]
    faces = sphere.faces[centroid_z > 1e-9 * radius]
    return TriMesh(sphere.vertices, faces)


def open_cylinder(radius: float = 1.0, height: float = 2.0, n_around: int = 64, n_axial: int = 16) -> TriMesh:
    """Cylinder side wall without caps; two boundary loops."""
    u = np.linspace(0.0, 2 * np.pi, n_around, endpoint=False)
    z = np.linspace(-height / 2, height / 2, n_axial)
    uu, zz = np.meshgrid(u, z, indexing="ij")
    verts = np.stack(
        [radius * np.cos(uu).ravel(), radius * np.sin(uu).ravel(), zz.ravel()], axis=1
    )

    def vid(i, j):
        return (i % n_around) * n_axial + j

    faces = []
    for i in range(n_around):
        for j in range(n_axial - 1):
            faces.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
            faces.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
    return TriMesh(verts, np.asarray(faces, dtype=np.int64))


def planar_grid(nx: int = 20, ny: int = 20, size: float = 2.0) -> TriMesh:
    x = np.linspace(-size / 2, size / 2, nx)
    y = np.linspace(-size / 2, size / 2, ny)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    verts = np.stack([xx.ravel(), yy.ravel(), np.zeros(nx * ny)], axis=1)
    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a = i * ny + j
            b = (i + 1) * ny + j
            faces.append((a, b, b + 1))
            faces.append((a, b + 1, a + 1))
    return TriMesh(verts, np.asarray(faces, dtype=np.int64))


# ---------------------------------------------------------------------------
# Curve-network fixtures (JSON-shaped dictionaries)
# ---------------------------------------------------------------------------

def cube_network() -> dict:
    """Six-face quad network over the unit sphere (projected cube edges)."""
    s = 1.0 / np.sqrt(3.0)
    corners = [
        (-s, -s, -s), (s, -s, -s), (s, s, -s), (-s, s, -s),
        (-s, -s, s), (s, -s, s), (s, s, s), (-s, s, s),
    ]
    edges = [
        (0, 1), (1, 2), (2, 3), (3, 0),     # bottom ring: ids 1..4
        (4, 5), (5, 6), (6, 7), (7, 4),     # top ring:    ids 5..8
        (0, 4), (1, 5), (2, 6), (3, 7),     # verticals:   ids 9..12
    ]
    # faces as signed edge-id loops (positive = edge direction, negative = reversed)
    faces = [
        [-4, -3, -2, -1],          # bottom (z = -s side), seen from outside
        [5, 6, 7, 8],              # top
        [1, 10, -5, -9],           # front  (y = -s)
        [2, 11, -6, -10],          # right  (x = +s)
        [3, 12, -7, -11],          # back   (y = +s)
        [4, 9, -8, -12],           # left   (x = -s)
    ]
    return {
        "vertices": [{"id": i + 1, "position": list(map(float, p))} for i, p in enumerate(corners)],
        "edges": [{"id": i + 1, "v": [a + 1, b + 1]} for i, (a, b) in enumerate(edges)],
        "faces": [{"id": i + 1, "loop": loop} for i, loop in enumerate(faces)],
    }


def ellipsoid_band_network(semi_axes=(1.0, 0.8, 0.6), lat_deg: float = 30.0) -> dict:
    """Three-quad band around an ellipsoid between symmetric latitude rings.

    Six vertices (three per ring at longitudes 0/120/240 degrees), nine
    edges, three four-sided faces.
    """
    ax = np.asarray(semi_axes, dtype=np.float64)
    lat = np.deg2rad(lat_deg)

    def at(latitude, lon_deg):
        lon = np.deg2rad(lon_deg)
        p = np.array(
            [np.cos(latitude) * np.cos(lon), np.cos(latitude) * np.sin(lon), np.sin(latitude)]
        )
        return (p * ax).tolist()

    verts = [at(lat, 120.0 * k) for k in range(3)] + [at(-lat, 120.0 * k) for k in range(3)]
    # vertex ids: upper ring 1, 2, 3; lower ring 4, 5, 6
    edges = [
        (1, 2), (2, 3), (3, 1),   # upper ring arcs: ids 1..3
        (4, 5), (5, 6), (6, 4),   # lower ring arcs: ids 4..6
        (1, 4), (2, 5), (3, 6),   # meridians:       ids 7..9
    ]
    faces = [
        [1, 8, -4, -7],
        [2, 9, -5, -8],
        [3, 7, -6, -9],
    ]
    return {
        "vertices": [{"id": i + 1, "position": p} for i, p in enumerate(verts)],
        "edges": [{"id": i + 1, "v": list(e)} for i, e in enumerate(edges)],
        "faces": [{"id": i + 1, "loop": loop} for i, loop in enumerate(faces)],
    }
