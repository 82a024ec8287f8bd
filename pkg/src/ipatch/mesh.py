"""Triangle mesh operations: loading, normals, closest-point queries,
isocurve tracing and boundary extraction.

The mesh is the ground truth that surfaces get fitted against, so the
queries here are exact (no approximate nearest-neighbour shortcuts): the
k-d tree is only used to prune triangle candidates, never to answer a
distance query by itself.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from . import meshio
from .errors import (
    ClosedMesh,
    DegenerateSpan,
    EmptyMesh,
    EmptySelection,
    IsolatedVertex,
    AmbiguousChain,
    NoIntersection,
    NotOnBoundary,
)
from .geom import as_point, bbox_diagonal

WELD_REL = 1e-9           # vertex weld tolerance, relative to bbox diagonal
DEGENERATE_AREA_REL = 1e-12   # triangle area cutoff, relative to diagonal^2
FILTER_EPS_REL = 1e-6     # slack for point-vs-bounding filtering
SPAN_EPS_REL = 1e-9       # "a and b coincide" cutoff for span queries
ON_BOUNDARY_REL = 1e-6    # how close a hint must be to the boundary loop


# ---------------------------------------------------------------------------
# Polyline
# ---------------------------------------------------------------------------

class Polyline:
    """An ordered point sequence with arc-length parametrisation."""

    def __init__(self, points):
        pts = as_point(points)
        if pts.ndim != 2 or len(pts) < 2:
            raise ValueError("polyline needs at least two points")
        self.points = pts
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    @property
    def start(self):
        return self.points[0]

    @property
    def end(self):
        return self.points[-1]

    def point_at(self, s: float):
        """Point at arc length ``s`` (clamped to ``[0, length]``)."""
        s = float(np.clip(s, 0.0, self.length))
        i = int(np.searchsorted(self._cum, s, side="right") - 1)
        i = min(i, len(self.points) - 2)
        seg = self._cum[i + 1] - self._cum[i]
        t = 0.0 if seg <= 0 else (s - self._cum[i]) / seg
        return (1 - t) * self.points[i] + t * self.points[i + 1]

    def midpoint(self):
        return self.point_at(0.5 * self.length)

    def reversed(self) -> "Polyline":
        return Polyline(self.points[::-1])

    def with_point_at(self, s: float):
        """Insert the point at arc length ``s`` into the sequence.

        Returns ``(polyline, index)`` where ``index`` is the position of the
        inserted (or coinciding existing) point.  Splitting at that index
        afterwards yields halves whose concatenation reproduces the new
        sequence exactly.
        """
        s = float(np.clip(s, 0.0, self.length))
        tol = max(self.length, 1.0) * 1e-12
        hit = np.where(np.abs(self._cum - s) <= tol)[0]
        if hit.size:
            return self, int(hit[0])
        q = self.point_at(s)
        i = int(np.searchsorted(self._cum, s, side="right"))
        pts = np.concatenate([self.points[:i], q[None, :], self.points[i:]])
        return Polyline(pts), i

    def split_at_index(self, i: int):
        if not (0 < i < len(self.points) - 1):
            raise ValueError("split index must be interior")
        return Polyline(self.points[: i + 1]), Polyline(self.points[i:])

    def resampled(self, n: int) -> "Polyline":
        s = np.linspace(0.0, self.length, n)
        return Polyline(np.stack([self.point_at(v) for v in s]))

    def sample(self, n: int):
        """``n`` points uniformly spaced in arc length (endpoints included)."""
        return self.resampled(n).points

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return f"Polyline({len(self.points)} pts, length={self.length:.6g})"


# ---------------------------------------------------------------------------
# TriMesh
# ---------------------------------------------------------------------------

class TriMesh:
    """Indexed triangle mesh with per-vertex normals.

    Construction welds coincident vertices, drops degenerate triangles and
    removes unreferenced vertices, so that downstream queries can assume a
    clean mesh.
    """

    def __init__(self, vertices, faces, normals=None, clean=True):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.ascontiguousarray(faces, dtype=np.int64).reshape(-1, 3)
        if clean:
            vertices, faces = _clean(vertices, faces)
        if len(vertices) == 0 or len(faces) == 0:
            raise EmptyMesh("mesh has no usable triangles")
        self.vertices = vertices
        self.faces = faces
        self.scale = float(bbox_diagonal(vertices))
        self._normals = (
            np.asarray(normals, dtype=np.float64) if normals is not None else None
        )
        self._tree = None   # lazy cKDTree over triangle centroids
        self._tri_cache = None

    @property
    def normals(self) -> np.ndarray:
        """Per-vertex normals, estimated on first use."""
        if self._normals is None:
            self._normals = estimate_vertex_normals(self)
        return self._normals

    # -- derived geometry ---------------------------------------------------

    def triangle_corners(self):
        v = self.vertices
        f = self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    def triangle_areas(self):
        a, b, c = self.triangle_corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def _index(self):
        if self._tree is None:
            a, b, c = self.triangle_corners()
            centroids = (a + b + c) / 3.0
            rad = np.sqrt(
                np.maximum.reduce(
                    [
                        np.einsum("ij,ij->i", a - centroids, a - centroids),
                        np.einsum("ij,ij->i", b - centroids, b - centroids),
                        np.einsum("ij,ij->i", c - centroids, c - centroids),
                    ]
                )
            )
            self._tree = cKDTree(centroids)
            self._tri_cache = (a, b, c, rad, float(rad.max()))
        return self._tree, self._tri_cache

    def __repr__(self):
        return f"TriMesh({len(self.vertices)} vertices, {len(self.faces)} faces)"


def _clean(vertices, faces):
    """Weld near-coincident vertices, drop slivers and unused vertices."""
    if len(vertices) == 0:
        return vertices, faces.reshape(-1, 3)
    scale = bbox_diagonal(vertices)
    tol = WELD_REL * scale
    if tol > 0:
        keys = np.round(vertices / tol).astype(np.int64)
        _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        vertices = vertices[first]
        faces = inverse.reshape(-1)[faces] if len(faces) else faces
    # drop triangles with repeated corners
    if len(faces):
        ok = (
            (faces[:, 0] != faces[:, 1])
            & (faces[:, 1] != faces[:, 2])
            & (faces[:, 2] != faces[:, 0])
        )
        faces = faces[ok]
    # drop near-zero-area slivers
    if len(faces):
        a, b, c = (vertices[faces[:, k]] for k in range(3))
        area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
        faces = faces[area > DEGENERATE_AREA_REL * scale * scale]
    # drop unreferenced vertices
    if len(faces):
        used = np.unique(faces)
        remap = -np.ones(len(vertices), dtype=np.int64)
        remap[used] = np.arange(len(used))
        vertices = vertices[used]
        faces = remap[faces]
    else:
        vertices = vertices[:0]
    return vertices, faces


def load_mesh(path) -> TriMesh:
    """Read an OBJ/PLY/STL file into a cleaned :class:`TriMesh`."""
    vertices, faces = meshio.read_any(path)
    if len(vertices) == 0 or len(faces) == 0:
        raise EmptyMesh(f"{path}: no triangles")
    return TriMesh(vertices, faces)


def estimate_vertex_normals(mesh: TriMesh):
    """Angle-weighted average of incident triangle normals, unit length."""
    v, f = mesh.vertices, mesh.faces
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    fn = np.cross(b - a, c - a)
    nrm = np.linalg.norm(fn, axis=1, keepdims=True)
    fn = fn / np.maximum(nrm, 1e-300)

    def corner_angle(p, q, r):
        u, w = q - p, r - p
        cosang = np.einsum("ij,ij->i", u, w) / np.maximum(
            np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1), 1e-300
        )
        return np.arccos(np.clip(cosang, -1.0, 1.0))

    angles = np.stack(
        [corner_angle(a, b, c), corner_angle(b, c, a), corner_angle(c, a, b)], axis=1
    )
    out = np.zeros_like(v)
    for k in range(3):
        np.add.at(out, f[:, k], fn * angles[:, k : k + 1])
    lengths = np.linalg.norm(out, axis=1)
    lonely = np.where(lengths <= 0)[0]
    if lonely.size:
        raise IsolatedVertex(f"vertex {int(lonely[0])} has no incident triangle")
    return out / lengths[:, None]


def surface_normal(mesh: TriMesh, point):
    """Interpolated vertex normal at the closest surface point to ``point``."""
    q, _, tri = closest_point(mesh, point)
    i, j, k = mesh.faces[tri]
    w = _barycentric(q, mesh.vertices[i], mesh.vertices[j], mesh.vertices[k])
    n = w[0] * mesh.normals[i] + w[1] * mesh.normals[j] + w[2] * mesh.normals[k]
    ln = np.linalg.norm(n)
    if ln <= 0:
        n, ln = np.cross(
            mesh.vertices[j] - mesh.vertices[i], mesh.vertices[k] - mesh.vertices[i]
        ), 1.0
        ln = np.linalg.norm(n)
    return n / ln


def _barycentric(p, a, b, c):
    v0, v1, v2 = b - a, c - a, p - a
    d00 = v0 @ v0
    d01 = v0 @ v1
    d11 = v1 @ v1
    d20 = v2 @ v0
    d21 = v2 @ v1
    den = d00 * d11 - d01 * d01
    if abs(den) <= 0:
        return np.array([1.0, 0.0, 0.0])
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    return np.array([1.0 - v - w, v, w])


# ---------------------------------------------------------------------------
# Exact closest point
# ---------------------------------------------------------------------------

def _closest_on_triangles(p, a, b, c):
    """Closest point on each triangle ``(a, b, c)`` to each ``p`` (paired rows)."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    out = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def settle(mask, value):
        nonlocal done
        take = mask & ~done
        if np.any(take):
            out[take] = value[take] if value.ndim == 2 else value
            done = done | take

    settle((d1 <= 0) & (d2 <= 0), a)                     # corner a
    settle((d3 >= 0) & (d4 <= d3), b)                    # corner b
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ab = np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0)
    settle((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + t_ab[:, None] * ab)   # edge ab
    settle((d6 >= 0) & (d5 <= d6), c)                    # corner c
    vb = d5 * d2 - d1 * d6
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ac = np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0)
    settle((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + t_ac[:, None] * ac)   # edge ac
    va = d3 * d6 - d5 * d4
    e1 = d4 - d3
    e2 = d5 - d6
    with np.errstate(divide="ignore", invalid="ignore"):
        t_bc = np.where(e1 + e2 != 0, e1 / (e1 + e2), 0.0)
    settle((va <= 0) & (e1 >= 0) & (e2 >= 0), b + t_bc[:, None] * (c - b))  # edge bc
    rest = ~done
    if np.any(rest):
        den = va + vb + vc
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.where(den != 0, vb / den, 0.0)
            w = np.where(den != 0, vc / den, 0.0)
        out[rest] = (a + v[:, None] * ab + w[:, None] * ac)[rest]
    dist = np.linalg.norm(out - p, axis=1)
    return out, dist


_CHUNK = 4096


def closest_points(mesh: TriMesh, points):
    """Exact closest surface points for a batch of query points.

    Returns ``(foot_points, distances, triangle_indices)``.  A centroid k-d
    tree prunes candidates; every surviving triangle is then tested exactly,
    so the result matches a brute-force scan over all triangles.
    """
    points = as_point(points).reshape(-1, 3)
    tree, (a, b, c, rad, rad_max) = mesh._index()
    feet = np.empty_like(points)
    dist = np.empty(len(points))
    tri = np.empty(len(points), dtype=np.int64)
    for lo in range(0, len(points), _CHUNK):
        chunk = points[lo : lo + _CHUNK]
        # upper bound from the triangle under the nearest centroid
        _, guess = tree.query(chunk, k=1)
        _, d0 = _closest_on_triangles(chunk, a[guess], b[guess], c[guess])
        # every triangle closer than d0 has its centroid within d0 + rad_max
        radius = d0 + rad_max + 1e-12 * (mesh.scale + d0)
        cand = tree.query_ball_point(chunk, radius)
        lens = np.fromiter((len(cl) for cl in cand), count=len(cand), dtype=np.int64)
        flat_tri = np.fromiter(
            (t for cl in cand for t in cl), count=int(lens.sum()), dtype=np.int64
        )
        flat_pt = np.repeat(np.arange(len(chunk)), lens)
        q, d = _closest_on_triangles(chunk[flat_pt], a[flat_tri], b[flat_tri], c[flat_tri])
        starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
        best = np.minimum.reduceat(d, starts)
        is_best = d <= best[flat_pt]
        order = np.arange(len(d))
        first = np.minimum.reduceat(np.where(is_best, order, len(d)), starts)
        feet[lo : lo + _CHUNK] = q[first]
        dist[lo : lo + _CHUNK] = d[first]
        tri[lo : lo + _CHUNK] = flat_tri[first]
    return feet, dist, tri


def closest_point(mesh: TriMesh, point):
    """Closest surface point, distance and triangle index for one query."""
    feet, dist, tri = closest_points(mesh, as_point(point).reshape(1, 3))
    return feet[0], float(dist[0]), int(tri[0])


# ---------------------------------------------------------------------------
# Point filtering
# ---------------------------------------------------------------------------

def filter_points(mesh: TriMesh, boundings, eps=None):
    """Mesh vertices on the non-negative side of every bounding surface.

    A vertex survives when ``B(p) >= -eps`` for each bounding field ``B``;
    ``eps`` defaults to a small multiple of the mesh scale so that vertices
    sitting numerically on a boundary are kept.
    """
    if eps is None:
        eps = FILTER_EPS_REL * mesh.scale
    mask = np.ones(len(mesh.vertices), dtype=bool)
    for b in boundings:
        mask &= np.asarray(b.value(mesh.vertices)) >= -eps
    if not np.any(mask):
        raise EmptySelection("no mesh vertex lies inside all bounding surfaces")
    return mesh.vertices[mask]


# ---------------------------------------------------------------------------
# Isocurve tracing
# ---------------------------------------------------------------------------

def _crossing_chains(mesh: TriMesh, field_values):
    """Zero-crossing chains of a per-vertex scalar field.

    Returns a list of ``(points, closed)`` tuples.  Each chain is a maximal
    sequence of edge-crossing points; interior chains close into loops.
    """
    f = np.asarray(field_values, dtype=np.float64)
    sign = np.where(f >= 0.0, 1, -1)
    faces = mesh.faces
    pts = mesh.vertices

    edge_point: dict[tuple[int, int], int] = {}
    xyz: list[np.ndarray] = []
    links: dict[int, list[int]] = {}

    def crossing(u, v):
        key = (u, v) if u < v else (v, u)
        idx = edge_point.get(key)
        if idx is None:
            t = f[key[0]] / (f[key[0]] - f[key[1]])
            idx = len(xyz)
            xyz.append((1 - t) * pts[key[0]] + t * pts[key[1]])
            edge_point[key] = idx
        return idx

    for tri in faces:
        s = sign[tri]
        if s[0] == s[1] == s[2]:
            continue
        nodes = [
            crossing(tri[i], tri[(i + 1) % 3])
            for i in range(3)
            if s[i] != s[(i + 1) % 3]
        ]
        if len(nodes) == 2 and nodes[0] != nodes[1]:
            links.setdefault(nodes[0], []).append(nodes[1])
            links.setdefault(nodes[1], []).append(nodes[0])

    if not xyz:
        return []

    visited = set()
    chains = []

    def walk(start):
        chain = [start]
        visited.add(start)
        prev = None
        cur = start
        closed = False
        while True:
            nxt = [n for n in links.get(cur, []) if n != prev]
            nxt = [n for n in nxt if n not in visited or (n == start and len(chain) > 2)]
            if not nxt:
                break
            n = nxt[0]
            if n == start:
                closed = True
                break
            chain.append(n)
            visited.add(n)
            prev, cur = cur, n
        return chain, closed

    ends = [n for n, ns in links.items() if len(set(ns)) == 1 or len(ns) == 1]
    for n in ends:
        if n not in visited:
            chain, closed = walk(n)
            if len(chain) >= 2:
                chains.append((np.stack([xyz[i] for i in chain]), closed))
    for n in links:
        if n not in visited:
            chain, closed = walk(n)
            if len(chain) >= 2:
                chains.append((np.stack([xyz[i] for i in chain]), closed))
    return chains


def _project_to_segments(loop_pts, closed, p):
    """Project ``p`` onto a chain; returns (arc_param, point, distance)."""
    pts = loop_pts
    if closed:
        seg_a = pts
        seg_b = np.roll(pts, -1, axis=0)
    else:
        seg_a = pts[:-1]
        seg_b = pts[1:]
    d = seg_b - seg_a
    len2 = np.einsum("ij,ij->i", d, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(len2 > 0, np.einsum("ij,ij->i", p - seg_a, d) / len2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = seg_a + t[:, None] * d
    dist = np.linalg.norm(q - p, axis=1)
    i = int(np.argmin(dist))
    seg_len = np.sqrt(len2)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    return float(cum[i] + t[i] * seg_len[i]), q[i], float(dist[i])


def _loop_arc(loop_pts, sa, qa, sb, qb):
    """Shorter arc of a closed chain between arc parameters ``sa`` and ``sb``."""
    seg = np.linalg.norm(np.roll(loop_pts, -1, axis=0) - loop_pts, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cum[-1])

    def arc(s0, q0, s1, q1):
        """Points going forward (increasing parameter, mod total) s0 -> s1."""
        span = (s1 - s0) % total
        inner = []
        k = int(np.searchsorted(cum, s0, side="right")) % len(loop_pts)
        walked = (cum[k] - s0) % total if span > 0 else 0.0
        while walked < span - 1e-15 * max(total, 1.0):
            inner.append(loop_pts[k % len(loop_pts)])
            k += 1
            walked += seg[(k - 1) % len(loop_pts)]
        pts = [q0] + inner + [q1]
        arr = np.stack(pts)
        # drop duplicate neighbours that appear when q0/q1 sit on chain points
        keep = np.concatenate(
            [[True], np.linalg.norm(np.diff(arr, axis=0), axis=1) > 1e-14 * max(total, 1.0)]
        )
        arr = arr[keep]
        if len(arr) < 2:
            arr = np.stack([q0, q1])
        return arr

    forward = (sb - sa) % total
    if forward <= total - forward:
        return arc(sa, qa, sb, qb)
    return arc(sb, qb, sa, qa)[::-1]


def trace_intersection(mesh: TriMesh, surface, a, b) -> Polyline:
    """Polyline where ``surface`` crosses the mesh, running from near ``a``
    to near ``b``.

    The zero set is traced through per-edge sign changes of the field sampled
    at mesh vertices.  When it splits into several chains, the one whose ends
    best match the hints wins; two comparably good chains raise
    :class:`AmbiguousChain`.
    """
    a = as_point(a)
    b = as_point(b)
    values = np.asarray(surface.value(mesh.vertices), dtype=np.float64)
    chains = _crossing_chains(mesh, values)
    if not chains:
        raise NoIntersection("the surface does not cross the mesh")

    candidates = []  # (score, points)
    for pts, closed in chains:
        if closed and len(pts) >= 3:
            sa, qa, da = _project_to_segments(pts, True, a)
            sb, qb, db = _project_to_segments(pts, True, b)
            arc = _loop_arc(pts, sa, qa, sb, qb)
            candidates.append((da + db, arc))
        else:
            d_fwd = np.linalg.norm(pts[0] - a) + np.linalg.norm(pts[-1] - b)
            d_rev = np.linalg.norm(pts[0] - b) + np.linalg.norm(pts[-1] - a)
            if d_rev < d_fwd:
                candidates.append((d_rev, pts[::-1]))
            else:
                candidates.append((d_fwd, pts))
    candidates.sort(key=lambda it: it[0])
    if len(candidates) > 1:
        best, second = candidates[0][0], candidates[1][0]
        if second <= 1.1 * best + 1e-9 * mesh.scale:
            raise AmbiguousChain(
                f"two intersection chains match the endpoints comparably "
                f"(scores {best:.6g} and {second:.6g})"
            )
    pts = candidates[0][1]
    if len(pts) < 2:
        raise NoIntersection("intersection chain collapsed to a point")
    return Polyline(pts)


# ---------------------------------------------------------------------------
# Open boundary
# ---------------------------------------------------------------------------

def _boundary_loops(mesh: TriMesh):
    f = mesh.faces
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    und = np.sort(edges, axis=1)
    _, idx, counts = np.unique(und, axis=0, return_index=True, return_counts=True)
    boundary = edges[idx[counts == 1]]
    if len(boundary) == 0:
        return []
    nxt = {int(u): int(v) for u, v in boundary}
    loops = []
    seen = set()
    for start in list(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        cur = nxt[start]
        while cur != start and cur not in seen:
            loop.append(cur)
            seen.add(cur)
            if cur not in nxt:
                break
            cur = nxt[cur]
        if len(loop) >= 3:
            loops.append(np.asarray(loop, dtype=np.int64))
    return loops


def boundary_polyline(mesh: TriMesh, a, b) -> Polyline:
    """Shorter open-boundary arc between the projections of ``a`` and ``b``."""
    a = as_point(a)
    b = as_point(b)
    if np.linalg.norm(a - b) <= SPAN_EPS_REL * mesh.scale:
        raise DegenerateSpan("span endpoints coincide")
    loops = _boundary_loops(mesh)
    if not loops:
        raise ClosedMesh("mesh has no open boundary")
    best = None
    for loop in loops:
        pts = mesh.vertices[loop]
        sa, qa, da = _project_to_segments(pts, True, a)
        sb, qb, db = _project_to_segments(pts, True, b)
        score = max(da, db)
        if best is None or score < best[0]:
            best = (score, pts, sa, qa, sb, qb)
    score, pts, sa, qa, sb, qb = best
    if score > ON_BOUNDARY_REL * mesh.scale * 10:
        raise NotOnBoundary(
            f"hint point is {score:.3g} away from the nearest boundary loop"
        )
    if np.linalg.norm(qa - qb) <= SPAN_EPS_REL * mesh.scale:
        raise DegenerateSpan("span endpoints project to the same boundary point")
    return Polyline(_loop_arc(pts, sa, qa, sb, qb))
