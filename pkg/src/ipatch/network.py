"""Curve networks drawn on a mesh.

A network is a set of vertices (snapped to the mesh), edges (curves traced
on the mesh between two vertices) and faces (closed loops of edges).  Each
face will receive one implicit patch; each edge carries the ribbon and
bounding surface shared by its adjacent faces, which is what makes
neighbouring patches join smoothly.

Refinement splits edges at their arc-length midpoint and faces into
per-corner quads.  When only one of an edge's two faces is refined, the
substitution happens in that face alone: the edge's children keep sharing
the parent's ribbon and bounding objects (a T-node), so the untouched
neighbour's patch is preserved bit for bit while the refined side still
interpolates exactly the same curve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    AlreadySplit,
    AmbiguousChain,
    CenterOffMesh,
    ClosedMesh,
    CollinearThrough,
    DegenerateNormal,
    DegenerateSpan,
    InconsistentLoop,
    IoError,
    NoIntersection,
    NonManifoldEdge,
    NotOnBoundary,
    OpenLoop,
    RefinementStalled,
    SchemaError,
)
from .geom import as_point, frozen
from .implicit import Plane
from .mesh import (
    Polyline,
    TriMesh,
    boundary_polyline,
    closest_point,
    surface_normal,
    trace_intersection,
)
from .ribbons import Ribbon, bounding_plane, build_ribbon, curved_bounding

__all__ = [
    "NetVertex",
    "NetEdge",
    "NetFace",
    "CurveNetwork",
    "load_network",
    "network_from_dict",
    "split_edge",
    "split_face",
]

BOUNDING_MODES = ("planar", "midpoint-through", "curved-for-boundary")
CENTER_TOL_REL = 1e-3     # how far a face-split center may sit off the mesh


@dataclass(frozen=True)
class NetVertex:
    id: int
    position: np.ndarray   # snapped onto the mesh
    normal: np.ndarray     # interpolated mesh normal at the position

    def __post_init__(self):
        object.__setattr__(self, "position", frozen(as_point(self.position)))
        object.__setattr__(self, "normal", frozen(as_point(self.normal)))


@dataclass
class NetEdge:
    id: int
    v: tuple                       # (start vertex id, end vertex id)
    polyline: Polyline = None      # sampled curve, oriented v[0] -> v[1]
    ribbon: Ribbon = None
    bounding: object = None        # ImplicitSurface carrying the curve
    rim: bool = False              # follows the mesh's open boundary
    parent: int = None
    children: tuple = None         # (first-half id, second-half id)
    inherited: bool = False        # shares the parent's ribbon/bounding objects

    def endpoints(self, forward: bool) -> tuple:
        return self.v if forward else (self.v[1], self.v[0])

    def oriented_polyline(self, forward: bool) -> Polyline:
        return self.polyline if forward else self.polyline.reversed()


@dataclass
class NetFace:
    id: int
    loop: tuple                    # ((edge_id, forward), ...)


class CurveNetwork:
    def __init__(self, mesh: TriMesh, source: str = ""):
        self.mesh = mesh
        self.vertices: dict[int, NetVertex] = {}
        self.edges: dict[int, NetEdge] = {}
        self.faces: dict[int, NetFace] = {}
        self.source = source   # canonical JSON of the loaded input, for provenance

    # -- id allocation ------------------------------------------------------

    def _fresh_vertex_id(self) -> int:
        return max(self.vertices, default=0) + 1

    def _fresh_edge_id(self) -> int:
        return max(self.edges, default=0) + 1

    def _fresh_face_id(self) -> int:
        return max(self.faces, default=0) + 1

    # -- construction helpers -----------------------------------------------

    def add_vertex_at(self, point) -> NetVertex:
        """New vertex snapped to the mesh at the closest point to ``point``."""
        foot, _, _ = closest_point(self.mesh, point)
        vid = self._fresh_vertex_id()
        vert = NetVertex(vid, foot, surface_normal(self.mesh, foot))
        self.vertices[vid] = vert
        return vert

    def add_vertex_pinned(self, point) -> NetVertex:
        """New vertex at exactly ``point`` (assumed to lie on the mesh)."""
        vid = self._fresh_vertex_id()
        vert = NetVertex(vid, point, surface_normal(self.mesh, point))
        self.vertices[vid] = vert
        return vert

    # -- queries --------------------------------------------------------------

    def faces_of_edge(self, edge_id: int) -> list:
        return [
            f.id
            for f in self.faces.values()
            if any(e == edge_id for e, _ in f.loop)
        ]

    def loop_corners(self, face_id: int) -> np.ndarray:
        """Corner positions of a face, one per loop entry, in loop order."""
        face = self.faces[face_id]
        pts = []
        for eid, fwd in face.loop:
            start, _ = self.edges[eid].endpoints(fwd)
            pts.append(self.vertices[start].position)
        return np.stack(pts)

    def face_probe(self, face_id: int) -> np.ndarray:
        """A point representative of the face interior: the mass centroid of
        its boundary samples."""
        face = self.faces[face_id]
        pts = np.concatenate([self.edges[eid].polyline.points for eid, _ in face.loop])
        return pts.mean(axis=0)

    def clone(self) -> "CurveNetwork":
        """Structural copy; geometry objects (polylines, surfaces) are shared."""
        twin = CurveNetwork(self.mesh, self.source)
        twin.vertices = dict(self.vertices)
        twin.edges = {k: replace(e) for k, e in self.edges.items()}
        twin.faces = {k: NetFace(f.id, tuple(f.loop)) for k, f in self.faces.items()}
        return twin


# ---------------------------------------------------------------------------
# Loading and validation
# ---------------------------------------------------------------------------

def _schema_positions(data) -> dict:
    if not isinstance(data, dict):
        raise SchemaError("network document must be a JSON object")
    for key in ("vertices", "edges", "faces"):
        if key not in data or not isinstance(data[key], list):
            raise SchemaError(f"network document needs a {key!r} list")
    out = {}
    for rec in data["vertices"]:
        try:
            vid = int(rec["id"])
            pos = [float(x) for x in rec["position"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad vertex record {rec!r}: {exc}") from None
        if len(pos) != 3:
            raise SchemaError(f"vertex {vid}: position must have 3 coordinates")
        if vid in out:
            raise SchemaError(f"duplicate vertex id {vid}")
        out[vid] = np.asarray(pos)
    return out


def _schema_edges(data, vertex_ids) -> dict:
    out = {}
    for rec in data["edges"]:
        try:
            eid = int(rec["id"])
            a, b = (int(x) for x in rec["v"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad edge record {rec!r}: {exc}") from None
        if eid in out:
            raise SchemaError(f"duplicate edge id {eid}")
        if a not in vertex_ids or b not in vertex_ids:
            raise SchemaError(f"edge {eid} references unknown vertex")
        if a == b:
            raise SchemaError(f"edge {eid} starts and ends at the same vertex")
        out[eid] = (a, b)
    return out


def _schema_faces(data, edges) -> dict:
    out = {}
    uses: dict[int, list] = {}
    for rec in data["faces"]:
        try:
            fid = int(rec["id"])
            raw = [int(x) for x in rec["loop"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad face record {rec!r}: {exc}") from None
        if fid in out:
            raise SchemaError(f"duplicate face id {fid}")
        if len(raw) < 2:
            raise SchemaError(f"face {fid}: loop needs at least two edges")
        loop = []
        for signed in raw:
            if signed == 0:
                raise SchemaError(f"face {fid}: loop entries are signed, nonzero ids")
            eid, fwd = abs(signed), signed > 0
            if eid not in edges:
                raise SchemaError(f"face {fid} references unknown edge {eid}")
            loop.append((eid, fwd))
            uses.setdefault(eid, []).append((fid, fwd))
        # the loop must chain head to tail
        for k, (eid, fwd) in enumerate(loop):
            nxt_eid, nxt_fwd = loop[(k + 1) % len(loop)]
            end = edges[eid][1] if fwd else edges[eid][0]
            start = edges[nxt_eid][0] if nxt_fwd else edges[nxt_eid][1]
            if end != start:
                raise OpenLoop(
                    f"face {fid}: edge {eid} ends at vertex {end} but the next "
                    f"edge {nxt_eid} starts at vertex {start}"
                )
        out[fid] = tuple(loop)
    for eid, entries in uses.items():
        if len(entries) > 2:
            raise NonManifoldEdge(
                f"edge {eid} appears in {len(entries)} face loops (max 2)"
            )
        if len(entries) == 2 and entries[0][1] == entries[1][1]:
            raise SchemaError(
                f"edge {eid} is traversed in the same direction by faces "
                f"{entries[0][0]} and {entries[1][0]}"
            )
    return out


def network_from_dict(data: dict, mesh: TriMesh, mode: str = "planar") -> CurveNetwork:
    """Build, snap and trace a network from schema-shaped data."""
    if mode not in BOUNDING_MODES:
        raise ValueError(f"unknown bounding mode {mode!r}; use one of {BOUNDING_MODES}")
    positions = _schema_positions(data)
    edge_pairs = _schema_edges(data, set(positions))
    face_loops = _schema_faces(data, edge_pairs)

    net = CurveNetwork(mesh, source=json.dumps(data, sort_keys=True))
    for vid, pos in positions.items():
        foot, _, _ = closest_point(mesh, pos)
        net.vertices[vid] = NetVertex(vid, foot, surface_normal(mesh, foot))
    for eid, pair in edge_pairs.items():
        net.edges[eid] = NetEdge(eid, pair)
    for fid, loop in face_loops.items():
        net.faces[fid] = NetFace(fid, loop)

    for eid in net.edges:
        realize_edge(net, eid, mode)
    return net


def load_network(path, mesh: TriMesh, mode: str = "planar") -> CurveNetwork:
    """Read a network JSON file; malformed or missing input is a schema error."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read network file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    return network_from_dict(data, mesh, mode)


# ---------------------------------------------------------------------------
# Edge geometry
# ---------------------------------------------------------------------------

def _is_rim_edge(net: CurveNetwork, edge: NetEdge) -> bool:
    """An edge follows the mesh's open boundary when it borders only one
    face and both endpoints project onto a boundary loop."""
    if len(net.faces_of_edge(edge.id)) > 1:
        return False
    a = net.vertices[edge.v[0]].position
    b = net.vertices[edge.v[1]].position
    try:
        boundary_polyline(net.mesh, a, b)
    except (ClosedMesh, NotOnBoundary, DegenerateSpan):
        return False
    return True


def realize_edge(net: CurveNetwork, edge_id: int, mode: str = "planar") -> NetEdge:
    """Trace the edge's curve and build its bounding surface and ribbon."""
    edge = net.edges[edge_id]
    va, vb = net.vertices[edge.v[0]], net.vertices[edge.v[1]]
    a, b = va.position, vb.position

    edge.rim = _is_rim_edge(net, edge)
    if edge.rim:
        pl = boundary_polyline(net.mesh, a, b)
        if mode == "curved-for-boundary":
            bounding = curved_bounding(pl, a, va.normal, b, vb.normal)
        else:
            bounding = bounding_plane(a, va.normal, b, vb.normal)
    else:
        bounding = bounding_plane(a, va.normal, b, vb.normal)
        pl = trace_intersection(net.mesh, bounding, a, b)
        if mode == "midpoint-through":
            try:
                bounding = bounding_plane(a, va.normal, b, vb.normal, through=pl.midpoint())
                pl = trace_intersection(net.mesh, bounding, a, b)
            except CollinearThrough:
                pass  # straight curve: the plain plane already contains it
    # pin the ends to the exact vertex positions so loops close numerically
    pts = pl.points.copy()
    pts[0], pts[-1] = a, b
    pl = Polyline(pts)

    edge.polyline = pl
    edge.bounding = bounding
    edge.ribbon = build_ribbon(
        pl, a, va.normal, b, vb.normal,
        orient_normal=surface_normal(net.mesh, pl.midpoint()),
    )
    return edge


def refit_edge(net: CurveNetwork, edge_id: int) -> NetEdge:
    """Rebuild an edge's ribbon and bounding from its own (half-)polyline.

    Used after a boundary-driven split: the children stop sharing the
    parent's surfaces and get their own, tighter fits.
    """
    edge = net.edges[edge_id]
    va, vb = net.vertices[edge.v[0]], net.vertices[edge.v[1]]
    a, b = va.position, vb.position
    if edge.rim and not isinstance(edge.bounding, Plane):
        # curved wall: refit to the half polyline
        edge.bounding = curved_bounding(edge.polyline, a, va.normal, b, vb.normal)
    else:
        edge.bounding = bounding_plane(a, va.normal, b, vb.normal)
    edge.ribbon = build_ribbon(
        edge.polyline, a, va.normal, b, vb.normal,
        orient_normal=surface_normal(net.mesh, edge.polyline.midpoint()),
    )
    edge.inherited = False
    return edge


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

def _substitute(face: NetFace, edge: NetEdge) -> NetFace:
    """Replace ``edge`` in the face loop by its two children, respecting
    traversal direction."""
    c1, c2 = edge.children
    loop = []
    for eid, fwd in face.loop:
        if eid != edge.id:
            loop.append((eid, fwd))
        elif fwd:
            loop += [(c1, True), (c2, True)]
        else:
            loop += [(c2, False), (c1, False)]
    return NetFace(face.id, tuple(loop))


def adopt_children(net: CurveNetwork, face_id: int, edge_id: int) -> None:
    """Swap an already-split edge for its children in one face's loop."""
    edge = net.edges[edge_id]
    if edge.children is None:
        raise ValueError(f"edge {edge_id} is not split; nothing to adopt")
    net.faces[face_id] = _substitute(net.faces[face_id], edge)


def split_edge(net: CurveNetwork, edge_id: int, replace_in=None) -> tuple:
    """Split an edge at its arc-length midpoint.

    The midpoint is inserted into the parent polyline first, so the two
    child polylines partition the parent's samples exactly.  Children start
    out *inherited*: they share the parent's ribbon and bounding objects.
    ``replace_in`` limits the loop substitution to the given face ids
    (default: every adjacent face).

    Returns ``(first_half_id, second_half_id)``.
    """
    edge = net.edges[edge_id]
    if edge.children is not None:
        raise AlreadySplit(f"edge {edge_id} was already split")
    pl, idx = edge.polyline.with_point_at(0.5 * edge.polyline.length)
    if idx <= 0 or idx >= len(pl.points) - 1:
        raise RefinementStalled(f"edge {edge_id} is too short to split")
    edge.polyline = pl
    first, second = pl.split_at_index(idx)
    mid = net.add_vertex_pinned(pl.points[idx])

    id1 = net._fresh_edge_id()
    net.edges[id1] = NetEdge(
        id1, (edge.v[0], mid.id), polyline=first, ribbon=edge.ribbon,
        bounding=edge.bounding, rim=edge.rim, parent=edge.id, inherited=True,
    )
    id2 = net._fresh_edge_id()
    net.edges[id2] = NetEdge(
        id2, (mid.id, edge.v[1]), polyline=second, ribbon=edge.ribbon,
        bounding=edge.bounding, rim=edge.rim, parent=edge.id, inherited=True,
    )
    edge.children = (id1, id2)

    targets = net.faces_of_edge(edge_id) if replace_in is None else replace_in
    for fid in targets:
        if any(eid == edge_id for eid, _ in net.faces[fid].loop):
            net.faces[fid] = _substitute(net.faces[fid], edge)
    return id1, id2


def _paired_sides(net: CurveNetwork, face: NetFace) -> list:
    """Group a fully split loop into consecutive (first-half, second-half)
    pairs; each pair is one original side."""
    loop = list(face.loop)
    if len(loop) % 2 != 0:
        raise InconsistentLoop(
            f"face {face.id}: loop has {len(loop)} entries, expected an even "
            f"count of half-edges"
        )
    sides = []
    for j in range(0, len(loop), 2):
        (e1, f1), (e2, f2) = loop[j], loop[j + 1]
        a, b = net.edges[e1], net.edges[e2]
        if a.parent is None or a.parent != b.parent:
            raise InconsistentLoop(
                f"face {face.id}: entries {e1} and {e2} are not halves of a "
                f"common parent edge; split every side before splitting the face"
            )
        mid_a = a.endpoints(f1)[1]
        mid_b = b.endpoints(f2)[0]
        if mid_a != mid_b:
            raise InconsistentLoop(
                f"face {face.id}: half-edges {e1} and {e2} do not meet at a "
                f"midpoint vertex"
            )
        sides.append(((e1, f1), (e2, f2), mid_a))
    return sides


def split_face(net: CurveNetwork, face_id: int, center) -> list:
    """Split a face into one quad per original corner.

    Preconditions: every side of the face has already been split in half
    (its loop holds the sibling half-edge pairs).  A center vertex is placed
    at ``center`` (snapped to the mesh), spokes are traced from each side
    midpoint to the center, and each corner gets the quad
    ``[mid_{k-1} -> corner_k, corner_k -> mid_k, spoke_k, spoke_{k-1}
    reversed]``.

    Returns the new face ids.
    """
    face = net.faces[face_id]
    sides = _paired_sides(net, face)
    n = len(sides)

    foot, dist, _ = closest_point(net.mesh, center)
    if dist > CENTER_TOL_REL * net.mesh.scale:
        raise CenterOffMesh(
            f"face {face_id}: center sits {dist:.4g} off the mesh "
            f"(limit {CENTER_TOL_REL * net.mesh.scale:.4g})"
        )
    cvert = net.add_vertex_pinned(foot)

    # spokes: midpoint of each side -> center
    spoke_ids = []
    for (_, _, mid_vid) in (s for s in sides):
        mv = net.vertices[mid_vid]
        if np.linalg.norm(mv.position - cvert.position) < 1e-9 * net.mesh.scale:
            raise RefinementStalled(
                f"face {face_id}: center coincides with a side midpoint"
            )
        try:
            sb = bounding_plane(mv.position, mv.normal, cvert.position, cvert.normal)
            spl = trace_intersection(net.mesh, sb, mv.position, cvert.position)
        except (DegenerateNormal, NoIntersection, AmbiguousChain) as exc:
            raise RefinementStalled(
                f"face {face_id}: could not trace a spoke: {exc}"
            ) from exc
        pts = spl.points.copy()
        pts[0], pts[-1] = mv.position, cvert.position
        spl = Polyline(pts)
        sid = net._fresh_edge_id()
        net.edges[sid] = NetEdge(
            sid, (mid_vid, cvert.id), polyline=spl,
            bounding=sb,
            ribbon=build_ribbon(
                spl, mv.position, mv.normal, cvert.position, cvert.normal,
                orient_normal=surface_normal(net.mesh, spl.midpoint()),
            ),
        )
        spoke_ids.append(sid)

    new_ids = []
    for k in range(n):
        prev = (k - 1) % n
        entry_b_prev = sides[prev][1]       # mid_{k-1} -> corner_k
        entry_a_k = sides[k][0]             # corner_k -> mid_k
        loop = (
            entry_b_prev,
            entry_a_k,
            (spoke_ids[k], True),           # mid_k -> center
            (spoke_ids[prev], False),       # center -> mid_{k-1}
        )
        _check_loop_chains(net, face_id, loop)
        fid = net._fresh_face_id()
        net.faces[fid] = NetFace(fid, loop)
        new_ids.append(fid)

    del net.faces[face_id]
    return new_ids


def _check_loop_chains(net: CurveNetwork, face_id: int, loop) -> None:
    for k, (eid, fwd) in enumerate(loop):
        nxt_eid, nxt_fwd = loop[(k + 1) % len(loop)]
        end = net.edges[eid].endpoints(fwd)[1]
        start = net.edges[nxt_eid].endpoints(nxt_fwd)[0]
        if end != start:
            raise InconsistentLoop(
                f"face {face_id}: sub-face loop breaks between edges "
                f"{eid} and {nxt_eid}"
            )


# ---------------------------------------------------------------------------
# Serialization (for provenance and round-trips)
# ---------------------------------------------------------------------------

def network_to_dict(net: CurveNetwork) -> dict:
    """Current structure in the input schema (positions as snapped)."""
    live_edges = sorted({eid for f in net.faces.values() for eid, _ in f.loop})
    live_verts = sorted(
        {v for eid in live_edges for v in net.edges[eid].v}
    )
    return {
        "vertices": [
            {"id": vid, "position": [float(x) for x in net.vertices[vid].position]}
            for vid in live_verts
        ],
        "edges": [
            {"id": eid, "v": [int(net.edges[eid].v[0]), int(net.edges[eid].v[1])]}
            for eid in live_edges
        ],
        "faces": [
            {
                "id": fid,
                "loop": [eid if fwd else -eid for eid, fwd in net.faces[fid].loop],
            }
            for fid in sorted(net.faces)
        ],
    }


def save_network(net: CurveNetwork, path) -> None:
    try:
        Path(path).write_text(json.dumps(network_to_dict(net), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
