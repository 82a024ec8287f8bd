"""Adaptive fit-measure-split refinement of a patchwork.

Each round fits one patch per face, tessellates it, and measures the
Euclidean deviation from the target mesh (as a percentage of the mesh
bbox diagonal), plus a per-side boundary deviation: the RMS Euclidean
distance from the side's traced polyline samples to the patch surface.
Boundaries out of tolerance are split in half and refit on both sides;
faces out of tolerance are split into per-corner quads around the patch's
own center point, with within-tolerance sides keeping their inherited
ribbons.  Faces untouched by a round keep their cached patches bit for
bit.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fitting import FitConfig, FittedPatch, fit_face
from .implicit import FaithfulField
from .network import (
    CurveNetwork,
    adopt_children,
    refit_edge,
    split_edge,
    split_face,
)
from .patchwork import Patchwork, provenance_for
from .tessellate import deviation_map, polish_vertices, tessellate_patch

__all__ = [
    "PatchMeasure",
    "RefinePlan",
    "RefineResult",
    "fit_patchwork",
    "measure_patch",
    "boundary_deviation",
    "plan_refinement",
    "execute_plan",
    "refine_until",
]

DEFAULT_TOL_PCT = 0.3
MEASURE_RESOLUTION = 48


def _pmap(fn, items):
    """Map preserving order; optionally threaded via IPATCH_THREADS."""
    items = list(items)
    try:
        workers = int(os.environ.get("IPATCH_THREADS", "1"))
    except ValueError:
        workers = 1
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class PatchMeasure:
    """Euclidean deviation of one tessellated patch from the target mesh."""

    face_id: int
    avg: float
    max: float
    avg_pct: float          # percentage of the mesh bbox diagonal
    max_pct: float
    samples: int
    boundary_pct: dict      # edge id -> RMS polyline-to-patch distance, in %


@dataclass(frozen=True)
class RefinePlan:
    edges: tuple            # edge ids to split and refit on both sides
    faces: dict             # face id -> center point for the face split

    def is_empty(self) -> bool:
        return not self.edges and not self.faces


@dataclass(frozen=True)
class RefineResult:
    patchwork: Patchwork
    measures: dict          # face id -> PatchMeasure
    report: tuple           # one row dict per iteration
    converged: bool


# ---------------------------------------------------------------------------
# Fitting and measuring
# ---------------------------------------------------------------------------

def fit_all(net: CurveNetwork, config: FitConfig = FitConfig()) -> dict:
    fids = sorted(net.faces)
    patches = _pmap(lambda fid: fit_face(net, fid, config), fids)
    return dict(zip(fids, patches))


def fit_patchwork(net: CurveNetwork, config: FitConfig = FitConfig()) -> Patchwork:
    """One optimized patch per face, with provenance of the network input."""
    fitted = fit_all(net, config)
    return Patchwork(
        tuple(fitted[fid] for fid in sorted(fitted)),
        provenance_for(net.source, config),
    )


def _off_corner(patch, pts: np.ndarray) -> np.ndarray:
    """Drop samples sitting where two or more boundings vanish together.

    The distance-like channel has no single value on those corner lines, so
    projections started there would measure direction noise, not geometry.
    """
    b = np.stack([np.abs(np.atleast_1d(bnd.dist(pts))) for _, bnd in patch.sides])
    second_smallest = np.sort(b, axis=0)[1]
    return pts[second_smallest > 1e-6 * patch.feature_scale()]


def boundary_deviation(net: CurveNetwork, fp: FittedPatch) -> dict:
    """RMS distance from each side's traced samples to the patch surface.

    Every sample of a side's polyline is projected onto the patch's zero
    set by the Newton iteration along the distance-channel gradient; the
    projection displacements aggregate to one RMS per side, as a
    percentage of the mesh bbox diagonal.
    """
    field = FaithfulField(fp.patch)
    scale = net.mesh.scale
    out = {}
    for eid, _fwd in net.faces[fp.face_id].loop:
        pts = _off_corner(fp.patch, net.edges[eid].polyline.points)
        if len(pts) == 0:
            out[eid] = 0.0
            continue
        moved, _ = polish_vertices(field, pts, step_cap=0.05 * scale)
        d = np.linalg.norm(moved - pts, axis=1)
        out[eid] = 100.0 * float(np.sqrt(np.mean(d * d))) / scale
    return out


def measure_patch(
    net: CurveNetwork, fp: FittedPatch, resolution: int = MEASURE_RESOLUTION
) -> PatchMeasure:
    """Tessellate the patch and measure point distances to the mesh."""
    cover = np.vstack([fp.points.reshape(-1, 3), fp.center[None]])
    tess = tessellate_patch(fp.patch, resolution=resolution, cover=cover)
    dev = deviation_map(tess.vertices, net.mesh)
    diag = net.mesh.scale
    return PatchMeasure(
        face_id=fp.face_id,
        avg=float(dev.mean()),
        max=float(dev.max()),
        avg_pct=100.0 * float(dev.mean()) / diag,
        max_pct=100.0 * float(dev.max()) / diag,
        samples=len(dev),
        boundary_pct=boundary_deviation(net, fp),
    )


# ---------------------------------------------------------------------------
# Planning and executing one refinement round
# ---------------------------------------------------------------------------

def plan_refinement(
    net: CurveNetwork, patches: dict, measures: dict, tol_pct: float = DEFAULT_TOL_PCT
) -> RefinePlan:
    """Out-of-tolerance boundaries and faces, with face split centers.

    A shared boundary is judged by the worse of the two patches meeting
    there.  Edges of a splitting face that are themselves within tolerance
    are deliberately left out: the face split keeps them as inherited
    halves, so the neighbor's patch is untouched.
    """
    worst_edge: dict = {}
    for fid in sorted(net.faces):
        for eid, pct in measures[fid].boundary_pct.items():
            worst_edge[eid] = max(worst_edge.get(eid, 0.0), pct)
    edges = tuple(eid for eid in sorted(worst_edge) if worst_edge[eid] > tol_pct)
    faces = {
        fid: patches[fid].center
        for fid in sorted(net.faces)
        if measures[fid].max_pct > tol_pct
    }
    return RefinePlan(edges, faces)


def _prepare_face_sides(net: CurveNetwork, fid: int) -> None:
    """Make every side of the face a sibling half-edge pair."""
    k = 0
    loop = list(net.faces[fid].loop)
    while k < len(loop):
        eid, _ = loop[k]
        edge = net.edges[eid]
        nxt_eid, _ = loop[(k + 1) % len(loop)]
        if edge.parent is not None and net.edges[nxt_eid].parent == edge.parent:
            k += 2          # this side is already split
            continue
        if edge.children is None:
            split_edge(net, eid, replace_in=[fid])
        else:
            adopt_children(net, fid, eid)       # the neighbor split it earlier
        loop = list(net.faces[fid].loop)
        k += 2


def execute_plan(net: CurveNetwork, plan: RefinePlan) -> set:
    """Apply the plan; returns the face ids whose patches must be refit."""
    touched = set()

    for eid in plan.edges:
        edge = net.edges[eid]
        if edge.children is None:
            c1, c2 = split_edge(net, eid)       # substitutes in every face
        else:
            c1, c2 = edge.children
            for fid in net.faces_of_edge(eid):  # faces still holding the parent
                adopt_children(net, fid, eid)
        for cid in (c1, c2):
            if net.edges[cid].inherited:
                refit_edge(net, cid)            # own, tighter ribbon per half
        touched |= set(net.faces_of_edge(c1)) | set(net.faces_of_edge(c2))

    for fid, center in plan.faces.items():
        if fid not in net.faces:
            continue
        _prepare_face_sides(net, fid)
        new_ids = split_face(net, fid, center)
        touched.add(fid)
        touched |= set(new_ids)
    return touched


# ---------------------------------------------------------------------------
# The refinement loop
# ---------------------------------------------------------------------------

def refine_until(
    net: CurveNetwork,
    tol_pct: float = DEFAULT_TOL_PCT,
    config: FitConfig = FitConfig(),
    max_iter: int = 5,
    resolution: int = MEASURE_RESOLUTION,
) -> RefineResult:
    """Refine until every patch and boundary is within tolerance.

    Each pass fits and measures the faces that changed, then plans the next
    round; the loop stops when the plan comes back empty (everything within
    tolerance — ``converged``) or the round budget ``max_iter`` is spent.
    Returns the final patchwork along with one report row per pass.  Faces
    untouched by a round are not refit, so their patches are reproducible
    across runs.
    """
    patches: dict = {}
    measures: dict = {}
    rows = []
    converged = False

    for iteration in range(max_iter + 1):
        missing = [fid for fid in sorted(net.faces) if fid not in patches]
        for fid, fp in zip(missing, _pmap(lambda f: fit_face(net, f, config), missing)):
            patches[fid] = fp
        for fid, m in zip(
            missing, _pmap(lambda f: measure_patch(net, patches[f], resolution), missing)
        ):
            measures[fid] = m

        live = sorted(net.faces)
        counts = np.array([measures[fid].samples for fid in live], dtype=np.float64)
        avgs = np.array([measures[fid].avg_pct for fid in live])
        avg_pct = float((avgs * counts).sum() / counts.sum())
        max_pct = float(np.max([measures[fid].max_pct for fid in live]))
        worst_boundary = max(
            (pct for fid in live for pct in measures[fid].boundary_pct.values()),
            default=0.0,
        )
        rows.append(
            {
                "iteration": iteration,
                "patch_count": len(live),
                "avg_pct": avg_pct,
                "max_pct": max_pct,
                "worst_boundary_pct": worst_boundary,
            }
        )

        plan = plan_refinement(net, patches, measures, tol_pct)
        if plan.is_empty():
            converged = True
            break
        if iteration == max_iter:
            break

        touched = execute_plan(net, plan)
        for fid in list(patches):
            if fid not in net.faces or fid in touched:
                patches.pop(fid, None)
                measures.pop(fid, None)

    live = sorted(net.faces)
    pw = Patchwork(
        tuple(patches[fid] for fid in live),
        provenance_for(net.source, config, tol_pct=tol_pct, converged=converged),
    )
    return RefineResult(pw, {fid: measures[fid] for fid in live}, tuple(rows), converged)
