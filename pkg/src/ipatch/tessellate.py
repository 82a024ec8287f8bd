"""Turn implicit patches into triangle meshes.

The pipeline per patch: sample the raw field on a regular grid around the
patch corners, extract the zero isosurface with marching cubes, keep only
triangles whose centroid lies inside every bounding surface, then pull the
vertices onto the zero set of the distance-like channel with a Newton
iteration along its gradient.  Marching cubes runs on the raw field (it is
smooth on the whole grid, unlike the distance-like form) while the polish
targets the distance-like channel, whose zero set is the actual surface.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from skimage.measure import marching_cubes as _marching_cubes

from .errors import EmptyIsosurface, PolishFailed
from .geom import as_point, frozen
from .implicit import FaithfulField, IPatch
from .mesh import TriMesh, closest_points

__all__ = [
    "GridSpec",
    "sample_grid",
    "extract_isosurface",
    "clip_to_patch",
    "marching_cubes",
    "patch_grid",
    "select_spanning_sheet",
    "polish_vertices",
    "tessellate_patch",
    "merge_meshes",
    "deviation_map",
]

LOG = logging.getLogger(__name__)

GRID_MARGIN = 0.1          # padding around the corner bbox, per side
POLISH_TOL_REL = 1e-8
POLISH_MAX_STEPS = 50
_EVAL_CHUNK = 1 << 17


@dataclass(frozen=True)
class GridSpec:
    """A cubic-cell sampling lattice: ``lo + h * index`` per axis."""

    lo: np.ndarray
    h: float
    shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", frozen(as_point(self.lo)))
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        if min(self.shape) < 2:
            raise ValueError("grid needs at least two samples per axis")

    @staticmethod
    def around(corners, resolution: int = 64, margin: float = GRID_MARGIN) -> "GridSpec":
        """Lattice covering the corner bbox plus a margin.

        ``resolution`` counts cells along the longest padded axis; the cell
        size is shared by all axes, and the padding is a fraction of the
        longest span on every side, so flat patches still get a full 3D
        slab around them.
        """
        if resolution < 8:
            raise ValueError("grid resolution below 8 cannot resolve a patch")
        corners = as_point(corners).reshape(-1, 3)
        lo = corners.min(axis=0)
        hi = corners.max(axis=0)
        span = hi - lo
        pad = margin * float(span.max())
        if pad <= 0.0:
            raise ValueError("degenerate corner set: zero extent in every axis")
        lo = lo - pad
        hi = hi + pad
        span = hi - lo
        h = float(span.max()) / float(resolution)
        shape = tuple(int(np.ceil(s / h)) + 1 for s in span)
        return GridSpec(lo, h, shape)

    @property
    def points_count(self) -> int:
        return int(np.prod(self.shape))

    def axes(self):
        return tuple(self.lo[k] + self.h * np.arange(self.shape[k]) for k in range(3))


def sample_grid(surface, spec: GridSpec, chunk: int = _EVAL_CHUNK) -> np.ndarray:
    """Field values on the lattice, shaped like ``spec.shape``."""
    ax, ay, az = spec.axes()
    gx, gy, gz = np.meshgrid(ax, ay, az, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    out = np.empty(len(pts))
    for k in range(0, len(pts), chunk):
        out[k : k + chunk] = np.atleast_1d(surface.value(pts[k : k + chunk]))
    return out.reshape(spec.shape)


def extract_isosurface(surface, spec: GridSpec):
    """Marching-cubes zero level set of the field on the lattice."""
    volume = sample_grid(surface, spec)
    if not np.isfinite(volume).all():
        raise EmptyIsosurface("field is not finite on the sampling grid")
    try:
        verts, faces, _, _ = _marching_cubes(
            volume, level=0.0, spacing=(spec.h, spec.h, spec.h)
        )
    except (ValueError, RuntimeError) as exc:
        raise EmptyIsosurface(f"no zero crossing inside the grid: {exc}") from exc
    if len(faces) == 0:
        raise EmptyIsosurface("the zero set does not intersect the grid")
    return verts + spec.lo, faces.astype(np.int64)


def clip_to_patch(verts, faces, patch: IPatch):
    """Keep triangles whose centroid lies inside every bounding surface."""
    cent = verts[faces].mean(axis=1)
    keep = patch.inside(cent)
    faces = faces[keep]
    if len(faces) == 0:
        raise EmptyIsosurface("the bounding surfaces clip away the whole isosurface")
    return verts, faces


def select_spanning_sheet(verts, faces, patch: IPatch, slab: float):
    """Keep the sheet of triangles that actually spans the face region.

    The zero set of the raw field carries structure besides the wanted
    sheet: thin tubes along the lines where two boundings vanish (there the
    quotient denominator is zero, not the surface), and spurious interior
    sheets blended in by the far branches of the ribbon quadrics.  Both
    kinds attach to the genuine sheet only through the slabs near the
    bounding surfaces, so the triangle adjacency graph is severed wherever
    a shared edge lies entirely within ``slab`` of some bounding.  Among
    the resulting components the genuine sheet is the one closest to the
    patch corners, summed over corners (it alone reaches toward all of
    them).  Severed boundary-band triangles are then readmitted by
    proximity, so the kept tessellation still covers the rim.
    """
    b = np.stack([np.abs(np.atleast_1d(bnd.dist(verts))) for _, bnd in patch.sides])
    severed = b.min(axis=0) < slab
    n = len(verts)
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    keep_edge = ~(severed[edges[:, 0]] & severed[edges[:, 1]])
    edges = edges[keep_edge]
    graph = sparse.coo_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n)
    )
    n_comp, label = connected_components(graph, directed=False)

    referenced = np.zeros(n, dtype=bool)
    referenced[faces.ravel()] = True
    anchors = patch.corners
    best, best_score = -1, np.inf
    for k in range(n_comp):
        mask = (label == k) & referenced & ~severed
        if not mask.any():
            continue
        vs = verts[mask]
        score = sum(float(np.min(np.linalg.norm(vs - a, axis=1))) for a in anchors)
        if score < best_score:
            best, best_score = k, score
    if best < 0:
        # every triangle sits inside the slabs; nothing to anchor on
        raise EmptyIsosurface("no sheet outside the bounding slabs")

    on_sheet = (label[faces] == best).any(axis=1)
    sheet_cloud = verts[(label == best) & referenced]
    tree = cKDTree(sheet_cloud)
    dist = tree.query(verts, distance_upper_bound=1.5 * slab)[0]
    near_sheet = np.isfinite(dist[faces]).all(axis=1)
    faces = faces[on_sheet | near_sheet]
    if len(faces) == 0:
        raise EmptyIsosurface("the spanning sheet selection kept nothing")
    return verts, faces


def polish_vertices(
    surface,
    verts,
    tol: float = None,
    max_steps: int = POLISH_MAX_STEPS,
    step_cap: float = None,
    on_fail: str = "warn",
):
    """Newton-project points onto the zero set along the field gradient.

    Returns ``(points, n_failed)``.  A point fails when it cannot reach
    ``|field| <= tol`` within the step budget (for example near a gradient
    singularity); failures are kept at their best position and either
    warned about or raised as :class:`PolishFailed`.
    """
    v = np.array(verts, dtype=np.float64)
    if tol is None:
        tol = POLISH_TOL_REL * max(surface.feature_scale(), 1e-12)
    for _ in range(max_steps):
        f = np.atleast_1d(surface.value(v))
        bad = np.abs(f) > tol
        if not bad.any():
            break
        g = surface.gradient(v[bad])
        gn2 = np.einsum("ij,ij->i", g, g)
        ok = gn2 > 1e-300
        step = np.zeros_like(g)
        step[ok] = (f[bad][ok] / gn2[ok])[:, None] * g[ok]
        if step_cap is not None:
            lens = np.linalg.norm(step, axis=1)
            too_big = lens > step_cap
            if too_big.any():
                step[too_big] *= (step_cap / lens[too_big])[:, None]
        v[bad] -= step
    residual = np.abs(np.atleast_1d(surface.value(v)))
    n_failed = int(np.sum(residual > tol))
    if n_failed and on_fail != "ignore":
        msg = f"{n_failed}/{len(v)} vertices did not reach |field| <= {tol:.3g}"
        if on_fail == "raise":
            raise PolishFailed(msg)
        LOG.warning("%s", msg)
    return v, n_failed


def marching_cubes(patch: IPatch, spec: GridSpec, clip: bool = True):
    """Raw-field isosurface on the lattice, optionally clipped to the domain.

    The raw algebraic field is sampled (it is smooth on the whole grid,
    unlike the distance-like channel, which degenerates where two boundings
    meet); with ``clip`` every triangle whose centroid leaves the domain
    ``B_i >= 0`` is dropped.
    """
    verts, faces = extract_isosurface(patch, spec)
    if clip:
        verts, faces = clip_to_patch(verts, faces, patch)
    return verts, faces


def _surface_probes(patch: IPatch) -> np.ndarray:
    """Points on the patch surface that witness how far it bulges.

    The corner centroid and the corner-pair midpoints are pulled onto the
    zero set of the distance-like channel; wherever that succeeds the
    result marks surface territory the corner bounding box knows nothing
    about.  Runaway projections (more than a corner-bbox diagonal away from
    the centroid) are discarded rather than allowed to balloon the grid.
    """
    corners = patch.corners
    centroid = corners.mean(axis=0)
    mids = 0.5 * (corners[:, None, :] + corners[None, :, :])
    iu = np.triu_indices(len(corners), k=1)
    seeds = np.vstack([centroid[None], mids[iu]])
    scale = max(patch.feature_scale(), 1e-12)
    probes, _ = polish_vertices(
        FaithfulField(patch), seeds, step_cap=0.25 * scale, on_fail="ignore"
    )
    near = np.linalg.norm(probes - centroid, axis=1) <= 1.0 * scale
    return probes[np.isfinite(probes).all(axis=1) & near]


def patch_grid(
    patch: IPatch, resolution: int = 64, margin: float = GRID_MARGIN, cover=None
) -> GridSpec:
    """Sampling lattice sized to the patch surface, not just its corners.

    The corners alone can underestimate the region badly — a curved patch
    over a flat corner ring bulges far out of the corners' bounding box,
    and a grid built only from the corners would slice the surface into
    fragments near them.  Surface probes widen the box; ``cover`` is an
    optional point cloud known to lie on or near the patch region (fit
    samples, the center point) that widens it further.
    """
    region = np.vstack([patch.corners, _surface_probes(patch)])
    if cover is not None and len(cover):
        region = np.vstack([region, as_point(cover).reshape(-1, 3)])
    return GridSpec.around(region, resolution, margin)


def tessellate_patch(
    patch: IPatch,
    resolution: int = 64,
    margin: float = GRID_MARGIN,
    polish: bool = True,
    cover=None,
) -> TriMesh:
    """Triangle mesh of one patch: extract, clip to the domain, polish.

    Polishing projects the marching-cubes vertices onto the zero set of the
    *distance-like* channel rather than the raw field: the raw zero set
    additionally contains the corner lines where the quotient denominator
    vanishes, and marching cubes decorates those with spurious slivers that
    would corrupt any deviation measured from the result.
    """
    spec = patch_grid(patch, resolution, margin, cover)
    verts, faces = marching_cubes(patch, spec, clip=True)
    verts, faces = select_spanning_sheet(verts, faces, patch, 2.0 * spec.h)
    if polish:
        verts, _ = polish_vertices(
            FaithfulField(patch), verts, step_cap=2.0 * spec.h
        )
    return TriMesh(verts, faces)


def merge_meshes(meshes) -> TriMesh:
    """Concatenate meshes into one; coincident vertices weld during cleanup."""
    meshes = list(meshes)
    if not meshes:
        raise EmptyIsosurface("nothing to merge")
    verts = np.concatenate([m.vertices for m in meshes])
    offsets = np.cumsum([0] + [len(m.vertices) for m in meshes[:-1]])
    faces = np.concatenate([m.faces + off for m, off in zip(meshes, offsets)])
    return TriMesh(verts, faces)


def deviation_map(points, reference: TriMesh) -> np.ndarray:
    """Euclidean distance from each point to the reference mesh."""
    _, dist, _ = closest_points(reference, np.asarray(points, dtype=np.float64))
    return dist
