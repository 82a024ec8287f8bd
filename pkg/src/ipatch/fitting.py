"""Fit one implicit patch per network face.

Assembly is fully determined by the face: ribbons come from the face's
edges (shared with the neighbouring faces), boundings are flipped so they
are positive over this face's region, and the default weights make the
patch pass exactly through a chosen center point on the mesh.  Weight
optimization then minimizes the distance-like patch value over the mesh
vertices belonging to the face, while the center interpolation constraint
is kept by re-deriving the free weight for every candidate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AllCandidatesInfeasible,
    CenterOnBounding,
    EmptySelection,
)
from .geom import as_point, bbox_diagonal, frozen
from .implicit import ILoft, IPatch, LimingSurface, Negated, Plane, eval_faithful
from .mesh import closest_point, filter_points
from .network import CurveNetwork
from .optimize import nelder_mead

__all__ = [
    "FitConfig",
    "FittedPatch",
    "assemble_sides",
    "center_point",
    "default_weights",
    "fit_face",
    "oriented_for_face",
    "surface_kind",
]

CORNER_DROP_REL = 1e-6    # samples near two boundings at once carry no signal
CENTER_BOUND_REL = 1e-9


@dataclass(frozen=True)
class FitConfig:
    """Knobs for per-face patch fitting.

    ``omega`` caps how far a side's blending coefficient may move from its
    default (each ratio stays within ``[1/omega, omega]``); candidates
    outside the box are rejected outright.
    """

    omega: float = 5.0
    max_eval: int = 2000
    tol_f: float = 1e-10
    optimize: bool = True


@dataclass(frozen=True)
class FittedPatch:
    face_id: int
    patch: IPatch
    center: np.ndarray
    points: np.ndarray        # samples the fit was scored on
    rms: float                # distance-like rms on those samples
    max_dev: float
    rms_default: float        # same measure before weight optimization

    def __post_init__(self):
        object.__setattr__(self, "center", frozen(as_point(self.center)))
        object.__setattr__(self, "points", frozen(np.asarray(self.points, dtype=np.float64)))

    @property
    def ribbon_kinds(self) -> tuple:
        return tuple(surface_kind(r) for r, _ in self.patch.sides)


def surface_kind(surface) -> str:
    """Short family name of a surface, looking through sign flips."""
    if isinstance(surface, Negated):
        return surface_kind(surface.inner)
    if isinstance(surface, Plane):
        return "plane"
    if isinstance(surface, LimingSurface):
        return "liming"
    if isinstance(surface, ILoft):
        return "iloft"
    return type(surface).__name__.lower()


def oriented_for_face(surface, probe):
    """The surface, sign-flipped if needed so its field is >= 0 at ``probe``."""
    if float(surface.value(probe)) >= 0.0:
        return surface
    if isinstance(surface, Plane):
        return surface.flipped()
    if isinstance(surface, Negated):
        return surface.inner
    return Negated(surface)


def assemble_sides(net: CurveNetwork, face_id: int):
    """Per-side ``(ribbon, bounding)`` pairs for a face, plus its corners.

    Ribbons keep the orientation they were built with (both adjacent faces
    must see the identical object for their patches to join smoothly);
    boundings are flipped to be positive toward this face's interior.
    """
    face = net.faces[face_id]
    probe = net.face_probe(face_id)
    sides = []
    for eid, _ in face.loop:
        edge = net.edges[eid]
        sides.append((edge.ribbon.surface, oriented_for_face(edge.bounding, probe)))
    return tuple(sides), net.loop_corners(face_id)


def center_point(net: CurveNetwork, face_id: int) -> np.ndarray:
    """Arc-length-weighted centroid of the face boundary, pulled onto the mesh."""
    acc = np.zeros(3)
    total = 0.0
    for eid, _ in net.faces[face_id].loop:
        pts = net.edges[eid].polyline.points
        seg = pts[1:] - pts[:-1]
        lens = np.linalg.norm(seg, axis=1)
        mids = 0.5 * (pts[1:] + pts[:-1])
        acc += (mids * lens[:, None]).sum(axis=0)
        total += lens.sum()
    foot, _, _ = closest_point(net.mesh, acc / total)
    return foot


def default_weights(sides, center, scale: float) -> np.ndarray:
    """Weights ``[w0, w1..wn]`` that make the patch interpolate ``center``.

    Each side weight is the squared bounding value at the center; with that
    choice the free weight reduces to the plain sum of the ribbon values
    there.  Fails if the center sits on one of the boundings, because that
    side's weight would collapse to zero.
    """
    center = as_point(center)
    b = np.array([float(bnd.dist(center)) for _, bnd in sides])
    if np.min(np.abs(b)) < CENTER_BOUND_REL * scale:
        k = int(np.argmin(np.abs(b)))
        raise CenterOnBounding(
            f"patch center lies on bounding surface of side {k} "
            f"(|B| = {abs(b[k]):.3g})"
        )
    r = np.array([float(rib.dist(center)) for rib, _ in sides])
    return np.concatenate([[r.sum()], b ** 2])


def _derive_w0(w_side, r_c, b2_c) -> float:
    # center interpolation: w0 = sum_i w_i * R_i(c) / B_i(c)^2
    return float(np.sum(w_side * r_c / b2_c))


def _informative_points(points, sides, scale: float) -> np.ndarray:
    """Drop samples that sit near two or more boundings at once: the patch
    value degenerates to zero there regardless of the weights."""
    if len(points) == 0:
        return points
    tiny = np.stack(
        [np.abs(np.atleast_1d(b.dist(points))) < CORNER_DROP_REL * scale for _, b in sides]
    )
    return points[tiny.sum(axis=0) < 2]


def _face_samples(net: CurveNetwork, face_id: int, sides, scale: float) -> np.ndarray:
    try:
        pts = filter_points(net.mesh, [b for _, b in sides])
        pts = _informative_points(pts, sides, scale)
    except EmptySelection:
        pts = np.empty((0, 3))
    if len(pts) == 0:
        # tiny face: fall back to the boundary samples themselves
        loop_pts = np.concatenate(
            [net.edges[eid].polyline.points for eid, _ in net.faces[face_id].loop]
        )
        pts = _informative_points(loop_pts, sides, scale)
        if len(pts) == 0:
            # sliver face hugging its corner lines: nothing informative
            # remains, so keep the raw boundary samples and let the fit
            # degenerate to the default weights instead of failing
            pts = loop_pts
    if len(pts) == 0:
        raise EmptySelection(f"face {face_id} has no usable sample points")
    return pts


def fit_face(
    net: CurveNetwork,
    face_id: int,
    config: FitConfig = FitConfig(),
    points=None,
    center=None,
) -> FittedPatch:
    """Assemble and (optionally) optimize the implicit patch of one face.

    ``points`` overrides the sample selection, ``center`` the interpolated
    center point; both default to being derived from the face.  The
    optimized patch never scores worse than the default-weight patch on the
    fitting samples.
    """
    sides, corners = assemble_sides(net, face_id)
    scale = max(bbox_diagonal(corners), 1e-12)
    if center is None:
        center = center_point(net, face_id)
    else:
        center = as_point(center)
    if points is None:
        points = _face_samples(net, face_id, sides, scale)
    else:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)

    w_default = default_weights(sides, center, scale)
    b2_c = w_default[1:]
    r_c = np.array([float(rib.dist(center)) for rib, _ in sides])

    def patch_for(log_ratios):
        w_side = b2_c * np.exp(log_ratios)
        w = np.concatenate([[_derive_w0(w_side, r_c, b2_c)], w_side])
        return IPatch(sides, w, corners)

    log_omega = np.log(config.omega) if config.omega > 0 else -np.inf

    def objective(x):
        if np.max(np.abs(x)) > log_omega:
            return np.inf
        vals = eval_faithful(patch_for(x), points)
        return float(np.mean(vals ** 2))

    x0 = np.zeros(len(sides))
    f0 = objective(x0)
    if not np.isfinite(f0):
        raise AllCandidatesInfeasible(
            f"default weights violate the ratio cap omega={config.omega}; "
            f"omega must be >= 1"
        )

    if config.optimize:
        x_best, f_best, _ = nelder_mead(
            objective, x0, max_eval=config.max_eval, tol_f=config.tol_f
        )
    else:
        x_best, f_best = x0, f0

    patch = patch_for(x_best)
    vals = eval_faithful(patch, points)
    return FittedPatch(
        face_id=face_id,
        patch=patch,
        center=center,
        points=points,
        rms=float(np.sqrt(np.mean(vals ** 2))),
        max_dev=float(np.max(np.abs(vals))),
        rms_default=float(np.sqrt(f0)),
    )
