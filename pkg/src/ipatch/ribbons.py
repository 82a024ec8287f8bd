"""Per-edge surface construction: ribbons and bounding surfaces.

Every network edge gets a *ribbon* -- an implicit surface passing through
the edge's sampled curve with prescribed corner tangent planes -- and a
*bounding* surface that carries the curve and cuts transversally through
the shape.  Two ribbon families compete per edge:

* ``LimingSurface`` -- a corner-blending quadric with a single fullness
  parameter, fitted by golden-section search; exact for conic boundary
  curves (planar sections of quadrics).
* ``ILoft`` -- a two-sided cubic blend with two positive weights, fitted by
  downhill simplex in log-weight space; handles inflected curves.

Fit quality is the RMS of first-order distances ``|value| / |gradient|``
over the curve samples, so the two families are directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CollinearThrough,
    DegenerateNormal,
    DegenerateTangent,
    FitDiverged,
    InfeasibleLiming,
    NonFiniteObjective,
)
from .geom import as_point, unit
from .implicit import ILoft, ImplicitSurface, LimingSurface, Negated, Plane
from .mesh import Polyline
from .optimize import golden_section, nelder_mead

__all__ = [
    "Ribbon",
    "taubin_rms",
    "cutting_plane",
    "bounding_plane",
    "make_liming",
    "make_iloft",
    "fit_liming",
    "fit_iloft",
    "curved_bounding",
    "build_ribbon",
]

FULLNESS_MIN = 0.01
FULLNESS_MAX = 0.99
FULLNESS_TOL = 1e-9
LIMING_RMS_FACTOR = 10.0     # feasibility: liming rms vs reference rms
ILOFT_MAX_EVAL = 400


@dataclass(frozen=True)
class Ribbon:
    """A fitted boundary surface plus its fit diagnostics."""

    surface: ImplicitSurface
    kind: str          # "liming" | "iloft" | "plane"
    fit_error: float   # taubin_rms against the target curve samples

    def __post_init__(self):
        if self.kind not in ("liming", "iloft", "plane"):
            raise ValueError(f"unknown ribbon kind {self.kind!r}")


def _points_of(curve) -> np.ndarray:
    if isinstance(curve, Polyline):
        return curve.points
    return as_point(curve).reshape(-1, 3)


def taubin_rms(surface: ImplicitSurface, points) -> float:
    """RMS of first-order distances ``|value| / max(|gradient|, tiny)``.

    Sample points where the field is exactly zero contribute zero even when
    the gradient vanishes there too (a zero residual is a perfect fit, not a
    singularity).
    """
    pts = _points_of(points)
    v = np.atleast_1d(np.asarray(surface.value(pts), dtype=np.float64))
    g = np.asarray(surface.gradient(pts), dtype=np.float64).reshape(-1, 3)
    gn = np.linalg.norm(g, axis=1)
    span = np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))
    tiny = 1e-12 * max(span, 1e-300)
    s = np.where(v == 0.0, 0.0, v / np.maximum(gn, tiny))
    return float(np.sqrt(np.mean(s * s)))


def _mean_square(surface, pts) -> float:
    r = taubin_rms(surface, pts)
    return r * r


# ---------------------------------------------------------------------------
# Plane construction
# ---------------------------------------------------------------------------

def cutting_plane(p1, n1, p2, n2) -> Plane:
    """Liming cutting plane through both corners.

    Its normal is the average corner normal with the chord component
    removed, so the plane contains the chord and stands as upright as the
    corner data allows.
    """
    p1, p2 = as_point(p1), as_point(p2)
    navg = as_point(n1) + as_point(n2)
    u = unit(p2 - p1)
    w = navg - (navg @ u) * u
    if np.linalg.norm(w) < 1e-12 * max(np.linalg.norm(navg), 1e-300):
        raise DegenerateNormal("average corner normal is parallel to the chord")
    return Plane.from_point_normal(p1, unit(w))


def bounding_plane(p1, n1, p2, n2, through=None) -> Plane:
    """Transversal plane containing the chord ``p1 -> p2``.

    Without ``through``, the plane spans the chord and the average corner
    normal (normal = average-normal x chord).  With ``through``, it is the
    plane through ``p1``, ``p2`` and ``through``.
    """
    p1, p2 = as_point(p1), as_point(p2)
    chord = p2 - p1
    if through is None:
        navg = 0.5 * (as_point(n1) + as_point(n2))
        nb = np.cross(navg, chord)
        lim = 1e-12 * max(np.linalg.norm(navg) * np.linalg.norm(chord), 1e-300)
        if np.linalg.norm(nb) < lim:
            raise DegenerateNormal("average corner normal is parallel to the chord")
    else:
        through = as_point(through)
        nb = np.cross(chord, through - p1)
        lim = 1e-12 * max(np.linalg.norm(chord) * np.linalg.norm(through - p1), 1e-300)
        if np.linalg.norm(nb) < lim:
            raise CollinearThrough("through point is collinear with the chord")
    return Plane.from_point_normal(p1, unit(nb))


def _corner_planes(p1, n1, p2, n2):
    """Tangent planes and chord-projected local bounding planes."""
    p1, p2 = as_point(p1), as_point(p2)
    u = p2 - p1
    chord = np.linalg.norm(u)
    n1u, n2u = unit(as_point(n1)), unit(as_point(n2))
    d1 = u - (u @ n1u) * n1u
    d2 = -u - ((-u) @ n2u) * n2u
    if np.linalg.norm(d1) < 1e-12 * chord or np.linalg.norm(d2) < 1e-12 * chord:
        raise DegenerateTangent("chord is parallel to a corner normal")
    pi1 = Plane.from_point_normal(p1, n1u)
    pi2 = Plane.from_point_normal(p2, n2u)
    b1 = Plane.from_point_normal(p1, unit(d1))
    b2 = Plane.from_point_normal(p2, unit(d2))
    return pi1, pi2, b1, b2


def make_liming(p1, n1, p2, n2, fullness: float) -> LimingSurface:
    pi1 = Plane.from_point_normal(as_point(p1), unit(as_point(n1)))
    pi2 = Plane.from_point_normal(as_point(p2), unit(as_point(n2)))
    return LimingSurface(pi1, pi2, cutting_plane(p1, n1, p2, n2), fullness)


def make_iloft(p1, n1, p2, n2, w1: float, w2: float) -> ILoft:
    pi1, pi2, b1, b2 = _corner_planes(p1, n1, p2, n2)
    return ILoft(pi1, pi2, b1, b2, w1, w2)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def fit_liming(curve, p1, n1, p2, n2, reference_rms=None, tol: float = FULLNESS_TOL):
    """Best-fullness Liming quadric for the sampled curve.

    ``reference_rms`` is the error of a competing fit (typically the I-loft
    for the same edge); when the best Liming error exceeds
    ``LIMING_RMS_FACTOR`` times the reference the quadric family is deemed
    unable to represent this curve and :class:`InfeasibleLiming` is raised.
    When no reference is supplied one is computed internally.
    """
    pts = _points_of(curve)
    cut = cutting_plane(p1, n1, p2, n2)
    pi1 = Plane.from_point_normal(as_point(p1), unit(as_point(n1)))
    pi2 = Plane.from_point_normal(as_point(p2), unit(as_point(n2)))

    def objective(f):
        return _mean_square(LimingSurface(pi1, pi2, cut, f), pts)

    f_best, j_best, _ = golden_section(objective, FULLNESS_MIN, FULLNESS_MAX, tol)
    rms = float(np.sqrt(max(j_best, 0.0)))

    if reference_rms is None:
        try:
            reference_rms = fit_iloft(curve, p1, n1, p2, n2)[1]
        except (FitDiverged, DegenerateTangent):
            reference_rms = np.inf
    chord = float(np.linalg.norm(as_point(p2) - as_point(p1)))
    if rms > max(LIMING_RMS_FACTOR * reference_rms, 1e-12 * chord):
        raise InfeasibleLiming(
            f"best Liming rms {rms:.3g} exceeds {LIMING_RMS_FACTOR:g}x "
            f"the reference rms {reference_rms:.3g}"
        )
    return LimingSurface(pi1, pi2, cut, f_best), rms


def fit_iloft(curve, p1, n1, p2, n2, max_eval: int = ILOFT_MAX_EVAL):
    """Best-weight I-loft for the sampled curve.

    Weights are optimized in log space by downhill simplex, starting from
    the pair that makes the blend vanish at the curve midpoint.
    """
    pts = _points_of(curve)
    p1a, p2a = as_point(p1), as_point(p2)
    chord = float(np.linalg.norm(p2a - p1a))
    mid = Polyline(pts).midpoint() if len(pts) > 2 else 0.5 * (pts[0] + pts[-1])

    n1u, n2u = unit(as_point(n1)), unit(as_point(n2))
    pi1 = Plane.from_point_normal(p1a, n1u)
    pi2 = Plane.from_point_normal(p2a, n2u)
    if pi1.value(mid) + pi2.value(mid) < 0.0:
        # make the blend's numerator positive at the midpoint so the
        # vanishing-value starting weights come out positive
        n1u, n2u = -n1u, -n2u
    pi1, pi2, b1, b2 = _corner_planes(p1a, n1u, p2a, n2u)

    den = max(pi1.value(mid) + pi2.value(mid), 1e-12 * chord)
    w0 = np.array(
        [
            max(b1.value(mid) ** 2, 1e-8 * chord * chord) / den,
            max(b2.value(mid) ** 2, 1e-8 * chord * chord) / den,
        ]
    )

    def objective(x):
        w = np.exp(x)
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            return np.inf
        return _mean_square(ILoft(pi1, pi2, b1, b2, w[0], w[1]), pts)

    try:
        x, fx, _ = nelder_mead(objective, np.log(w0), max_eval=max_eval)
    except NonFiniteObjective as exc:
        raise FitDiverged(f"loft weight search became non-finite: {exc}") from exc
    w = np.exp(x)
    if not np.all(np.isfinite(w)) or not np.isfinite(fx):
        raise FitDiverged("loft weight search did not reach a finite optimum")
    return ILoft(pi1, pi2, b1, b2, float(w[0]), float(w[1])), float(np.sqrt(max(fx, 0.0)))


def curved_bounding(curve, p1, n1, p2, n2):
    """Curved bounding wall that follows the sampled curve.

    Used for open-boundary edges whose rim is not planar.  The wall is an
    I-loft whose corner "normals" are ``tangent x normal`` -- perpendicular
    to both the curve direction and the surface normal -- so its zero set
    stands upright along the rim.  Weights are fitted so the wall passes
    through the curve samples.
    """
    pts = _points_of(curve)
    p1a, p2a = as_point(p1), as_point(p2)
    t1 = pts[1] - pts[0]
    t2 = pts[-1] - pts[-2]
    scale = max(float(np.linalg.norm(p2a - p1a)), 1e-300)
    w1 = np.cross(t1, as_point(n1))
    w2 = np.cross(t2, as_point(n2))
    if (
        np.linalg.norm(w1) < 1e-12 * max(np.linalg.norm(t1), 1e-300)
        or np.linalg.norm(w2) < 1e-12 * max(np.linalg.norm(t2), 1e-300)
    ):
        raise DegenerateTangent("curve tangent is parallel to the surface normal")
    surface, rms = fit_iloft(pts, p1a, unit(w1), p2a, unit(w2))
    if rms > 0.05 * scale:
        raise FitDiverged(
            f"curved bounding wall misses its rim curve by rms {rms:.3g}"
        )
    return surface


# ---------------------------------------------------------------------------
# Per-edge driver
# ---------------------------------------------------------------------------

def _oriented(surface: ImplicitSurface, point, direction) -> ImplicitSurface:
    """Flip ``surface`` so its gradient at ``point`` points along ``direction``."""
    g = np.asarray(surface.gradient(as_point(point)))
    if g @ as_point(direction) >= 0.0:
        return surface
    if isinstance(surface, Plane):
        return surface.flipped()
    if isinstance(surface, Negated):
        return surface.inner
    return Negated(surface)


def build_ribbon(curve, p1, n1, p2, n2, orient_normal=None) -> Ribbon:
    """Fit both ribbon families to the curve and keep the better one.

    Ties go to the Liming quadric (lower degree).  Exactly flat data -- the
    corner normals agree and their common tangent plane already contains the
    whole curve -- short-circuits to that plane, whose gradient never
    degenerates.  When ``orient_normal`` is given the winning surface is
    flipped, if needed, so its gradient at the curve midpoint points along
    it.
    """
    pts = _points_of(curve)
    p1a, p2a = as_point(p1), as_point(p2)
    chord = float(np.linalg.norm(p2a - p1a))
    mid = Polyline(pts).midpoint() if len(pts) > 2 else 0.5 * (pts[0] + pts[-1])

    n1u, n2u = unit(as_point(n1)), unit(as_point(n2))
    if np.linalg.norm(np.cross(n1u, n2u)) < 1e-9:
        flat = Plane.from_point_normal(p1a, unit(n1u + n2u))
        if np.max(np.abs(flat.value(pts))) <= 1e-9 * max(chord, 1e-300):
            if orient_normal is not None:
                flat = _oriented(flat, mid, orient_normal)
            return Ribbon(flat, "plane", taubin_rms(flat, pts))

    try:
        iloft, iloft_rms = fit_iloft(pts, p1a, n1u, p2a, n2u)
    except (FitDiverged, DegenerateTangent):
        iloft, iloft_rms = None, np.inf
    try:
        liming, liming_rms = fit_liming(
            pts, p1a, n1u, p2a, n2u, reference_rms=iloft_rms
        )
    except (InfeasibleLiming, DegenerateNormal):
        liming, liming_rms = None, np.inf

    if liming is None and iloft is None:
        raise FitDiverged("neither ribbon family produced a usable fit")
    if liming_rms <= iloft_rms:
        surface, kind, rms = liming, "liming", liming_rms
    else:
        surface, kind, rms = iloft, "iloft", iloft_rms
    if orient_normal is not None:
        surface = _oriented(surface, mid, orient_normal)
    return Ribbon(surface, kind, float(rms))
