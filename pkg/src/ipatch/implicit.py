"""Implicit surface algebra.

The surface zoo
---------------

``Plane``
    Signed Euclidean distance field ``n·x + c`` with a unit normal.

``LimingSurface``
    Corner-blending quadric ``(1-f)·pi1·pi2 - f·cut**2`` built from two
    corner tangent planes and a cutting plane; the *fullness* ``f`` in (0, 1)
    sweeps the conic family from flat (near the cutting plane) to full (near
    the tangent-plane pair).

``ILoft``
    Two-sided blend ``w1·pi1·b2**2 + w2·pi2·b1**2 - b1**2·b2**2`` of two
    tangent planes, clipped by per-corner local bounding planes ``b1, b2``.
    Handles inflected or twisted boundary data the Liming quadric cannot.

``IPatch``
    n-sided patch.  Each side carries a *ribbon* surface (interpolated along
    the side's boundary curve) and a *bounding* surface (cuts the side's
    region out of space).  The algebraic field is

        I = sum_i w_i * R_i * prod_{j != i} B_j**2  -  w0 * prod_i B_i**2

    which vanishes wherever some ``R_i = B_i = 0`` and whose gradient there
    is parallel to ``grad R_i`` -- tangent-plane continuity with anything
    else interpolating the same ribbon.

Distance-like channel
---------------------

Raw algebraic values of the blends grow like products of distances, so the
patch exposes a second, *faithful* channel that approximates signed Euclidean
distance (``eval_faithful``).  Two algebraically identical forms exist:

* a rational blend ``(sum_i R_i*a_i - w0) / sum_i a_i`` with weights
  ``a_i = w_i / B_i**2`` -- cheap, but undefined on the boundaries;
* a polynomial quotient ``I / sum_i w_i prod_{j != i} B_j**2`` -- valid
  wherever at most one bounding vanishes.

``eval_faithful`` switches between them based on the smallest ``|B_i|``.

Ribbon values entering the patch formulas are the ribbons' own
distance-like fields (``dist``): exact distances for planes, normalized
blend values for I-lofts.  This keeps the faithful channel unit-consistent
and makes offsetting exact: shifting every ribbon by ``-d`` shifts the
faithful field by exactly ``-d`` (``offset_patch``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CoincidentBoundings,
    DegenerateDenominator,
    DegenerateNormal,
    SingularGradient,
    UnsupportedOffset,
)
from .geom import as_point, bbox_diagonal, frozen

__all__ = [
    "ImplicitSurface",
    "Plane",
    "LimingSurface",
    "ILoft",
    "Negated",
    "IPatch",
    "FaithfulField",
    "eval_field",
    "gradient",
    "eval_faithful",
    "offset_patch",
    "mean_curvature",
]

# Relative half-width of the band around each bounding surface inside which
# the faithful evaluation falls back to the boundary-safe polynomial form.
EPS_BOUNDARY_REL = 1e-6
# Relative threshold below which the polynomial denominator counts as zero.
EPS_DENOMINATOR_REL = 1e-14


class ImplicitSurface:
    """Base class: a scalar field over R^3 with an analytic gradient.

    ``value``/``gradient`` accept a single point ``(3,)`` or a batch
    ``(m, 3)`` and return matching scalars/vectors.  ``dist`` is the
    distance-like channel used when the surface participates in a patch;
    by default it equals the raw field.
    """

    def value(self, p):
        raise NotImplementedError

    def gradient(self, p):
        raise NotImplementedError

    def dist(self, p):
        return self.value(p)

    def dist_gradient(self, p):
        return self.gradient(p)

    def feature_scale(self) -> float:
        """Length scale used for finite-difference steps."""
        return 1.0

    def hessian(self, p) -> np.ndarray:
        """Second derivatives by central differences of the gradient."""
        p = as_point(p)
        h = 1e-5 * max(self.feature_scale(), 1e-6)
        cols = []
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            cols.append((self.gradient(p + e) - self.gradient(p - e)) / (2.0 * h))
        H = np.stack(cols, axis=-1)
        return 0.5 * (H + np.swapaxes(H, -1, -2))

    def offset_by(self, d: float) -> "ImplicitSurface":
        """Surface whose distance channel is ``dist - d``, when exact."""
        if d == 0.0:
            return self
        raise UnsupportedOffset(f"{type(self).__name__} has no exact offset form")


@dataclass(frozen=True, eq=False)
class Plane(ImplicitSurface):
    """``value(p) = normal . p + offset`` with ``|normal| == 1``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        ln = float(np.linalg.norm(n))
        if ln < 1e-30:
            raise DegenerateNormal("plane normal is numerically zero")
        object.__setattr__(self, "normal", frozen(n / ln))
        object.__setattr__(self, "offset", float(self.offset) / ln)

    @classmethod
    def from_point_normal(cls, point, normal) -> "Plane":
        point = as_point(point)
        n = np.asarray(normal, dtype=np.float64)
        return cls(n, -float(n @ point))

    @classmethod
    def from_normalized(cls, normal, offset: float) -> "Plane":
        """Adopt an already-unit normal verbatim, without renormalizing.

        Renormalizing a stored unit vector can flip its last bits, which
        would break exact serialization round trips.
        """
        n = np.asarray(normal, dtype=np.float64).reshape(3)
        if abs(float(np.linalg.norm(n)) - 1.0) > 1e-9:
            raise DegenerateNormal("from_normalized expects a unit normal")
        plane = object.__new__(cls)
        object.__setattr__(plane, "normal", frozen(n))
        object.__setattr__(plane, "offset", float(offset))
        return plane

    def value(self, p):
        p = as_point(p)
        return p @ self.normal + self.offset

    def gradient(self, p):
        p = as_point(p)
        return np.broadcast_to(self.normal, p.shape).copy()

    def hessian(self, p):
        p = as_point(p)
        return np.zeros(p.shape[:-1] + (3, 3))

    def offset_by(self, d: float) -> "Plane":
        return Plane(self.normal, self.offset - d) if d != 0.0 else self

    def flipped(self) -> "Plane":
        return Plane(-self.normal, -self.offset)


@dataclass(frozen=True, eq=False)
class LimingSurface(ImplicitSurface):
    """Quadric ``(1-fullness)*pi1*pi2 - fullness*cut**2``."""

    pi1: Plane
    pi2: Plane
    cut: Plane
    fullness: float

    def __post_init__(self):
        f = float(self.fullness)
        if not (0.0 < f < 1.0):
            raise ValueError(f"fullness must lie in (0, 1), got {f}")
        object.__setattr__(self, "fullness", f)

    def value(self, p):
        f = self.fullness
        return (1.0 - f) * self.pi1.value(p) * self.pi2.value(p) - f * self.cut.value(p) ** 2

    def gradient(self, p):
        f = self.fullness
        v1 = np.atleast_1d(self.pi1.value(p))[..., None]
        v2 = np.atleast_1d(self.pi2.value(p))[..., None]
        vc = np.atleast_1d(self.cut.value(p))[..., None]
        g = (1.0 - f) * (v2 * self.pi1.normal + v1 * self.pi2.normal) - 2.0 * f * vc * self.cut.normal
        return g if as_point(p).ndim > 1 else g[0]

    def hessian(self, p):
        p = as_point(p)
        n1, n2, nc = self.pi1.normal, self.pi2.normal, self.cut.normal
        f = self.fullness
        H = (1.0 - f) * (np.outer(n1, n2) + np.outer(n2, n1)) - 2.0 * f * np.outer(nc, nc)
        return np.broadcast_to(H, p.shape[:-1] + (3, 3)).copy()


@dataclass(frozen=True, eq=False)
class ILoft(ImplicitSurface):
    """Two-sided loft ``w1*pi1*b2^2 + w2*pi2*b1^2 - b1^2*b2^2``.

    ``pi1``/``pi2`` are tangent planes at the two corners; ``b1``/``b2``
    are local bounding planes through corner 1 and 2 respectively, each
    positive at the opposite corner.  ``dist`` divides by the blending
    denominator ``w1*b2^2 + w2*b1^2``, giving a distance-like value that is
    well defined on the corners.
    """

    pi1: Plane
    pi2: Plane
    b1: Plane
    b2: Plane
    w1: float
    w2: float

    def __post_init__(self):
        if not (np.isfinite(self.w1) and np.isfinite(self.w2)):
            raise ValueError("loft weights must be finite")
        if self.w1 <= 0.0 or self.w2 <= 0.0:
            raise ValueError("loft weights must be positive")

    def _planes(self, p):
        return (
            self.pi1.value(p),
            self.pi2.value(p),
            self.b1.value(p),
            self.b2.value(p),
        )

    def value(self, p):
        v1, v2, u1, u2 = self._planes(p)
        return self.w1 * v1 * u2 * u2 + self.w2 * v2 * u1 * u1 - u1 * u1 * u2 * u2

    def gradient(self, p):
        p = as_point(p)
        v1, v2, u1, u2 = (np.atleast_1d(x)[..., None] for x in self._planes(p))
        n1, n2, m1, m2 = self.pi1.normal, self.pi2.normal, self.b1.normal, self.b2.normal
        g = (
            self.w1 * (n1 * u2 * u2 + v1 * 2.0 * u2 * m2)
            + self.w2 * (n2 * u1 * u1 + v2 * 2.0 * u1 * m1)
            - (2.0 * u1 * m1 * u2 * u2 + u1 * u1 * 2.0 * u2 * m2)
        )
        return g if p.ndim > 1 else g[0]

    def _den(self, p):
        u1 = self.b1.value(p)
        u2 = self.b2.value(p)
        return self.w1 * u2 * u2 + self.w2 * u1 * u1

    def dist(self, p):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.value(p) / self._den(p)

    def dist_gradient(self, p):
        p = as_point(p)
        v1, v2, u1, u2 = (np.atleast_1d(x)[..., None] for x in self._planes(p))
        n1, n2, m1, m2 = self.pi1.normal, self.pi2.normal, self.b1.normal, self.b2.normal
        num = self.w1 * v1 * u2 * u2 + self.w2 * v2 * u1 * u1 - u1 * u1 * u2 * u2
        den = self.w1 * u2 * u2 + self.w2 * u1 * u1
        dnum = (
            self.w1 * (n1 * u2 * u2 + v1 * 2.0 * u2 * m2)
            + self.w2 * (n2 * u1 * u1 + v2 * 2.0 * u1 * m1)
            - (2.0 * u1 * m1 * u2 * u2 + u1 * u1 * 2.0 * u2 * m2)
        )
        dden = 2.0 * (self.w1 * u2 * m2 + self.w2 * u1 * m1)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = (dnum * den - num * dden) / (den * den)
        return g if p.ndim > 1 else g[0]

    def offset_by(self, d: float) -> "ILoft":
        if d == 0.0:
            return self
        return ILoft(
            self.pi1.offset_by(d), self.pi2.offset_by(d), self.b1, self.b2, self.w1, self.w2
        )


@dataclass(frozen=True, eq=False)
class Negated(ImplicitSurface):
    """Sign-flipped view of another surface (same zero set, opposite side).

    Used to normalize ribbon orientation without rebuilding the wrapped
    surface.  The distance channel flips too, so offsetting by ``d`` maps to
    offsetting the inner surface by ``-d``.
    """

    inner: ImplicitSurface

    def value(self, p):
        return -self.inner.value(p)

    def gradient(self, p):
        return -self.inner.gradient(p)

    def dist(self, p):
        return -self.inner.dist(p)

    def dist_gradient(self, p):
        return -self.inner.dist_gradient(p)

    def hessian(self, p):
        return -self.inner.hessian(p)

    def feature_scale(self) -> float:
        return self.inner.feature_scale()

    def offset_by(self, d: float) -> "Negated":
        return Negated(self.inner.offset_by(-d)) if d != 0.0 else self


def _leave_one_out(a: np.ndarray) -> np.ndarray:
    """``out[i] = prod_{j != i} a[j]`` along axis 0, without division."""
    n = a.shape[0]
    pre = np.ones_like(a)
    suf = np.ones_like(a)
    for i in range(1, n):
        pre[i] = pre[i - 1] * a[i - 1]
    for i in range(n - 2, -1, -1):
        suf[i] = suf[i + 1] * a[i + 1]
    return pre * suf


@dataclass(frozen=True, eq=False)
class IPatch(ImplicitSurface):
    """n-sided implicit patch.

    Parameters
    ----------
    sides:
        Sequence of ``(ribbon, bounding)`` surface pairs, one per side, in
        loop order.  Bounding fields must be oriented positive toward the
        patch interior.
    weights:
        ``(n + 1,)`` array ``[w0, w1, ..., wn]``; the side weights
        ``w1..wn`` must be positive, ``w0`` is free.
    corners:
        ``(k, 3)`` corner points of the patch region.  Only used to derive
        the patch length scale and degeneracy probes; the field itself is
        fully determined by ``sides`` and ``weights``.
    """

    sides: tuple
    weights: np.ndarray
    corners: np.ndarray

    def __post_init__(self):
        sides = tuple((r, b) for r, b in self.sides)
        if len(sides) < 2:
            raise ValueError("a patch needs at least two sides")
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != len(sides) + 1:
            raise ValueError(
                f"expected {len(sides) + 1} weights (w0 + one per side), got {w.shape[0]}"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError("patch weights must be finite")
        if np.any(w[1:] <= 0.0):
            raise ValueError("side weights w1..wn must be positive")
        corners = as_point(self.corners).reshape(-1, 3)
        if corners.shape[0] < 2:
            raise ValueError("need at least two corner points")
        object.__setattr__(self, "sides", sides)
        object.__setattr__(self, "weights", frozen(w))
        object.__setattr__(self, "corners", frozen(corners))
        self._check_bounding_coincidence()

    # -- basic structure ------------------------------------------------

    @property
    def n_sides(self) -> int:
        return len(self.sides)

    @property
    def ribbons(self) -> tuple:
        return tuple(r for r, _ in self.sides)

    @property
    def boundings(self) -> tuple:
        return tuple(b for _, b in self.sides)

    def feature_scale(self) -> float:
        return max(bbox_diagonal(self.corners), 1e-12)

    def _probe_points(self) -> np.ndarray:
        c = self.corners.mean(axis=0)
        return np.vstack([self.corners, c, c + 0.37 * (self.corners[0] - c)])

    def _check_bounding_coincidence(self):
        probes = self._probe_points()
        tol = 1e-9 * self.feature_scale()
        vals = [np.atleast_1d(b.dist(probes)) for b in self.boundings]
        n = len(vals)
        for i in range(n):
            for j in range(i + 1, n):
                if np.max(np.abs(vals[i] - vals[j])) < tol or np.max(
                    np.abs(vals[i] + vals[j])
                ) < tol:
                    raise CoincidentBoundings(
                        f"bounding surfaces of sides {i} and {j} coincide"
                    )

    # -- evaluation -----------------------------------------------------

    def _side_fields(self, p):
        """Distance-channel values of all ribbons and boundings: (R, B)."""
        R = np.stack([np.atleast_1d(r.dist(p)) for r, _ in self.sides])
        B = np.stack([np.atleast_1d(b.dist(p)) for _, b in self.sides])
        return R, B

    @staticmethod
    def _combine(w, R, B):
        Bsq = B * B
        loo = _leave_one_out(Bsq)
        expand = (slice(None),) + (None,) * (R.ndim - 1)
        num = (w[1:][expand] * R * loo).sum(axis=0) - w[0] * Bsq.prod(axis=0)
        den = (w[1:][expand] * loo).sum(axis=0)
        return num, den

    def value(self, p):
        pa = as_point(p)
        R, B = self._side_fields(pa)
        num, _ = self._combine(self.weights, R, B)
        return float(num[0]) if pa.ndim == 1 else num

    def _poly_parts(self, pts):
        """Numerator/denominator of the polynomial quotient and gradients.

        Returns ``(num, den, gnum, gden)`` where ``num`` is the raw field,
        ``den = sum_i w_i prod_{j != i} B_j**2`` and the gradients match.
        """
        n = self.n_sides
        R, B = self._side_fields(pts)
        gR = np.stack([r.dist_gradient(pts) for r, _ in self.sides])
        gB = np.stack([b.dist_gradient(pts) for _, b in self.sides])
        Bsq = B * B
        loo = _leave_one_out(Bsq)          # prod_{j != i} B_j^2
        w = self.weights

        num = (w[1:, None] * R * loo).sum(axis=0) - w[0] * Bsq.prod(axis=0)
        den = (w[1:, None] * loo).sum(axis=0)
        gnum = np.zeros_like(pts)
        gden = np.zeros_like(pts)
        # d/dx [prod_i B_i^2] = sum_k loo[k] * 2 B_k gB_k
        gnum -= w[0] * np.sum(loo[..., None] * 2.0 * B[..., None] * gB, axis=0)
        for i in range(n):
            gnum += w[1 + i] * loo[i][..., None] * gR[i]
            # d/dx loo[i] = sum_{k != i} (prod_{j != i,k} B^2) 2 B_k gB_k
            others = [k for k in range(n) if k != i]
            sub = _leave_one_out(Bsq[others])
            dloo = np.sum(
                sub[..., None] * 2.0 * B[others][..., None] * gB[others], axis=0
            )
            gnum += w[1 + i] * R[i][..., None] * dloo
            gden += w[1 + i] * dloo
        return num, den, gnum, gden

    def gradient(self, p):
        pa = as_point(p)
        single = pa.ndim == 1
        pts = pa.reshape(-1, 3)
        _, _, gnum, _ = self._poly_parts(pts)
        return gnum[0] if single else gnum.reshape(pa.shape)

    def faithful(self, p, form: str = "auto"):
        """Distance-like field value; see module docstring.

        ``form`` selects the evaluation route: ``"rational"`` (cheap, not
        defined on the boundaries), ``"polynomial"`` (boundary-safe) or
        ``"auto"`` (switch on the smallest ``|B_i|``).
        """
        if form not in ("auto", "rational", "polynomial"):
            raise ValueError(f"unknown faithful form {form!r}")
        pa = as_point(p)
        single = pa.ndim == 1
        pts = pa.reshape(-1, 3)
        R, B = self._side_fields(pts)
        w = self.weights
        num, den = self._combine(w, R, B)
        eps_b = EPS_BOUNDARY_REL * self.feature_scale()
        den_tol = EPS_DENOMINATOR_REL * self.feature_scale() ** self.n_sides

        with np.errstate(divide="ignore", invalid="ignore"):
            if form in ("auto", "rational"):
                alpha = w[1:, None] / (B * B)
                rational = ((R * alpha).sum(axis=0) - w[0]) / alpha.sum(axis=0)
            if form in ("auto", "polynomial"):
                poly = num / den

        if form == "rational":
            out = rational
        elif form == "polynomial":
            if np.any(np.abs(den) < den_tol):
                raise DegenerateDenominator(
                    "faithful denominator vanishes (several boundings are zero here)"
                )
            out = poly
        else:
            near_boundary = np.abs(B).min(axis=0) <= eps_b
            if np.any(near_boundary & (np.abs(den) < den_tol)):
                raise DegenerateDenominator(
                    "faithful denominator vanishes (several boundings are zero here)"
                )
            out = np.where(near_boundary, poly, rational)
        return float(out[0]) if single else out.reshape(pa.shape[:-1])

    def dist(self, p):
        return self.faithful(p, form="auto")

    def dist_gradient(self, p):
        # Central differences of the faithful channel; only exercised when a
        # patch is nested as another patch's ribbon, which the fitting
        # pipeline never does.
        pa = as_point(p)
        h = 1e-6 * self.feature_scale()
        cols = []
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            cols.append((self.faithful(pa + e) - self.faithful(pa - e)) / (2.0 * h))
        return np.stack(cols, axis=-1)

    def inside(self, p, tol: float = 0.0):
        """True where every bounding is ``>= -tol`` (the patch's domain).

        Uses the raw bounding values: they share the zero set and sign of the
        distance channel but stay finite everywhere.
        """
        pa = as_point(p)
        flat = pa.reshape(-1, 3)
        B = np.stack([np.atleast_1d(b.value(flat)) for _, b in self.sides])
        ok = (B >= -tol).all(axis=0)
        return bool(ok[0]) if pa.ndim == 1 else ok.reshape(pa.shape[:-1])

    def offset_by(self, d: float) -> "IPatch":
        if d == 0.0:
            return self
        new_sides = []
        for r, b in self.sides:
            try:
                new_sides.append((r.offset_by(d), b))
            except UnsupportedOffset as exc:
                raise UnsupportedOffset(f"side {len(new_sides)}: {exc}") from None
        return IPatch(tuple(new_sides), self.weights, self.corners)


@dataclass(frozen=True, eq=False)
class FaithfulField(ImplicitSurface):
    """The distance-like channel of a patch as a standalone field.

    ``value`` matches ``eval_faithful`` away from trouble spots but never
    raises: where several boundings vanish together (patch corners, where
    the polynomial quotient turns 0/0) it falls back to the mean ribbon
    distance, which is bounded and keeps Newton-style projections moving.
    The zero set of this field is the actual patch surface; the raw
    algebraic field also vanishes along the corner lines where the quotient
    denominator does, which is what this wrapper exists to avoid.
    """

    patch: IPatch

    def feature_scale(self) -> float:
        return self.patch.feature_scale()

    def value(self, p):
        pa = as_point(p)
        single = pa.ndim == 1
        pts = pa.reshape(-1, 3)
        patch = self.patch
        R, B = patch._side_fields(pts)
        w = patch.weights
        num, den = patch._combine(w, R, B)
        eps_b = EPS_BOUNDARY_REL * patch.feature_scale()
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            alpha = w[1:, None] / (B * B)
            rational = ((R * alpha).sum(axis=0) - w[0]) / alpha.sum(axis=0)
            poly = num / den
            out = np.where(np.abs(B).min(axis=0) <= eps_b, poly, rational)
        bad = ~np.isfinite(out)
        if bad.any():
            out[bad] = R[:, bad].mean(axis=0)
        return float(out[0]) if single else out.reshape(pa.shape[:-1])

    def gradient(self, p):
        pa = as_point(p)
        single = pa.ndim == 1
        pts = pa.reshape(-1, 3)
        patch = self.patch
        w = patch.weights
        eps_b = EPS_BOUNDARY_REL * patch.feature_scale()

        R, B = patch._side_fields(pts)
        gR = np.stack([r.dist_gradient(pts) for r, _ in patch.sides])
        gB = np.stack([b.dist_gradient(pts) for _, b in patch.sides])
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            # rational branch: F = (sum R_i a_i - w0) / sum a_i,
            # a_i = w_i / B_i^2, da_i = -2 w_i gB_i / B_i^3
            alpha = w[1:, None] / (B * B)
            dalpha = (-2.0 * w[1:, None] / (B * B * B))[..., None] * gB
            asum = alpha.sum(axis=0)
            f_rat = ((R * alpha).sum(axis=0) - w[0]) / asum
            top = (alpha[..., None] * gR + R[..., None] * dalpha).sum(axis=0)
            g_rat = (top - f_rat[:, None] * dalpha.sum(axis=0)) / asum[:, None]

            num, den, gnum, gden = patch._poly_parts(pts)
            f_poly = num / den
            g_poly = (gnum - f_poly[:, None] * gden) / den[:, None]

            near = np.abs(B).min(axis=0) <= eps_b
            g = np.where(near[:, None], g_poly, g_rat)
        bad = ~np.isfinite(g).all(axis=1)
        if bad.any():
            g[bad] = gR[:, bad].mean(axis=0)
        return g[0] if single else g.reshape(pa.shape)


# --------------------------------------------------------------------------
# Operation-style API
# --------------------------------------------------------------------------

def eval_field(s: ImplicitSurface, p):
    """Raw algebraic field value of any surface variant."""
    return s.value(p)


def gradient(s: ImplicitSurface, p):
    """Analytic gradient of :func:`eval_field`."""
    return s.gradient(p)


def eval_faithful(s: IPatch, p, form: str = "auto"):
    """Distance-like patch value (see :class:`IPatch` and module docstring)."""
    if not isinstance(s, IPatch):
        raise TypeError("eval_faithful applies to IPatch fields")
    return s.faithful(p, form=form)


def offset_patch(s: IPatch, d: float) -> IPatch:
    """Patch whose faithful field is ``eval_faithful(s, .) - d`` exactly.

    Every ribbon is replaced by its exact offset (planes shift their offset,
    lofts shift their tangent planes); boundings and weights are untouched.
    Raises :class:`UnsupportedOffset` for ribbons without an exact offset
    form (e.g. Liming quadrics), except for the trivial ``d == 0``.
    """
    return s.offset_by(d)


def mean_curvature(s: ImplicitSurface, p) -> float:
    """Mean curvature of the level set of ``s`` through ``p``.

    Divergence of the unit gradient over two: positive for an
    outward-positive sphere field (``x^2+y^2+z^2-r^2`` gives ``1/r``).
    """
    p = as_point(p)
    if p.ndim != 1:
        raise ValueError("mean_curvature expects a single point")
    g = np.asarray(s.gradient(p), dtype=np.float64)
    gn = float(np.linalg.norm(g))
    if gn < 1e-12 * max(s.feature_scale(), 1e-12):
        raise SingularGradient("gradient vanishes; curvature undefined")
    H = s.hessian(p)
    return float((np.trace(H) * gn * gn - g @ H @ g) / (2.0 * gn**3))
