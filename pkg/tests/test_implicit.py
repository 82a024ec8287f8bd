"""Field algebra: values, gradients, faithful forms, offsets, curvature."""

import numpy as np
import pytest

from helpers import (
    Quadric,
    fd_gradient,
    locate_boundary_point,
    make_cap_patch,
    make_iloft,
    make_liming,
    sphere_field,
    unit,
)
from ipatch.errors import (
    CoincidentBoundings,
    DegenerateDenominator,
    DegenerateNormal,
    SingularGradient,
    UnsupportedOffset,
)
from ipatch.implicit import (
    ILoft,
    IPatch,
    LimingSurface,
    Plane,
    eval_faithful,
    eval_field,
    gradient,
    mean_curvature,
    offset_patch,
)


# ---------------------------------------------------------------------------
# planes
# ---------------------------------------------------------------------------

def test_plane_value_and_gradient():
    pl = Plane(np.array([0.0, 0.0, 1.0]), 0.0)
    assert eval_field(pl, [1.0, 2.0, 3.0]) == 3.0
    assert np.allclose(gradient(pl, [1.0, 2.0, 3.0]), [0, 0, 1])
    # batch evaluation
    pts = np.array([[0, 0, 1], [0, 0, -2.5]], dtype=float)
    assert np.allclose(pl.value(pts), [1.0, -2.5])


def test_plane_normalizes_scaled_input():
    pl = Plane(np.array([0.0, 0.0, 2.0]), 4.0)
    assert np.allclose(pl.normal, [0, 0, 1])
    assert pl.offset == pytest.approx(2.0)
    # value stays the exact signed distance
    assert pl.value(np.array([5.0, 1.0, -2.0])) == pytest.approx(0.0)


def test_plane_from_point_normal_contains_point():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = rng.normal(size=3)
        n = rng.normal(size=3)
        pl = Plane.from_point_normal(p, n)
        assert abs(pl.value(p)) < 1e-12
        assert np.linalg.norm(pl.normal) == pytest.approx(1.0, abs=1e-12)


def test_plane_zero_normal_rejected():
    with pytest.raises(DegenerateNormal):
        Plane(np.zeros(3), 1.0)


# ---------------------------------------------------------------------------
# Liming quadric
# ---------------------------------------------------------------------------

def quarter_circle_liming():
    # corners (1,0,0) and (0,0,1) of the circle (x-1)^2 + (z-1)^2 = 1,
    # tangent planes z = 0 and x = 0
    p1 = np.array([1.0, 0.0, 0.0])
    p2 = np.array([0.0, 0.0, 1.0])
    n1 = np.array([0.0, 0.0, 1.0])
    n2 = np.array([1.0, 0.0, 0.0])
    return make_liming(p1, n1, p2, n2, fullness=0.5)


def test_liming_half_fullness_is_the_circle():
    lim = quarter_circle_liming()
    t = np.linspace(0.0, np.pi / 2.0, 17)
    for y in (0.0, -1.3, 2.4):  # field is an extrusion along y
        pts = np.stack(
            [1.0 - np.cos(t), np.full_like(t, y), 1.0 - np.sin(t)], axis=1
        )
        assert np.max(np.abs(lim.value(pts))) < 1e-14


def test_liming_cut_plane_through_both_corners():
    lim = quarter_circle_liming()
    assert abs(lim.cut.value(np.array([1.0, 0.0, 0.0]))) < 1e-12
    assert abs(lim.cut.value(np.array([0.0, 0.0, 1.0]))) < 1e-12
    assert np.allclose(np.abs(lim.cut.normal), [1 / np.sqrt(2), 0, 1 / np.sqrt(2)])


def test_liming_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(10):
        p1, p2 = rng.normal(size=3), rng.normal(size=3)
        lim = make_liming(p1, unit(rng.normal(size=3)), p2, unit(rng.normal(size=3)),
                          fullness=rng.uniform(0.05, 0.95))
        p = rng.normal(size=3)
        g = lim.gradient(p)
        assert np.allclose(g, fd_gradient(lim, p), rtol=1e-5, atol=1e-8)


def test_liming_fullness_range_enforced():
    lim = quarter_circle_liming()
    for bad in (0.0, 1.0, -0.2, 1.7):
        with pytest.raises(ValueError):
            LimingSurface(lim.pi1, lim.pi2, lim.cut, bad)


# ---------------------------------------------------------------------------
# I-loft
# ---------------------------------------------------------------------------

def test_iloft_value_matches_defining_formula():
    rng = np.random.default_rng(11)
    lo = make_iloft(
        np.array([1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]) * 0 + [0, 0, 1.0],
        np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]),
        w1=1.3, w2=0.8,
    )
    pts = rng.normal(size=(50, 3))
    v1, v2 = lo.pi1.value(pts), lo.pi2.value(pts)
    u1, u2 = lo.b1.value(pts), lo.b2.value(pts)
    expected = 1.3 * v1 * u2**2 + 0.8 * v2 * u1**2 - u1**2 * u2**2
    assert np.allclose(lo.value(pts), expected, rtol=1e-14, atol=1e-14)


def test_iloft_interpolates_corner_points_and_normals():
    rng = np.random.default_rng(5)
    for _ in range(10):
        p1, p2 = rng.normal(size=3), rng.normal(size=3)
        n1 = unit(rng.normal(size=3))
        n2 = unit(rng.normal(size=3))
        lo = make_iloft(p1, n1, p2, n2, w1=rng.uniform(0.5, 2), w2=rng.uniform(0.5, 2))
        for p, n in ((p1, n1), (p2, n2)):
            assert abs(lo.value(p)) < 1e-12
            g = np.asarray(lo.gradient(p))
            cr = np.linalg.norm(np.cross(g, n))
            assert cr < 1e-10 * np.linalg.norm(g)


def test_iloft_gradients_match_finite_differences():
    rng = np.random.default_rng(13)
    lo = make_iloft(
        rng.normal(size=3), unit(rng.normal(size=3)),
        rng.normal(size=3), unit(rng.normal(size=3)), w1=1.7, w2=0.6,
    )
    for _ in range(10):
        p = rng.normal(size=3)
        assert np.allclose(lo.gradient(p), fd_gradient(lo, p), rtol=1e-5, atol=1e-7)
        # distance channel: quotient rule against finite differences
        fd = np.zeros(3)
        h = 1e-6
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            fd[k] = (lo.dist(p + e) - lo.dist(p - e)) / (2 * h)
        assert np.allclose(lo.dist_gradient(p), fd, rtol=1e-4, atol=1e-6)


def test_iloft_dist_is_normalized_value():
    rng = np.random.default_rng(17)
    lo = make_iloft(
        rng.normal(size=3), unit(rng.normal(size=3)),
        rng.normal(size=3), unit(rng.normal(size=3)),
    )
    pts = rng.normal(size=(20, 3))
    den = lo.w1 * lo.b2.value(pts) ** 2 + lo.w2 * lo.b1.value(pts) ** 2
    assert np.allclose(lo.dist(pts) * den, lo.value(pts), rtol=1e-12, atol=1e-12)


def test_iloft_positive_weights_enforced():
    lo = quarter_loft()
    with pytest.raises(ValueError):
        ILoft(lo.pi1, lo.pi2, lo.b1, lo.b2, -1.0, 1.0)
    with pytest.raises(ValueError):
        ILoft(lo.pi1, lo.pi2, lo.b1, lo.b2, 1.0, 0.0)


def quarter_loft():
    return make_iloft(
        np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]),
        np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]),
    )


# ---------------------------------------------------------------------------
# patches: defining formula, faithful forms, interpolation
# ---------------------------------------------------------------------------

def manual_patch_fields(patch, pts):
    """Independent re-computation of the combination formula."""
    n = patch.n_sides
    R = [np.atleast_1d(r.dist(pts)) for r in patch.ribbons]
    B = [np.atleast_1d(b.dist(pts)) for b in patch.boundings]
    w = patch.weights
    num = -w[0] * np.prod([b * b for b in B], axis=0)
    den = np.zeros_like(num)
    for i in range(n):
        loo = np.prod([B[j] ** 2 for j in range(n) if j != i], axis=0)
        num = num + w[1 + i] * R[i] * loo
        den = den + w[1 + i] * loo
    return num, den


def test_patch_value_matches_manual_combination():
    rng = np.random.default_rng(23)
    for n in (3, 4, 5, 6):
        patch = make_cap_patch(rng, n)
        pts = patch.corners.mean(axis=0) + 0.4 * rng.normal(size=(200, 3))
        num, _ = manual_patch_fields(patch, pts)
        got = patch.value(pts)
        scale = np.max(np.abs(num)) + 1e-30
        assert np.max(np.abs(got - num)) < 1e-12 * scale


def test_patch_gradient_matches_finite_differences():
    rng = np.random.default_rng(29)
    for n in (3, 4, 5):
        patch = make_cap_patch(rng, n)
        for _ in range(5):
            p = unit(patch.corners.mean(axis=0)) + 0.05 * rng.normal(size=3)
            g = patch.gradient(p)
            fd = fd_gradient(patch, p, h=1e-6)
            assert np.allclose(g, fd, rtol=1e-4, atol=1e-8 * (1 + np.linalg.norm(fd)))


def test_faithful_rational_equals_polynomial_off_boundary():
    rng = np.random.default_rng(31)
    patch = make_cap_patch(rng, 4)
    pts = patch.corners.mean(axis=0) + 0.3 * rng.normal(size=(500, 3))
    a = patch.faithful(pts, form="rational")
    b = patch.faithful(pts, form="polynomial")
    ok = np.isfinite(a)
    scale = np.abs(b[ok]) + 1e-12
    assert np.max(np.abs(a[ok] - b[ok]) / scale) < 1e-10


def test_faithful_value_equals_manual_quotient():
    rng = np.random.default_rng(37)
    patch = make_cap_patch(rng, 5)
    pts = patch.corners.mean(axis=0) + 0.25 * rng.normal(size=(100, 3))
    num, den = manual_patch_fields(patch, pts)
    got = eval_faithful(patch, pts)
    assert np.allclose(got, num / den, rtol=1e-10, atol=1e-12)


def test_faithful_polynomial_defined_on_single_boundary():
    """On one bounding's zero set (others nonzero) the polynomial form works."""
    rng = np.random.default_rng(41)
    patch = make_cap_patch(rng, 4)
    ribbon, bound = patch.sides[0]
    seed = 0.5 * (patch.corners[0] + patch.corners[1])
    q = locate_boundary_point(ribbon, bound, seed)
    v = patch.faithful(q, form="polynomial")
    assert np.isfinite(v)
    # boundary point: the faithful field also vanishes there
    assert abs(v) < 1e-8 * patch.feature_scale()


def test_faithful_degenerate_at_corner():
    rng = np.random.default_rng(43)
    patch = make_cap_patch(rng, 4)
    with pytest.raises(DegenerateDenominator):
        patch.faithful(patch.corners[0], form="polynomial")


def test_boundary_interpolation_plane_ribbons_everywhere_on_curve():
    """With ribbon = plane, the whole ribbon-bounding line is on the patch."""
    rng = np.random.default_rng(47)
    patch = make_cap_patch(rng, 4, ribbon_kinds=("plane",))
    for (ribbon, bound), k in zip(patch.sides, range(4)):
        d = np.cross(ribbon.normal, bound.normal)
        p0 = locate_boundary_point(ribbon, bound, patch.corners[k])
        for t in np.linspace(-0.4, 0.4, 9):
            q = p0 + t * unit(d)
            assert abs(patch.value(q)) < 1e-12 * (1 + abs(patch.value(q + 0.1)))


def test_tangent_continuity_along_side():
    rng = np.random.default_rng(53)
    patch = make_cap_patch(rng, 4)
    ribbon, bound = patch.sides[2]
    seed = 0.5 * (patch.corners[2] + patch.corners[3])
    q = locate_boundary_point(ribbon, bound, seed)
    gI = np.asarray(patch.gradient(q))
    gR = np.asarray(ribbon.gradient(q))
    cr = np.linalg.norm(np.cross(gI, gR))
    assert cr <= 1e-8 * np.linalg.norm(gI) * np.linalg.norm(gR)


def test_faithful_is_mean_of_plane_ribbons():
    """w0 = 0: faithful value lies between min and max ribbon distance."""
    rng = np.random.default_rng(59)
    patch = make_cap_patch(rng, 4, ribbon_kinds=("plane",), w0=0.0)
    pts = patch.corners.mean(axis=0) + 0.3 * rng.normal(size=(300, 3))
    R = np.stack([r.value(pts) for r in patch.ribbons])
    B = np.stack([b.value(pts) for b in patch.boundings])
    ok = np.abs(B).min(axis=0) > 1e-3
    f = patch.faithful(pts)
    assert np.all(f[ok] <= R.max(axis=0)[ok] + 1e-10)
    assert np.all(f[ok] >= R.min(axis=0)[ok] - 1e-10)


def test_identical_plane_ribbons_reproduce_plane():
    rng = np.random.default_rng(61)
    base = make_cap_patch(rng, 4)
    shared = Plane.from_point_normal(rng.normal(size=3), unit(rng.normal(size=3)))
    patch = IPatch(
        tuple((shared, b) for b in base.boundings),
        np.concatenate([[0.0], rng.uniform(0.5, 2.0, 4)]),
        base.corners,
    )
    pts = base.corners.mean(axis=0) + 0.4 * rng.normal(size=(100, 3))
    assert np.allclose(patch.faithful(pts), shared.value(pts), rtol=1e-10, atol=1e-12)


def test_weight_scale_invariance():
    rng = np.random.default_rng(67)
    patch = make_cap_patch(rng, 3)
    for k in (2.0, 0.125, 37.5):
        scaled = IPatch(patch.sides, k * patch.weights, patch.corners)
        pts = patch.corners.mean(axis=0) + 0.3 * rng.normal(size=(50, 3))
        a, b = patch.value(pts), scaled.value(pts)
        assert np.allclose(k * a, b, rtol=1e-12, atol=1e-14 * np.max(np.abs(b)))
        # faithful is completely unchanged
        assert np.allclose(patch.faithful(pts), scaled.faithful(pts), rtol=1e-12)


def test_coincident_boundings_rejected():
    rng = np.random.default_rng(71)
    base = make_cap_patch(rng, 4)
    sides = list(base.sides)
    sides[2] = (sides[2][0], sides[0][1])  # reuse side-0 bounding
    with pytest.raises(CoincidentBoundings):
        IPatch(tuple(sides), base.weights, base.corners)
    # opposite orientation also counts as coincident
    sides[2] = (sides[2][0], sides[0][1].flipped())
    with pytest.raises(CoincidentBoundings):
        IPatch(tuple(sides), base.weights, base.corners)


def test_patch_weight_validation():
    rng = np.random.default_rng(73)
    patch = make_cap_patch(rng, 3)
    w = patch.weights.copy()
    w[1] = 0.0
    with pytest.raises(ValueError):
        IPatch(patch.sides, w, patch.corners)
    w = patch.weights.copy()
    w[2] = np.inf
    with pytest.raises(ValueError):
        IPatch(patch.sides, w, patch.corners)
    with pytest.raises(ValueError):
        IPatch(patch.sides, patch.weights[:-1], patch.corners)


# ---------------------------------------------------------------------------
# offsets
# ---------------------------------------------------------------------------

def test_offset_shifts_faithful_field_plane_ribbons():
    rng = np.random.default_rng(79)
    patch = make_cap_patch(rng, 4, ribbon_kinds=("plane",))
    pts = patch.corners.mean(axis=0) + 0.3 * rng.normal(size=(200, 3))
    base = patch.faithful(pts)
    for d in (-5.0, 0.0, 5.0, 10.0):
        off = offset_patch(patch, d)
        got = off.faithful(pts)
        assert np.allclose(got, base - d, rtol=1e-12, atol=1e-12 * (1 + abs(d)))


def test_offset_shifts_faithful_field_loft_ribbons():
    rng = np.random.default_rng(83)
    patch = make_cap_patch(rng, 3, ribbon_kinds=("iloft",))
    pts = patch.corners.mean(axis=0) + 0.2 * rng.normal(size=(100, 3))
    base = patch.faithful(pts)
    for d in (-0.4, 0.7):
        off = offset_patch(patch, d)
        assert np.allclose(off.faithful(pts), base - d, rtol=1e-11, atol=1e-11)


def test_offset_composes_additively():
    rng = np.random.default_rng(89)
    patch = make_cap_patch(rng, 4, ribbon_kinds=("plane", "iloft"))
    pts = patch.corners.mean(axis=0) + 0.2 * rng.normal(size=(50, 3))
    twice = offset_patch(offset_patch(patch, 1.25), -0.5)
    once = offset_patch(patch, 0.75)
    assert np.allclose(twice.faithful(pts), once.faithful(pts), rtol=1e-12, atol=1e-13)


def test_offset_zero_is_identity_object():
    rng = np.random.default_rng(97)
    patch = make_cap_patch(rng, 4)  # includes a Liming ribbon
    assert offset_patch(patch, 0.0) is patch


def test_offset_liming_ribbon_unsupported():
    rng = np.random.default_rng(101)
    patch = make_cap_patch(rng, 4, ribbon_kinds=("liming",))
    with pytest.raises(UnsupportedOffset):
        offset_patch(patch, 0.5)


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------

def test_mean_curvature_of_sphere():
    for r in (1.0, 0.5, 3.0):
        s = sphere_field(r)
        p = unit(np.array([0.3, -0.5, 0.81])) * r
        assert mean_curvature(s, p) == pytest.approx(1.0 / r, rel=1e-6)


def test_mean_curvature_of_extruded_circle():
    # The quarter-circle Liming field is a cylinder of radius 1 along y:
    # principal curvatures 1 and 0, so the mean is 1/2 in magnitude.  (An
    # analytic cylinder oracle; the circle's own curvature 1/r is the total
    # normal curvature, not the mean of the 3D level set.)  The construction
    # orients the field positive toward the cylinder axis, hence the sign.
    lim = quarter_circle_liming()
    t = np.pi / 4.0
    p = np.array([1.0 - np.cos(t), 0.7, 1.0 - np.sin(t)])
    assert mean_curvature(lim, p) == pytest.approx(-0.5, abs=1e-4)


def test_mean_curvature_singular_at_sphere_center():
    with pytest.raises(SingularGradient):
        mean_curvature(sphere_field(1.0), np.zeros(3))


def test_mean_curvature_sign_flips_with_orientation():
    s = sphere_field(2.0)
    flipped = Quadric(-np.eye(3), np.zeros(3), 4.0)
    p = np.array([2.0, 0.0, 0.0])
    assert mean_curvature(s, p) == pytest.approx(0.5, rel=1e-6)
    assert mean_curvature(flipped, p) == pytest.approx(-0.5, rel=1e-6)
