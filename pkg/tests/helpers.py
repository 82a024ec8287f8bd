"""Shared test utilities: independent oracles and randomized constructions.

Everything here deliberately re-derives results "the long way" (finite
differences, explicit loops over the defining formulas, Gauss-Newton root
location) so library outputs are checked against an independent route.
"""

from __future__ import annotations

import numpy as np

from ipatch.implicit import ILoft, IPatch, ImplicitSurface, LimingSurface, Plane


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def fd_gradient(surface, p, h=1e-6):
    """Central-difference gradient oracle."""
    p = np.asarray(p, dtype=np.float64)
    g = np.zeros(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        g[k] = (surface.value(p + e) - surface.value(p - e)) / (2.0 * h)
    return g


class Quadric(ImplicitSurface):
    """x^T A x + b.x + c with analytic gradient, for curvature oracles."""

    def __init__(self, A, b, c):
        self.A = np.asarray(A, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        self.c = float(c)

    def value(self, p):
        p = np.asarray(p, dtype=np.float64)
        return np.einsum("...i,ij,...j->...", p, self.A, p) + p @ self.b + self.c

    def gradient(self, p):
        p = np.asarray(p, dtype=np.float64)
        return 2.0 * p @ self.A + self.b


def sphere_field(r=1.0):
    return Quadric(np.eye(3), np.zeros(3), -r * r)


def tangent_plane(point, normal):
    return Plane.from_point_normal(point, normal)


def loft_bounding_planes(p1, n1, p2, n2):
    """Local bounding planes of a two-sided loft: through each corner,
    normal along the other corner's projection into the tangent plane."""
    d12 = p2 - p1
    m1 = unit(d12 - n1 * (n1 @ d12))
    m2 = unit(-d12 - n2 * (n2 @ -d12))
    return Plane.from_point_normal(p1, m1), Plane.from_point_normal(p2, m2)


def make_liming(p1, n1, p2, n2, fullness):
    pi1 = tangent_plane(p1, n1)
    pi2 = tangent_plane(p2, n2)
    u = unit(p2 - p1)
    n12 = unit(n1 + n2)
    cut_n = unit(n12 - (n12 @ u) * u)
    cut = Plane.from_point_normal(p1, cut_n)
    return LimingSurface(pi1, pi2, cut, fullness)


def make_iloft(p1, n1, p2, n2, w1=1.0, w2=1.0):
    pi1 = tangent_plane(p1, n1)
    pi2 = tangent_plane(p2, n2)
    b1, b2 = loft_bounding_planes(p1, n1, p2, n2)
    return ILoft(pi1, pi2, b1, b2, w1, w2)


def make_cap_patch(rng, n_sides, ribbon_kinds=("liming", "iloft"), w0=None):
    """Random valid n-sided patch on a unit-sphere cap.

    Corners sit on the unit sphere with radial normals; every side gets a
    transversal bounding plane (positive toward the cap centroid) and a
    Liming or loft ribbon through its two corners.
    """
    thetas = np.sort(rng.uniform(0.0, 2.0 * np.pi, n_sides))
    # keep corners angularly separated
    while np.min(np.diff(np.concatenate([thetas, [thetas[0] + 2 * np.pi]]))) < 0.5:
        thetas = np.sort(rng.uniform(0.0, 2.0 * np.pi, n_sides))
    phis = rng.uniform(0.45, 0.75, n_sides)  # polar angle from +z
    corners = np.stack(
        [
            np.cos(thetas) * np.sin(phis),
            np.sin(thetas) * np.sin(phis),
            np.cos(phis),
        ],
        axis=1,
    )
    normals = corners.copy()
    centroid = unit(corners.mean(axis=0))

    sides = []
    for k in range(n_sides):
        q = (k + 1) % n_sides
        p1, nn1 = corners[k], normals[k]
        p2, nn2 = corners[q], normals[q]
        nb = np.cross(unit(nn1 + nn2), p2 - p1)
        bound = Plane.from_point_normal(p1, unit(nb))
        if bound.value(centroid) < 0.0:
            bound = bound.flipped()
        kind = ribbon_kinds[k % len(ribbon_kinds)]
        if kind == "liming":
            ribbon = make_liming(p1, nn1, p2, nn2, fullness=rng.uniform(0.3, 0.7))
        elif kind == "iloft":
            ribbon = make_iloft(
                p1, nn1, p2, nn2, w1=rng.uniform(0.5, 2.0), w2=rng.uniform(0.5, 2.0)
            )
        elif kind == "plane":
            # plane through both corners, tilted off the chord
            nb2 = unit(np.cross(p2 - p1, nb))
            ribbon = Plane.from_point_normal(p1, nb2)
        else:
            raise ValueError(kind)
        sides.append((ribbon, bound))

    weights = np.concatenate(
        [
            [rng.uniform(-0.5, 0.5) if w0 is None else w0],
            rng.uniform(0.5, 2.0, n_sides),
        ]
    )
    return IPatch(tuple(sides), weights, corners)


def locate_boundary_point(ribbon, bounding, seed, tol=1e-13, max_iter=80):
    """Gauss-Newton solve of ribbon = bounding = 0 from a seed point."""
    p = np.asarray(seed, dtype=np.float64).copy()
    for _ in range(max_iter):
        F = np.array([ribbon.value(p), bounding.value(p)])
        J = np.stack([np.asarray(ribbon.gradient(p)), np.asarray(bounding.gradient(p))])
        g = np.linalg.norm(J, axis=1)
        if np.max(np.abs(F) / np.maximum(g, 1e-12)) < tol:
            return p
        step, *_ = np.linalg.lstsq(J, -F, rcond=None)
        # damp huge steps; the curve is within a chord length of the seed
        ln = np.linalg.norm(step)
        if ln > 0.5:
            step *= 0.5 / ln
        p = p + step
    return p


def patch_field_scale(patch):
    """Representative magnitude of the patch field's terms near the corners."""
    rng = np.random.default_rng(0)
    probes = np.concatenate(
        [
            patch.corners + 0.01 * patch.feature_scale() * rng.normal(size=patch.corners.shape),
            patch.corners.mean(axis=0, keepdims=True),
        ]
    )
    R = np.stack([np.atleast_1d(r.dist(probes)) for r in patch.ribbons])
    B = np.stack([np.atleast_1d(b.dist(probes)) for b in patch.boundings])
    Bsq = B * B
    n = len(patch.ribbons)
    w = patch.weights
    total = np.abs(w[0]) * Bsq.prod(axis=0)
    for i in range(n):
        loo = np.prod([Bsq[j] for j in range(n) if j != i], axis=0)
        total = total + np.abs(w[1 + i] * R[i]) * loo
    return float(np.max(total))
