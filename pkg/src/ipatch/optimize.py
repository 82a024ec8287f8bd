"""Derivative-free minimizers used by the fitting stages.

The downhill-simplex routine is intentionally hand-rolled: its coefficients,
initial-simplex construction and stopping rule are part of the package's
reproducibility contract (identical inputs must walk the identical path), so
hiding them behind a library implementation with its own defaults would make
results drift across library versions.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteObjective

__all__ = ["nelder_mead", "golden_section"]

# downhill-simplex coefficients
_REFLECT = 1.0
_EXPAND = 2.0
_CONTRACT = 0.5
_SHRINK = 0.5

# initial simplex: each coordinate perturbed by 5% of its value,
# and by this absolute step where the value is zero
_STEP_REL = 0.05
_STEP_ZERO = 0.00025

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class _Budget:
    def __init__(self, f, limit):
        self.f = f
        self.limit = int(limit)
        self.used = 0

    def __call__(self, x):
        if self.used >= self.limit:
            raise _OutOfBudget
        self.used += 1
        v = float(self.f(np.asarray(x, dtype=np.float64)))
        if np.isnan(v):
            raise NonFiniteObjective(f"objective returned NaN at {x!r}")
        return v


class _OutOfBudget(Exception):
    pass


def nelder_mead(f, x0, max_eval: int = 2000, tol_f: float = 1e-10):
    """Minimize ``f`` by the downhill simplex method.

    Starts from ``x0`` (which stays a simplex vertex, so the result is never
    worse than the start).  Stops when the simplex function-value spread
    drops below ``tol_f * (1 + |f_best|)`` or after ``max_eval``
    evaluations.  ``+inf`` values are legal (constraint rejection); ``NaN``
    raises :class:`NonFiniteObjective`.

    Returns ``(x_best, f_best, evaluations)``.
    """
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
    n = x0.size
    if n == 0:
        raise ValueError("x0 must have at least one coordinate")
    budget = _Budget(f, max_eval)

    xs = [x0.copy()]
    for i in range(n):
        step = _STEP_REL * x0[i] if x0[i] != 0.0 else _STEP_ZERO
        v = x0.copy()
        v[i] += step
        xs.append(v)
    xs = np.stack(xs)
    fs_list = []
    try:
        for x in xs:
            fs_list.append(budget(x))
    except _OutOfBudget:
        # budget smaller than the initial simplex: best of what was seen
        if not fs_list:
            return x0, float("inf"), budget.used
        i = int(np.argmin(fs_list))
        return xs[i].copy(), float(fs_list[i]), budget.used
    fs = np.array(fs_list)

    try:
        while budget.used < max_eval:
            order = np.argsort(fs, kind="stable")
            xs, fs = xs[order], fs[order]
            spread = fs[-1] - fs[0]
            if np.isfinite(spread) and spread < tol_f * (1.0 + abs(fs[0])):
                break
            centroid = xs[:-1].mean(axis=0)
            xr = centroid + _REFLECT * (centroid - xs[-1])
            fr = budget(xr)
            if fr < fs[0]:
                xe = centroid + _EXPAND * (centroid - xs[-1])
                fe = budget(xe)
                if fe < fr:
                    xs[-1], fs[-1] = xe, fe
                else:
                    xs[-1], fs[-1] = xr, fr
            elif fr < fs[-2]:
                xs[-1], fs[-1] = xr, fr
            else:
                if fr < fs[-1]:  # outside contraction
                    xc = centroid + _CONTRACT * (centroid - xs[-1])
                    fc = budget(xc)
                    if fc <= fr:
                        xs[-1], fs[-1] = xc, fc
                        continue
                else:  # inside contraction
                    xc = centroid - _CONTRACT * (centroid - xs[-1])
                    fc = budget(xc)
                    if fc < fs[-1]:
                        xs[-1], fs[-1] = xc, fc
                        continue
                for i in range(1, len(xs)):  # shrink toward the best vertex
                    xs[i] = xs[0] + _SHRINK * (xs[i] - xs[0])
                    fs[i] = budget(xs[i])
    except _OutOfBudget:
        pass

    i = int(np.argmin(fs))
    return xs[i], float(fs[i]), budget.used


def golden_section(f, lo: float, hi: float, tol: float = 1e-9):
    """Minimize a one-dimensional function on ``[lo, hi]``.

    Shrinks the bracket by the golden ratio until its width is below
    ``tol``; ties keep the left sub-interval, so a flat objective converges
    to the lower end.  Returns ``(x, f(x), evaluations)``.
    """
    if not hi > lo:
        raise ValueError("need lo < hi")
    evals = 0

    def call(x):
        nonlocal evals
        evals += 1
        v = float(f(x))
        if np.isnan(v):
            raise NonFiniteObjective(f"objective returned NaN at {x!r}")
        return v

    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = call(c), call(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = call(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = call(d)
    x = 0.5 * (lo + hi)
    return x, call(x), evals
