"""Downhill simplex and golden-section behavior."""

import numpy as np
import pytest

from ipatch.errors import NonFiniteObjective
from ipatch.optimize import golden_section, nelder_mead


def test_nelder_mead_quadratic():
    x, fx, evals = nelder_mead(lambda v: float((v[0] - 1) ** 2 + (v[1] + 2) ** 2), [0.0, 0.0])
    assert np.allclose(x, [1.0, -2.0], atol=1e-4)
    assert fx < 1e-8
    assert evals <= 2000


def test_nelder_mead_rosenbrock():
    def rosen(v):
        return float(100.0 * (v[1] - v[0] ** 2) ** 2 + (1 - v[0]) ** 2)

    x, fx, _ = nelder_mead(rosen, [-1.2, 1.0], max_eval=2000)
    assert np.allclose(x, [1.0, 1.0], atol=1e-3)
    assert fx < 1e-6


def test_nelder_mead_never_worse_than_start():
    def nasty(v):
        return float(np.sin(7 * v[0]) + 0.1 * v[0] ** 2)

    for budget in (1, 2, 3, 10, 50):
        x, fx, evals = nelder_mead(nasty, [0.3], max_eval=budget)
        assert evals <= budget
        assert fx <= nasty(np.array([0.3])) + 1e-15


def test_nelder_mead_handles_inf_rejections():
    def walled(v):
        if v[0] < 0.2:
            return np.inf
        return float((v[0] - 0.5) ** 2)

    x, fx, _ = nelder_mead(walled, [1.0])
    assert abs(x[0] - 0.5) < 1e-4


def test_nelder_mead_nan_raises():
    with pytest.raises(NonFiniteObjective):
        nelder_mead(lambda v: float("nan"), [1.0])


def test_nelder_mead_zero_coordinate_step():
    # a zero start coordinate still gets a nonzero initial perturbation
    x, fx, _ = nelder_mead(lambda v: float((v[0] - 0.001) ** 2), [0.0])
    assert abs(x[0] - 0.001) < 1e-6


def test_golden_section_quadratic():
    x, fx, evals = golden_section(lambda t: (t - 0.3) ** 2, 0.0, 1.0, tol=1e-9)
    assert abs(x - 0.3) < 1e-8
    assert evals < 60


def test_golden_section_flat_keeps_left():
    x, _, _ = golden_section(lambda t: 1.0, 0.01, 0.99, tol=1e-9)
    assert abs(x - 0.01) < 1e-6


def test_golden_section_monotone_increasing_goes_left():
    x, _, _ = golden_section(lambda t: t, 0.25, 0.75, tol=1e-9)
    assert abs(x - 0.25) < 1e-6
