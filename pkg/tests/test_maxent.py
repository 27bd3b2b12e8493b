import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renyi_lab.density_core import Gaussian, GridDensity, Uniform, linear_cost, quadratic_cost, quantize
from renyi_lab.errors import InfeasibleError, ValidationError
from renyi_lab.maxent import (
    HStarPoint,
    curve_violations,
    fine_line_gap,
    hstar_curve,
    maxent_entropy,
    optimality_probe,
    solve_maxent,
)

GAUSS_SHANNON = 1.4189385332046727
UNIFORM_SQRT3_GAP = 0.17648517371023  # log(2 pi e)/2 - log(2 sqrt 3)


def test_quadratic_budget_gives_gaussian():
    f = solve_maxent(quadratic_cost(), 1.0, window=(-10, 10))
    assert f.lambda1 == pytest.approx(-0.5, abs=1e-9)
    assert maxent_entropy(f) == pytest.approx(GAUSS_SHANNON, abs=1e-9)


def test_linear_budget_gives_exponential():
    f = solve_maxent(linear_cost(), 1.0, window=(0, 40))
    assert f.lambda1 == pytest.approx(-1.0, abs=1e-5)
    assert maxent_entropy(f) == pytest.approx(1.0, abs=1e-5)


def test_slack_budget_on_finite_support_is_uniform():
    f = solve_maxent(linear_cost(support=(0, 1)), 0.5)
    assert f.lambda1 == 0.0
    assert maxent_entropy(f) == pytest.approx(0.0, abs=1e-12)


def test_infeasible_and_narrow_window():
    with pytest.raises(InfeasibleError):
        solve_maxent(linear_cost(support=(0, 1)), 0.0)
    with pytest.raises(ValidationError):
        solve_maxent(quadratic_cost(), 100.0, window=(-1, 1))
    with pytest.raises(ValidationError):
        solve_maxent(quadratic_cost(), 1.0)


def test_quadratic_curve_matches_closed_form():
    pts = hstar_curve(quadratic_cost(), [0.5, 1.0, 2.0], window=(-14, 14))
    for p in pts:
        assert p.hstar == pytest.approx(0.5 * math.log(2 * math.pi * math.e * p.gamma), abs=1e-8)
    assert not curve_violations(pts)


def test_finite_support_curve_tends_to_log_measure():
    pts = hstar_curve(linear_cost(support=(0, 1)), [0.1, 0.2, 0.3, 0.4, 0.5])
    assert not curve_violations(pts)
    assert pts[-1].hstar == pytest.approx(0.0, abs=1e-12)
    assert all(p.hstar < 0 for p in pts[:-1])


def test_curve_violations_flags_bad_curves():
    dip = [HStarPoint(g, h, 0, 0) for g, h in [(0, 0.0), (1, 1.0), (2, 0.5)]]
    assert ("monotone", 1, 2) in curve_violations(dip)
    convex = [HStarPoint(g, h, 0, 0) for g, h in [(0, 0.0), (1, 0.1), (2, 1.0)]]
    assert ("concave", 0, 2) in curve_violations(convex)


def test_fine_line_gap_examples():
    cost = quadratic_cost(1.0)
    g = quantize(Gaussian(0, 1), -10, 10, 2**14)
    assert fine_line_gap(g, cost, tol=1e-5)[1] == pytest.approx(0.0, abs=1e-6)
    s = math.sqrt(3)
    u = quantize(Uniform(-s, s), -s, s, 2**12)
    hstar, gap = fine_line_gap(u, cost, tol=1e-6)
    assert hstar == pytest.approx(GAUSS_SHANNON, abs=1e-8)
    assert gap == pytest.approx(UNIFORM_SQRT3_GAP, abs=1e-6)


def test_optimality_probe_finds_no_better_density():
    f = solve_maxent(quadratic_cost(), 1.0, window=(-10, 10), cells=512)
    assert optimality_probe(f, trials=200, seed=1) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.45), st.floats(0.05, 0.45))
def test_hstar_monotone_in_budget(a, b):
    cost = linear_cost(support=(0, 1))
    lo, hi = sorted((a, b))
    h_lo = maxent_entropy(solve_maxent(cost, lo, cells=1024))
    h_hi = maxent_entropy(solve_maxent(cost, hi, cells=1024))
    assert h_lo <= h_hi + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 3.0))
def test_solution_meets_budget(gamma):
    f = solve_maxent(quadratic_cost(), gamma, window=(-20, 20), cells=4096)
    g = f.grid()
    assert float(np.dot(g.masses, g.midpoints**2)) == pytest.approx(gamma, abs=1e-8)
