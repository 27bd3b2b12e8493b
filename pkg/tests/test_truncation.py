import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renyi_lab.density_core import (
    Gaussian,
    GridDensity,
    cost_expectation,
    linear_cost,
    quadratic_cost,
    quantize,
    shannon_entropy,
)
from renyi_lab.errors import ValidationError
from renyi_lab.truncation import (
    bounded_approximation,
    cost_after_bound,
    entropy_after_bound,
    pick_M,
    restrict_domain,
    truncate_bound,
    truncation_conditions,
)


def triangle(cells=1024):
    f = GridDensity.uniform(0, 1, cells)
    return f.with_weights(2 * f.midpoints)


def test_bounded_density_is_unchanged():
    f = GridDensity.uniform(0, 1, 4)
    g, rep = truncate_bound(f, 2)
    assert rep.beta == 1.0 and np.array_equal(g.weights, f.weights)
    g, rep = truncate_bound(GridDensity(0, 1, [1.5, 0.5]), 2)
    assert rep.beta == 1.0


def test_two_cell_cap():
    g, rep = truncate_bound(GridDensity(0, 1, [1.5, 0.5]), 1)
    assert rep.beta == 0.75
    assert g.weights == pytest.approx([4 / 3, 2 / 3], abs=1e-15)


def test_triangle_cap():
    f = triangle()
    g, rep = truncate_bound(f, 1.5)
    assert rep.beta == pytest.approx(0.9375, abs=1e-12)
    assert rep.h_after >= rep.h_before - 0.1
    assert g.max_density <= 1.5 / rep.beta + 1e-12


def test_cap_below_one_rejected():
    with pytest.raises(ValidationError):
        truncate_bound(GridDensity.uniform(0, 1, 2), 0.5)


def test_pick_m_examples():
    assert pick_M(GridDensity.uniform(0, 1, 8), linear_cost(), 0.3) == 1.0
    spiky = GridDensity.from_unnormalized(0, 1, [10.0] + [1.0] * 9)
    assert spiky.max_density == pytest.approx(10 / 1.9)
    tall = GridDensity(0, 1, [10.0] + [0.0] * 9)
    assert pick_M(tall, linear_cost(), 0.5) <= 16
    g = quantize(Gaussian(0, 1), -8, 8, 1024)
    M = pick_M(g, quadratic_cost(), 0.01)
    assert all(truncation_conditions(g, quadratic_cost(), M, 0.01))
    assert not all(truncation_conditions(g, quadratic_cost(), M / 2, 0.01)) or M == 1


def test_worst_case_bounds_hold_for_capping():
    f = triangle()
    cost = linear_cost(support=(0, 1))
    eps = 0.1
    M = pick_M(f, cost, eps)
    g, rep = truncate_bound(f, M, cost)
    assert rep.cost_after <= cost_after_bound(rep.cost_before, eps)
    assert rep.h_after >= entropy_after_bound(rep.h_before, eps)


def test_restrict_domain_examples():
    f = GridDensity.uniform(-1, 1, 400)
    g, rep = restrict_domain(f, linear_cost(support=(-1, 1)), 0.5)
    assert rep.beta == pytest.approx(0.75, abs=1e-12)
    assert rep.h == pytest.approx(math.log(1.5), abs=1e-12)
    assert np.all(g.weights[g.midpoints < -0.5] == 0)
    h, rep = restrict_domain(GridDensity.uniform(0, 1, 8), quadratic_cost(), 0.0)
    assert rep.beta == 1.0


def test_restrict_domain_converges():
    f = GridDensity.from_unnormalized(-20, 1, np.exp(-np.linspace(0, 6, 210)[::-1]))
    cost = linear_cost(support=(-20, 1))
    hs = [restrict_domain(f, cost, k)[1].h for k in (1, 2, 4, 8, 16, 32)]
    assert all(b >= a - 1e-12 for a, b in zip(hs, hs[1:]))
    assert abs(hs[-1] - float(shannon_entropy(f))) < 1e-3


def grid_and_budget():
    cells = st.integers(1, 40)
    return st.tuples(
        cells.flatmap(lambda k: st.lists(st.floats(0.0, 20.0), min_size=k, max_size=k).filter(lambda w: sum(w) > 1e-3)),
        st.floats(-3.0, 1.0),
        st.floats(0.2, 5.0),
        st.floats(0.0, 1.0),
        st.floats(0.01, 0.5),
        st.sampled_from(["quadratic", "linear"]),
    )


@settings(max_examples=150, deadline=None)
@given(grid_and_budget())
def test_bounded_approximation_property(case):
    w, lo, width, slack, delta, kind = case
    f = GridDensity.from_unnormalized(lo, lo + width, w)
    cost = quadratic_cost() if kind == "quadratic" else linear_cost(support=(-math.inf, math.inf))
    gamma = cost_expectation(f, cost) + slack
    out = bounded_approximation(f, cost, gamma, delta)
    assert out.ok
    assert out.cost <= gamma + delta
    assert out.h >= float(shannon_entropy(f)) - delta
    assert math.isfinite(out.density.max_density)
