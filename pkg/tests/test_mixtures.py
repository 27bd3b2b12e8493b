import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from renyi_lab.density_core import GridDensity, linear_cost, quadratic_cost, renyi_entropy
from renyi_lab.errors import ConstructionError, ValidationError
from renyi_lab.mixtures import (
    MixtureSpec,
    build_alpha_small_block,
    cell_average_cost,
    disjoint_two_set_entropy,
    disjoint_two_set_log_entropy,
    mixture_entropy,
    mixture_lower_bound,
    mixture_upper_bound,
    renyi_mixture_bounds,
)

EILAT_EXAMPLE = 7.737439413725208  # 2 log(0.9^0.5 + 0.1^0.5 e^5)

F0 = GridDensity(0, 1, [1.5, 0.5])
F1 = GridDensity(0, 1, [0.5, 1.5])
UNIT_COST = linear_cost(support=(0, 1))


def test_equal_components_and_singleton():
    m = MixtureSpec([F0, F0], [0.3, 0.7])
    h = float(renyi_entropy(F0, 2))
    assert mixture_entropy(m, 2) == pytest.approx(h, abs=1e-12)
    assert mixture_lower_bound(m, 2) == pytest.approx(h, abs=1e-12)
    single = MixtureSpec([F1], [1.0])
    assert mixture_entropy(single, 3) == pytest.approx(float(renyi_entropy(F1, 3)), abs=1e-12)
    assert mixture_upper_bound(single, 2) == pytest.approx(float(renyi_entropy(F1, 2)), abs=1e-12)


def test_two_disjoint_uniforms():
    a = GridDensity(0, 2, [1.0, 0.0])
    b = GridDensity(0, 2, [0.0, 1.0])
    assert mixture_entropy(MixtureSpec([a, b], [0.5, 0.5]), 2) == pytest.approx(math.log(2), abs=1e-12)


def test_upper_bound_examples():
    m = MixtureSpec([F0, F0], [0.5, 0.5])
    h = float(renyi_entropy(F0, 2))
    assert mixture_upper_bound(m, 2) == pytest.approx(math.log(4) + h, abs=1e-12)
    comps = [F0, F1, GridDensity.uniform(0, 1, 2)]
    m3 = MixtureSpec(comps, [0.2, 0.3, 0.5])
    hs = [float(renyi_entropy(c, 0.5)) for c in comps]
    assert mixture_upper_bound(m3, 0.5) == pytest.approx(2 * math.log(3) + max(hs), abs=1e-12)
    assert mixture_entropy(m3, 0.5) <= mixture_upper_bound(m3, 0.5)


def test_zero_weight_components_are_dropped():
    lo, hi = renyi_mixture_bounds([0.0, -50.0], [1.0, 0.0], 2.0)
    assert lo == hi == 0.0


def test_mixture_validation():
    with pytest.raises(ValidationError):
        MixtureSpec([F0, F1], [0.5, 0.6])
    with pytest.raises(ValidationError):
        MixtureSpec([F0, GridDensity.uniform(0, 2, 2)], [0.5, 0.5])
    with pytest.raises(ValidationError):
        renyi_mixture_bounds([0.0], [1.0], 1.0)


def test_disjoint_two_set_examples():
    assert disjoint_two_set_entropy(3.0, 5.0, 0.0, 2) == pytest.approx(math.log(3), abs=1e-15)
    assert disjoint_two_set_entropy(1, 1, 0.5, 2) == pytest.approx(math.log(2), abs=1e-15)
    assert disjoint_two_set_entropy(1, math.exp(10), 0.1, 0.5) == pytest.approx(EILAT_EXAMPLE, abs=1e-12)
    # log-space form survives volumes far beyond float range
    assert disjoint_two_set_log_entropy(0.0, 5000.0, 0.1, 0.5) == pytest.approx(2 * (math.log(0.1) / 2 + 2500), rel=1e-12)


def test_two_set_block_is_disjoint_and_on_budget():
    b = build_alpha_small_block(F0, F1, (0.375, 0.625), UNIT_COST, 0.05, 0.2, 8, gamma=0.5)
    assert b.disjoint and b.band_gap == pytest.approx(0.15)
    assert b.coordinate_cost <= 0.5
    for a in (0.3, 0.5, 0.9):
        assert b.renyi_entropy(a) == pytest.approx(b.enumerated_entropy(a), abs=1e-9)
    s0 = build_alpha_small_block(F0, F1, (0.375, 0.625), UNIT_COST, 0.05, 0.0, 8, gamma=0.5)
    assert s0.renyi_entropy(0.5) == pytest.approx(s0.block0.log_volume, abs=1e-12)


def test_two_set_block_rejects_bad_budgets():
    with pytest.raises(ConstructionError):
        build_alpha_small_block(F0, F1, (0.375, 0.625), UNIT_COST, 0.1, 0.2, 8, gamma=0.5)
    with pytest.raises(ConstructionError):
        build_alpha_small_block(F0, F1, (0.375, 0.625), UNIT_COST, 0.15, 0.2, 8, gamma=0.5)


def test_two_set_sampling_is_unbiased():
    b = build_alpha_small_block(F0, F1, (0.375, 0.625), UNIT_COST, 0.05, 0.2, 8, gamma=0.5)
    rng = np.random.default_rng(5)
    x, w = b.sample_weighted(50_000, rng)
    est = np.mean(w * x.mean(axis=1))
    plain = b.sample(50_000, rng).mean()
    se = np.std(w * x.mean(axis=1)) / math.sqrt(x.shape[0])
    assert abs(est - plain) <= 5 * se


def test_cell_average_cost_is_exact_for_quadratics():
    f = GridDensity.uniform(-1, 1, 4)
    exact = [(b**3 - a**3) / (3 * (b - a)) for a, b in zip(f.edges[:-1], f.edges[1:])]
    assert cell_average_cost(f, quadratic_cost()) == pytest.approx(exact, abs=1e-14)


def components(k, cells):
    w = st.lists(st.floats(0.0, 10.0), min_size=cells, max_size=cells).filter(lambda v: sum(v) > 1e-3)
    return st.lists(w, min_size=k, max_size=k)


@settings(max_examples=200, deadline=None)
@given(
    st.integers(1, 5).flatmap(lambda k: st.tuples(components(k, 6), st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k))),
    st.sampled_from([0.5, 2.0, 4.0]),
)
def test_mixture_sandwich(case, alpha):
    ws, q = case
    assume(sum(q) > 1e-3)
    q = np.array(q) / sum(q)
    q[-1] = 1.0 - math.fsum(q[:-1])
    assume(q[-1] >= 0)
    comps = [GridDensity.from_unnormalized(0, 1, w) for w in ws]
    m = MixtureSpec(comps, q)
    exact = mixture_entropy(m, alpha)
    lo, hi = renyi_mixture_bounds([float(renyi_entropy(c, alpha)) for c in comps], q, alpha)
    assert lo - 1e-9 <= exact <= hi + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 30), st.floats(0.0, 1.0), st.floats(0.05, 0.95))
def test_two_set_entropy_within_mixture_bounds(l0, l1, delta, alpha):
    h = disjoint_two_set_log_entropy(l0, l1, delta, alpha)
    hs = [l0, l1] if 0 < delta < 1 else ([l0] if delta == 0 else [l1])
    qs = [1 - delta, delta] if 0 < delta < 1 else [1.0]
    lo, hi = renyi_mixture_bounds(hs, qs, alpha)
    assert lo - 1e-9 <= h <= hi + 1e-9
