import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renyi_lab.density_core import (
    EntropyValue,
    Gaussian,
    GridDensity,
    Uniform,
    bounded_density_renyi_floor,
    cost_expectation,
    kl_divergence,
    linear_cost,
    log_support_bound,
    quadratic_cost,
    quantize,
    renyi_entropy,
    shannon_entropy,
    tabulated_cost,
)
from renyi_lab.errors import TailMassError, ValidationError

GAUSS_RENYI2 = 1.2655121234846454  # log(2 pi)/2 + log(2)/2
GAUSS_SHANNON = 1.4189385332046727  # log(2 pi e)/2


@pytest.fixture(scope="module")
def gauss_grid():
    return quantize(Gaussian(0, 1), -8, 8, 2**14)


def test_uniform_entropies():
    u01 = GridDensity.uniform(0, 1, 8)
    u02 = GridDensity.uniform(0, 2, 8)
    assert renyi_entropy(u01, 2) == pytest.approx(0.0, abs=1e-15)
    assert shannon_entropy(u01) == pytest.approx(0.0, abs=1e-15)
    assert renyi_entropy(u02, 2) == pytest.approx(math.log(2), abs=1e-15)
    assert shannon_entropy(u02) == pytest.approx(math.log(2), abs=1e-15)


def test_gaussian_quadrature_matches_closed_form(gauss_grid):
    assert renyi_entropy(gauss_grid, 2) == pytest.approx(GAUSS_RENYI2, abs=1e-6)
    assert shannon_entropy(gauss_grid) == pytest.approx(GAUSS_SHANNON, abs=1e-6)
    assert Gaussian(0, 1).renyi_entropy(2) == pytest.approx(GAUSS_RENYI2, abs=1e-15)
    assert cost_expectation(gauss_grid, quadratic_cost()) == pytest.approx(1.0, abs=1e-6)


def test_entropy_value_carries_order():
    v = renyi_entropy(GridDensity.uniform(0, 2, 4), 3)
    assert isinstance(v, EntropyValue)
    assert v.to_dict() == {"alpha": 3.0, "nats": pytest.approx(math.log(2))}


def test_cost_expectation_examples():
    assert cost_expectation(GridDensity.uniform(0, 1, 64), linear_cost()) == pytest.approx(0.5, abs=1e-12)
    # midpoint rule on x^2 is off by cw^2/12 per cell
    f = GridDensity.uniform(-1, 1, 2**12)
    assert cost_expectation(f, quadratic_cost()) == pytest.approx(1 / 3, abs=1e-6)


def test_kl_examples():
    fstar = GridDensity(0, 1, [1.5, 0.5])
    g = GridDensity.uniform(0, 1, 2)
    assert kl_divergence(g, fstar) == pytest.approx(0.143841036225890, abs=1e-12)
    assert kl_divergence(fstar, fstar) == 0.0
    assert kl_divergence(g, GridDensity(0, 1, [2.0, 0.0])) == math.inf


def test_quantize_uniform_and_tail_error():
    assert np.all(quantize(Uniform(0, 1), 0, 1, 16).weights == 1.0)
    with pytest.raises(TailMassError) as err:
        quantize(Gaussian(0, 1), -1, 1, 64)
    assert err.value.lost_mass == pytest.approx(0.31731050786291415, abs=1e-9)


def test_grid_validation():
    with pytest.raises(ValidationError):
        GridDensity(0, 1, [1.0, 2.0])
    with pytest.raises(ValidationError):
        GridDensity(0, 1, [-1.0, 3.0])
    with pytest.raises(ValidationError):
        renyi_entropy(GridDensity.uniform(0, 1, 2), 1.0)


def test_json_round_trip():
    f = GridDensity(0, 1, [1.5, 0.5])
    g = GridDensity.from_dict(f.to_dict())
    assert f.same_grid(g) and np.array_equal(f.weights, g.weights)


def test_tabulated_cost_interpolates():
    c = tabulated_cost([0, 1, 2], [0, 1, 4])
    assert np.allclose(c([0.5, 1.5, 3.0]), [0.5, 2.5, 4.0])


def test_bounded_density_floor_and_support_bound():
    f = GridDensity(0, 1, [1.5, 0.5])
    assert renyi_entropy(f, 2) >= bounded_density_renyi_floor(f.max_density, 2)
    assert renyi_entropy(f, 0.5) <= log_support_bound(0, 1) + 1e-12


def grids(max_cells=32):
    return st.integers(1, max_cells).flatmap(
        lambda k: st.lists(st.floats(0.0, 10.0), min_size=k, max_size=k)
        .filter(lambda w: sum(w) > 1e-6)
        .map(lambda w: GridDensity.from_unnormalized(0.0, 1.0, w))
    )


@settings(max_examples=200, deadline=None)
@given(grids(), st.floats(0.05, 0.95), st.floats(1.05, 8.0))
def test_renyi_brackets_shannon(f, a_small, a_big):
    h = shannon_entropy(f)
    assert renyi_entropy(f, a_big) <= h + 1e-9
    assert renyi_entropy(f, a_small) >= h - 1e-9


@settings(max_examples=100, deadline=None)
@given(grids(), st.floats(0.1, 6.0), st.floats(0.1, 6.0))
def test_renyi_nonincreasing_in_order(f, a, b):
    a, b = sorted((a, b))
    if abs(a - 1) < 1e-3 or abs(b - 1) < 1e-3:
        return
    assert renyi_entropy(f, b) <= renyi_entropy(f, a) + 1e-9


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.2, 5.0), min_size=2, max_size=16))
def test_renyi_continuous_at_one_on_smooth_grids(w):
    f = GridDensity.from_unnormalized(0.0, 1.0, w)
    h = shannon_entropy(f)
    assert abs(renyi_entropy(f, 1 + 1e-3) - h) <= 1e-2
    assert abs(renyi_entropy(f, 1 - 1e-3) - h) <= 1e-2


@settings(max_examples=100, deadline=None)
@given(grids(), grids())
def test_kl_nonnegative(g, f):
    if g.cells == f.cells:
        assert kl_divergence(g, f) >= 0.0
