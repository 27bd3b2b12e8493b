import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import toeplitz

from renyi_lab.burg import (
    ARModel,
    AutocovSpec,
    ar_jacobian,
    fit_burg,
    gauss_markov_shannon_rate,
    gaussian_window_entropy,
    jacobi_eigh,
    levinson_durbin,
    renyi_rate_sandwich,
    simulate_ar,
    spectral_init,
    verify_burg_constraints,
)
from renyi_lab.density_core import Gaussian
from renyi_lab.errors import NotPositiveDefiniteError, ValidationError
from renyi_lab.suite import random_autocov

REF = [1.0, 0.5, 0.25]
# eigenvalues of Toeplitz(1, 0.5) are 1.5 and 0.5, so q = (3/4, 1/4)
REF_GAP_ALPHA2 = -2 * math.log(0.75)
GAUSS_RATE_UNIT = 1.4189385332046727


def test_p0_is_white_noise():
    m = levinson_durbin(AutocovSpec([2.0]))
    assert m.p == 0 and m.sigma2 == 2.0
    ens = simulate_ar(fit_burg([2.0]), "gauss", 10, 200, seed=1)
    assert ens.x.shape == (200, 10)
    rng_check = simulate_ar(fit_burg([2.0]), lambda size, N, rng: np.ones((size, N)), 4, 3)
    assert np.all(rng_check.x == 1.0)


def test_p1_and_reference_model():
    m = levinson_durbin(AutocovSpec([1.0, 0.5]))
    assert m.a == pytest.approx([0.5], abs=1e-15)
    assert m.sigma2 == pytest.approx(0.75, abs=1e-15)
    ref = fit_burg(REF)
    # a Markov autocovariance: the second coefficient vanishes
    assert ref.a == pytest.approx([0.5, 0.0], abs=1e-15)
    assert ref.sigma2 == pytest.approx(0.75, abs=1e-15)
    assert sorted(ref.q) == pytest.approx([0.25, 0.75], abs=1e-14)
    assert ref.reconstruction_error() <= 1e-12


def test_p2_non_markov():
    m = levinson_durbin(AutocovSpec([1.0, 0.6, 0.1]))
    expected = np.linalg.solve(toeplitz([1.0, 0.6]), [0.6, 0.1])
    assert m.a == pytest.approx(expected, abs=1e-14)
    assert m.sigma2 == pytest.approx(1.0 - expected @ [0.6, 0.1], abs=1e-14)


def test_levinson_matches_dense_solve_up_to_p8():
    rng = np.random.default_rng(0)
    for p in range(1, 9):
        for _ in range(10):
            a = random_autocov(rng, p)
            m = levinson_durbin(AutocovSpec(a))
            assert np.max(np.abs(m.a - np.linalg.solve(toeplitz(a[:p]), a[1:]))) <= 1e-12
            assert m.autocovariance(p) == pytest.approx(a, abs=1e-12)


def test_non_positive_definite_rejected():
    with pytest.raises(NotPositiveDefiniteError):
        AutocovSpec([1.0, 1.0])
    with pytest.raises(NotPositiveDefiniteError):
        AutocovSpec([1.0, 0.9, -0.9])
    with pytest.raises(ValidationError):
        AutocovSpec([])


def test_jacobi_matches_numpy():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(6, 6))
    A = A + A.T
    lam, V = jacobi_eigh(A)
    assert np.sort(lam) == pytest.approx(np.linalg.eigvalsh(A), abs=1e-10)
    assert np.max(np.abs(V @ np.diag(lam) @ V.T - A)) <= 1e-10
    lam, V = jacobi_eigh(np.eye(3))
    assert np.array_equal(lam, np.ones(3)) and np.array_equal(V, np.eye(3))


def test_identity_kp_gives_uniform_atoms():
    m = fit_burg([1.0, 0.0, 0.0])
    assert m.q == pytest.approx([1 / 2, 1 / 2], abs=1e-15)
    assert m.reconstruction_error() <= 1e-15


def test_simulation_is_deterministic():
    m = fit_burg(REF)
    a = simulate_ar(m, "gauss", 20, 5000, seed=7)
    b = simulate_ar(m, "gauss", 20, 5000, seed=7)
    assert np.array_equal(a.x, b.x)
    assert not np.array_equal(a.x, simulate_ar(m, "gauss", 20, 5000, seed=8).x)


def test_ensemble_matches_autocovariances():
    m = fit_burg(REF)
    check = verify_burg_constraints(simulate_ar(m, "gauss", 50, 100_000, seed=0), REF)
    assert check.ok and check.worst_sigmas <= 4


def test_correlated_innovations_fail():
    m = fit_burg(REF)
    check = verify_burg_constraints(simulate_ar(m, "correlated", 50, 100_000, seed=0), REF)
    assert not check.ok and check.worst_sigmas > 20


def test_non_gaussian_innovations_pass():
    m = fit_burg(REF)
    s = math.sqrt(3 * m.sigma2)
    ens = simulate_ar(m, lambda size, N, rng: rng.uniform(-s, s, (size, N)), 30, 100_000, seed=2)
    assert verify_burg_constraints(ens, REF).ok


def test_gauss_markov_rate():
    assert gauss_markov_shannon_rate(1.0) == pytest.approx(GAUSS_RATE_UNIT, abs=1e-15)
    assert gauss_markov_shannon_rate(0.75) == pytest.approx(GAUSS_RATE_UNIT + 0.5 * math.log(0.75), abs=1e-15)
    with pytest.raises(ValidationError):
        gauss_markov_shannon_rate(0.0)


def test_sandwich_examples():
    rep = renyi_rate_sandwich(10.0, [0.75, 0.25], 2.0, 20)
    assert rep.lower == 10.0
    assert rep.gap == REF_GAP_ALPHA2
    assert rep.upper == 10.0 + REF_GAP_ALPHA2
    one = renyi_rate_sandwich(3.0, [1.0], 2.0, 5)
    assert one.lower == one.upper == 3.0
    low = renyi_rate_sandwich(3.0, [0.5, 0.25, 0.25], 0.5, 5)
    assert low.gap == pytest.approx(2 * math.log(3), abs=1e-15)
    with pytest.raises(ValidationError):
        renyi_rate_sandwich(0.0, [0.5, 0.5], 1.0, 5)


def test_rate_gap_scales_inversely():
    q = fit_burg(REF).q
    formula = float(np.min(-2.0 * np.log(q)))
    for n in (5, 10, 20, 40):
        assert abs(renyi_rate_sandwich(0.0, q, 2.0, n).rate_gap * n - formula) <= 1e-12


def test_unit_jacobian():
    m = fit_burg([1.0, 0.6, 0.1])
    J = ar_jacobian(m, 12)
    assert np.linalg.det(J) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(np.tril(J), J)
    for alpha in (0.5, 1.0, 2.0):
        g = Gaussian(0.0, math.sqrt(m.sigma2))
        h = g.shannon_entropy() if alpha == 1 else g.renyi_entropy(alpha)
        assert gaussian_window_entropy(m, 12, alpha) == pytest.approx(12 * h, abs=1e-9)


def test_model_round_trip():
    m = fit_burg([1.0, 0.6, 0.1])
    back = ARModel.from_dict(m.to_dict())
    assert np.array_equal(back.a, m.a) and back.sigma2 == m.sigma2
    with pytest.raises(ValidationError):
        ARModel.from_dict({"a": [0.5]})


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**31))
def test_spectral_atoms_reconstruct_kp(p, seed):
    m = spectral_init(levinson_durbin(AutocovSpec(random_autocov(np.random.default_rng(seed), p))))
    assert m.reconstruction_error() <= 1e-10
    assert m.q.sum() == pytest.approx(1.0, abs=1e-12) and np.all(m.q > 0)
    assert np.all(np.abs(m.reflection) < 1)
