"""Scikit-learn style wrappers around the maximum-entropy and AR fits."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array, check_random_state
from sklearn.utils.validation import check_is_fitted

from .burg import fit_burg, gauss_markov_shannon_rate, renyi_rate_sandwich, simulate_ar
from .density_core import Gaussian, linear_cost, quadratic_cost, renyi_entropy
from .maxent import maxent_entropy, solve_maxent
from .errors import ValidationError

_COSTS = {"quadratic": quadratic_cost, "linear": linear_cost}


class MaxEntDensity(BaseEstimator):
    """Maximum-entropy density under an expected-cost budget.

    ``fit`` takes the budget from ``gamma`` or, when it is None, from the mean
    cost of the training sample.
    """

    def __init__(self, cost="quadratic", gamma=None, window=(-10.0, 10.0), cells=2**14):
        self.cost = cost
        self.gamma = gamma
        self.window = window
        self.cells = cells

    def _cost_spec(self):
        if callable(getattr(self.cost, "r", None)):
            return self.cost
        try:
            return _COSTS[self.cost]()
        except KeyError:
            raise ValidationError(f"unknown cost {self.cost!r}") from None

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=False).ravel()
        cost = self._cost_spec()
        gamma = float(np.mean(cost(X))) if self.gamma is None else float(self.gamma)
        self.density_ = solve_maxent(cost, gamma, self.window, self.cells)
        self.gamma_ = gamma
        self.lambda0_ = self.density_.lambda0
        self.lambda1_ = self.density_.lambda1
        self.entropy_ = maxent_entropy(self.density_)
        return self

    def score_samples(self, X):
        check_is_fitted(self, "density_")
        X = check_array(X, ensure_2d=False).ravel()
        with np.errstate(divide="ignore"):
            return np.log(self.density_.pdf(X))

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "density_")
        rng = np.random.default_rng(check_random_state(random_state).randint(2**32))
        return self.density_.grid().sample(n_samples, rng)

    def renyi_entropy(self, alpha):
        check_is_fitted(self, "density_")
        return float(renyi_entropy(self.density_.grid(), alpha))


def sample_autocovariance(X, order):
    """Biased autocovariance estimates ``alpha_0..alpha_order`` pooled over the rows of ``X``."""
    X = np.atleast_2d(X)
    n = X.shape[1]
    if order >= n:
        raise ValidationError("order must be below the series length")
    return np.array([np.mean(np.sum(X[:, : n - k] * X[:, k:], axis=1) / n) for k in range(order + 1)])


class BurgAR(BaseEstimator):
    """AR(``order``) model matching the first ``order + 1`` autocovariances.

    ``fit`` accepts a 1-D series or a 2-D array of independent series (one per
    row), or skips estimation when ``alphas`` is given.
    """

    def __init__(self, order=2, alphas=None):
        self.order = order
        self.alphas = alphas

    def fit(self, X=None, y=None):
        if self.alphas is not None:
            alphas = np.asarray(self.alphas, dtype=float)
        else:
            X = check_array(X, ensure_2d=False)
            alphas = sample_autocovariance(X, int(self.order))
        self.model_ = fit_burg(alphas)
        self.alphas_ = self.model_.alphas
        self.coef_ = self.model_.a
        self.sigma2_ = self.model_.sigma2
        return self

    def predict(self, X):
        """One-step predictions ``sum_k a_k x_{i-k}`` for each row's last ``order`` values."""
        check_is_fitted(self, "model_")
        X = np.atleast_2d(check_array(X, ensure_2d=False))
        p = self.model_.p
        if X.shape[1] < p:
            raise ValidationError(f"need at least {p} past values per row")
        return X[:, X.shape[1] - p :][:, ::-1] @ self.coef_ if p else np.zeros(X.shape[0])

    def simulate(self, horizon=50, reps=1000, innovations="gauss", random_state=0):
        check_is_fitted(self, "model_")
        return simulate_ar(self.model_, innovations, horizon, reps, random_state)

    def shannon_rate(self):
        check_is_fitted(self, "model_")
        return gauss_markov_shannon_rate(self.sigma2_)

    def sandwich(self, alpha, n, hZ=None):
        """Bounds for ``n`` steps; ``hZ`` defaults to the Gaussian innovations' block entropy."""
        check_is_fitted(self, "model_")
        if hZ is None:
            hZ = n * Gaussian(0.0, math.sqrt(self.sigma2_)).renyi_entropy(alpha)
        return renyi_rate_sandwich(hZ, self.model_.q, alpha, n)

