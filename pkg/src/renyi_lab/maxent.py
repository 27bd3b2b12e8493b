"""Maximum Shannon entropy under an expected-cost budget.

The maximizer of ``h(f)`` subject to ``E_f[r] <= gamma`` on an interval is the
exponential-family density ``exp(lambda0 + lambda1 * r)``. ``lambda1`` is found
by bisection on the increasing map ``lambda1 -> E[r]`` and ``lambda0`` by
normalization; everything is evaluated on a midpoint grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .density_core import (
    CostSpec,
    ExpFamilyDensity,
    GridDensity,
    cell_costs,
    cell_costs_at,
    cost_expectation,
    shannon_entropy,
)
from .errors import BracketError, InfeasibleError, ValidationError

DEFAULT_CELLS = 2**14
MAX_BRACKET = 2.0**20


def _tilted_mean(lam, r):
    """``E[r]`` under weights proportional to ``exp(lam * r)``, computed stably."""
    z = lam * r
    w = np.exp(z - z.max())
    return float(np.dot(w, r) / w.sum())


def _dual_lambda1(r, gamma, bracket, iters):
    lo, hi = -float(bracket), float(bracket)
    while _tilted_mean(lo, r) > gamma or _tilted_mean(hi, r) < gamma:
        if hi >= MAX_BRACKET:
            raise BracketError(
                f"no lambda1 in [-{MAX_BRACKET:g}, {MAX_BRACKET:g}] reaches E[r] = {gamma}"
            )
        lo, hi = 2 * lo, 2 * hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _tilted_mean(mid, r) < gamma:
            lo = mid
        else:
            hi = mid
    # keep the endpoint whose mean is closer to the target
    return lo if abs(_tilted_mean(lo, r) - gamma) <= abs(_tilted_mean(hi, r) - gamma) else hi


def solve_maxent(cost: CostSpec, gamma=None, window=None, cells=DEFAULT_CELLS, bracket=64.0, iters=200):
    """Return the entropy-maximizing :class:`ExpFamilyDensity` for budget ``gamma``.

    ``window`` truncates an unbounded support for computation. When the support
    is a finite interval and the budget is slack for the uniform density, the
    uniform density is returned with ``lambda1 = 0``.
    """
    gamma = cost.gamma if gamma is None else float(gamma)
    if gamma is None:
        raise ValidationError("no budget gamma given")
    lo, hi = cost.window(window)
    cells = int(cells)
    cw = (hi - lo) / cells
    mids = lo + (np.arange(cells) + 0.5) * cw
    r = cell_costs_at(mids, cost)

    if gamma <= r.min():
        raise InfeasibleError(f"budget {gamma} is not above the minimum cost {r.min():.6g}")
    if gamma >= r.mean():
        if not cost.finite_support:
            raise ValidationError(
                f"budget {gamma} is slack for the uniform density on the window [{lo}, {hi}]; "
                "the window is too narrow for this unbounded support"
            )
        lam1 = 0.0
    else:
        lam1 = _dual_lambda1(r, gamma, bracket, iters)
    lam0 = -float(logsumexp(lam1 * r)) - math.log(cw)
    return ExpFamilyDensity(lam0, lam1, cost.with_gamma(gamma), lo, hi, cells)


def maxent_entropy(fstar: ExpFamilyDensity) -> float:
    """``h(f*) = -(lambda0 + lambda1 E[r])``, exact for the grid density."""
    g = fstar.grid()
    return -(fstar.lambda0 + fstar.lambda1 * cost_expectation(g, fstar.cost))


@dataclass(frozen=True)
class HStarPoint:
    gamma: float
    hstar: float
    lambda0: float
    lambda1: float

    def to_dict(self):
        return {"gamma": self.gamma, "hstar": self.hstar, "lambda0": self.lambda0, "lambda1": self.lambda1}


def hstar_curve(cost: CostSpec, gammas: Sequence[float], window=None, cells=DEFAULT_CELLS, margin=0.0):
    """Solve for ``h*`` at each budget in ``gammas`` (sorted ascending)."""
    gammas = [float(g) for g in gammas]
    if any(b < a for a, b in zip(gammas, gammas[1:])):
        raise ValidationError("gammas must be sorted ascending")
    if cost.gamma0 is not None and gammas and gammas[0] < cost.gamma0 + margin:
        raise ValidationError(f"gamma {gammas[0]} is below gamma0 + margin = {cost.gamma0 + margin}")
    points = []
    for g in gammas:
        f = solve_maxent(cost, g, window=window, cells=cells)
        points.append(HStarPoint(g, maxent_entropy(f), f.lambda0, f.lambda1))
    return points


def curve_violations(points: Sequence[HStarPoint], tol=1e-6, mono_tol=1e-9):
    """List monotonicity and concavity failures along a solved curve.

    Concavity is checked on every consecutive triple against the chord, which
    reduces to the midpoint condition on evenly spaced budgets.
    """
    bad = []
    for a, b in zip(points, points[1:]):
        if b.hstar < a.hstar - mono_tol:
            bad.append(("monotone", a.gamma, b.gamma))
    for a, b, c in zip(points, points[1:], points[2:]):
        if c.gamma == a.gamma:
            continue
        t = (b.gamma - a.gamma) / (c.gamma - a.gamma)
        chord = (1 - t) * a.hstar + t * c.hstar
        if b.hstar < chord - tol:
            bad.append(("concave", a.gamma, c.gamma))
    return bad


def fine_line_gap(fz: GridDensity, cost: CostSpec, gamma=None, window=None, cells=DEFAULT_CELLS, tol=1e-6):
    """Return ``(h*, D(fz || f*))`` for a marginal ``fz`` that meets the budget with equality.

    ``h* - gap`` is then an upper bound on the Renyi rate of any process with
    marginal ``fz``. ``f*`` is solved on ``window`` and evaluated at the cells of
    ``fz``. The default window is the support, or for unbounded supports the grid
    of ``fz`` widened until ``f*`` is negligible at the window edges.
    """
    gamma = cost.gamma if gamma is None else float(gamma)
    mean = cost_expectation(fz, cost)
    if gamma is None or abs(mean - gamma) > tol:
        raise ValidationError(f"marginal cost {mean!r} does not meet the budget {gamma!r}")
    if window is None and not cost.finite_support:
        fstar = auto_window_maxent(cost, gamma, fz.lo, fz.hi, cells=cells)
    else:
        fstar = solve_maxent(cost, gamma, window=window, cells=cells)
    hstar = maxent_entropy(fstar)
    pos = fz.weights > 0
    fs = fstar.pdf(fz.midpoints[pos])
    if np.any(fs == 0):
        return hstar, math.inf
    gw = fz.weights[pos]
    gap = float(np.sum(gw * (np.log(gw) - np.log(fs)))) * fz.cell_width
    return hstar, max(gap, 0.0)


def auto_window_maxent(cost: CostSpec, gamma, lo, hi, cells=DEFAULT_CELLS, edge_tol=1e-12, max_doublings=30):
    """Solve on ``[lo, hi]`` widened about its center until the edge density is below ``edge_tol``."""
    center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    for _ in range(max_doublings):
        half *= 2
        try:
            f = solve_maxent(cost, gamma, window=(center - half, center + half), cells=cells)
        except ValidationError:
            continue
        edges = f.pdf(np.array([f.lo, f.hi]))
        if edges.max() * (f.hi - f.lo) < edge_tol:
            return f
    raise ValidationError("could not find a window holding the maximizer for this unbounded support")


def optimality_probe(fstar: ExpFamilyDensity, trials=200, scale=0.5, seed=0):
    """Largest ``h(g) - h(f*)`` over random densities ``g`` on the grid of ``f*`` with cost <= gamma.

    Each ``g`` is a random log-perturbation of ``f*``; if it overspends it is
    exponentially tilted back onto the budget.
    """
    rng = np.random.default_rng(seed)
    base = fstar.grid()
    r = cell_costs(base, fstar.cost)
    gamma = fstar.cost.gamma
    h0 = float(shannon_entropy(base))
    worst = -math.inf
    for _ in range(trials):
        logw = np.log(base.weights) + scale * rng.standard_normal(base.cells)
        if _weighted_mean(logw, r) > gamma:
            # tilt by exp(-t r) until the budget is met
            lo, hi = 0.0, 1.0
            while _weighted_mean(logw - hi * r, r) > gamma:
                hi *= 2
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if _weighted_mean(logw - mid * r, r) > gamma:
                    lo = mid
                else:
                    hi = mid
            logw = logw - hi * r
        g = base.with_weights(np.exp(logw - logw.max()))
        worst = max(worst, float(shannon_entropy(g)) - h0)
    return worst


def _weighted_mean(logw, r):
    w = np.exp(logw - logw.max())
    return float(np.dot(w, r) / w.sum())
