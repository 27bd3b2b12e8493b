"""Surgery on densities that keeps entropy and cost under control.

``truncate_bound`` caps a density at ``M`` and renormalizes; ``restrict_domain``
drops the region where the cost is very negative. Composed, they turn any grid
density meeting a cost budget into a bounded one whose cost and entropy move by
at most a prescribed ``delta``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .density_core import GridDensity, cell_costs, cost_moments, shannon_entropy
from .errors import RenyiLabError, ValidationError


@dataclass(frozen=True)
class TruncationReport:
    M: float
    beta: float
    cost_before: float | None
    cost_after: float | None
    h_before: float
    h_after: float

    @property
    def eps(self) -> float:
        """Smallest ``eps`` with ``beta >= 1 - eps``."""
        return 1.0 - self.beta

    def to_dict(self):
        return asdict(self)


def cost_after_bound(gamma, eps) -> float:
    """Worst-case cost of the capped density when the original meets ``gamma``."""
    k = eps / (1.0 - eps)
    return gamma + k * abs(gamma) + k


def entropy_after_bound(h, eps) -> float:
    """Worst-case entropy of the capped density for finite ``h``."""
    return math.log1p(-eps) + h - eps / (1.0 - eps) * abs(h)


def truncate_bound(f: GridDensity, M, cost=None):
    """Cap ``f`` at ``M`` and renormalize: ``(f min M) / beta`` with ``beta = int (f min M)``."""
    M = float(M)
    if not M >= 1:
        raise ValidationError(f"M must be at least 1, got {M}")
    capped = np.minimum(f.weights, M)
    beta = math.fsum(capped) * f.cell_width
    if beta <= 0:
        raise RenyiLabError("capped density has zero mass")
    out = GridDensity(f.lo, f.hi, capped / beta)
    cb = ca = None
    if cost is not None:
        cb = cost_moments(f, cost)[0]
        ca = cost_moments(out, cost)[0]
    report = TruncationReport(M, beta, cb, ca, float(shannon_entropy(f)), float(shannon_entropy(out)))
    return out, report


def truncation_conditions(f: GridDensity, cost, M, eps):
    """Whether cap ``M`` keeps more than ``1 - eps`` of the mass and cuts less than ``eps`` of ``int f|r|``."""
    capped = np.minimum(f.weights, M)
    kept = math.fsum(capped) * f.cell_width
    r = np.abs(cell_costs(f, cost)) if cost is not None else np.zeros(f.cells)
    cut = math.fsum((f.weights - capped) * r) * f.cell_width
    return kept > 1.0 - eps, cut < eps


def pick_M(f: GridDensity, cost, eps) -> float:
    """Smallest power of two ``M >= 1`` meeting both :func:`truncation_conditions`."""
    eps = float(eps)
    if not 0 < eps < 1:
        raise ValidationError("eps must lie in (0, 1)")
    M = 1.0
    while not all(truncation_conditions(f, cost, M, eps)):
        M *= 2.0
    return M


@dataclass(frozen=True)
class RestrictionReport:
    k: float
    beta: float
    h: float
    cost: float
    abs_cost: float

    def to_dict(self):
        return asdict(self)


def restrict_domain(f: GridDensity, cost, k):
    """Keep only cells where the negative part of the cost is at most ``k``.

    Returns ``f * 1{D_k} / beta_k`` and a :class:`RestrictionReport`.
    """
    r = cell_costs(f, cost)
    inside = np.maximum(-r, 0.0) <= k
    kept = np.where(inside, f.weights, 0.0)
    beta = math.fsum(kept) * f.cell_width
    if beta <= 0:
        raise ValidationError(f"the set where the negative cost is at most {k} carries no mass")
    out = GridDensity(f.lo, f.hi, kept / beta)
    c, ac = cost_moments(out, cost)
    return out, RestrictionReport(float(k), beta, float(shannon_entropy(out)), c, ac)


@dataclass(frozen=True)
class BoundedApproximation:
    density: GridDensity
    k: float
    eps: float
    M: float
    cost: float
    h: float
    h_original: float
    gamma: float
    delta: float

    @property
    def ok(self) -> bool:
        return self.cost <= self.gamma + self.delta and self.h >= self.h_original - self.delta

    def to_dict(self):
        d = {k: v for k, v in asdict(self).items() if k != "density"}
        d["ok"] = self.ok
        d["max_density"] = self.density.max_density
        return d


def bounded_approximation(f: GridDensity, cost, gamma, delta, max_halvings=60):
    """Bounded density with cost at most ``gamma + delta`` and entropy at least ``h(f) - delta``.

    Half of ``delta`` is spent on restricting the domain (smallest dyadic ``k``
    that keeps entropy within ``delta/2`` and cost within ``gamma + delta/2``),
    the other half on capping, with ``eps = 2^-j`` small enough that the
    worst-case cost and entropy penalties of capping are each at most ``delta/2``.
    """
    gamma, delta = float(gamma), float(delta)
    if not delta > 0:
        raise ValidationError("delta must be positive")
    c0 = cost_moments(f, cost)[0]
    if c0 > gamma:
        raise ValidationError(f"density cost {c0} exceeds the budget {gamma}")
    h0 = float(shannon_entropy(f))
    half = delta / 2

    rneg_max = float(np.max(np.maximum(-cell_costs(f, cost), 0.0)[f.weights > 0]))
    k = 0.0
    while True:
        try:
            g, rep = restrict_domain(f, cost, k)
        except ValidationError:
            # D_k carries no mass yet; grow k
            g = rep = None
        if rep is not None and (k >= rneg_max or (rep.h >= h0 - half and rep.cost <= gamma + half)):
            break
        k = 1.0 if k == 0 else 2 * k
    gamma1, h1 = rep.cost, rep.h

    eps = 0.5
    for _ in range(max_halvings):
        k_eps = eps / (1 - eps)
        if k_eps * (abs(gamma1) + 1) <= half and -math.log1p(-eps) + k_eps * abs(h1) <= half:
            break
        eps /= 2
    M = pick_M(g, cost, eps)
    out, trep = truncate_bound(g, M, cost)
    return BoundedApproximation(out, k, eps, M, trep.cost_after, trep.h_after, h0, gamma, delta)
