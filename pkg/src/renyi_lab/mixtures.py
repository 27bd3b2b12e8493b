"""Renyi entropy of finite mixtures, its two-sided bounds, and the two-set block.

The two-set block mixes the uniform densities on two disjoint typical sets,
one built from a low-cost density and one from a high-cost density. Its
Renyi entropy has a closed form in the two volumes, and for ``alpha < 1`` it
grows with the volume of the high-cost set even when that set carries only a
small weight ``delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .density_core import GridDensity, cell_costs, cost_expectation, renyi_entropy
from .errors import ConstructionError, ValidationError
from .typicality import TypicalBlockDensity, TypicalSpec, build_typical_block, DEFAULT_BUDGET

WEIGHT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MixtureSpec:
    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        w = np.asarray(self.weights, dtype=float)
        if len(comps) < 1 or w.shape != (len(comps),):
            raise ValidationError("need one weight per component and at least one component")
        if np.any(w < 0) or abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
            raise ValidationError("mixture weights must be nonnegative and sum to 1")
        first = comps[0]
        for c in comps[1:]:
            if not first.same_grid(c):
                raise ValidationError("mixture components must share one grid")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    def density(self) -> GridDensity:
        values = sum(q * c.weights for q, c in zip(self.weights, self.components))
        c0 = self.components[0]
        return GridDensity.from_unnormalized(c0.lo, c0.hi, values)

    def active(self):
        """Components with positive weight, as ``(weight, density)`` pairs."""
        return [(q, c) for q, c in zip(self.weights, self.components) if q > 0]

    def to_dict(self):
        return {"components": [c.to_dict() for c in self.components], "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls([GridDensity.from_dict(c) for c in data["components"]], data["weights"])
        except KeyError as exc:
            raise ValidationError(f"mixture JSON missing key {exc}") from None


def mixture_entropy(m: MixtureSpec, alpha) -> float:
    return float(renyi_entropy(m.density(), alpha))


def renyi_mixture_bounds(entropies: Sequence[float], weights: Sequence[float], alpha):
    """``(lower, upper)`` on the order-``alpha`` entropy of a mixture from its components' entropies.

    Zero-weight components are ignored: they do not change the mixture.
    """
    alpha = float(alpha)
    if alpha <= 0 or alpha == 1:
        raise ValidationError("alpha must be positive and != 1")
    pairs = [(float(q), float(h)) for q, h in zip(weights, entropies) if q > 0]
    if not pairs:
        raise ValidationError("no component has positive weight")
    hs = [h for _, h in pairs]
    lower = min(hs)
    if alpha > 1:
        upper = min(alpha / (1 - alpha) * math.log(q) + h for q, h in pairs)
    else:
        upper = math.log(len(pairs)) / (1 - alpha) + max(hs)
    return lower, upper


def mixture_lower_bound(m: MixtureSpec, alpha) -> float:
    return min(float(renyi_entropy(c, alpha)) for _, c in m.active())


def mixture_upper_bound(m: MixtureSpec, alpha) -> float:
    act = m.active()
    return renyi_mixture_bounds([float(renyi_entropy(c, alpha)) for _, c in act], [q for q, _ in act], alpha)[1]


def disjoint_two_set_log_entropy(log_v0, log_v1, delta, alpha) -> float:
    """Order-``alpha`` entropy of ``(1-delta) U(S_0) + delta U(S_1)`` for disjoint sets given log volumes."""
    alpha, delta = float(alpha), float(delta)
    if alpha <= 0 or alpha == 1:
        raise ValidationError("alpha must be positive and != 1")
    if not 0 <= delta <= 1:
        raise ValidationError("delta must lie in [0, 1]")
    terms = []
    if delta < 1:
        terms.append(alpha * math.log1p(-delta) + (1 - alpha) * log_v0)
    if delta > 0:
        terms.append(alpha * math.log(delta) + (1 - alpha) * log_v1)
    return float(logsumexp(terms)) / (1 - alpha)


def disjoint_two_set_entropy(V0, V1, delta, alpha) -> float:
    """``log((1-delta)^alpha V0^(1-alpha) + delta^alpha V1^(1-alpha)) / (1 - alpha)``."""
    if not (V0 > 0 and V1 > 0):
        raise ValidationError("volumes must be positive")
    return disjoint_two_set_log_entropy(math.log(V0), math.log(V1), delta, alpha)


def _cell_extremes(f: GridDensity, cost, samples=257):
    """Per-cell min and max of ``r``, from ``samples`` evenly spaced points per cell."""
    t = np.linspace(0.0, 1.0, samples)
    pts = f.edges[:-1, None] + t[None, :] * f.cell_width
    r = np.asarray(cost(pts), dtype=float).reshape(pts.shape)
    return r.min(axis=1), r.max(axis=1)


def cell_average_cost(f: GridDensity, cost, order=16) -> np.ndarray:
    """Average of ``r`` over each cell by Gauss-Legendre quadrature (exact for low-degree polynomials)."""
    t, w = np.polynomial.legendre.leggauss(order)
    pts = f.edges[:-1, None] + (t[None, :] + 1) / 2 * f.cell_width
    vals = np.asarray(cost(pts), dtype=float).reshape(pts.shape)
    return vals @ w / 2


def _level_average(law, per_cell):
    return np.array([per_cell[c].mean() for c in law.level_cells])


@dataclass(frozen=True, eq=False)
class TwoSetBlock:
    """``(1 - delta) U(S_0) + delta U(S_1)`` on ``n``-tuples, with disjoint ``S_0``, ``S_1``."""

    block0: TypicalBlockDensity
    block1: TypicalBlockDensity
    delta: float
    gamma: float
    band_gap: float
    coordinate_cost: float

    @property
    def n(self) -> int:
        return self.block0.n

    @property
    def log_volumes(self):
        return self.block0.log_volume, self.block1.log_volume

    def renyi_entropy(self, alpha) -> float:
        return disjoint_two_set_log_entropy(*self.log_volumes, self.delta, alpha)

    def enumerated_entropy(self, alpha) -> float:
        """Same quantity summed over the enumerated cell tuples of both sets."""
        alpha = float(alpha)
        parts = []
        for q, b in ((1 - self.delta, self.block0), (self.delta, self.block1)):
            if q == 0:
                continue
            law = b.law
            parts.append(
                law.log_counts + alpha * (math.log(q) + law.log_p)
                + self.n * (1 - alpha) * math.log(law.cell_width)
            )
        return float(logsumexp(np.concatenate(parts))) / (1 - alpha)

    def rate(self, alpha) -> float:
        return self.renyi_entropy(alpha) / self.n

    @property
    def disjoint(self) -> bool:
        return self.band_gap > 0

    def sample(self, size, rng=None) -> np.ndarray:
        rng = np.random.default_rng(rng)
        pick = rng.random(size) < self.delta
        out = np.empty((size, self.n))
        k1 = int(pick.sum())
        if k1:
            out[pick] = self.block1.law.sample(k1, rng)
        if size - k1:
            out[~pick] = self.block0.law.sample(size - k1, rng)
        return out

    def sample_weighted(self, size, rng=None, proposal=0.5):
        """Draws with the component picked with probability ``proposal`` for ``S_1``, plus likelihood-ratio weights.

        Weighted averages are unbiased for expectations under the block law and
        resolve the rare ``S_1`` component far better than plain sampling.
        """
        rng = np.random.default_rng(rng)
        if self.delta in (0.0, 1.0):
            return self.sample(size, rng), np.ones(size)
        pick = rng.random(size) < proposal
        out = np.empty((size, self.n))
        k1 = int(pick.sum())
        if k1:
            out[pick] = self.block1.law.sample(k1, rng)
        if size - k1:
            out[~pick] = self.block0.law.sample(size - k1, rng)
        w = np.where(pick, self.delta / proposal, (1 - self.delta) / (1 - proposal))
        return out, w

    def to_dict(self):
        return {
            "n": self.n,
            "delta": self.delta,
            "gamma": self.gamma,
            "log_volume0": self.block0.log_volume,
            "log_volume1": self.block1.log_volume,
            "band_gap": self.band_gap,
            "coordinate_cost": self.coordinate_cost,
            "disjoint": self.disjoint,
        }


def build_alpha_small_block(f0, f1, gammas, cost, eps, delta, n, gamma=None, budget=DEFAULT_BUDGET):
    """Mixture of the uniform densities on the typical sets of ``f0`` and ``f1``.

    ``gammas = (gamma0, gamma1)`` are the budgets met by ``f0`` and ``f1``;
    ``gamma`` (default ``cost.gamma``) is the target budget. Component costs
    are exact integrals of the piecewise-constant densities, and the built
    block's per-coordinate cost is checked against ``gamma``. Disjointness of the
    two sets is certified from their cost bands: every tuple of ``S_0`` has mean
    cost below ``E_0 + eps`` and every tuple of ``S_1`` above ``E_1 - eps``.
    When the two densities live on different grids, the bands are widened by
    how far ``r`` strays from its cell-midpoint value inside the member cells.
    """
    gamma = cost.gamma if gamma is None else float(gamma)
    g0, g1 = (float(g) for g in gammas)
    eps, delta = float(eps), float(delta)
    if gamma is None:
        raise ValidationError("no target budget")
    if not (g0 + eps < gamma < g1 - eps):
        raise ConstructionError(f"need gamma0 + eps < gamma < gamma1 - eps, got {g0}, {gamma}, {g1}, eps={eps}")
    if (1 - delta) * (g0 + eps) + delta * (g1 + eps) > gamma:
        raise ConstructionError(f"delta={delta} too large: mixed budget exceeds gamma")
    # exact costs of the piecewise-constant densities, not the midpoint rule
    avg0, avg1 = cell_average_cost(f0, cost), cell_average_cost(f1, cost)
    t0, t1 = float(f0.masses @ avg0), float(f1.masses @ avg1)
    if t0 > g0 or t1 > g1:
        raise ConstructionError(f"component costs ({t0}, {t1}) exceed their budgets ({g0}, {g1})")
    e0, e1 = cost_expectation(f0, cost), cost_expectation(f1, cost)

    blocks = []
    for f in (f0, f1):
        spec = TypicalSpec(f, n, eps, cost, "cell")
        blocks.append(build_typical_block(spec, budget=budget, mode="enumerate"))
    b0, b1 = blocks

    # highest mean cost a tuple of S_0 can have, lowest one of S_1
    top0, bot1 = e0 + eps, e1 - eps
    if not f0.same_grid(f1):
        rbar0, rbar1 = cell_costs(f0, cost), cell_costs(f1, cost)
        _, hi0 = _cell_extremes(f0, cost)
        lo1, _ = _cell_extremes(f1, cost)
        cells0 = np.concatenate(b0.law.level_cells)
        cells1 = np.concatenate(b1.law.level_cells)
        top0 += float(np.max(hi0[cells0] - rbar0[cells0]))
        bot1 -= float(np.max(rbar1[cells1] - lo1[cells1]))
    band_gap = bot1 - top0
    if band_gap <= 0:
        raise ConstructionError(f"cost bands overlap by {-band_gap:.6g}; disjointness cannot be certified")

    c0 = b0.law.coordinate_expectation(_level_average(b0.law, avg0))
    c1 = b1.law.coordinate_expectation(_level_average(b1.law, avg1))
    coord_cost = (1 - delta) * c0 + delta * c1
    if coord_cost > gamma:
        raise ConstructionError(f"per-coordinate cost {coord_cost:.6g} of the block exceeds gamma {gamma:.6g}")
    return TwoSetBlock(b0, b1, delta, gamma, band_gap, coord_cost)
