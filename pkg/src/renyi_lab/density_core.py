"""Grid densities, entropy functionals, cost expectations and divergences.

Every density handled numerically is a :class:`GridDensity`: a piecewise-constant
density on ``[lo, hi]`` with one value per cell. All integrals are midpoint sums
over the grid, which are exact for the piecewise-constant density itself.
Entropies are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp, ndtr

from .errors import TailMassError, ValidationError

NORMALIZATION_TOL = 1e-12
DEFAULT_TAIL_TOL = 1e-9


class EntropyValue(float):
    """A float in nats that remembers its order (``alpha == 1`` is Shannon).

    Behaves like a plain float in arithmetic; ``alpha`` is carried for reporting.
    """

    alpha: float

    def __new__(cls, value, alpha):
        obj = super().__new__(cls, value)
        obj.alpha = float(alpha)
        return obj

    def __repr__(self):
        return f"EntropyValue({float(self)!r}, alpha={self.alpha!r})"

    def to_dict(self):
        return {"alpha": self.alpha, "nats": float(self)}


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Piecewise-constant density on a uniform grid over ``[lo, hi]``.

    ``weights[i]`` is the density value on cell ``i`` (mass / cell width).
    """

    lo: float
    hi: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValidationError("weights must be a non-empty 1-D array")
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or not self.lo < self.hi:
            raise ValidationError(f"need finite lo < hi, got [{self.lo}, {self.hi}]")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValidationError("weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "weights", w)
        total = float(np.sum(w)) * self.cell_width
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValidationError(f"density integrates to {total!r}, not 1")

    @classmethod
    def from_unnormalized(cls, lo, hi, values):
        """Normalize nonnegative cell values so that the density integrates to one."""
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValidationError("values must be a non-empty 1-D array")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValidationError("values must be finite and nonnegative")
        cw = (float(hi) - float(lo)) / v.size
        total = math.fsum(v) * cw
        if total <= 0:
            raise ValidationError("values have zero total mass")
        return cls(lo, hi, v / total)

    @classmethod
    def uniform(cls, lo, hi, cells=1):
        return cls(lo, hi, np.full(int(cells), 1.0 / (float(hi) - float(lo))))

    @property
    def cells(self) -> int:
        return self.weights.size

    @property
    def cell_width(self) -> float:
        return (self.hi - self.lo) / self.weights.size

    @property
    def midpoints(self) -> np.ndarray:
        return self.lo + (np.arange(self.cells) + 0.5) * self.cell_width

    @property
    def edges(self) -> np.ndarray:
        return self.lo + np.arange(self.cells + 1) * self.cell_width

    @property
    def masses(self) -> np.ndarray:
        return self.weights * self.cell_width

    @property
    def max_density(self) -> float:
        return float(self.weights.max())

    def cell_index(self, x) -> np.ndarray:
        """Cell index of each point; ``-1`` for points outside ``[lo, hi]``."""
        x = np.asarray(x, dtype=float)
        idx = np.floor((x - self.lo) / self.cell_width).astype(np.int64)
        idx = np.where(x == self.hi, self.cells - 1, idx)
        inside = (x >= self.lo) & (x <= self.hi)
        return np.where(inside, idx, -1)

    def pdf(self, x) -> np.ndarray:
        idx = self.cell_index(x)
        out = np.zeros(np.shape(idx))
        ok = idx >= 0
        out[ok] = self.weights[idx[ok]]
        return out

    def same_grid(self, other, tol=1e-12) -> bool:
        return (
            self.cells == other.cells
            and abs(self.lo - other.lo) <= tol * max(1.0, abs(self.lo))
            and abs(self.hi - other.hi) <= tol * max(1.0, abs(self.hi))
        )

    def with_weights(self, values) -> "GridDensity":
        """Same grid, new (unnormalized) cell values."""
        return GridDensity.from_unnormalized(self.lo, self.hi, values)

    def sample(self, size, rng) -> np.ndarray:
        rng = np.random.default_rng(rng)
        p = self.masses / self.masses.sum()
        cells = rng.choice(self.cells, size=size, p=p)
        return self.lo + (cells + rng.random(np.shape(cells))) * self.cell_width

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(data["lo"], data["hi"], data["weights"])
        except KeyError as exc:
            raise ValidationError(f"density JSON missing key {exc}") from None


@dataclass(frozen=True)
class CostSpec:
    """Cost function ``r``, support interval ``S`` and budget ``gamma``.

    ``r`` must accept and return numpy arrays. ``support`` may have infinite
    endpoints; a finite computation window is then supplied by the caller.
    """

    r: Callable[[np.ndarray], np.ndarray]
    support: tuple = (-math.inf, math.inf)
    gamma: float | None = None
    gamma0: float | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return np.asarray(self.r(np.asarray(x, dtype=float)), dtype=float)

    @property
    def support_measure(self) -> float:
        return float(self.support[1] - self.support[0])

    @property
    def finite_support(self) -> bool:
        return bool(np.isfinite(self.support[0]) and np.isfinite(self.support[1]))

    def with_gamma(self, gamma) -> "CostSpec":
        return CostSpec(self.r, self.support, float(gamma), self.gamma0, self.name, dict(self.params))

    def window(self, window=None):
        """Finite computation interval: ``window`` clipped to the support."""
        if window is None:
            if not self.finite_support:
                raise ValidationError("support is unbounded; pass an explicit window")
            return float(self.support[0]), float(self.support[1])
        lo = max(float(window[0]), float(self.support[0]))
        hi = min(float(window[1]), float(self.support[1]))
        if not lo < hi:
            raise ValidationError(f"window {window} does not meet support {self.support}")
        return lo, hi

    def to_dict(self):
        return {
            "name": self.name,
            "support": [float(s) for s in self.support],
            "gamma": self.gamma,
            "gamma0": self.gamma0,
            **({"params": self.params} if self.params else {}),
        }


def quadratic_cost(gamma=None, support=(-math.inf, math.inf), gamma0=None) -> CostSpec:
    return CostSpec(np.square, tuple(support), gamma, gamma0, "quadratic")


def linear_cost(gamma=None, support=(0.0, math.inf), gamma0=None) -> CostSpec:
    return CostSpec(lambda x: np.asarray(x, dtype=float), tuple(support), gamma, gamma0, "linear")


def tabulated_cost(xs, ys, gamma=None, support=None, gamma0=None) -> CostSpec:
    """Piecewise-linear cost through ``(xs, ys)``; constant beyond the table."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2 or np.any(np.diff(xs) <= 0):
        raise ValidationError("tabulated cost needs increasing xs and matching ys")
    support = tuple(support) if support is not None else (float(xs[0]), float(xs[-1]))
    return CostSpec(
        lambda x: np.interp(x, xs, ys),
        support,
        gamma,
        gamma0,
        "tabulated",
        {"xs": xs.tolist(), "ys": ys.tolist()},
    )


def _cost_fn(cost):
    if isinstance(cost, CostSpec):
        return cost
    if callable(cost):
        return lambda x: np.asarray(cost(np.asarray(x, dtype=float)), dtype=float)
    raise ValidationError("cost must be a CostSpec or a callable")


def cell_costs(f: GridDensity, cost) -> np.ndarray:
    """Cost at the cell midpoints; must be finite on the grid."""
    return cell_costs_at(f.midpoints, cost)


# ---------------------------------------------------------------------------
# Parametric densities with closed forms


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))

    def cdf(self, x):
        return ndtr((np.asarray(x, dtype=float) - self.mean) / self.sigma)

    def renyi_entropy(self, alpha):
        return 0.5 * math.log(2 * math.pi * self.sigma**2) + math.log(alpha) / (2 * (alpha - 1))

    def shannon_entropy(self):
        return 0.5 * math.log(2 * math.pi * math.e * self.sigma**2)

    @property
    def second_moment(self):
        return self.sigma**2 + self.mean**2


@dataclass(frozen=True)
class Uniform:
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError("need lo < hi")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def renyi_entropy(self, alpha):
        return math.log(self.hi - self.lo)

    def shannon_entropy(self):
        return math.log(self.hi - self.lo)

    @property
    def second_moment(self):
        return (self.hi**3 - self.lo**3) / (3 * (self.hi - self.lo))


def quantize(dist, lo, hi, cells, tail_tol=DEFAULT_TAIL_TOL) -> GridDensity:
    """Midpoint-sample ``dist`` on ``cells`` cells over ``[lo, hi]`` and renormalize.

    ``dist`` is a parametric density (``pdf`` and optionally ``cdf``) or a bare
    pdf callable. Raises :class:`TailMassError` when more than ``tail_tol`` of the
    mass lies outside ``[lo, hi]``.
    """
    cells = int(cells)
    if cells < 1:
        raise ValidationError("cells must be >= 1")
    lo, hi = float(lo), float(hi)
    cw = (hi - lo) / cells
    mids = lo + (np.arange(cells) + 0.5) * cw
    pdf = dist.pdf if hasattr(dist, "pdf") else dist
    values = np.asarray(pdf(mids), dtype=float)
    if hasattr(dist, "cdf"):
        lost = 1.0 - float(dist.cdf(hi) - dist.cdf(lo))
    else:
        lost = 1.0 - math.fsum(values) * cw
    if lost > tail_tol:
        raise TailMassError(lost, tail_tol)
    return GridDensity.from_unnormalized(lo, hi, values)


# ---------------------------------------------------------------------------
# Entropy functionals


def _check_alpha(alpha):
    alpha = float(alpha)
    if not alpha > 0 or alpha == 1.0 or not math.isfinite(alpha):
        raise ValidationError(f"alpha must be positive, finite and != 1, got {alpha}")
    return alpha


def _as_grid(f):
    if isinstance(f, GridDensity):
        return f
    grid = getattr(f, "grid", None)
    if callable(grid):
        return grid()
    raise ValidationError(f"cannot interpret {type(f).__name__} as a grid density")


def renyi_from_log_power_integral(log_integral, alpha) -> float:
    """``log(int f^alpha) / (1 - alpha)`` with the +-inf conventions for divergent integrals."""
    if log_integral == math.inf:
        return -math.inf if alpha > 1 else math.inf
    return log_integral / (1.0 - alpha)


def renyi_entropy(f, alpha) -> EntropyValue:
    """Order-``alpha`` Renyi entropy ``log(int f^alpha) / (1 - alpha)`` in nats.

    Gaussian and uniform parametric densities use their closed forms; grid
    densities use the midpoint sum, where empty cells contribute nothing.
    """
    alpha = _check_alpha(alpha)
    if isinstance(f, (Gaussian, Uniform)):
        return EntropyValue(f.renyi_entropy(alpha), alpha)
    g = _as_grid(f)
    pos = g.weights[g.weights > 0]
    log_int = float(logsumexp(alpha * np.log(pos))) + math.log(g.cell_width)
    return EntropyValue(renyi_from_log_power_integral(log_int, alpha), alpha)


def shannon_entropy(f) -> EntropyValue:
    """Differential Shannon entropy ``-int f log f`` with ``0 log 0 = 0``."""
    if isinstance(f, (Gaussian, Uniform)):
        return EntropyValue(f.shannon_entropy(), 1.0)
    g = _as_grid(f)
    pos = g.weights[g.weights > 0]
    return EntropyValue(-float(np.sum(pos * np.log(pos))) * g.cell_width, 1.0)


def cost_moments(f: GridDensity, cost) -> tuple[float, float]:
    """``(int f r, int f |r|)`` by midpoint quadrature."""
    g = _as_grid(f)
    r = cell_costs(g, cost)
    m = g.masses
    return float(np.sum(m * r)), float(np.sum(m * np.abs(r)))


def cost_expectation(f: GridDensity, cost) -> float:
    return cost_moments(f, cost)[0]


def kl_divergence(g: GridDensity, fstar: GridDensity) -> float:
    """Relative entropy ``D(g || fstar)`` on a shared grid; ``inf`` without absolute continuity."""
    g, fstar = _as_grid(g), _as_grid(fstar)
    if not g.same_grid(fstar):
        raise ValidationError("kl_divergence needs both densities on the same grid")
    pos = g.weights > 0
    if np.any(fstar.weights[pos] == 0):
        return math.inf
    gw, fw = g.weights[pos], fstar.weights[pos]
    value = float(np.sum(gw * np.log(gw / fw))) * g.cell_width
    # rounding can leave a -1e-17 residue for g == fstar
    return max(value, 0.0)


def log_support_bound(lo, hi) -> float:
    """``log |S|`` for an interval, the ceiling on every Renyi entropy supported there."""
    width = float(hi) - float(lo)
    return math.log(width) if math.isfinite(width) else math.inf


def bounded_density_renyi_floor(max_density, alpha) -> float:
    """Lower bound ``-log M`` on ``h_alpha`` (alpha > 1) of a density bounded by ``M``.

    From ``f^alpha <= M^(alpha-1) f``.
    """
    _check_alpha(alpha)
    if alpha < 1:
        raise ValidationError("the bounded-density floor applies to alpha > 1")
    return -math.log(max_density)


def product_grid_weights(densities: Sequence[GridDensity]) -> np.ndarray:
    """Cell probabilities of a product of grid densities, flattened in C order."""
    out = np.ones(1)
    for d in densities:
        out = np.kron(out, d.masses)
    return out


@dataclass(frozen=True, eq=False)
class ExpFamilyDensity:
    """``f(x) = exp(lambda0 + lambda1 * r(x))`` on the window ``[lo, hi]``.

    The window is a finite stand-in for the support of ``cost``. Normalization is
    checked by midpoint quadrature on ``cells`` cells.
    """

    lambda0: float
    lambda1: float
    cost: CostSpec
    lo: float
    hi: float
    cells: int = 2**14

    def __post_init__(self):
        mass = math.fsum(self._cell_values()) * (self.hi - self.lo) / self.cells
        if abs(mass - 1.0) > 1e-8:
            raise ValidationError(f"exponential-family density integrates to {mass!r}, not 1")

    def _cell_values(self):
        mids = self.lo + (np.arange(self.cells) + 0.5) * (self.hi - self.lo) / self.cells
        return np.exp(self.lambda0 + self.lambda1 * cell_costs_at(mids, self.cost))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        vals = np.exp(self.lambda0 + self.lambda1 * self.cost(np.where(inside, x, self.lo)))
        return np.where(inside, vals, 0.0)

    def grid(self) -> GridDensity:
        return GridDensity.from_unnormalized(self.lo, self.hi, self._cell_values())

    def to_dict(self):
        return {
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "window": [self.lo, self.hi],
            "cells": self.cells,
            "cost": self.cost.to_dict(),
        }


def cell_costs_at(points, cost) -> np.ndarray:
    r = np.broadcast_to(_cost_fn(cost)(points), np.shape(points)).astype(float)
    if not np.all(np.isfinite(r)):
        raise ValidationError("cost is not finite on every grid cell")
    return r
