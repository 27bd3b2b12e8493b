"""Weakly typical and cost-typical sets and uniform densities on their intersection.

For a grid density the product ``prod f(x_k)`` depends only on which cells the
coordinates fall in, so the weakly typical set is a union of cell tuples. The
block constructions use the cell-level version of the cost band as well (the
cost of a cell is its midpoint value), which makes the typical set a finite
union of grid boxes whose volume can be counted exactly.

Cells sharing both density value and midpoint cost form a *level*; the
typicality of a tuple depends only on how many coordinates sit in each level
(its level-type), which keeps enumeration polynomial in ``n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from ._parallel import map_shards
from .density_core import GridDensity, cell_costs, cost_expectation, renyi_entropy, shannon_entropy
from .errors import ConstructionError, ModeError, SamplingError, ValidationError

DEFAULT_BUDGET = 10**7
MIN_ACCEPTANCE = 1e-6


@dataclass(frozen=True, eq=False)
class TypicalSpec:
    """Reference density, block length, tolerance and cost for the typical sets.

    ``cost_eval`` selects how the empirical cost of a tuple is measured:
    ``"point"`` evaluates ``r`` at the points themselves, ``"cell"`` at the
    midpoints of their cells (the grid version used by block constructions).
    """

    f: GridDensity
    n: int
    eps: float
    cost: object
    cost_eval: str = "point"

    def __post_init__(self):
        if int(self.n) < 1 or int(self.n) != self.n:
            raise ValidationError("n must be a positive integer")
        if not self.eps > 0:
            raise ValidationError("eps must be positive")
        if self.cost_eval not in ("point", "cell"):
            raise ValidationError("cost_eval must be 'point' or 'cell'")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "_h", float(shannon_entropy(self.f)))
        object.__setattr__(self, "_mean_cost", cost_expectation(self.f, self.cost))

    @property
    def h(self) -> float:
        return self._h

    @property
    def mean_cost(self) -> float:
        return self._mean_cost

    @property
    def log_band(self):
        """Closed band for ``log prod f(x_k)``."""
        return -self.n * (self.h + self.eps), -self.n * (self.h - self.eps)

    @property
    def card_lower_bound(self) -> float:
        """``log((1 - eps) e^{n(h - eps)})``; meaningful only for ``eps < 1``."""
        if self.eps >= 1:
            return -math.inf
        return math.log1p(-self.eps) + self.n * (self.h - self.eps)

    def with_n(self, n) -> "TypicalSpec":
        return TypicalSpec(self.f, n, self.eps, self.cost, self.cost_eval)


def _log_product(x, f: GridDensity):
    idx = f.cell_index(x)
    if np.any(idx < 0):
        return -math.inf
    w = f.weights[idx]
    if np.any(w == 0):
        return -math.inf
    return float(np.sum(np.log(w)))


def is_weakly_typical(x, spec: TypicalSpec) -> bool:
    """``e^{-n(h+eps)} <= prod f(x_k) <= e^{-n(h-eps)}``, both ends inclusive."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != spec.n:
        raise ValidationError(f"expected a tuple of length {spec.n}, got {x.size}")
    lp = _log_product(x, spec.f)
    lo, hi = spec.log_band
    return bool(lo <= lp <= hi)


def _tuple_costs(x, spec: TypicalSpec):
    if spec.cost_eval == "cell":
        idx = spec.f.cell_index(x)
        return cell_costs(spec.f, spec.cost)[np.clip(idx, 0, None)]
    return np.asarray(spec.cost(x), dtype=float) * np.ones_like(x)


def is_cost_typical(x, spec: TypicalSpec) -> bool:
    """``|mean r(x_k) - E_f r| < eps``, strict."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != spec.n:
        raise ValidationError(f"expected a tuple of length {spec.n}, got {x.size}")
    if np.any(spec.f.cell_index(x) < 0):
        return False
    return bool(abs(float(np.mean(_tuple_costs(x, spec))) - spec.mean_cost) < spec.eps)


def is_typical(x, spec: TypicalSpec) -> bool:
    return is_weakly_typical(x, spec) and is_cost_typical(x, spec)


def _batch_membership(cells, points, spec: TypicalSpec, log_w, rbar):
    """Membership of a batch of tuples given their cell indices (rows) and points."""
    lp = log_w[cells].sum(axis=1)
    lo, hi = spec.log_band
    weak = (lp >= lo) & (lp <= hi)
    if spec.cost_eval == "cell":
        c = rbar[cells].mean(axis=1)
    else:
        c = np.asarray(spec.cost(points), dtype=float).reshape(points.shape).mean(axis=1)
    return weak & (np.abs(c - spec.mean_cost) < spec.eps), lp


def _iid_tuples(f: GridDensity, n, size, rng):
    p = f.masses / f.masses.sum()
    cells = rng.choice(f.cells, size=(size, n), p=p)
    points = f.lo + (cells + rng.random(cells.shape)) * f.cell_width
    return cells, points


def typical_mass(spec: TypicalSpec, N=10_000, seed=0, shards=8):
    """Monte Carlo estimate of ``P[(X_1..X_n) in T cap A]`` under IID ``f``.

    Returns ``(estimate, standard_error)``; deterministic for a given seed and
    independent of the thread count.
    """
    if int(N) < 1:
        raise ValidationError("N must be at least 1")
    with np.errstate(divide="ignore"):
        log_w = np.log(spec.f.weights)
    rbar = cell_costs(spec.f, spec.cost)

    def shard(size, rng):
        if size == 0:
            return 0
        cells, points = _iid_tuples(spec.f, spec.n, size, rng)
        member, _ = _batch_membership(cells, points, spec, log_w, rbar)
        return int(member.sum())

    hits = sum(map_shards(shard, int(N), seed, shards))
    p = hits / int(N)
    return p, math.sqrt(max(p * (1 - p), 0.0) / int(N))


# ---------------------------------------------------------------------------
# Exchangeable laws on cell tuples, indexed by level-type


def _levels(f: GridDensity, rbar):
    """Group positive cells by (density, midpoint cost)."""
    groups: dict = {}
    for i in np.flatnonzero(f.weights > 0):
        groups.setdefault((float(f.weights[i]), float(rbar[i])), []).append(int(i))
    keys = sorted(groups)
    w = np.array([k[0] for k in keys])
    r = np.array([k[1] for k in keys])
    cells = [np.array(groups[k], dtype=np.int64) for k in keys]
    return w, r, cells


def compositions(n, parts) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``n``."""
    if parts == 0:
        return np.zeros((1 if n == 0 else 0, 0), dtype=np.int64)
    rows = []
    for bars in itertools.combinations(range(n + parts - 1), parts - 1):
        edges = (-1,) + bars + (n + parts - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(parts)])
    return np.array(rows, dtype=np.int64).reshape(-1, parts)


def n_compositions(n, parts) -> int:
    return math.comb(n + parts - 1, parts - 1) if parts > 0 else int(n == 0)


def _log_type_counts(types, sizes, n):
    """log of the number of cell tuples with each level-type."""
    types = np.asarray(types)
    return gammaln(n + 1) - gammaln(types + 1).sum(axis=1) + types @ np.log(np.asarray(sizes, dtype=float))


@dataclass(frozen=True, eq=False)
class BlockLaw:
    """Exchangeable law on ``n``-tuples of cells of a grid, uniform within each cell.

    ``types[t]`` gives level counts and ``log_p[t]`` the probability of each
    individual cell tuple with that level-type.
    """

    lo: float
    hi: float
    cells: int
    n: int
    level_w: np.ndarray
    level_rbar: np.ndarray
    level_cells: list
    types: np.ndarray
    log_p: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def cell_width(self) -> float:
        return (self.hi - self.lo) / self.cells

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.level_cells])

    @property
    def log_counts(self) -> np.ndarray:
        return _log_type_counts(self.types, self.sizes, self.n)

    @property
    def log_type_mass(self) -> np.ndarray:
        return self.log_counts + self.log_p

    @property
    def total_mass(self) -> float:
        return float(np.exp(logsumexp(self.log_type_mass))) if self.types.shape[0] else 0.0

    def renyi_entropy(self, alpha) -> float:
        alpha = float(alpha)
        if alpha == 1.0:
            return self.shannon_entropy()
        val = float(logsumexp(self.log_counts + alpha * self.log_p)) / (1 - alpha)
        return val + self.n * math.log(self.cell_width)

    def shannon_entropy(self) -> float:
        mass = np.exp(self.log_type_mass)
        return float(-np.sum(mass * self.log_p)) + self.n * math.log(self.cell_width)

    def marginal(self, rho) -> "BlockLaw":
        """Law of the first ``rho`` coordinates (any ``rho`` coordinates, by exchangeability)."""
        rho = int(rho)
        if not 0 <= rho <= self.n:
            raise ValidationError(f"rho must lie in [0, {self.n}]")
        if rho == self.n:
            return self
        key = ("marginal", rho)
        if key in self._cache:
            return self._cache[key]
        G = len(self.level_cells)
        prefix = compositions(rho, G)
        log_s = np.log(self.sizes.astype(float))
        out = np.full(prefix.shape[0], -np.inf)
        index = {tuple(c): i for i, c in enumerate(prefix)}
        rest_n = self.n - rho
        acc: dict = {}
        for t_row, lp in zip(self.types, self.log_p):
            for c in _sub_compositions(t_row, rho):
                rest = t_row - c
                lc = gammaln(rest_n + 1) - gammaln(rest + 1).sum() + rest @ log_s
                acc.setdefault(index[tuple(c)], []).append(lc + lp)
        for i, vals in acc.items():
            out[i] = logsumexp(vals)
        keep = np.isfinite(out)
        law = BlockLaw(
            self.lo, self.hi, self.cells, rho, self.level_w, self.level_rbar, self.level_cells,
            prefix[keep], out[keep],
        )
        self._cache[key] = law
        return law

    def coordinate_expectation(self, level_values) -> float:
        """``E[v(X_1)]`` for a per-level value ``v`` (equal for every coordinate)."""
        mass = np.exp(self.log_type_mass)
        return float(np.sum(mass * (self.types @ np.asarray(level_values, dtype=float)))) / self.n

    def level_of_cell(self) -> np.ndarray:
        lev = np.full(self.cells, -1, dtype=np.int64)
        for g, cells in enumerate(self.level_cells):
            lev[cells] = g
        return lev

    def tuple_array(self, budget=DEFAULT_BUDGET) -> np.ndarray:
        """Probabilities of all ``cells**n`` cell tuples, C order (first coordinate most significant)."""
        total = self.cells**self.n
        if total > budget:
            raise ConstructionError(f"{self.cells}^{self.n} tuples exceed the budget {budget}")
        lev = self.level_of_cell()
        G = len(self.level_cells)
        grid = np.indices((self.cells,) * self.n).reshape(self.n, -1)
        levels = lev[grid]
        valid = np.all(levels >= 0, axis=0)
        radix = self.n + 1
        codes = np.zeros(total, dtype=np.int64)
        for g in range(G):
            codes = codes * radix + np.sum(levels == g, axis=0)
        type_codes = np.zeros(self.types.shape[0], dtype=np.int64)
        for g in range(G):
            type_codes = type_codes * radix + self.types[:, g]
        lookup = dict(zip(type_codes.tolist(), np.exp(self.log_p).tolist()))
        probs = np.array([lookup.get(c, 0.0) for c in codes.tolist()])
        return np.where(valid, probs, 0.0)

    def sample(self, size, rng=None) -> np.ndarray:
        """Draw ``size`` tuples; returns an array of shape ``(size, n)``."""
        rng = np.random.default_rng(rng)
        mass = np.exp(self.log_type_mass - logsumexp(self.log_type_mass))
        picks = rng.choice(self.types.shape[0], size=size, p=mass / mass.sum())
        level_seq = np.repeat(
            np.arange(len(self.level_cells))[None, :].repeat(size, axis=0).ravel(),
            self.types[picks].ravel(),
        ).reshape(size, self.n)
        level_seq = rng.permuted(level_seq, axis=1)
        sizes = self.sizes
        within = np.floor(rng.random(level_seq.shape) * sizes[level_seq]).astype(np.int64)
        cell_table = _ragged_table(self.level_cells)
        cells = cell_table[level_seq, within]
        return self.lo + (cells + rng.random(cells.shape)) * self.cell_width

    @classmethod
    def iid(cls, f: GridDensity, n, cost=None):
        """Product law of ``n`` independent draws from ``f``."""
        rbar = cell_costs(f, cost) if cost is not None else np.zeros(f.cells)
        w, r, cells = _levels(f, rbar)
        types = compositions(n, len(cells))
        log_p = types @ np.log(w * f.cell_width)
        return cls(f.lo, f.hi, f.cells, int(n), w, r, cells, types, log_p)


def _ragged_table(groups):
    width = max(len(g) for g in groups)
    table = np.zeros((len(groups), width), dtype=np.int64)
    for i, g in enumerate(groups):
        table[i, : len(g)] = g
    return table


def _sub_compositions(total_row, rho):
    """Vectors ``c <= total_row`` componentwise with ``sum(c) == rho``."""
    G = len(total_row)

    def rec(g, left):
        if g == G - 1:
            if left <= total_row[g]:
                yield (left,)
            return
        for v in range(min(left, total_row[g]) + 1):
            for tail in rec(g + 1, left - v):
                yield (v,) + tail

    for c in rec(0, rho):
        yield np.array(c, dtype=np.int64)


# ---------------------------------------------------------------------------
# Uniform block density on the typical set


@dataclass(frozen=True, eq=False)
class TypicalBlockDensity:
    spec: TypicalSpec
    log_volume: float
    sampler_mode: str
    log_volume_stderr: float = 0.0
    law: BlockLaw | None = None
    acceptance: float | None = None

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def card_lower_bound(self) -> float:
        return self.spec.card_lower_bound

    @property
    def bound_ok(self) -> bool:
        """Whether the volume meets ``(1 - eps) e^{n(h - eps)}``."""
        return self.log_volume >= self.card_lower_bound

    @property
    def n_threshold(self):
        return self.n if self.bound_ok else None

    def renyi_entropy(self, alpha) -> float:
        """A uniform density has ``h_alpha = log volume`` for every order."""
        return self.log_volume

    def to_dict(self):
        return {
            "n": self.n,
            "eps": self.spec.eps,
            "h": self.spec.h,
            "mean_cost": self.spec.mean_cost,
            "log_volume": self.log_volume,
            "log_volume_stderr": self.log_volume_stderr,
            "card_lower_bound": self.card_lower_bound,
            "n_threshold_ok": self.bound_ok,
            "n_threshold": self.n_threshold,
            "sampler_mode": self.sampler_mode,
        }


def _require_cell_spec(spec):
    if spec.cost_eval != "cell":
        raise ValidationError("block constructions need a TypicalSpec with cost_eval='cell'")


def member_types(spec: TypicalSpec):
    """Level structure and the level-types inside the cell-level typical set."""
    _require_cell_spec(spec)
    rbar = cell_costs(spec.f, spec.cost)
    w, r, cells = _levels(spec.f, rbar)
    types = compositions(spec.n, len(cells))
    lp = types @ np.log(w)
    lo, hi = spec.log_band
    mean_r = (types @ r) / spec.n
    member = (lp >= lo) & (lp <= hi) & (np.abs(mean_r - spec.mean_cost) < spec.eps)
    return w, r, cells, types[member]


def exact_typical_mass(spec: TypicalSpec) -> float:
    """``P[(X_1..X_n) in T cap A]`` under IID ``f`` for the cell-level sets, by type counting."""
    w, r, cells, types = member_types(spec)
    if types.shape[0] == 0:
        return 0.0
    sizes = np.array([len(c) for c in cells])
    log_mass = _log_type_counts(types, sizes, spec.n) + types @ np.log(w * spec.f.cell_width)
    return float(np.exp(logsumexp(log_mass)))


def build_typical_block(spec: TypicalSpec, budget=DEFAULT_BUDGET, mode="auto", N=200_000, seed=0):
    """Uniform density on the cell-level set ``T cap A``.

    ``mode="enumerate"`` counts member tuples exactly by level-type and is used
    when the number of level-types fits ``budget``; ``mode="rejection"``
    estimates the volume by importance sampling from ``prod f`` and samples
    by rejection.
    """
    _require_cell_spec(spec)
    rbar = cell_costs(spec.f, spec.cost)
    _, _, cells = _levels(spec.f, rbar)
    n_types = n_compositions(spec.n, len(cells))
    if mode == "auto":
        mode = "enumerate" if n_types <= budget else "rejection"
    if mode == "enumerate":
        if n_types > budget:
            raise ConstructionError(f"{n_types} level-types exceed the enumeration budget {budget}")
        w, r, cells, types = member_types(spec)
        if types.shape[0] == 0:
            raise ConstructionError("the typical set is empty at this n and eps")
        sizes = np.array([len(c) for c in cells])
        log_n = float(logsumexp(_log_type_counts(types, sizes, spec.n)))
        log_cell_vol = spec.n * math.log(spec.f.cell_width)
        law = BlockLaw(
            spec.f.lo, spec.f.hi, spec.f.cells, spec.n, w, r, cells, types,
            np.full(types.shape[0], -log_n),
        )
        return TypicalBlockDensity(spec, log_n + log_cell_vol, "enumerate", 0.0, law)
    if mode != "rejection":
        raise ValidationError(f"unknown mode {mode!r}")
    est, se, acc = _importance_volume(spec, N, seed)
    if est <= 0 or acc < MIN_ACCEPTANCE:
        raise ConstructionError(f"rejection acceptance {acc:.3g} is below {MIN_ACCEPTANCE:g}")
    return TypicalBlockDensity(spec, math.log(est), "rejection", se / est, None, acc)


def _importance_volume(spec, N, seed):
    with np.errstate(divide="ignore"):
        log_w = np.log(spec.f.weights)
    rbar = cell_costs(spec.f, spec.cost)
    log_c = spec.log_band[0]

    def shard(size, rng):
        if size == 0:
            return np.zeros(0)
        cells, points = _iid_tuples(spec.f, spec.n, size, rng)
        member, lp = _batch_membership(cells, points, spec, log_w, rbar)
        # scaled by e^{log_c} so that the values are acceptance probabilities in [0, 1]
        return np.where(member, np.exp(log_c - lp), 0.0)

    vals = np.concatenate(map_shards(shard, int(N), seed))
    acc = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    scale = math.exp(-log_c)
    return acc * scale, se * scale, acc


def sample_typical_uniform(block: TypicalBlockDensity, size=1, seed=None, max_attempts=10**6) -> np.ndarray:
    """Draw ``size`` tuples uniformly from the block's typical set, shape ``(size, n)``."""
    rng = np.random.default_rng(seed)
    if block.sampler_mode == "enumerate":
        return block.law.sample(size, rng)
    spec = block.spec
    with np.errstate(divide="ignore"):
        log_w = np.log(spec.f.weights)
    rbar = cell_costs(spec.f, spec.cost)
    log_c = spec.log_band[0]
    out = []
    attempts = 0
    need = int(size)
    batch = 4096
    while need > 0:
        if attempts >= max_attempts:
            raise SamplingError(f"only {size - need} of {size} draws accepted after {attempts} attempts")
        m = min(batch, max_attempts - attempts)
        cells, points = _iid_tuples(spec.f, spec.n, m, rng)
        member, lp = _batch_membership(cells, points, spec, log_w, rbar)
        accept = member & (rng.random(m) < np.exp(np.minimum(log_c - lp, 0.0)))
        got = points[accept][:need]
        out.append(got)
        need -= got.shape[0]
        attempts += m
    return np.concatenate(out, axis=0)


def block_law(block) -> BlockLaw:
    if getattr(block, "law", None) is None:
        raise ModeError("exact block statistics need an enumerate-mode block")
    return block.law


def marginal_entropy_floor(block: TypicalBlockDensity, rho, alpha) -> float:
    """Lower bound on ``h_alpha(X_1..X_rho)`` (alpha > 1) implied by the marginal density bound."""
    spec = block.spec
    K = -math.log1p(-spec.eps) + 2 * spec.n * spec.eps
    return alpha / (1 - alpha) * K + rho * float(renyi_entropy(spec.f, alpha))


def marginal_density_ratio(block: TypicalBlockDensity, rho) -> float:
    """``max f_n(x_1..x_rho) / prod f(x_k)`` over prefixes, as a log."""
    law = block_law(block).marginal(rho)
    log_cw = math.log(law.cell_width)
    log_dens = law.log_p - rho * log_cw
    log_prod = law.types @ np.log(law.level_w)
    return float(np.max(log_dens - log_prod))


def marginal_log_ratio_bound(spec: TypicalSpec) -> float:
    """``log((1/(1 - eps)) e^{2 n eps})``."""
    return -math.log1p(-spec.eps) + 2 * spec.n * spec.eps


def find_n_threshold(f, eps, cost, n_max, budget=DEFAULT_BUDGET):
    """Smallest ``n0 <= n_max`` such that the cardinality bound holds for every ``n`` in ``[n0, n_max]``.

    Returns ``None`` when it fails at ``n_max``. This records an observed
    threshold over a finite range, not a proof for all larger ``n``.
    """
    threshold = None
    for n in range(int(n_max), 0, -1):
        spec = TypicalSpec(f, n, eps, cost, "cell")
        try:
            ok = build_typical_block(spec, budget=budget, mode="enumerate").bound_ok
        except ConstructionError:
            ok = False
        if not ok:
            break
        threshold = n
    return threshold


def suggest_n(f, eps, cost, target=0.99, n_max=400, N=10_000, seed=0, cost_eval="point"):
    """Smallest ``n <= n_max`` whose estimated typical mass reaches ``target``."""
    for n in range(1, int(n_max) + 1):
        p, _ = typical_mass(TypicalSpec(f, n, eps, cost, cost_eval), N, seed)
        if p >= target:
            return n
    return None
