"""Stationary processes from IID blocks and a uniform random shift.

Blocks ``Y_1^n, Y_{n+1}^{2n}, ...`` are drawn IID from a block density and the
process is ``Z_k = Y_{k+T}`` with ``T`` uniform on ``{0, ..., n-1}``. Given
``T = t`` a window ``Z_1^m`` splits into a trailing piece of a block, whole
blocks and a leading piece of a block, so its Renyi entropy is a sum of block
and boundary entropies. The window law is the uniform mixture over ``t``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .density_core import GridDensity, quadratic_cost
from .errors import ConstructionError, ModeError, ValidationError
from .maxent import solve_maxent
from .mixtures import build_alpha_small_block, disjoint_two_set_log_entropy, renyi_mixture_bounds
from .typicality import (
    BlockLaw,
    TypicalBlockDensity,
    TypicalSpec,
    build_typical_block,
    sample_typical_uniform,
)

WINDOW_BUDGET = 2**25


def tuple_renyi_entropy(p, cell_width, coords, alpha) -> float:
    """Order-``alpha`` entropy of a law on cell tuples that is uniform within each box."""
    p = np.asarray(p, dtype=float).ravel()
    pos = p[p > 0]
    base = coords * math.log(cell_width)
    if alpha == 1:
        return float(-np.sum(pos * np.log(pos))) + base
    return float(logsumexp(alpha * np.log(pos))) / (1 - alpha) + base


# ---------------------------------------------------------------------------
# Block statistics


@dataclass(eq=False)
class BlockStats:
    """Block law with its leading and trailing marginals.

    Either ``law`` (an exchangeable :class:`BlockLaw`) or ``tuple_law`` (an
    explicit array over ``cells**n`` cell tuples) must be set.
    """

    n: int
    cells: int
    cell_width: float
    law: BlockLaw | None = None
    tuple_law: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_block(cls, block):
        if isinstance(block, BlockStats):
            return block
        if isinstance(block, BlockLaw):
            return cls(block.n, block.cells, block.cell_width, law=block)
        law = getattr(block, "law", None)
        if law is None:
            raise ModeError("exact boundary entropies need an enumerate-mode block")
        return cls(law.n, law.cells, law.cell_width, law=law)

    @classmethod
    def from_tuple_law(cls, p, cells, n, cell_width):
        p = np.asarray(p, dtype=float).reshape((cells,) * n)
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise ValidationError("tuple law must be a probability array")
        return cls(int(n), int(cells), float(cell_width), tuple_law=p)

    def block_array(self) -> np.ndarray:
        if self.tuple_law is None:
            self.tuple_law = self.law.tuple_array().reshape((self.cells,) * self.n)
        return self.tuple_law

    def piece(self, start, stop) -> np.ndarray:
        """Law of block coordinates ``start..stop-1`` (0-based), flattened."""
        key = ("piece", start, stop)
        if key not in self._cache:
            if self.law is not None and self.tuple_law is None:
                # exchangeable: any contiguous piece has the law of the leading one
                arr = self.law.marginal(stop - start).tuple_array()
            else:
                full = self.block_array()
                axes = tuple(i for i in range(self.n) if not start <= i < stop)
                arr = full.sum(axis=axes) if axes else full
            self._cache[key] = np.asarray(arr).ravel()
        return self._cache[key]

    def h_block(self, alpha) -> float:
        if self.law is not None:
            return self.law.renyi_entropy(alpha)
        return tuple_renyi_entropy(self.tuple_law, self.cell_width, self.n, alpha)

    def head(self, rho, alpha) -> float:
        """``h_alpha(X_1..X_rho)``; zero for ``rho = 0``."""
        if rho == 0:
            return 0.0
        if self.law is not None:
            return self.law.marginal(rho).renyi_entropy(alpha)
        return tuple_renyi_entropy(self.piece(0, rho), self.cell_width, rho, alpha)

    def tail(self, rho, alpha) -> float:
        """``h_alpha(X_{n-rho+1}..X_n)``; zero for ``rho = 0``."""
        if rho == 0:
            return 0.0
        if self.law is not None:
            return self.law.marginal(rho).renyi_entropy(alpha)
        return tuple_renyi_entropy(self.piece(self.n - rho, self.n), self.cell_width, rho, alpha)


def _decompose(n, m, t):
    """``(tail_len, whole_blocks, head_len)`` of ``Z_1^m`` given ``T = t``."""
    if t == 0:
        return 0, m // n, m - n * (m // n)
    nu = (m - n + t) // n
    return n - t, nu, m - n + t - n * nu


def conditional_window_entropy(stats, m, t, alpha) -> float:
    """``h_alpha(Z_1^m | T = t)`` from block and boundary entropies."""
    stats = BlockStats.from_block(stats)
    n = stats.n
    if not 0 <= t < n:
        raise ValidationError(f"t must lie in [0, {n - 1}]")
    if m < n:
        raise ValidationError("the decomposition needs m >= n")
    tail, nu, head = _decompose(n, m, t)
    return stats.tail(tail, alpha) + nu * stats.h_block(alpha) + stats.head(head, alpha)


@dataclass(frozen=True)
class RateBoundReport:
    m: int
    lower: float
    upper: float
    block_rate: float
    lower_tight: float
    exact: float | None = None
    empty_head_t: tuple = ()

    def to_dict(self):
        d = asdict(self)
        d["empty_head_t"] = list(self.empty_head_t)
        return d


def window_rate_bounds(stats, m, alpha, exact=False) -> RateBoundReport:
    """Lower and upper bounds on ``h_alpha(Z_1^m)``.

    ``lower`` combines the worst trailing boundary, the worst leading boundary
    (capped at zero) and the worst count of whole blocks; ``lower_tight`` is
    the minimum of the exact conditional entropies over ``t``. ``upper`` treats
    the window law as a uniform mixture over ``t``. ``empty_head_t`` lists the
    shifts whose leading piece is empty.
    """
    stats = BlockStats.from_block(stats)
    n = stats.n
    alpha = float(alpha)
    cond = [conditional_window_entropy(stats, m, t, alpha) for t in range(n)]
    hb = stats.h_block(alpha)
    if n == 1:
        lower = cond[0]
    else:
        # t = 0 is read as a full trailing block followed by one fewer whole block
        tails = min(stats.tail(r, alpha) for r in range(1, n + 1))
        heads = min(0.0, min(stats.head(r, alpha) for r in range(1, n)))
        lower = tails + heads + min(((m - n + t) // n) * hb for t in range(n))
    upper = renyi_mixture_bounds(cond, [1.0 / n] * n, alpha)[1]
    empty = tuple(t for t in range(n) if _decompose(n, m, t)[2] == 0)
    ex = exact_window_entropy(stats, m, alpha) if exact else None
    return RateBoundReport(int(m), lower, upper, hb / n, min(cond), ex, empty)


def window_law(stats, m, budget=WINDOW_BUDGET) -> np.ndarray:
    """Exact law of ``Z_1^m`` on cell tuples, flattened in C order."""
    stats = BlockStats.from_block(stats)
    n, K = stats.n, stats.cells
    if K**m > budget:
        raise ValidationError(f"{K}^{m} window cells exceed the budget {budget}")
    total = np.zeros(K**m)
    for t in range(n):
        out = np.ones(1)
        pos = t  # 0-based position inside the current block
        left = m
        while left > 0:
            take = min(n - pos, left)
            out = np.kron(out, stats.piece(pos, pos + take))
            left -= take
            pos = 0
        total += out
    return total / n


def exact_window_entropy(stats, m, alpha, budget=WINDOW_BUDGET) -> float:
    stats = BlockStats.from_block(stats)
    return tuple_renyi_entropy(window_law(stats, m, budget), stats.cell_width, m, float(alpha))


# ---------------------------------------------------------------------------
# Sampling


@dataclass(frozen=True, eq=False)
class BlockProcess:
    """``Z_k = scale * Y_{k+T}`` with IID blocks ``Y`` and ``T`` uniform on ``{0..n-1}``."""

    n: int
    block: object
    scale: float = 1.0
    lo: float | None = None
    hi: float | None = None

    def _blocks(self, count, rng, weighted=False):
        if isinstance(self.block, TypicalBlockDensity):
            ys = sample_typical_uniform(self.block, count, rng)
        elif isinstance(self.block, GridDensity):
            ys = self.block.sample(count, rng).reshape(count, 1)
        elif weighted and hasattr(self.block, "sample_weighted"):
            return self.block.sample_weighted(count, rng)
        else:
            ys = self.block.sample(count, rng)
        return ys, np.ones(count)

    def sample(self, size, m, seed=None, weighted=False):
        """``size`` independent windows ``(Z_1, ..., Z_m)``, shape ``(size, m)``.

        With ``weighted=True`` returns ``(windows, weights)`` where blocks that
        support it are drawn by importance sampling; weighted averages are
        unbiased for expectations under the process.
        """
        rng = np.random.default_rng(seed)
        n = self.n
        B = -(-(m + n - 1) // n)
        T = rng.integers(0, n, size=size)
        ys, w = self._blocks(size * B, rng, weighted)
        ys = ys.reshape(size, B * n)
        idx = T[:, None] + np.arange(m)[None, :]
        z = self.scale * np.take_along_axis(ys, idx, axis=1)
        if not weighted:
            return z
        # only the blocks a window touches enter its likelihood ratio
        w = w.reshape(size, B)
        touched = (np.arange(B)[None, :] * n < (T + m)[:, None])
        return z, np.prod(np.where(touched, w, 1.0), axis=1)

    def sample_cells(self, size, m, seed=None) -> np.ndarray:
        """Cell indices of sampled windows (unscaled grid of the block)."""
        z = self.sample(size, m, seed) / self.scale
        cw = (self.hi - self.lo) / self._cells()
        return np.clip(np.floor((z - self.lo) / cw).astype(np.int64), 0, self._cells() - 1)

    def _cells(self):
        law = getattr(self.block, "law", self.block)
        return law.cells


def build_block_process(block, seed=None, scale=1.0) -> BlockProcess:
    """Stationary process driven by ``block``: a typical block, a block law, a two-set block or a grid density (``n = 1``)."""
    if isinstance(block, GridDensity):
        return BlockProcess(1, block, scale, block.lo, block.hi)
    law = getattr(block, "law", None) if not isinstance(block, BlockLaw) else block
    lo = law.lo if law is not None else None
    hi = law.hi if law is not None else None
    return BlockProcess(int(block.n), block, float(scale), lo, hi)


@dataclass(frozen=True)
class MarginalReport:
    ok: bool
    in_support: bool
    means: list
    stderrs: list
    offending: list
    gamma: float

    def to_dict(self):
        return asdict(self)


def verify_marginal_constraints(process: BlockProcess, cost, N=100_000, seed=0, probe=None, gamma=None, tol_sigmas=3.0):
    """Check ``P[Z_k in S] = 1`` and ``E r(Z_k) <= gamma + tol_sigmas * stderr`` for ``k`` in ``probe``.

    Expectations use importance-weighted draws (see :meth:`BlockProcess.sample`).
    """
    gamma = cost.gamma if gamma is None else float(gamma)
    probe = list(range(process.n + 1)) if probe is None else list(probe)
    z, wts = process.sample(int(N), max(probe) + 1, seed, weighted=True)
    lo, hi = cost.support
    in_support = bool(np.all((z >= lo) & (z <= hi)))
    means, ses, bad = [], [], []
    for k in probe:
        r = wts * np.asarray(cost(z[:, k]), dtype=float)
        mu = float(r.mean())
        se = float(r.std(ddof=1) / math.sqrt(r.size))
        means.append(mu)
        ses.append(se)
        if mu > gamma + tol_sigmas * se:
            bad.append(k)
    return MarginalReport(in_support and not bad, in_support, means, ses, bad, gamma)


# ---------------------------------------------------------------------------
# Processes with a prescribed second moment


def gaussian_rate(sigma2) -> float:
    return 0.5 * math.log(2 * math.pi * math.e * sigma2)


@dataclass(frozen=True)
class SecondMomentReport:
    alpha: float
    sigma2: float
    n: int
    rate: float
    target: float
    scale: float
    block_second_moment: float
    schedule: list
    rates: list
    checks: dict
    ok: bool
    details: dict

    def to_dict(self):
        return asdict(self)


def second_moment_checks(process: BlockProcess, sigma2, N=100_000, seed=0, window=None, tol_sigmas=4.0):
    """Empirical mean, variance and cross-lag products of sampled windows against ``sigma2 * 1{k = k'}``.

    Each statistic passes when it is within ``tol_sigmas`` standard errors of
    its target. Blocks with a rare high-variance component are sampled with
    importance weights (see :meth:`BlockProcess.sample`).
    """
    L = window or process.n + 2
    z, wts = process.sample(int(N), L, seed, weighted=True)
    worst = 0.0
    fails = []

    def gate(name, vals, target):
        nonlocal worst
        vals = wts * vals
        mu = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(vals.size))
        score = abs(mu - target) / se if se > 0 else (0.0 if mu == target else math.inf)
        worst = max(worst, score)
        if score > tol_sigmas:
            fails.append(name)
        return mu

    means = [gate(f"mean[{k}]", z[:, k], 0.0) for k in range(L)]
    second = [gate(f"m2[{k}]", z[:, k] ** 2, sigma2) for k in range(L)]
    cross = {}
    for lag in range(1, L):
        for k in range(L - lag):
            cross[f"{k},{k + lag}"] = gate(f"cross[{k},{k + lag}]", z[:, k] * z[:, k + lag], 0.0)
    return {
        "ok": not fails,
        "failures": fails,
        "worst_sigmas": worst,
        "tol_sigmas": tol_sigmas,
        "means": means,
        "second_moments": second,
        "cross": cross,
        "N": int(N),
        "window": L,
    }


def _gaussian_grid_block(n, eps, cells, half_width):
    cost = quadratic_cost(1.0)
    fstar = solve_maxent(cost, 1.0, window=(-half_width, half_width), cells=cells).grid()
    spec = TypicalSpec(fstar, n, eps, cost, "cell")
    block = build_typical_block(spec, mode="enumerate")
    cw = fstar.cell_width
    m2 = fstar.midpoints**2 + cw**2 / 12
    law = block.law
    v = law.coordinate_expectation([m2[c].mean() for c in law.level_cells])
    return block, v


def construct_second_moment_process(
    sigma2,
    alpha,
    target=None,
    seed=0,
    schedule=None,
    eps=0.1,
    cells=16,
    half_width=4.0,
    N=100_000,
    tol_sigmas=4.0,
    delta_eps=0.1,
):
    """Centered stationary process with ``E[Z_k Z_k'] = sigma2 1{k = k'}`` and a large Renyi rate.

    ``alpha > 1``: the block is uniform on the cell-level typical set of the
    grid maximum-entropy density for a quadratic cost on a symmetric grid; the
    target is a tolerance ``eps_tilde`` below the Gaussian rate (default 0.3).
    ``alpha < 1``: the block mixes uniform densities on ``[-1, 1]^n`` and on
    the tuples of two far cells of width ``W``; ``W`` is chosen so the closed
    form rate reaches the target ``M`` (default 5).

    Blocks are rescaled so the second moment is exactly ``sigma2``. Symmetric
    grids make every block law invariant under sign flips of single
    coordinates, which forces zero means and zero cross-moments.
    """
    sigma2, alpha = float(sigma2), float(alpha)
    if not sigma2 > 0:
        raise ValidationError("sigma2 must be positive")
    if alpha <= 0 or alpha == 1:
        raise ValidationError("alpha must be positive and != 1")
    if alpha > 1:
        eps_tilde = 0.3 if target is None else float(target)
        goal = gaussian_rate(sigma2) - eps_tilde
        schedule = list(schedule or [2, 4, 6, 8, 10, 12])
        rates, found = [], None
        for n in schedule:
            block, v = _gaussian_grid_block(n, eps, cells, half_width)
            c = math.sqrt(sigma2 / v)
            rate = block.log_volume / n + math.log(c)
            rates.append(rate)
            if found is None and rate >= goal:
                found = (n, block, v, c, rate)
        if found is None:
            raise ConstructionError(f"best rate {max(rates):.6g} is below the target {goal:.6g}", achieved=max(rates))
        n, block, v, c, rate = found
        details = {
            "eps": eps,
            "cells": cells,
            "half_width": half_width,
            "gaussian_rate": gaussian_rate(sigma2),
            "gap": gaussian_rate(sigma2) - rate,
            "gaps": [gaussian_rate(sigma2) - r for r in rates],
            "bound_ok": block.bound_ok,
        }
    else:
        M = 5.0 if target is None else float(target)
        goal = M
        n = int((schedule or [12])[-1])
        block, v, c, rate, W = _two_set_for_target(sigma2, alpha, M, n, delta_eps)
        rates = [rate]
        schedule = [n]
        details = {
            "W": W,
            "delta": block.delta,
            "log_volume0": block.block0.log_volume,
            "log_volume1": block.block1.log_volume,
            "band_gap": block.band_gap,
            "closed_form_rate": block.rate(alpha) + math.log(c),
            "enumerated_rate": block.enumerated_entropy(alpha) / n + math.log(c),
        }
    process = build_block_process(block, scale=c)
    checks = second_moment_checks(process, sigma2, N, seed, tol_sigmas=tol_sigmas)
    report = SecondMomentReport(
        alpha, sigma2, n, rate, goal, c, v, schedule, rates, checks,
        bool(checks["ok"] and rate >= goal), details,
    )
    return process, report


def _two_set_block(W, n, alpha, delta_eps):
    f0 = GridDensity(-1.0, 1.0, [0.5, 0.5])
    f1 = GridDensity(-1.5 * W, 1.5 * W, [1 / (2 * W), 0.0, 1 / (2 * W)])
    cost = quadratic_cost()
    v0, v1 = 1.0 / 3.0, 13.0 * W * W / 12.0
    delta = v0 / v1
    g0, g1 = v0, v1
    gamma = (1 - delta) * (g0 + delta_eps) + delta * (g1 + delta_eps)
    block = build_alpha_small_block(f0, f1, (g0, g1), cost, delta_eps, delta, n, gamma=gamma)
    return block


def _two_set_rate(W, n, alpha, sigma2):
    """Closed-form rate of the rescaled two-set block without building it."""
    v0, v1 = 1.0 / 3.0, 13.0 * W * W / 12.0
    delta = v0 / v1
    v = (1 - delta) * v0 + delta * v1
    h = disjoint_two_set_log_entropy(n * math.log(2.0), n * math.log(2 * W), delta, alpha)
    return h / n + 0.5 * math.log(sigma2 / v)


def _two_set_for_target(sigma2, alpha, M, n, delta_eps):
    # rate grows like (1 - 2/n) log W; bracket and bisect on log W, then round W up
    if n <= 2:
        raise ConstructionError("the two-set construction needs n > 2", achieved=None)
    lo, hi = 1.0, 2.0
    while _two_set_rate(hi, n, alpha, sigma2) < M:
        hi *= 2
        if hi > 1e300:
            raise ConstructionError("target rate out of reach", achieved=None)
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if _two_set_rate(mid, n, alpha, sigma2) < M:
            lo = mid
        else:
            hi = mid
    W = float(math.ceil(hi))
    W = max(W, 2 * math.sqrt(1 + 2 * delta_eps) + 1)
    block = _two_set_block(W, n, alpha, delta_eps)
    v = block.coordinate_cost
    c = math.sqrt(sigma2 / v)
    rate = block.rate(alpha) + math.log(c)
    if rate < M:
        raise ConstructionError(f"achieved rate {rate:.6g} is below the target {M}", achieved=rate)
    return block, v, c, rate, W
