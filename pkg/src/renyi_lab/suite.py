"""Desk-scale verification suite: one check per acceptance criterion.

Every check is a pure function of the seed, so reports rerun byte-identical.
Runtimes are not part of a report; the test suite times the checks itself.
"""

from __future__ import annotations

import math

import numpy as np

from .burg import (
    AutocovSpec,
    fit_burg,
    gaussian_window_entropy,
    levinson_durbin,
    renyi_rate_sandwich,
    simulate_ar,
    verify_burg_constraints,
)
from .density_core import (
    Gaussian,
    GridDensity,
    Uniform,
    cost_expectation,
    linear_cost,
    quadratic_cost,
    quantize,
    renyi_entropy,
    shannon_entropy,
)
from .maxent import curve_violations, hstar_curve, maxent_entropy, optimality_probe, solve_maxent
from .mixtures import MixtureSpec, mixture_entropy, renyi_mixture_bounds
from .stationarize import BlockStats, _two_set_block, construct_second_moment_process, window_rate_bounds
from .truncation import bounded_approximation
from .typicality import TypicalSpec, build_typical_block, exact_typical_mass, find_n_threshold, typical_mass

SLACK = 1e-9
ALPHAS = (0.5, 2.0, 3.0)


def _result(number, name, ok, **details):
    return {"criterion": number, "name": name, "ok": bool(ok), "details": details}


def _rng(seed, number):
    return np.random.default_rng([int(seed), number])


def check_entropy_oracles(seed=0, cells=2**14):
    cases = {
        "gauss(0,1)": (Gaussian(0.0, 1.0), -12.0, 12.0),
        "gauss(1,0.5)": (Gaussian(1.0, 0.5), -5.0, 7.0),
        "uniform(0,1)": (Uniform(0.0, 1.0), 0.0, 1.0),
        "uniform(-2,3)": (Uniform(-2.0, 3.0), -2.0, 3.0),
    }
    worst = 0.0
    rows = []
    for name, (dist, lo, hi) in cases.items():
        g = quantize(dist, lo, hi, cells)
        err = abs(float(shannon_entropy(g)) - dist.shannon_entropy())
        row = {"density": name, "shannon_err": err}
        for a in ALPHAS:
            e = abs(float(renyi_entropy(g, a)) - dist.renyi_entropy(a))
            row[f"renyi_err_{a}"] = e
            err = max(err, e)
        worst = max(worst, err)
        rows.append(row)
    return _result(1, "entropy oracles", worst <= 1e-6, worst_error=worst, tolerance=1e-6, rows=rows)


def _random_grid(rng, max_cells=64):
    cells = int(rng.integers(1, max_cells + 1))
    lo = float(rng.uniform(-3, 1))
    hi = lo + float(rng.uniform(0.1, 5))
    w = np.exp(rng.normal(0, 2, cells))
    w[rng.random(cells) < 0.2] = 0.0
    if not w.any():
        w[0] = 1.0
    return GridDensity.from_unnormalized(lo, hi, w)


def check_ordering(seed=0, trials=1000):
    rng = _rng(seed, 2)
    violations = 0
    worst = -math.inf
    for _ in range(trials):
        f = _random_grid(rng)
        a = float(rng.choice([rng.uniform(0.05, 0.95), rng.uniform(1.05, 6.0)]))
        h, ha = float(shannon_entropy(f)), float(renyi_entropy(f, a))
        excess = ha - h if a > 1 else h - ha
        worst = max(worst, excess)
        violations += excess > SLACK
    return _result(2, "renyi vs shannon ordering", violations == 0, trials=trials, violations=violations, worst_excess=worst)


def check_maxent(seed=0):
    cost = quadratic_cost()
    window = (-12.0, 12.0)
    f1 = solve_maxent(cost, 1.0, window)
    err = abs(maxent_entropy(f1) - 0.5 * math.log(2 * math.pi * math.e))
    gammas = np.linspace(0.1, 2.0, 20)
    pts = hstar_curve(cost, gammas, window)
    bad = curve_violations(pts, tol=1e-6)
    probe = optimality_probe(f1, trials=200, seed=seed)
    ok = err <= 1e-5 and not bad and probe <= SLACK
    return _result(
        3, "maxent solver", ok,
        gaussian_error=err, lambda1=f1.lambda1, curve_violations=len(bad), probe_best_gain=probe,
        curve=[[p.gamma, p.hstar] for p in pts],
    )


def check_truncation(seed=0, trials=500):
    rng = _rng(seed, 4)
    costs = [quadratic_cost(), linear_cost(support=(-math.inf, math.inf))]
    violations = []
    worst_cost = worst_h = -math.inf
    for i in range(trials):
        f = _random_grid(rng, 48)
        cost = costs[i % 2]
        gamma = cost_expectation(f, cost) + float(rng.uniform(0, 1))
        delta = float(rng.uniform(0.01, 0.5))
        out = bounded_approximation(f, cost, gamma, delta)
        worst_cost = max(worst_cost, out.cost - gamma - delta)
        worst_h = max(worst_h, out.h_original - delta - out.h)
        if not (out.ok and math.isfinite(out.density.max_density)):
            violations.append(i)
    return _result(
        4, "bounded approximation", not violations,
        trials=trials, violations=violations, worst_cost_excess=worst_cost, worst_entropy_shortfall=worst_h,
    )


def check_typicality(seed=0, N=10_000):
    f = GridDensity(0.0, 1.0, [1.5, 0.5])
    cost = linear_cost(support=(0.0, 1.0))
    spec = TypicalSpec(f, 10, 0.1, cost, "cell")
    exact = exact_typical_mass(spec)
    p, se = typical_mass(spec, N, seed)
    sigmas = abs(p - exact) / se
    threshold = find_n_threshold(f, 0.1, cost, 40)
    at = build_typical_block(spec.with_n(threshold), mode="enumerate") if threshold else None
    ok = sigmas <= 3 and at is not None and at.bound_ok
    return _result(
        5, "typical set mass and cardinality", ok,
        exact_mass=exact, mc_mass=p, mc_stderr=se, sigmas=sigmas, N=N, n_threshold=threshold,
        log_volume=at.log_volume if at else None, card_lower_bound=at.card_lower_bound if at else None,
    )


def check_mixtures(seed=0, trials=1000):
    rng = _rng(seed, 6)
    violations = 0
    worst = -math.inf
    for i in range(trials):
        alpha = (0.5, 2.0, 4.0)[i % 3]
        cells = int(rng.integers(2, 33))
        k = int(rng.integers(2, 6))
        comps = []
        for _ in range(k):
            w = np.exp(rng.normal(0, 1.5, cells))
            w[rng.random(cells) < 0.3] = 0.0
            if not w.any():
                w[int(rng.integers(cells))] = 1.0
            comps.append(GridDensity.from_unnormalized(0.0, 1.0, w))
        q = rng.dirichlet(np.ones(k))
        if rng.random() < 0.1:
            q[0] = 0.0
        q = q / q.sum()
        try:
            m = MixtureSpec(comps, q)
        except ValueError:
            q[-1] = 1.0 - math.fsum(q[:-1])
            m = MixtureSpec(comps, q)
        exact = mixture_entropy(m, alpha)
        lo, hi = renyi_mixture_bounds([float(renyi_entropy(c, alpha)) for c in comps], q, alpha)
        excess = max(lo - exact, exact - hi)
        worst = max(worst, excess)
        violations += excess > SLACK
    block = _two_set_block(10.0, 6, 0.5, 0.1)
    closed_err = max(abs(block.renyi_entropy(a) - block.enumerated_entropy(a)) for a in (0.5, 0.8))
    ok = violations == 0 and closed_err <= 1e-9
    return _result(
        6, "mixture sandwich", ok,
        trials=trials, violations=violations, worst_excess=worst, two_set_closed_form_error=closed_err,
    )


def stationarization_block():
    f = GridDensity(0.0, 1.0, [1.5, 0.5])
    spec = TypicalSpec(f, 3, 0.3, linear_cost(support=(0.0, 1.0)), "cell")
    return build_typical_block(spec, mode="enumerate")


def check_stationarization(seed=0, ms=range(7, 25)):
    stats = BlockStats.from_block(stationarization_block())
    rows = []
    ok = True
    for alpha in (2.0, 0.5):
        # boundary pieces cost at most twice the worst head plus one block
        C = 2 * (max(abs(stats.head(r, alpha)) for r in range(1, stats.n)) + abs(stats.h_block(alpha)))
        for m in ms:
            rep = window_rate_bounds(stats, m, alpha, exact=True)
            err = abs(rep.exact / m - rep.block_rate)
            within = rep.lower - SLACK <= rep.exact <= rep.upper + SLACK
            rows.append({"alpha": alpha, "m": m, "lower": rep.lower, "exact": rep.exact, "upper": rep.upper,
                         "rate_error": err, "allowance": 0.15 * abs(rep.block_rate) + C / m, "within": within})
            ok = ok and within
        last = rows[-1]
        ok = ok and last["rate_error"] < last["allowance"]
    return _result(7, "stationarization bounds", ok, rows=rows)


def check_second_moment(seed=0, N=100_000):
    _, hi = construct_second_moment_process(1.0, 2.0, seed=seed, N=N)
    _, lo = construct_second_moment_process(1.0, 0.5, target=5.0, seed=seed, N=N)
    gaps = hi.details["gaps"]
    progress = all(g > 0 for g in gaps) and all(b < a for a, b in zip(gaps, gaps[1:]))
    closed = lo.details["closed_form_rate"]
    ok = hi.checks["ok"] and lo.checks["ok"] and closed >= 5.0 and progress
    return _result(
        8, "second-moment process", ok,
        alpha2={"n": hi.n, "rate": hi.rate, "schedule": hi.schedule, "gaps": gaps,
                "worst_sigmas": hi.checks["worst_sigmas"], "checks_ok": hi.checks["ok"]},
        alpha05={"n": lo.n, "closed_form_rate": closed, "enumerated_rate": lo.details["enumerated_rate"],
                 "W": lo.details["W"], "delta": lo.details["delta"],
                 "worst_sigmas": lo.checks["worst_sigmas"], "checks_ok": lo.checks["ok"]},
    )


def random_autocov(rng, p):
    """Autocovariances of a positive spectral measure plus white noise, so the Toeplitz matrix is PD."""
    om = rng.uniform(0, math.pi, 4)
    c = rng.uniform(0.1, 1.0, 4)
    a = np.array([c @ np.cos(om * k) for k in range(p + 1)])
    a[0] += float(rng.uniform(0.1, 0.5))
    return a


def check_burg(seed=0, R=100_000, N=50):
    rng = _rng(seed, 9)
    solve_err = 0.0
    for p in range(1, 9):
        for _ in range(5):
            a = random_autocov(rng, p)
            model = levinson_durbin(AutocovSpec(a))
            solve_err = max(solve_err, float(np.max(np.abs(model.a - np.linalg.solve(model.Kp, a[1:])))))
    alphas = [1.0, 0.5, 0.25]
    model = fit_burg(alphas)
    ens = verify_burg_constraints(simulate_ar(model, "gauss", N, R, seed), alphas)
    gaps = {}
    formula = float(np.min(2.0 / (1 - 2.0) * np.log(model.q)))
    gap_err = scale_err = 0.0
    for n in (5, 10, 20, 40):
        rep = renyi_rate_sandwich(0.0, model.q, 2.0, n)
        gaps[n] = rep.rate_gap
        gap_err = max(gap_err, abs(rep.gap - formula))
        scale_err = max(scale_err, abs(rep.rate_gap * n - formula))
    jac = max(abs(gaussian_window_entropy(model, n, 2.0) - n * Gaussian(0, math.sqrt(model.sigma2)).renyi_entropy(2.0))
              for n in (5, 10, 20))
    ok = solve_err <= 1e-12 and ens.ok and gap_err == 0.0 and scale_err <= 1e-12 and jac <= 1e-9
    return _result(
        9, "burg", ok,
        levinson_max_error=solve_err, ensemble_worst_sigmas=ens.worst_sigmas, ensemble_ok=ens.ok,
        sandwich_gap=formula, sandwich_gap_error=gap_err, rate_gap_scaling_error=scale_err,
        rate_gaps={str(k): v for k, v in gaps.items()}, unit_jacobian_error=jac,
    )


CHECKS = {
    1: check_entropy_oracles,
    2: check_ordering,
    3: check_maxent,
    4: check_truncation,
    5: check_typicality,
    6: check_mixtures,
    7: check_stationarization,
    8: check_second_moment,
    9: check_burg,
}


def run_suite(seed=0, only=None):
    results = [CHECKS[k](seed) for k in sorted(CHECKS) if only is None or k in only]
    return {"suite": "desk", "seed": int(seed), "ok": all(r["ok"] for r in results), "criteria": results}
