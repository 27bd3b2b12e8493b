"""Command-line entry point ``renyi-lab``.

Exit status is 0 on success, 2 when a verification or construction
constraint fails, and 1 on usage, validation or IO errors. JSON output uses
sorted keys so equal inputs and seeds give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .burg import ARModel, AutocovSpec, fit_burg, renyi_rate_sandwich, simulate_ar, verify_burg_constraints
from .density_core import (
    Gaussian,
    GridDensity,
    linear_cost,
    quadratic_cost,
    renyi_entropy,
    shannon_entropy,
    tabulated_cost,
)
from .errors import ConstructionError, RenyiLabError
from .maxent import hstar_curve, maxent_entropy, solve_maxent
from .mixtures import MixtureSpec, mixture_entropy, renyi_mixture_bounds
from .stationarize import BlockStats, construct_second_moment_process, window_rate_bounds
from .suite import run_suite
from .truncation import bounded_approximation, pick_M, truncate_bound, truncation_conditions
from .typicality import TypicalSpec, build_typical_block

OK, USAGE, CONSTRAINT = 0, 1, 2


class UsageError(RenyiLabError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Parsing helpers


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _range(text):
    """``a:b`` (inclusive integers) or a comma list."""
    if isinstance(text, int):
        return [text]
    s = str(text)
    if ":" in s:
        a, b = s.split(":")
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in s.split(",")]


def _load_json(path):
    if path is None:
        raise UsageError("missing input file")
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed JSON in {path}: {exc}") from None


def _cost(name, support=None, gamma=None):
    sup = tuple(_floats(support)) if support is not None else None
    if name == "quadratic":
        return quadratic_cost(gamma, sup or (-math.inf, math.inf))
    if name == "linear":
        return linear_cost(gamma, sup or (0.0, math.inf))
    if isinstance(name, dict):
        data = name
    elif str(name).endswith(".json"):
        data = _load_json(name)
    else:
        raise UsageError(f"unknown cost {name!r}; use quadratic, linear or a tabulated JSON file")
    try:
        return tabulated_cost(data["xs"], data["ys"], gamma, sup or data.get("support"))
    except KeyError as exc:
        raise UsageError(f"tabulated cost JSON missing key {exc}") from None


def _density(path):
    return GridDensity.from_dict(_load_json(path))


def _need(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


# ---------------------------------------------------------------------------
# Commands; each returns (payload, ok) where payload is a dict or CSV rows


def cmd_entropy(args):
    _need(args, "density")
    f = _density(args.density)
    a = float(args.alpha)
    nats = float(shannon_entropy(f)) if a == 1 else float(renyi_entropy(f, a))
    return {"alpha": a, "nats": nats}, True


def cmd_maxent(args):
    _need(args, "gamma")
    cost = _cost(args.cost, args.support)
    window = tuple(_floats(args.window)) if args.window is not None else None
    if args.curve:
        pts = hstar_curve(cost, _floats(args.gamma), window, args.cells)
        return (["gamma", "hstar_nats"], [[p.gamma, p.hstar] for p in pts]), True
    gammas = _floats(args.gamma)
    if len(gammas) != 1:
        raise UsageError("pass one --gamma, or --curve for several")
    f = solve_maxent(cost, gammas[0], window, args.cells)
    out = f.to_dict()
    out["hstar"] = maxent_entropy(f)
    out["gamma"] = gammas[0]
    return out, True


def cmd_truncate(args):
    _need(args, "density")
    f = _density(args.density)
    cost = _cost(args.cost, args.support)
    if args.delta is not None:
        _need(args, "gamma")
        res = bounded_approximation(f, cost, float(args.gamma), float(args.delta))
        if args.density_out:
            _write(json.dumps(res.density.to_dict(), sort_keys=True), args.density_out)
        return res.to_dict(), res.ok
    eps = float(args.eps)
    M = pick_M(f, cost, eps) if str(args.M) == "auto" else float(args.M)
    out, rep = truncate_bound(f, M, cost)
    mass_ok, cost_ok = truncation_conditions(f, cost, M, eps)
    payload = rep.to_dict()
    payload.update(eps=eps, mass_condition=mass_ok, cost_condition=cost_ok, max_density=out.max_density)
    if args.density_out:
        _write(json.dumps(out.to_dict(), sort_keys=True), args.density_out)
    return payload, mass_ok and cost_ok


def _block_from_dict(data):
    try:
        f = GridDensity.from_dict(data["density"])
        cost = _cost(data["cost"]["name"] if data["cost"]["name"] != "tabulated" else data["cost"]["params"],
                     data["cost"].get("support"))
        spec = TypicalSpec(f, int(data["n"]), float(data["eps"]), cost, "cell")
    except KeyError as exc:
        raise UsageError(f"block JSON missing key {exc}") from None
    return build_typical_block(spec, budget=float(data.get("budget", 1e7)), mode="enumerate")


def cmd_typical(args):
    _need(args, "density", "n", "eps")
    f = _density(args.density)
    cost = _cost(args.cost, args.support)
    spec = TypicalSpec(f, args.n, args.eps, cost, "cell")
    block = build_typical_block(spec, budget=args.budget, mode=args.mode, N=args.samples, seed=args.seed)
    if args.block_out:
        desc = {"density": f.to_dict(), "n": spec.n, "eps": spec.eps, "cost": cost.to_dict(), "budget": args.budget}
        _write(json.dumps(desc, sort_keys=True, indent=2), args.block_out)
    return block.to_dict(), block.bound_ok


def cmd_mixture(args):
    _need(args, "spec")
    m = MixtureSpec.from_dict(_load_json(args.spec))
    a = float(args.alpha)
    lower, upper = renyi_mixture_bounds([float(renyi_entropy(c, a)) for c in m.components], m.weights, a)
    exact = mixture_entropy(m, a)
    ok = lower - 1e-9 <= exact <= upper + 1e-9
    return {"alpha": a, "lower": lower, "exact": exact, "upper": upper}, ok


def cmd_stationarize(args):
    _need(args, "block")
    stats = BlockStats.from_block(_block_from_dict(_load_json(args.block)))
    reports = [window_rate_bounds(stats, m, args.alpha, exact=args.exact) for m in _range(args.m)]
    ok = all(r.exact is None or r.lower - 1e-9 <= r.exact <= r.upper + 1e-9 for r in reports)
    if len(reports) == 1 and args.format != "csv":
        return reports[0].to_dict(), ok
    if args.format == "csv":
        return (["m", "lower", "upper", "block_rate"], [[r.m, r.lower, r.upper, r.block_rate] for r in reports]), ok
    return {"reports": [r.to_dict() for r in reports]}, ok


def cmd_construct(args):
    schedule = _range(args.schedule) if args.schedule else None
    process, report = construct_second_moment_process(
        args.sigma2, args.alpha, args.target_rate, seed=args.seed, schedule=schedule, N=args.samples,
    )
    desc = {"n": process.n, "scale": process.scale, "lo": process.lo, "hi": process.hi,
            "block": process.block.to_dict()}
    return {"process": desc, "report": report.to_dict()}, report.ok


def _model(args):
    if args.model:
        return ARModel.from_dict(_load_json(args.model))
    return fit_burg(_floats(args.alphas))


def _innovations(text, sigma2, seed):
    if text in ("gauss", "correlated"):
        return text
    if text.startswith("block"):
        opts = dict(kv.split("=") for kv in text.partition(":")[2].split(",") if kv)
        alpha = float(opts.get("alpha", 2.0))
        target = float(opts["target"]) if "target" in opts else None
        process, report = construct_second_moment_process(sigma2, alpha, target, seed=seed, N=int(opts.get("N", 20_000)))
        if not report.ok:
            raise ConstructionError("innovation block failed its own checks")
        return process
    raise UsageError(f"unknown innovations {text!r}; use gauss, correlated or block:alpha=...")


def cmd_burg(args):
    if args.action == "fit":
        return fit_burg(_floats(args.alphas)).to_dict(), True
    model = _model(args)
    if args.action == "simulate":
        innov = _innovations(args.innovations, model.sigma2, args.seed)
        ens = simulate_ar(model, innov, args.horizon, args.reps, args.seed)
        check = verify_burg_constraints(ens, AutocovSpec(model.alphas), args.tol_sigmas)
        out = check.to_dict()
        out.update(reps=args.reps, horizon=args.horizon, innovations=args.innovations)
        return out, check.ok
    hz = args.hz
    if hz is None:
        hz = args.n * Gaussian(0.0, math.sqrt(model.sigma2)).renyi_entropy(args.alpha)
    rep = renyi_rate_sandwich(hz, model.q, args.alpha, args.n)
    return rep.to_dict(), True


def cmd_verify_all(args):
    if args.suite != "desk":
        raise UsageError(f"unknown suite {args.suite!r}")
    only = set(_range(args.only)) if args.only else None
    report = run_suite(args.seed, only)
    return report, report["ok"]


# ---------------------------------------------------------------------------
# Output


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    with open(path, "w", newline="") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and obj == 0.0:
        return 0.0
    return obj


def emit_report(payload, fmt="json", path=None):
    """Write a dict as JSON, or ``(header, rows)`` as CSV."""
    if isinstance(payload, tuple):
        header, rows = payload
        if fmt == "json":
            text = json.dumps([dict(zip(header, r)) for r in _jsonable(rows)], sort_keys=True, indent=2)
        else:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            w.writerows([[repr(float(v)) if isinstance(v, float) else v for v in r] for r in rows])
            text = buf.getvalue()
    else:
        if fmt == "csv":
            raise UsageError("this command only writes JSON")
        text = json.dumps(_jsonable(payload), sort_keys=True, indent=2)
    _write(text, path)


# ---------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option values; flags on the command line win")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=["json", "csv"], default=None)

    cost = argparse.ArgumentParser(add_help=False)
    cost.add_argument("--cost", default="quadratic", help="quadratic, linear or a tabulated JSON file")
    cost.add_argument("--support", default=None, help="lo,hi (inf allowed)")

    p = _Parser(prog="renyi-lab", description="Renyi entropy rates under cost and autocovariance constraints.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("entropy", parents=[common], help="Renyi or Shannon entropy of a grid density")
    s.add_argument("--density")
    s.add_argument("--alpha", type=float, default=1.0)
    s.set_defaults(func=cmd_entropy)

    s = sub.add_parser("maxent", parents=[common, cost], help="maximum-entropy density for a budget")
    s.add_argument("--gamma", help="budget, or comma list with --curve")
    s.add_argument("--window", default=None, help="lo,hi computation window")
    s.add_argument("--cells", type=int, default=2**14)
    s.add_argument("--curve", action="store_true", help="emit the h* curve (CSV gamma,hstar_nats)")
    s.set_defaults(func=cmd_maxent)

    s = sub.add_parser("truncate", parents=[common, cost], help="cap a density at M")
    s.add_argument("--density")
    s.add_argument("--M", default="auto")
    s.add_argument("--eps", type=float, default=0.01)
    s.add_argument("--gamma", type=float, default=None)
    s.add_argument("--delta", type=float, default=None, help="run the full bounded approximation instead")
    s.add_argument("--density-out", default=None)
    s.set_defaults(func=cmd_truncate)

    s = sub.add_parser("typical", parents=[common], help="typical-set block densities")
    tsub = s.add_subparsers(dest="action", parser_class=_Parser)
    b = tsub.add_parser("build", parents=[common, cost])
    b.add_argument("--density")
    b.add_argument("--n", type=int)
    b.add_argument("--eps", type=float)
    b.add_argument("--mode", choices=["auto", "enumerate", "rejection"], default="auto")
    b.add_argument("--budget", type=float, default=1e7)
    b.add_argument("--samples", type=int, default=200_000)
    b.add_argument("--block-out", default=None, help="write a block descriptor for stationarize")
    b.set_defaults(func=cmd_typical)

    s = sub.add_parser("mixture", parents=[common], help="mixture entropy bounds")
    msub = s.add_subparsers(dest="action", parser_class=_Parser)
    b = msub.add_parser("bounds", parents=[common])
    b.add_argument("--spec")
    b.add_argument("--alpha", type=float, default=2.0)
    b.set_defaults(func=cmd_mixture)

    s = sub.add_parser("stationarize", parents=[common], help="window entropy bounds of a stationarized block")
    s.add_argument("--block")
    s.add_argument("--alpha", type=float, default=2.0)
    s.add_argument("--m", default="24", help="window length or range a:b")
    s.add_argument("--exact", action="store_true", help="also compute the exact window entropy")
    s.set_defaults(func=cmd_stationarize)

    s = sub.add_parser("construct", parents=[common], help="second-moment process with a large Renyi rate")
    s.add_argument("--alpha", type=float, default=2.0)
    s.add_argument("--sigma2", type=float, default=1.0)
    s.add_argument("--target-rate", type=float, default=None)
    s.add_argument("--schedule", default=None, help="block lengths, a:b or comma list")
    s.add_argument("--samples", type=int, default=100_000)
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("burg", parents=[common], help="autocovariance-constrained processes")
    bsub = s.add_subparsers(dest="action", parser_class=_Parser)
    b = bsub.add_parser("fit", parents=[common])
    b.add_argument("--alphas", default="1,0.5,0.25")
    b.set_defaults(func=cmd_burg)
    b = bsub.add_parser("simulate", parents=[common])
    b.add_argument("--model", default=None)
    b.add_argument("--alphas", default="1,0.5,0.25")
    b.add_argument("--innovations", default="gauss")
    b.add_argument("--reps", type=int, default=100_000)
    b.add_argument("--horizon", type=int, default=50)
    b.add_argument("--tol-sigmas", type=float, default=4.0)
    b.set_defaults(func=cmd_burg)
    b = bsub.add_parser("sandwich", parents=[common])
    b.add_argument("--model", default=None)
    b.add_argument("--alphas", default="1,0.5,0.25")
    b.add_argument("--alpha", type=float, default=2.0)
    b.add_argument("--n", type=int, default=20)
    b.add_argument("--hz", type=float, default=None, help="block entropy of the innovations (default Gaussian)")
    b.set_defaults(func=cmd_burg)

    s = sub.add_parser("verify-all", parents=[common], help="run the desk verification suite")
    s.add_argument("--suite", default="desk")
    s.add_argument("--only", default=None, help="criterion numbers, a:b or comma list")
    s.set_defaults(func=cmd_verify_all)
    return p


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv, {}
    cfg = _load_json(known.config)
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    cfg = dict(cfg)
    # drop --config itself so it may appear before the subcommand
    rest = []
    skip = False
    for w in argv:
        if skip:
            skip = False
        elif w == "--config":
            skip = True
        elif not w.startswith("--config="):
            rest.append(w)
    argv = rest
    words = [w for w in argv if not w.startswith("-")]
    lead = []
    for key in ("command", "action"):
        val = cfg.pop(key, None)
        if val is not None and val not in words:
            lead.append(val)
    return lead + list(argv), {k.replace("-", "_"): v for k, v in cfg.items()}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv, defaults = _apply_config(parser, argv)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return USAGE if exc.code else OK
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            return USAGE
        for key, val in defaults.items():
            # config fills in options the command line did not give
            flag = f"--{key.replace('_', '-')}"
            if not any(a == flag or a.startswith(flag + "=") for a in argv):
                setattr(args, key, val)
        payload, ok = args.func(args)
        fmt = args.format or ("csv" if isinstance(payload, tuple) else "json")
        emit_report(payload, fmt, args.output)
    except (ConstructionError,) as exc:
        print(f"renyi-lab: constraint failure: {exc}", file=sys.stderr)
        return CONSTRAINT
    except (RenyiLabError, ValueError, OSError) as exc:
        print(f"renyi-lab: error: {exc}", file=sys.stderr)
        return USAGE
    return OK if ok else CONSTRAINT


if __name__ == "__main__":
    sys.exit(main())
