"""Command-line front end.

Exit codes: 0 success, 2 certificate violation, 3 configuration error,
4 acceptance-threshold failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .certificates import MgfConfig, UnsupportedCheckError, mgf_theorem_check, theorem_bound
from .core import ConfigError, InvalidInputError, NormPair, RngStream
from .harness import (ExperimentConfig, _jsonable, parse_config, rate_slope, run_single,
                      run_trials, summary_json, trace_rows)
from .noise import NoiseKind, NoiseModel, PreconditionError, certify_subgaussian, mgf_lemma_check

EXIT_OK, EXIT_CERT, EXIT_CONFIG, EXIT_ACCEPT = 0, 2, 3, 4


def _load_doc(args) -> dict:
    doc: dict = {}
    for key in ("algorithm", "T", "n_trials", "delta", "base_seed", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    for key in ("problem", "noise", "schedule"):
        val = getattr(args, key, None)
        if val is not None:
            try:
                doc[key] = json.loads(val)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"--{key}: invalid JSON ({exc})") from None
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file_doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
        except OSError as exc:
            raise ConfigError(str(exc)) from None
        if not isinstance(file_doc, dict):
            raise ConfigError("configuration must be a JSON object")
        doc.update(file_doc)
    return doc


def _add_experiment_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON configuration file (its values override flags)")
    p.add_argument("--algorithm")
    p.add_argument("--problem", help="problem spec as JSON")
    p.add_argument("--noise", help="noise spec as JSON")
    p.add_argument("--schedule", help="schedule spec as JSON")
    p.add_argument("--T", type=int)
    p.add_argument("--n-trials", dest="n_trials", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--base-seed", dest="base_seed", type=int)
    p.add_argument("--workers", type=int)


def cmd_run(args) -> int:
    cfg = parse_config(_load_doc(args))
    if args.trace_csv:
        cfg.outputs["trace_csv"] = args.trace_csv
    trace, series = run_single(cfg)
    out = {k: v for k, v in trace.summary().items()}
    out["checks"] = [s.to_dict() for s in series]
    print(json.dumps(_jsonable(out), sort_keys=True, indent=2))
    if args.print_trace:
        for row in trace_rows(trace, series):
            print(",".join("" if v is None else repr(v) for v in row))
    bad = [s.lemma for s in series if not s.ok]
    if bad and not cfg.warn_only:
        print(f"certificate violation: {', '.join(bad)}", file=sys.stderr)
        return EXIT_CERT
    return EXIT_OK


def cmd_trials(args) -> int:
    cfg = parse_config(_load_doc(args))
    stats = run_trials(cfg)
    if not cfg.outputs.get("summary"):
        sys.stdout.write(summary_json(cfg, stats))
    else:
        print(json.dumps({"median": stats.median, "quantile": stats.quantile,
                          "violation_fraction": stats.violation_fraction,
                          "distance_violation_fraction": stats.distance_violation_fraction,
                          "checks_pass": stats.checks_pass}, sort_keys=True))
    if not stats.checks_pass and not cfg.warn_only:
        print("certificate violation", file=sys.stderr)
        return EXIT_CERT
    if stats.violation_fraction is not None:
        limit = args.max_violation
        if limit is None:
            limit = cfg.delta + 3.0 * math.sqrt(cfg.delta / cfg.n_trials)
        fracs = [stats.violation_fraction, stats.distance_violation_fraction]
        if any(f is not None and f > limit for f in fracs):
            print(f"violation fraction above {limit}", file=sys.stderr)
            return EXIT_ACCEPT
    return EXIT_OK


def cmd_certify_noise(args) -> int:
    kind = NoiseKind(args.kind)
    if kind is NoiseKind.GAUSSIAN_ISO:
        model = NoiseModel.gaussian_iso(args.std, args.dim, args.sigma)
    elif kind is NoiseKind.GAUSSIAN_DIAG:
        model = NoiseModel.gaussian_diag(args.stds, args.sigma)
    elif kind is NoiseKind.BOUNDED_RADEMACHER:
        model = NoiseModel.rademacher(args.scale, args.dim, args.sigma)
    else:
        model = NoiseModel.none(args.dim)
    rep = certify_subgaussian(model, args.n_samples, args.n_lambda, RngStream(args.seed))
    print(json.dumps(_jsonable(rep.to_dict()), sort_keys=True, indent=2))
    return EXIT_OK if rep.passed else EXIT_ACCEPT


def cmd_mgf_check(args) -> int:
    if args.lemma:
        model = NoiseModel.rademacher(args.scale, len(args.a)) if args.std is None \
            else NoiseModel.gaussian_iso(args.std, len(args.a))
        rep = mgf_lemma_check(np.asarray(args.a), args.b, model, NormPair.EUCLIDEAN_L2,
                              args.n_trials_mc, RngStream(args.seed))
    else:
        doc = _load_doc(args)
        doc.setdefault("n_trials", 1)
        cfg: ExperimentConfig = parse_config(doc)
        mc = MgfConfig(cfg.algorithm, cfg.objective, cfg.noise, cfg.schedule, cfg.T, cfg.x1,
                       cfg.mirror, cfg.G, cfg.L)
        rep = mgf_theorem_check(mc, args.n_trials_mc, RngStream(args.seed))
    print(json.dumps(_jsonable(rep.to_dict()), sort_keys=True, indent=2))
    return EXIT_OK if rep.passed else EXIT_ACCEPT


def cmd_bounds(args) -> int:
    inputs = {}
    for key in ("D1", "D0", "Delta1", "G", "L", "sigma", "delta", "T"):
        v = getattr(args, key)
        if v is not None:
            inputs[key] = v
    b = theorem_bound(args.theorem, **inputs)
    print(json.dumps(_jsonable(b.to_dict()), sort_keys=True, indent=2))
    return EXIT_OK


def cmd_slope(args) -> int:
    doc = _load_doc(args)
    if args.plot_csv:
        doc.setdefault("outputs", {})["plot_csv"] = args.plot_csv
    res = rate_slope(doc, args.horizons)
    print(json.dumps(res.to_dict(), sort_keys=True, indent=2))
    if args.expect is not None:
        lo, hi = args.expect
        if not lo <= res.slope <= hi:
            print(f"slope {res.slope} outside [{lo}, {hi}]", file=sys.stderr)
            return EXIT_ACCEPT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sgcert", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single traced run with certificate checks")
    _add_experiment_flags(p)
    p.add_argument("--trace-csv", dest="trace_csv")
    p.add_argument("--print-trace", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trials", help="multi-trial sweep with quantiles and violation fractions")
    _add_experiment_flags(p)
    p.add_argument("--max-violation", dest="max_violation", type=float)
    p.set_defaults(func=cmd_trials)

    p = sub.add_parser("certify-noise", help="empirical sub-Gaussian certification")
    p.add_argument("--kind", required=True, choices=[k.value for k in NoiseKind])
    p.add_argument("--std", type=float)
    p.add_argument("--stds", type=float, nargs="+")
    p.add_argument("--scale", type=float)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--sigma", type=float)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=100_000)
    p.add_argument("--n-lambda", dest="n_lambda", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_certify_noise)

    p = sub.add_parser("mgf-check", help="Monte-Carlo moment generating function checks")
    _add_experiment_flags(p)
    p.add_argument("--lemma", action="store_true", help="check the single-vector MGF bound")
    p.add_argument("--a", type=float, nargs="+", default=[1.0])
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--std", type=float)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--n", dest="n_trials_mc", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mgf_check)

    p = sub.add_parser("bounds", help="closed-form high-probability bound")
    p.add_argument("--theorem", required=True)
    for key in ("D1", "D0", "Delta1", "G", "L", "sigma", "delta"):
        p.add_argument(f"--{key}", type=float)
    p.add_argument("--T", type=int)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("slope", help="log-log rate fit of the median metric over horizons")
    _add_experiment_flags(p)
    p.add_argument("--horizons", type=int, nargs="+", required=True)
    p.add_argument("--expect", type=float, nargs=2)
    p.add_argument("--plot-csv", dest="plot_csv")
    p.set_defaults(func=cmd_slope)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError, PreconditionError, UnsupportedCheckError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
