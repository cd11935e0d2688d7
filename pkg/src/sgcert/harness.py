"""Experiment configuration, multi-trial runner, quantiles, rate fits and CSV/JSON output.

A configuration is a single JSON object; see ``CONFIG_KEYS`` and the README
for the schema. Unknown keys anywhere in the document are rejected.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .algorithms import (RunTrace, StepSchedule, SCHEDULE_PARAMS, run_adagrad_coord,
                         run_adagrad_norm, run_asmd, run_sgd, run_smd)
from .certificates import (REL_TOL, ResidualSeries, TheoremBound, build_weights,
                           check_adagrad_lemmas, check_asmd, check_descent, check_md, check_sgd,
                           envelope_G, md_high_probability_implication, theorem_bound,
                           weight_regime_for)
from .core import ConfigError, Domain, Objective, RngStream, make_problem
from .geometry import MirrorMap, bregman
from .noise import NoiseKind, NoiseModel, StochasticOracle

ALGORITHMS = ("smd", "asmd", "sgd", "adagrad_norm", "adagrad_coord")
METRICS = ("avg_gap", "avg_grad_sq", "min_grad_sq", "final_gap", "gap_of_average", "final_bregman")
CHECKS = ("md_step", "asmd_step", "sgd_step", "smoothness", "adagrad", "md_event")
CONFIG_KEYS = {
    "algorithm", "problem", "mirror", "schedule", "adagrad", "noise", "T", "n_trials", "delta",
    "base_seed", "x1", "metric", "bound", "checks", "G", "L", "summary_only", "warn_only",
    "workers", "outputs",
}
OUTPUT_KEYS = {"summary", "trials_csv", "trace_csv", "plot_csv"}
NOISE_KEYS = {"kind", "std", "stds", "scale", "sigma"}
DEFAULT_METRIC = {"smd": "avg_gap", "asmd": "final_gap", "sgd": "avg_grad_sq",
                  "adagrad_norm": "avg_grad_sq", "adagrad_coord": "avg_grad_sq"}
DEFAULT_BOUND = {"md_fixed": "md_fixed", "md_varying": "md_varying", "sgd_fixed": "sgd_fixed",
                 "sgd_varying": "sgd_varying", "asmd_fixed": "asmd_fixed",
                 "asmd_varying": "asmd_varying"}
BOUND_METRIC = {"md_fixed": "avg_gap", "md_varying": "avg_gap", "sgd_fixed": "avg_grad_sq",
                "sgd_varying": "avg_grad_sq", "asmd_fixed": "final_gap",
                "asmd_varying": "final_gap"}


def quantile_index(n: int, delta: float) -> int:
    """1-based order statistic k = ceil((1 - delta) n)."""
    return max(1, math.ceil(round((1.0 - delta) * n, 9)))


def empirical_quantile(values, delta: float) -> float:
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ValueError("no values")
    return float(v[quantile_index(v.size, delta) - 1])


def violation_fraction(values, bound: float) -> float:
    v = np.asarray(values, dtype=np.float64)
    return float(np.mean(v > bound)) if v.size else 0.0


@dataclass
class ExperimentConfig:
    """Validated experiment description. ``raw`` keeps the normalized JSON form."""

    raw: dict
    objective: Objective
    noise: NoiseModel
    algorithm: str
    mirror: MirrorMap | None
    schedule: StepSchedule | None
    T: int
    n_trials: int
    delta: float
    base_seed: int
    x1: np.ndarray
    metric: str
    bound: TheoremBound | None
    checks: tuple
    G: float | None
    L: float | None
    adagrad_eta: float = 1.0
    adagrad_b0: Any = 1.0
    summary_only: bool = False
    warn_only: bool = False
    workers: int | None = None
    outputs: dict = field(default_factory=dict)


def _reject_unknown(d: Mapping, allowed: set, where: str):
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {extra}")


def make_noise(spec: Mapping | None, dim: int) -> NoiseModel:
    if spec is None:
        return NoiseModel.none(dim)
    if not isinstance(spec, Mapping):
        raise ConfigError("noise must be an object")
    _reject_unknown(spec, NOISE_KEYS, "noise")
    kind = spec.get("kind", "none")
    try:
        nk = NoiseKind(kind)
    except ValueError:
        raise ConfigError(f"unknown noise kind {kind!r}") from None
    sigma = spec.get("sigma")
    try:
        if nk is NoiseKind.NONE:
            return NoiseModel.none(dim)
        if nk is NoiseKind.GAUSSIAN_ISO:
            return NoiseModel.gaussian_iso(float(spec["std"]), dim, sigma)
        if nk is NoiseKind.GAUSSIAN_DIAG:
            stds = spec["stds"]
            if len(stds) != dim:
                raise ConfigError("noise stds must have one entry per coordinate")
            return NoiseModel.gaussian_diag(stds, sigma)
        return NoiseModel.rademacher(float(spec["scale"]), dim, sigma)
    except KeyError as exc:
        raise ConfigError(f"noise {kind}: missing {exc.args[0]!r}") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"noise {kind}: {exc}") from None


def _fill_schedule(spec: Mapping, obj: Objective, mirror: MirrorMap | None, noise: NoiseModel,
                   x1: np.ndarray, T: int, delta: float, G, L) -> StepSchedule:
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise ConfigError("schedule must be an object with a 'kind'")
    kind = spec["kind"]
    if kind not in SCHEDULE_PARAMS:
        raise ConfigError(f"unknown schedule kind {kind!r}")
    params = {k: v for k, v in spec.items() if k != "kind"}
    need = SCHEDULE_PARAMS[kind]
    _reject_unknown(params, set(need), f"schedule {kind}")
    for key in need:
        if key in params:
            continue
        if key == "T":
            params["T"] = T
        elif key == "delta":
            params["delta"] = delta
        elif key == "sigma":
            params["sigma"] = noise.sigma
        elif key in ("D1", "D0"):
            if obj.x_star is None:
                raise ConfigError(f"schedule {kind} needs {key}; the minimizer is unknown")
            params[key] = float(bregman(mirror or MirrorMap.EUCLIDEAN, obj.x_star, x1))
        elif key == "Delta1":
            params["Delta1"] = float(obj.eval(x1) - obj.f_star)
        elif key == "G":
            g = G
            if g is None:
                g = obj.upper_G if kind.startswith("asmd") else obj.lipschitz_G
            if g is None:
                raise ConfigError(f"schedule {kind} needs G; the objective has none")
            params["G"] = g
        elif key == "L":
            l_ = L
            if l_ is None:
                l_ = obj.upper_L if kind.startswith("asmd") else obj.smooth_L
            if l_ is None:
                raise ConfigError(f"schedule {kind} needs L; the objective has none")
            params["L"] = l_
        else:
            raise ConfigError(f"schedule {kind} needs {key}")
    return StepSchedule.make(kind, **params)


def parse_config(doc: Mapping) -> ExperimentConfig:
    """Validate a JSON configuration and resolve every derived constant."""
    if not isinstance(doc, Mapping):
        raise ConfigError("configuration must be a JSON object")
    doc = copy.deepcopy(dict(doc))
    _reject_unknown(doc, CONFIG_KEYS, "config")
    for key in ("algorithm", "problem", "T"):
        if key not in doc:
            raise ConfigError(f"missing required key {key!r}")
    alg = doc["algorithm"]
    if alg not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {alg!r}")
    if not isinstance(doc["problem"], Mapping):
        raise ConfigError("problem must be an object")
    obj = make_problem(doc["problem"])
    T = doc["T"]
    if not isinstance(T, int) or isinstance(T, bool) or T < 1:
        raise ConfigError("T must be a positive integer")
    n_trials = doc.get("n_trials", 1)
    if not isinstance(n_trials, int) or n_trials < 1:
        raise ConfigError("n_trials must be a positive integer")
    delta = float(doc.get("delta", 0.1))
    if not 0.0 < delta < 1.0:
        raise ConfigError("delta must lie in (0, 1)")
    seed = doc.get("base_seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("base_seed must be a nonnegative integer")
    mirror = None
    if alg in ("smd", "asmd"):
        default = "euclidean" if obj.domain is Domain.ALL_SPACE else "neg_entropy"
        try:
            mirror = MirrorMap(doc.get("mirror", default))
        except ValueError:
            raise ConfigError(f"unknown mirror map {doc.get('mirror')!r}") from None
        if mirror.domain is not obj.domain:
            raise ConfigError("mirror map does not match the problem's domain")
    elif "mirror" in doc:
        raise ConfigError(f"{alg} takes no mirror map")
    elif obj.domain is not Domain.ALL_SPACE:
        raise ConfigError(f"{alg} runs on R^d only")
    noise = make_noise(doc.get("noise"), obj.dim)
    x1 = obj.default_x1() if doc.get("x1") is None else np.asarray(doc["x1"], dtype=np.float64)
    if x1.shape != (obj.dim,):
        raise ConfigError("x1 has the wrong dimension")
    G = doc.get("G")
    L = doc.get("L")
    schedule = None
    eta, b0 = 1.0, 1.0
    if alg in ("smd", "asmd", "sgd"):
        if "adagrad" in doc:
            raise ConfigError(f"{alg} takes no adagrad block")
        if "schedule" not in doc:
            raise ConfigError(f"{alg} needs a schedule")
        schedule = _fill_schedule(doc["schedule"], obj, mirror, noise, x1, T, delta, G, L)
    else:
        if "schedule" in doc:
            raise ConfigError("AdaGrad variants take an 'adagrad' block, not a schedule")
        ad = doc.get("adagrad", {})
        _reject_unknown(ad, {"eta", "b0"}, "adagrad")
        eta = float(ad.get("eta", 1.0))
        b0 = ad.get("b0", 1.0)
        if alg == "adagrad_coord":
            b0 = [float(v) for v in np.broadcast_to(np.asarray(b0, dtype=np.float64), (obj.dim,))]
        else:
            b0 = float(b0)
        if not eta > 0 or np.any(np.asarray(b0) <= 0):
            raise ConfigError("AdaGrad needs positive eta and b0")
    metric = doc.get("metric")
    bound_id = doc.get("bound", "auto")
    bound = None
    if bound_id == "auto":
        bound_id = DEFAULT_BOUND.get(schedule.kind) if schedule is not None else None
    if bound_id is not None:
        if schedule is None or bound_id != DEFAULT_BOUND.get(schedule.kind):
            raise ConfigError(f"bound {bound_id!r} does not match the schedule")
        fam = bound_id.split("_")[0]
        if {"md": "smd", "asmd": "asmd", "sgd": "sgd"}[fam] != alg:
            raise ConfigError(f"bound {bound_id!r} does not match algorithm {alg}")
        p = schedule.p
        inputs = {k: p[k] for k in ("D1", "D0", "Delta1", "G", "L", "sigma") if k in p}
        if bound_id.startswith("sgd_varying"):
            inputs["Delta1"] = float(obj.eval(x1) - obj.f_star)
            inputs["sigma"] = noise.sigma
        inputs["delta"] = delta
        inputs["T"] = T
        bound = theorem_bound(bound_id, **inputs)
        if metric is None:
            metric = BOUND_METRIC[bound_id]
    if metric is None:
        metric = DEFAULT_METRIC[alg]
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}")
    checks = tuple(doc.get("checks", ()))
    for c in checks:
        if c not in CHECKS:
            raise ConfigError(f"unknown check {c!r}")
    outputs = doc.get("outputs", {})
    _reject_unknown(outputs, OUTPUT_KEYS, "outputs")
    workers = doc.get("workers")
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        raise ConfigError("workers must be a positive integer")
    summary_only = bool(doc.get("summary_only", False))
    if summary_only and checks:
        raise ConfigError("certificate checks need full traces (summary_only is set)")
    return ExperimentConfig(doc, obj, noise, alg, mirror, schedule, T, n_trials, delta, seed, x1,
                            metric, bound, checks, G, L, eta, b0, summary_only,
                            bool(doc.get("warn_only", False)), workers, dict(outputs))


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(doc)


def execute(cfg: ExperimentConfig, rng: RngStream, x1=None) -> RunTrace:
    """Run the configured algorithm once (or on a batch of starting points)."""
    oracle = StochasticOracle(cfg.objective, cfg.noise)
    x1 = cfg.x1 if x1 is None else x1
    so = cfg.summary_only
    if cfg.algorithm == "smd":
        return run_smd(oracle, cfg.mirror, cfg.schedule, x1, cfg.T, rng, so)
    if cfg.algorithm == "asmd":
        return run_asmd(oracle, cfg.mirror, cfg.schedule, x1, cfg.T, rng, so)
    if cfg.algorithm == "sgd":
        return run_sgd(oracle, cfg.schedule, x1, cfg.T, rng, so)
    if cfg.algorithm == "adagrad_norm":
        return run_adagrad_norm(oracle, cfg.adagrad_eta, cfg.adagrad_b0, x1, cfg.T, rng, so)
    return run_adagrad_coord(oracle, cfg.adagrad_eta, cfg.adagrad_b0, x1, cfg.T, rng, so)


def certificate_G(cfg: ExperimentConfig, trace: RunTrace) -> float:
    if cfg.G is not None:
        return float(cfg.G)
    if cfg.algorithm == "asmd":
        if cfg.objective.upper_G is None:
            raise ConfigError("no upper-model constant G for this objective")
        return cfg.objective.upper_G
    if cfg.objective.lipschitz_G is not None:
        return cfg.objective.lipschitz_G
    return envelope_G(trace)


def certificate_L(cfg: ExperimentConfig) -> float | None:
    if cfg.L is not None:
        return float(cfg.L)
    if cfg.algorithm == "asmd":
        return cfg.objective.upper_L
    return cfg.objective.smooth_L


def run_checks(cfg: ExperimentConfig, trace: RunTrace) -> list:
    """Evaluate the requested certificates; returns a list of ResidualSeries."""
    out: list[ResidualSeries] = []
    for c in cfg.checks:
        if c == "md_step":
            out.append(check_md(trace, certificate_G(cfg, trace)))
        elif c == "asmd_step":
            L = certificate_L(cfg)
            if L is None:
                raise ConfigError("no upper-model constant L for this objective")
            out.append(check_asmd(trace, certificate_G(cfg, trace), L))
        elif c == "sgd_step":
            L = certificate_L(cfg)
            if L is None:
                raise ConfigError("sgd_step needs a smoothness constant")
            out.append(check_sgd(trace, L))
        elif c == "smoothness":
            L = certificate_L(cfg)
            if L is None:
                raise ConfigError("smoothness check needs a smoothness constant")
            out.append(check_descent(trace, L))
        elif c == "adagrad":
            out.extend(check_adagrad_lemmas(trace, cfg.objective, certificate_L(cfg)))
        elif c == "md_event":
            G = certificate_G(cfg, trace)
            w = build_weights(weight_regime_for("smd", cfg.schedule), cfg.noise.sigma,
                              cfg.schedule, cfg.T)
            r = md_high_probability_implication(trace, w, G, cfg.delta)
            rhs = np.asarray(r["rhs"])
            lhs = np.asarray(r["lhs"]) if r["event"] else np.asarray(-np.inf)
            out.append(ResidualSeries("md_event", np.maximum(lhs, -1e300), rhs, cfg.T))
    return out


def _metric_value(trace: RunTrace, metric: str) -> float:
    v = trace.summary()[metric]
    if v is None:
        raise ConfigError(f"metric {metric} is unavailable for this run")
    return float(v)


def _trial(cfg: ExperimentConfig, i: int) -> dict:
    rng = RngStream(cfg.base_seed, i)
    trace = execute(cfg, rng)
    rec = {"trial": i, "seed": cfg.base_seed, "metric": _metric_value(trace, cfg.metric)}
    fb = trace.summary()["final_bregman"]
    rec["final_bregman"] = None if fb is None else float(fb)
    if trace.algorithm == "smd" and trace.x_star is not None:
        rec["initial_bregman"] = float(bregman(trace.mirror, trace.x_star, cfg.x1))
    rec["clamped"] = trace.clamped
    rec["checks"] = [dict(s.to_dict(), trial=i) for s in run_checks(cfg, trace)]
    return rec


def _trial_from_doc(args) -> dict:
    doc, i = args
    return _trial(parse_config(doc), i)


@dataclass
class TrialStats:
    metric: str
    values: list
    median: float
    quantile: float
    quantile_k: int
    delta: float
    bound: float | None
    violation_fraction: float | None
    distance_bound_factor: float | None = None
    distance_violation_fraction: float | None = None
    checks: dict = field(default_factory=dict)
    checks_pass: bool = True
    clamped: int = 0
    records: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "n_trials": len(self.values),
            "median": self.median,
            "quantile": self.quantile,
            "quantile_k": self.quantile_k,
            "delta": self.delta,
            "bound": self.bound,
            "violation_fraction": self.violation_fraction,
            "distance_bound_factor": self.distance_bound_factor,
            "distance_violation_fraction": self.distance_violation_fraction,
            "checks": self.checks,
            "checks_pass": self.checks_pass,
            "clamped": self.clamped,
            "values": self.values,
        }


def _aggregate_checks(records: list) -> tuple[dict, bool]:
    agg: dict = {}
    for rec in records:
        for c in rec["checks"]:
            a = agg.setdefault(c["lemma"], {"pass": True, "min_residual": math.inf,
                                            "worst_normalized": math.inf, "worst_trial": None,
                                            "argmin_step": None, "failed_trials": []})
            a["min_residual"] = min(a["min_residual"], c["min_residual"])
            if c["worst_normalized"] < a["worst_normalized"]:
                a["worst_normalized"] = c["worst_normalized"]
                a["worst_trial"] = c["trial"]
                a["argmin_step"] = c["argmin_step"]
            if not c["pass"]:
                a["pass"] = False
                a["failed_trials"].append(c["trial"])
    ok = all(a["pass"] for a in agg.values())
    return agg, ok


def summarize(cfg: ExperimentConfig, records: list) -> TrialStats:
    vals = [r["metric"] for r in records]
    bound = cfg.bound.value if cfg.bound is not None else None
    st = TrialStats(cfg.metric, vals, float(np.median(vals)), empirical_quantile(vals, cfg.delta),
                    quantile_index(len(vals), cfg.delta), cfg.delta, bound,
                    None if bound is None else violation_fraction(vals, bound), records=records)
    if cfg.bound is not None and cfg.bound.distance_bound is not None:
        D1 = cfg.bound.inputs.get("D1", cfg.bound.inputs.get("D0"))
        st.distance_bound_factor = cfg.bound.distance_bound / D1
        dist = [r["final_bregman"] for r in records]
        if all(d is not None for d in dist):
            st.distance_violation_fraction = violation_fraction(dist, cfg.bound.distance_bound)
    st.checks, st.checks_pass = _aggregate_checks(records)
    st.clamped = int(sum(r["clamped"] for r in records))
    return st


def _workers(cfg: ExperimentConfig) -> int:
    if cfg.workers is not None:
        return min(cfg.workers, cfg.n_trials)
    return max(1, min(cfg.n_trials, os.cpu_count() or 1))


def run_trials(cfg: ExperimentConfig | Mapping, write: bool = True) -> TrialStats:
    """Independent trials with RngStream(base_seed, trial); outputs are ordered by trial index."""
    if not isinstance(cfg, ExperimentConfig):
        cfg = parse_config(cfg)
    nw = _workers(cfg)
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as ex:
            records = list(ex.map(_trial_from_doc, [(cfg.raw, i) for i in range(cfg.n_trials)]))
    else:
        records = [_trial(cfg, i) for i in range(cfg.n_trials)]
    records.sort(key=lambda r: r["trial"])
    stats = summarize(cfg, records)
    if write:
        if cfg.outputs.get("summary"):
            write_summary(cfg, stats, cfg.outputs["summary"])
        if cfg.outputs.get("trials_csv"):
            write_trials_csv(stats, cfg.outputs["trials_csv"])
    return stats


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else repr(f)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def summary_document(cfg: ExperimentConfig, stats: TrialStats) -> dict:
    doc = {
        "config": cfg.raw,
        "resolved": {
            "algorithm": cfg.algorithm,
            "schedule": None if cfg.schedule is None else cfg.schedule.to_dict(),
            "noise_sigma": cfg.noise.sigma,
            "objective": cfg.objective.describe(),
            "bound": None if cfg.bound is None else cfg.bound.to_dict(),
        },
        "stats": stats.to_dict(),
    }
    return _jsonable(doc)


def summary_json(cfg: ExperimentConfig, stats: TrialStats) -> str:
    return json.dumps(summary_document(cfg, stats), sort_keys=True, indent=2) + "\n"


def write_summary(cfg: ExperimentConfig, stats: TrialStats, path: str):
    with open(path, "w") as fh:
        fh.write(summary_json(cfg, stats))


TRIAL_COLUMNS = ("trial", "seed", "metric", "bound", "violated")
TRACE_COLUMNS = ("t", "eta_t", "f_gap", "grad_sq", "bregman_to_opt", "b_t", "residual_min")
PLOT_COLUMNS = ("T", "median", "quantile", "bound")


def write_trials_csv(stats: TrialStats, path: str):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIAL_COLUMNS)
        for r in stats.records:
            b = stats.bound
            w.writerow([r["trial"], r["seed"], repr(r["metric"]), "" if b is None else repr(b),
                         "" if b is None else int(r["metric"] > b)])


def trace_rows(trace: RunTrace, series: list | None = None) -> list:
    """Per-step rows in TRACE_COLUMNS order for a single (unbatched) run."""
    T = trace.T
    if trace.algorithm == "asmd":
        pts = trace.z[1:] if trace.full else None
    else:
        pts = trace.x[:T] if trace.full else None
    if pts is not None and trace.x_star is not None:
        dist = bregman(trace.mirror or MirrorMap.EUCLIDEAN, trace.x_star, pts)
    else:
        dist = [None] * T
    if trace.b is not None:
        b = trace.b[1:]
        b = b if b.ndim == 1 else np.max(b, axis=-1)
    else:
        b = [None] * T
    res = np.full(T, np.nan)
    for s in series or []:
        if s.steps.ndim == 1 and s.steps.size == T:
            norm = s.residual / (1.0 + np.abs(s.rhs))
            norm = norm if norm.ndim == 1 else np.min(norm.reshape(T, -1), axis=1)
            res = np.fmin(res, norm)
    rows = []
    for k in range(T):
        eta = trace.etas[k]
        eta = float(eta) if np.ndim(eta) == 0 else float(np.max(eta))
        rows.append([k + 1, eta, float(trace.f_gap[k]), float(trace.grad_sq[k]),
                     None if dist[k] is None else float(dist[k]),
                     None if b[k] is None else float(b[k]),
                     None if np.isnan(res[k]) else float(res[k])])
    return rows


def write_trace_csv(trace: RunTrace, path: str, series: list | None = None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for row in trace_rows(trace, series):
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])


def run_single(cfg: ExperimentConfig | Mapping, trial: int = 0):
    """One traced run; returns (trace, residual series)."""
    if not isinstance(cfg, ExperimentConfig):
        cfg = parse_config(cfg)
    trace = execute(cfg, RngStream(cfg.base_seed, trial))
    series = run_checks(cfg, trace)
    if cfg.outputs.get("trace_csv"):
        write_trace_csv(trace, cfg.outputs["trace_csv"], series)
    return trace, series


def fit_slope(Ts, values) -> float:
    """Least-squares slope of log(value) against log(T)."""
    Ts = np.asarray(Ts, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if Ts.size < 4 or np.unique(Ts).size < 4:
        raise ConfigError("a rate fit needs at least 4 distinct horizons")
    if np.log10(Ts.max() / Ts.min()) < 2.0 - 1e-12:
        raise ConfigError("horizons must span at least two decades")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ConfigError("rate fit needs positive finite values")
    lx, ly = np.log(Ts), np.log(v)
    lx = lx - lx.mean()
    return float(np.sum(lx * (ly - ly.mean())) / np.sum(lx * lx))


@dataclass
class SlopeResult:
    slope: float
    rows: list

    def to_dict(self) -> dict:
        return _jsonable({"slope": self.slope,
                          "rows": [dict(zip(PLOT_COLUMNS, r)) for r in self.rows]})


def rate_slope(base: Mapping, Ts) -> SlopeResult:
    """Run the base configuration at each horizon and fit the slope of the median metric."""
    Ts = [int(t) for t in Ts]
    fit_slope(Ts, np.ones(len(Ts)))  # validate the sweep before running anything
    rows = []
    for T in Ts:
        doc = copy.deepcopy(dict(base))
        doc["T"] = T
        doc.pop("outputs", None)
        stats = run_trials(doc, write=False)
        rows.append([T, stats.median, stats.quantile, stats.bound])
    slope = fit_slope([r[0] for r in rows], [r[1] for r in rows])
    out = base.get("outputs", {}) if isinstance(base, Mapping) else {}
    if out.get("plot_csv"):
        emit_plotdata(rows, out["plot_csv"])
    return SlopeResult(slope, rows)


def emit_plotdata(rows, path: str):
    """CSV with columns T, median, quantile (at 1 - delta), bound."""
    rows = rows.rows if isinstance(rows, SlopeResult) else rows
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PLOT_COLUMNS)
        for r in rows:
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float) else v)
                        for v in r])
