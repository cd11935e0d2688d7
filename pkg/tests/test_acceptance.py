"""Acceptance suite: one test per criterion, each reporting a single pass/fail line."""

import json
import math
import time

import mpmath
import numpy as np
import pytest
from conftest import iso_std_for_sigma, report_criterion

from sgcert.algorithms import StepSchedule, run_adagrad_coord, run_adagrad_norm, run_sgd, run_smd
from sgcert.certificates import MgfConfig, build_weights, mgf_theorem_check, theorem_bound
from sgcert.cli import main
from sgcert.core import AbsSum, Quadratic, RngStream, SimplexLinEntropy, SmoothNonconvex
from sgcert.geometry import MirrorMap
from sgcert.harness import rate_slope, run_trials
from sgcert.noise import NoiseModel, StochasticOracle, certify_subgaussian, mgf_lemma_check

pytestmark = pytest.mark.acceptance


def noise_spec(sigma, dim):
    if sigma == 0:
        return {"kind": "none"}
    return {"kind": "gaussian_iso", "std": iso_std_for_sigma(sigma, dim)}


SIMPLEX = {"name": "SimplexLinEntropy", "c": [0.4, -0.3, 0.1, 0.8, 0.0], "tau": 0.0}
QUAD = {"name": "Quadratic", "diag": [1.0, 2.0, 4.0], "b": [1.0, 0.0, -1.0]}
NONCONVEX = {"name": "SmoothNonconvex", "dim": 3}

CERT_SETUPS = [
    ("smd", {"name": "AbsSum", "dim": 5}, {"schedule": {"kind": "md_fixed"}}, ["md_step"]),
    ("smd", SIMPLEX, {"schedule": {"kind": "md_varying"}}, ["md_step"]),
    ("asmd", QUAD, {"schedule": {"kind": "asmd_varying"}}, ["asmd_step"]),
    ("asmd", SIMPLEX, {"schedule": {"kind": "asmd_min", "eta": 0.5}}, ["asmd_step"]),
    ("sgd", NONCONVEX, {"schedule": {"kind": "sgd_fixed"}}, ["sgd_step", "smoothness"]),
    ("sgd", QUAD, {"schedule": {"kind": "sgd_varying"}}, ["sgd_step", "smoothness"]),
    ("adagrad_norm", NONCONVEX, {"adagrad": {"eta": 0.5, "b0": 1.0}}, ["adagrad"]),
    ("adagrad_norm", QUAD, {"adagrad": {"eta": 1.0, "b0": 0.5}}, ["adagrad"]),
    ("adagrad_coord", NONCONVEX, {"adagrad": {"eta": 0.5, "b0": [0.5, 1.0, 2.0]}}, ["adagrad"]),
    ("adagrad_coord", QUAD, {"adagrad": {"eta": 1.0, "b0": 1.0}}, ["adagrad"]),
]


def test_certificate_suite():
    start = time.perf_counter()
    failures, n_series = [], 0
    for alg, problem, extra, checks in CERT_SETUPS:
        dim = len(problem.get("c", problem.get("diag", []))) or problem["dim"]
        for sigma in (0.0, 0.5):
            doc = {"algorithm": alg, "problem": problem, "noise": noise_spec(sigma, dim),
                   "T": 1000, "n_trials": 5, "base_seed": 2024, "checks": checks,
                   "bound": None, **extra}
            stats = run_trials(doc, write=False)
            n_series += sum(len(r["checks"]) for r in stats.records)
            for lemma, agg in stats.checks.items():
                if not agg["pass"]:
                    failures.append((alg, problem["name"], sigma, lemma, agg["failed_trials"],
                                     agg["argmin_step"]))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60.0 and n_series >= 5 * 2 * 2 * 5
    report_criterion(1, ok, f"{n_series} residual series checked, failures={failures}, "
                            f"{elapsed:.1f}s (limit 60s)")
    assert not failures
    assert elapsed < 60.0


WEIGHT_SCHEDULES = {
    "MDFixed": ("md_fixed", {"D1": 1.0, "G": 1.0}),
    "MDVarying": ("md_varying", {"D1": 1.0, "G": 1.0}),
    "ASMDFixed": ("asmd_fixed", {"D0": 1.0, "G": 1.0, "L": 1.0}),
    "ASMDVarying": ("asmd_varying", {"D0": 1.0, "G": 1.0, "L": 1.0}),
}


def test_weight_inductions():
    worst_ratio, worst_rec = 0.0, 0.0
    for T in (10, 1000, 100_000):
        for sigma in (0.5, 1.0, 2.0):
            for regime, (kind, params) in WEIGHT_SCHEDULES.items():
                p = dict(params, sigma=sigma, delta=0.1)
                if kind.endswith("fixed"):
                    p["T"] = T
                ws = build_weights(regime, sigma, StepSchedule.make(kind, **p), T, p.get("L"))
                worst_ratio = max(worst_ratio, float(np.max(ws.w / ws.induction_bounds())))
                rec = np.abs(ws.w[1:] + ws.v - ws.w[:-1]) / ws.w[:-1]
                worst_rec = max(worst_rec, float(np.max(rec)))
    ws = build_weights("MDFixed", 1.0, np.full(2, 1 / math.sqrt(2)))
    example = np.abs(ws.w - np.array([315 / 2304, 5 / 48, 1 / 12])) / ws.w
    ok = worst_ratio <= 1 + 1e-12 and worst_rec <= 1e-12 and np.all(example <= 1e-15)
    report_criterion(2, ok, f"max w/bound={worst_ratio:.15f}, max recursion error={worst_rec:.1e}, "
                            f"T=2 example error={np.max(example):.1e}")
    assert worst_ratio <= 1 + 1e-12
    assert worst_rec <= 1e-12
    assert np.all(example <= 1e-15)


def test_theorem_bounds():
    mpmath.mp.dps = 40
    K = 1 + 1 * (1 + mpmath.log(10))
    eta_ref = float(mpmath.sqrt(1 / (6 * K)) / 10)
    bound_ref = float(4 * mpmath.sqrt(6) / 10 * mpmath.sqrt(K))
    b = theorem_bound("md_fixed", D1=1, G=1, sigma=1, delta=0.1, T=100)
    eta_err = abs(b.eta / eta_ref - 1)
    bound_err = abs(b.value / bound_ref - 1)
    noiseless = theorem_bound("sgd_fixed", Delta1=1.7, L=3.0, sigma=0.0, delta=0.1, T=40)
    exact = noiseless.value == 2 * 1.7 * 3.0 / 40
    ok = eta_err <= 1e-6 and bound_err <= 1e-6 and exact
    report_criterion(3, ok, f"eta={b.eta:.10g} (rel err {eta_err:.1e}), bound={b.value:.10g} "
                            f"(rel err {bound_err:.1e}), noiseless SGD exact={exact}")
    assert eta_err <= 1e-6 and bound_err <= 1e-6
    assert exact


def test_high_probability_coverage():
    start = time.perf_counter()
    d = 10
    doc = {"algorithm": "smd", "problem": {"name": "AbsSum", "dim": d},
           "noise": {"kind": "gaussian_iso", "std": 0.5}, "schedule": {"kind": "md_fixed"},
           "T": 400, "n_trials": 1000, "delta": 0.1, "base_seed": 7, "summary_only": True}
    stats = run_trials(doc, write=False)
    elapsed = time.perf_counter() - start
    vf, dvf = stats.violation_fraction, stats.distance_violation_fraction
    ok = vf <= 0.1 and dvf <= 0.1 and elapsed < 300
    report_criterion(4, ok, f"gap violation={vf}, distance violation={dvf}, "
                            f"q_0.9={stats.quantile:.4g} vs bound {stats.bound:.4g}, {elapsed:.1f}s")
    assert stats.distance_bound_factor == 4.0
    assert vf <= 0.1 and dvf <= 0.1
    assert elapsed < 300


HORIZONS = [100, 1000, 10_000, 100_000]


def slope_doc(alg, sigma):
    doc = {"algorithm": alg, "problem": {"name": "SmoothNonconvex", "dim": 1},
           "noise": noise_spec(sigma, 1), "summary_only": True,
           "n_trials": 5 if sigma > 0 else 1, "base_seed": 0}
    if alg == "sgd":
        doc["schedule"] = {"kind": "sgd_fixed"}
    else:
        doc["adagrad"] = {"eta": 1.0, "b0": 1.0}
    return doc


def test_rate_scaling():
    windows = {1.0: (-0.65, -0.35), 0.0: (-1.15, -0.85)}
    results, ok = [], True
    for alg in ("sgd", "adagrad_norm"):
        for sigma, (lo, hi) in windows.items():
            s = rate_slope(slope_doc(alg, sigma), HORIZONS).slope
            results.append(f"{alg} sigma={sigma}: {s:.3f} in [{lo}, {hi}]")
            ok = ok and lo <= s <= hi
    report_criterion(5, ok, "; ".join(results))
    assert ok


def test_mgf_checks():
    lines, ok = [], True
    model = NoiseModel.rademacher(0.5, 3)
    setups = {
        "smd": (AbsSum(3), StepSchedule.make("md_fixed", D1=1.5, G=math.sqrt(3), sigma=model.sigma,
                                              delta=0.1, T=10)),
        "asmd": (Quadratic([1.0, 2.0, 4.0], [1.0, 0.0, -1.0]),
                 StepSchedule.make("asmd_min", eta=0.1, L=4.0)),
        "sgd": (SmoothNonconvex(3), StepSchedule.make("constant", eta=0.05)),
    }
    for seed in range(5):
        for a, b in (([0.0, 0.0, 0.0], 0.0), ([0.3, -0.2, 0.5], 0.0), ([0.3, -0.2, 0.5], 0.5)):
            rep = mgf_lemma_check(a, b, model, n_samples=100_000, rng=RngStream(seed, 1))
            ok = ok and rep.passed
        for alg, (obj, sched) in setups.items():
            rep = mgf_theorem_check(MgfConfig(alg, obj, model, sched, 10), 100_000,
                                    RngStream(seed, 2))
            ok = ok and rep.passed
            if seed == 0:
                lines.append(f"{alg} E exp(S1)={rep.estimate:.4f} <= {rep.threshold:.4f}")
    for s in (0.1, 0.5, 2.0):
        good = certify_subgaussian(NoiseModel.gaussian_iso(s, 1, 2 * s), rng=RngStream(3))
        ok = ok and good.passed
        for sigma in (s, 0.9 * s * math.sqrt(2)):
            bad = certify_subgaussian(NoiseModel.gaussian_iso(s, 1, sigma), rng=RngStream(3))
            ok = ok and not bad.passed and bad.reason == "divergent MGF"
    lines.append("certify: sigma=2s passes, sigma<s*sqrt(2) divergent")
    report_criterion(6, ok, "; ".join(lines))
    assert ok


def test_equivalences():
    same = True
    for seed in range(5):
        obj = SmoothNonconvex(1)
        orc = StochasticOracle(obj, NoiseModel.gaussian_iso(0.5, 1))
        a = run_adagrad_norm(orc, 0.7, 1.3, [2.0], 1000, RngStream(seed))
        b = run_adagrad_coord(orc, 0.7, [1.3], [2.0], 1000, RngStream(seed))
        same = same and a.x.tobytes() == b.x.tobytes() and a.f_x.tobytes() == b.f_x.tobytes()
        obj = Quadratic([1.0, 3.0, 0.5, 2.0])
        orc = StochasticOracle(obj, NoiseModel.gaussian_iso(0.3, 4))
        for sched in (StepSchedule.make("sgd_fixed", Delta1=2.0, sigma=1.2, L=3.0, T=1000),
                      StepSchedule.make("inv_sqrt_t", eta=0.2)):
            c = run_smd(orc, MirrorMap.EUCLIDEAN, sched, obj.default_x1(), 1000, RngStream(seed))
            d = run_sgd(orc, sched, obj.default_x1(), 1000, RngStream(seed))
            same = same and c.x.tobytes() == d.x.tobytes() and c.xi.tobytes() == d.xi.tobytes()
    report_criterion(7, same, "coordinate AdaGrad (d=1) == AdaGrad-Norm and Euclidean SMD == SGD, "
                              "bitwise over 5 seeds")
    assert same


def test_determinism(tmp_path, capsys):
    doc = {"algorithm": "smd", "problem": SIMPLEX, "noise": noise_spec(0.5, 5),
           "schedule": {"kind": "md_varying"}, "T": 200, "n_trials": 16, "base_seed": 11,
           "checks": ["md_step"], "outputs": {"summary": str(tmp_path / "summary.json")}}
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(doc))
    outs = []
    for _ in range(2):
        assert main(["trials", "--config", str(cfg)]) == 0
        capsys.readouterr()
        outs.append((tmp_path / "summary.json").read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    report_criterion(8, ok, f"two `trials` runs gave byte-identical summaries ({len(outs[0])} bytes)")
    assert ok
