"""Numerical certificates evaluated on white-box traces.

Each per-step inequality is evaluated with both sides computed from the
recorded iterates, gradients and noise. A residual ``rhs - lhs`` is accepted
when it is at least ``-1e-9 * (1 + |rhs|)``.

The module also builds the backward weight recursions used to control the
martingale sums, evaluates those sums on traces, Monte-Carlo checks their
moment generating functions, and computes the closed-form high-probability
bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .algorithms import RunTrace, StepSchedule, run_asmd, run_sgd, run_smd
from .core import ConfigError, InvalidInputError, NormPair, Objective, RngStream
from .geometry import MirrorMap, bregman
from .noise import CheckReport, NoiseModel, PreconditionError, StochasticOracle

REL_TOL = 1e-9


class UnsupportedCheckError(ValueError):
    """The check needs data the trace or objective does not provide."""


class WeightConstructionError(ValueError):
    """The constructed weights violate the moment-generating-function hypothesis."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass
class CertificateResidual:
    step: int
    lemma: str
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return self.rhs - self.lhs

    @property
    def tol(self) -> float:
        return REL_TOL * (1.0 + abs(self.rhs))

    @property
    def ok(self) -> bool:
        return self.residual >= -self.tol


@dataclass
class ResidualSeries:
    """Both sides of one inequality at every step (or once, for aggregates).

    ``steps`` are 1-based step labels; arrays may carry extra trailing axes
    for batched traces or per-coordinate checks.
    """

    lemma: str
    lhs: np.ndarray
    rhs: np.ndarray
    steps: np.ndarray

    def __post_init__(self):
        self.lhs = np.asarray(self.lhs, dtype=np.float64)
        self.rhs = np.asarray(self.rhs, dtype=np.float64)
        self.steps = np.asarray(self.steps)

    @property
    def residual(self) -> np.ndarray:
        return self.rhs - self.lhs

    @property
    def slack(self) -> np.ndarray:
        """Residual plus tolerance; negative entries are violations."""
        return self.residual + REL_TOL * (1.0 + np.abs(self.rhs))

    @property
    def ok(self) -> bool:
        s = self.slack
        return bool(np.all(s >= 0)) and not np.any(np.isnan(s))

    def worst(self) -> CertificateResidual:
        s = self.slack
        flat = int(np.nanargmin(s)) if s.size else 0
        idx = np.unravel_index(flat, s.shape) if s.ndim else ()
        step = int(self.steps) if self.steps.ndim == 0 else int(self.steps[idx[0]])
        return CertificateResidual(step, self.lemma, float(self.lhs[idx]), float(self.rhs[idx]))

    def at(self, t: int) -> CertificateResidual:
        """Residual at step t (the worst entry if the step carries several)."""
        if self.steps.ndim == 0:
            if int(self.steps) != t:
                raise InvalidInputError(f"no step {t} in this series")
            lhs, rhs, slack = self.lhs, self.rhs, self.slack
        else:
            hits = np.nonzero(self.steps == t)[0]
            if hits.size == 0:
                raise InvalidInputError(f"no step {t} in this series")
            k = int(hits[0])
            lhs, rhs, slack = self.lhs[k], self.rhs[k], self.slack[k]
        j = int(np.argmin(np.atleast_1d(slack)))
        return CertificateResidual(t, self.lemma, float(np.atleast_1d(lhs)[j]),
                                   float(np.atleast_1d(rhs)[j]))

    def to_dict(self) -> dict:
        w = self.worst()
        return {
            "lemma": self.lemma,
            "min_residual": float(np.min(self.residual)),
            "argmin_step": w.step,
            "worst_normalized": w.residual / (1.0 + abs(w.rhs)),
            "pass": self.ok,
        }


def _etas_like(trace: RunTrace, arr: np.ndarray) -> np.ndarray:
    e = np.asarray(trace.etas, dtype=np.float64)
    return e.reshape(e.shape + (1,) * (arr.ndim - e.ndim))


def _col(v: np.ndarray, arr: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v.reshape(v.shape + (1,) * (arr.ndim - v.ndim))


def _need_full(trace: RunTrace):
    if not trace.full:
        raise UnsupportedCheckError("certificates need a full (white-box) trace")


def _need_star(trace: RunTrace, x_star):
    x_star = trace.x_star if x_star is None else x_star
    if x_star is None:
        raise UnsupportedCheckError("the minimizer is unknown for this objective")
    return np.asarray(x_star, dtype=np.float64)


def envelope_G(trace: RunTrace, pair: NormPair | None = None) -> float:
    """Largest dual gradient norm seen along the trace.

    Used in place of a global Lipschitz constant when the objective has none;
    the per-step inequalities only need the bound at the visited points.
    """
    _need_full(trace)
    if pair is None:
        pair = trace.mirror.norm if trace.mirror is not None else NormPair.EUCLIDEAN_L2
    return float(np.max(pair.dual(trace.grad)))


# ---------------------------------------------------------------------------
# per-step inequalities


def md_terms(trace: RunTrace, G: float, x_star=None):
    """(A_t, rhs_t, D(x*, x_t)) for mirror-descent traces, t = 1..T."""
    _need_full(trace)
    if trace.algorithm not in ("smd", "sgd"):
        raise ConfigError("not a mirror-descent trace")
    mirror = trace.mirror or MirrorMap.EUCLIDEAN
    xs = _need_star(trace, x_star)
    T = trace.T
    D = bregman(mirror, xs, trace.x)  # D(x*, x_t), t = 1..T+1
    gap = trace.f_x[:T] - trace.f_star
    eta = _etas_like(trace, gap)
    A = eta * gap - eta * eta * G * G + D[1:] - D[:T]
    xi = trace.xi
    inner = np.sum(xi * (xs - trace.x[:T]), axis=-1)
    xin = mirror.norm.dual(xi)
    rhs = eta * inner + eta * eta * xin * xin
    return A, rhs, D


def check_md(trace: RunTrace, G: float, x_star=None) -> ResidualSeries:
    """One-step mirror descent inequality at every step.

    ``eta (f(x_t) - f*) - eta^2 G^2 + D(x*, x_{t+1}) - D(x*, x_t)
    <= eta <xi_t, x* - x_t> + eta^2 |xi_t|_*^2``
    """
    A, rhs, _ = md_terms(trace, G, x_star)
    return ResidualSeries("md_step", A, rhs, np.arange(1, trace.T + 1))


def check_step_md(trace: RunTrace, t: int, mirror: MirrorMap | None = None, x_star=None,
                  G: float | None = None) -> CertificateResidual:
    if mirror is not None and trace.mirror not in (None, mirror):
        raise ConfigError("mirror map differs from the one used by the run")
    if G is None:
        G = envelope_G(trace)
    return check_md(trace, G, x_star).at(t)


def asmd_terms(trace: RunTrace, G: float, L: float, x_star=None):
    """(B_t, rhs_t, D(x*, z_{t-1})) for accelerated traces, t = 1..T."""
    _need_full(trace)
    if trace.algorithm != "asmd":
        raise ConfigError("not an accelerated mirror-descent trace")
    mirror = trace.mirror
    xs = _need_star(trace, x_star)
    T = trace.T
    alpha = trace.alphas
    eta = trace.etas
    la = L * alpha * eta
    if np.any(la >= 1.0):
        t = int(np.argmax(la >= 1.0)) + 1
        raise PreconditionError(f"L alpha_t eta_t >= 1 at t={t}")
    D = bregman(mirror, xs, trace.z)  # D(x*, z_k), k = 0..T
    gy = trace.f_y - trace.f_star
    a_ = _col(alpha, gy[1:])
    e_ = _col(eta, gy[1:])
    c_ = 1.0 / (1.0 - _col(la, gy[1:]))
    B = (e_ / a_) * gy[1:] - (e_ * (1.0 - a_) / a_) * gy[:T] - e_ * e_ * c_ * G * G + D[1:] - D[:T]
    xi = trace.xi
    inner = np.sum(xi * (xs - trace.z[:T]), axis=-1)
    xin = mirror.norm.dual(xi)
    rhs = e_ * inner + e_ * e_ * c_ * xin * xin
    return B, rhs, D[:T]


def check_asmd(trace: RunTrace, G: float, L: float, x_star=None) -> ResidualSeries:
    """One-step inequality of the accelerated method (with the 1/(1 - L alpha eta) factor).

    G and L are the constants of the upper model
    ``f(y) <= f(x) + <grad f(x), y - x> + G|y - x| + L/2 |y - x|^2``.
    """
    B, rhs, _ = asmd_terms(trace, G, L, x_star)
    return ResidualSeries("asmd_step", B, rhs, np.arange(1, trace.T + 1))


def check_step_asmd(trace: RunTrace, t: int, mirror: MirrorMap | None = None, x_star=None,
                    G: float = 0.0, L: float = 0.0) -> CertificateResidual:
    if mirror is not None and trace.mirror is not mirror:
        raise ConfigError("mirror map differs from the one used by the run")
    return check_asmd(trace, G, L, x_star).at(t)


def sgd_terms(trace: RunTrace, L: float):
    """(C_t, rhs_t) for plain SGD traces, t = 1..T."""
    _need_full(trace)
    T = trace.T
    gsq = trace.grad_sq
    eta = _etas_like(trace, gsq)
    C = eta * (1.0 - L * eta / 2.0) * gsq + (trace.f_x[1:] - trace.f_x[:T])
    inner = np.sum(trace.grad * trace.xi, axis=-1)
    xisq = np.sum(trace.xi * trace.xi, axis=-1)
    rhs = (L * eta * eta - eta) * inner + (L * eta * eta / 2.0) * xisq
    return C, rhs


def check_sgd(trace: RunTrace, L: float) -> ResidualSeries:
    """``eta(1 - L eta/2)|grad|^2 + D_{t+1} - D_t <= (L eta^2 - eta)<grad, xi> + L eta^2/2 |xi|^2``
    where D_t = f(x_t) - f*."""
    if trace.algorithm not in ("sgd", "smd") or (trace.mirror not in (None, MirrorMap.EUCLIDEAN)):
        raise ConfigError("not a Euclidean SGD trace")
    C, rhs = sgd_terms(trace, L)
    return ResidualSeries("sgd_step", C, rhs, np.arange(1, trace.T + 1))


def check_descent(trace: RunTrace, L: float) -> ResidualSeries:
    """Quadratic upper bound ``f(x_{t+1}) - f(x_t) <= <grad, step> + L/2 |step|^2`` at each taken step."""
    _need_full(trace)
    if trace.algorithm == "asmd":
        raise ConfigError("descent check applies to single-sequence methods")
    T = trace.T
    d = trace.x[1:] - trace.x[:T]
    lhs = trace.f_x[1:] - trace.f_x[:T]
    rhs = np.sum(trace.grad * d, axis=-1) + 0.5 * L * np.sum(d * d, axis=-1)
    return ResidualSeries("smoothness", lhs, rhs, np.arange(1, T + 1))


def check_step_sgd(trace: RunTrace, t: int, L: float) -> CertificateResidual:
    return check_sgd(trace, L).at(t)


def check_adagrad_lemmas(trace: RunTrace, objective: Objective | None = None,
                         L: float | None = None) -> list:
    """Deterministic AdaGrad inequalities on one trace.

    (a) |1/a_t - 1/b_t| <= |xi_t| / (a_t b_t) at every step;
    (b) the aggregate descent inequality built on the proxy step a_t;
    (c) sum |ghat_t|^2 / b_t^2 <= 2 ln(b_T / b_0);
    (d) sum |grad_t|^2 / a_t^2 <= 4 ln(b_T / b_0) + 2 sum |xi_t|^2 / b_t^2.

    For the per-coordinate method (a) holds coordinate-wise, (c)/(d) per
    coordinate, and (b) uses |xi_{t,i}| in place of the running maximum.
    (b) needs a smoothness constant and is skipped when none is known.
    """
    _need_full(trace)
    if trace.algorithm not in ("adagrad_norm", "adagrad_coord"):
        raise ConfigError("not an AdaGrad trace")
    if L is None and objective is not None:
        L = objective.smooth_L
    coord = trace.algorithm == "adagrad_coord"
    T = trace.T
    steps = np.arange(1, T + 1)
    a = trace.a
    b = trace.b[1:]
    b0 = trace.b[0]
    bT = trace.b[-1]
    eta = trace.eta
    g, xi, gh = trace.grad, trace.xi, trace.ghat
    delta1 = trace.f_x[0] - trace.f_star
    out = []
    log_ratio = np.log(bT / b0)
    if coord:
        out.append(ResidualSeries("adagrad_proxy_gap", np.abs(1.0 / a - 1.0 / b),
                                  np.abs(xi) / (a * b), steps))
        ghat_term = np.sum(gh * gh / (b * b), axis=0)
        xi_term = np.sum(xi * xi / (b * b), axis=0)
        grad_term = np.sum(g * g / (a * a), axis=0)
        out.append(ResidualSeries("adagrad_sum_ghat", ghat_term, 2.0 * log_ratio, T))
        out.append(ResidualSeries("adagrad_sum_grad_proxy", grad_term,
                                  4.0 * log_ratio + 2.0 * xi_term, T))
        if L is not None:
            lhs = np.sum(g * g / b, axis=(0, -1))
            rhs = (delta1 / eta
                   - np.sum(g * xi / a, axis=(0, -1))
                   + np.sum(np.abs(xi) * (g * g / (2 * a * a) + xi * xi / (2 * b * b)), axis=(0, -1))
                   + 0.5 * eta * L * np.sum(gh * gh / (b * b), axis=(0, -1)))
            out.append(ResidualSeries("adagrad_aggregate", lhs, rhs, T))
        return out
    gsq = np.sum(g * g, axis=-1)
    xisq = np.sum(xi * xi, axis=-1)
    ghsq = np.sum(gh * gh, axis=-1)
    out.append(ResidualSeries("adagrad_proxy_gap", np.abs(1.0 / a - 1.0 / b),
                              np.sqrt(xisq) / (a * b), steps))
    A_term = np.sum(ghsq / (b * b), axis=0)
    E_term = np.sum(xisq / (b * b), axis=0)
    B_term = np.sum(gsq / (a * a), axis=0)
    out.append(ResidualSeries("adagrad_sum_ghat", A_term, 2.0 * log_ratio, T))
    out.append(ResidualSeries("adagrad_sum_grad_proxy", B_term, 4.0 * log_ratio + 2.0 * E_term, T))
    if L is not None:
        MT = trace.M[-1]
        lhs = np.sum(gsq / b, axis=0)
        rhs = (delta1 / eta + 0.5 * MT * (B_term + E_term)
               - np.sum(np.sum(g * xi, axis=-1) / a, axis=0)
               + np.sum(L * eta / (2.0 * b * b) * ghsq, axis=0))
        out.append(ResidualSeries("adagrad_aggregate", lhs, rhs, T))
    return out


def adagrad_noise_implication(trace: RunTrace, sigma: float, delta: float,
                              L: float) -> dict:
    """Conditional AdaGrad-Norm bound, checked as an implication on one trace.

    Two events are evaluated on the trace:
      * max noise: M_T <= 2 sigma sqrt(ln(T/delta));
      * martingale: -sum <grad, xi>/a_t <= 2 sigma^2 w B + ln(1/delta)/w with
        w = sqrt(ln(1/delta))/sigma and B = sum |grad|^2/a_t^2.
    When both hold, combining them with (b), (c) and (d) gives
    ``sum |grad|^2/b_t <= Delta1/eta + s [c_log ln(b_T/b_0) + c_xi E]
    + sigma sqrt(ln(1/delta)) + L eta ln(b_T/b_0)`` with s = sigma sqrt(ln(T/delta))
    and E = sum |xi|^2/b_t^2. The coefficient of B collected from the two
    events is 1 + 2 sqrt(ln(1/delta)/ln(T/delta)) <= 3, giving (12, 7); the
    tighter pair (8, 5) is reported separately because it does not follow
    from the two events alone.
    """
    _need_full(trace)
    if trace.algorithm != "adagrad_norm":
        raise ConfigError("needs an AdaGrad-Norm trace")
    if not sigma > 0:
        raise PreconditionError("sigma must be positive")
    T = trace.T
    g, xi = trace.grad, trace.xi
    a, b = trace.a, trace.b[1:]
    gsq = np.sum(g * g, axis=-1)
    xisq = np.sum(xi * xi, axis=-1)
    B = np.sum(gsq / (a * a), axis=0)
    E = np.sum(xisq / (b * b), axis=0)
    lt = math.log(T / delta)
    l1 = math.log(1.0 / delta)
    w = math.sqrt(l1) / sigma
    mart = -np.sum(np.sum(g * xi, axis=-1) / a, axis=0)
    ev_max = trace.M[-1] <= 2.0 * sigma * math.sqrt(lt)
    ev_mart = mart <= 2.0 * sigma * sigma * w * B + l1 / w
    lr = np.log(trace.b[-1] / trace.b[0])
    lhs = np.sum(gsq / b, axis=0)
    delta1 = trace.f_x[0] - trace.f_star
    base = delta1 / trace.eta + sigma * math.sqrt(l1) + L * trace.eta * lr
    s = sigma * math.sqrt(lt)
    rhs_sound = base + s * (12.0 * lr + 7.0 * E)
    rhs_tight = base + s * (8.0 * lr + 5.0 * E)
    events = np.logical_and(ev_max, ev_mart)
    tol = REL_TOL * (1.0 + np.abs(rhs_sound))
    return {
        "events": events,
        "holds": lhs <= rhs_sound + tol,
        "holds_tight": lhs <= rhs_tight + REL_TOL * (1.0 + np.abs(rhs_tight)),
        "implication_ok": bool(np.all(~events | (lhs <= rhs_sound + tol))),
        "lhs": lhs,
        "rhs": rhs_sound,
        "rhs_tight": rhs_tight,
    }


# ---------------------------------------------------------------------------
# weights and martingales

REGIMES = ("MDFixed", "MDVarying", "ASMDFixed", "ASMDVarying", "SGDConstant", "SGDVarying")


@dataclass
class WeightSequence:
    """Weights w_0..w_T and increments v_1..v_T (``v[k]`` is v_{k+1})."""

    regime: str
    sigma: float
    etas: np.ndarray
    w: np.ndarray
    v: np.ndarray
    L: float | None = None
    C: float | None = None
    conditions: dict = field(default_factory=dict)

    @property
    def family(self) -> str:
        if self.regime.startswith("MD"):
            return "md"
        if self.regime.startswith("ASMD"):
            return "asmd"
        return "sgd"

    @property
    def T(self) -> int:
        return self.etas.size

    def induction_bounds(self) -> np.ndarray:
        """1/(C + 6 sigma^2 sum_{i<=t} eta_i^2) for t = 0..T (MD/ASMD regimes)."""
        cum = np.concatenate(([0.0], np.cumsum(self.etas ** 2)))
        return 1.0 / (self.C + 6.0 * self.sigma ** 2 * cum)

    def mgf_log_bound(self) -> float:
        """log of the bound on E exp(S_1)."""
        s2 = self.sigma ** 2
        w = self.w[1:]
        e2 = self.etas ** 2
        if self.family == "md":
            return 3.0 * s2 * float(np.sum(w * e2))
        if self.family == "asmd":
            alpha = 2.0 / (np.arange(1, self.T + 1) + 1.0)
            return 3.0 * s2 * float(np.sum(w * e2 / (1.0 - self.L * alpha * self.etas)))
        return 3.0 * s2 * float(np.sum(w * e2 * self.L / 2.0))


def build_weights(regime: str, sigma: float, schedule, T: int | None = None,
                  L: float | None = None) -> WeightSequence:
    """Backward weight recursion for the given regime.

    Mirror-descent and accelerated regimes share one construction:
    C = 6 sigma^2 sum eta_t^2, w_T = 1/(2C), w_{t-1} = w_t + v_t with
    v_t = 6 sigma^2 eta_t^2 w_t^2. SGD regimes use the constant weight
    w = 1/(6 sigma^2 eta_1) and v_t = 3 sigma^2 w^2 eta_t^2 (eta_t L - 1)^2.
    With sigma = 0 every weight is 1 and every v_t is 0.

    ``schedule`` is a StepSchedule (then T is required) or an array of
    eta_1..eta_T.
    """
    if regime not in REGIMES:
        raise ConfigError(f"unknown weight regime {regime!r}")
    if isinstance(schedule, StepSchedule):
        if T is None:
            raise InvalidInputError("T is required with a StepSchedule")
        etas = schedule.etas(T)
    else:
        etas = np.asarray(schedule, dtype=np.float64).reshape(-1)
        if T is not None and etas.size != T:
            raise InvalidInputError("schedule length differs from T")
    T = etas.size
    if sigma < 0:
        raise InvalidInputError("sigma must be nonnegative")
    fam = "md" if regime.startswith("MD") else ("asmd" if regime.startswith("ASMD") else "sgd")
    if fam in ("asmd", "sgd") and L is None:
        raise InvalidInputError(f"{regime} needs the smoothness constant L")
    if sigma == 0:
        ws = WeightSequence(regime, 0.0, etas, np.ones(T + 1), np.zeros(T), L, None,
                            {"convention": "sigma=0: unit weights"})
        return ws
    s2 = sigma * sigma
    if fam == "sgd":
        if T == 0:
            raise InvalidInputError("SGD weights need at least one step")
        w0 = 1.0 / (6.0 * s2 * etas[0])
        w = np.full(T + 1, w0)
        v = 3.0 * s2 * w0 * w0 * etas ** 2 * (etas * L - 1.0) ** 2
        ratio = w0 * etas ** 2 * L * 2.0 * s2  # must be <= 1
        if np.any(ratio > 1.0 + 1e-12):
            t = int(np.argmax(ratio > 1.0 + 1e-12)) + 1
            raise WeightConstructionError(f"w eta_t^2 L > 1/(2 sigma^2) at t={t}", t)
        return WeightSequence(regime, sigma, etas, w, v, L, None,
                              {"mgf_condition_max": float(np.max(ratio)) if T else 0.0})
    C = 6.0 * s2 * float(np.sum(etas ** 2))
    w = np.empty(T + 1)
    v = np.empty(T)
    w[T] = 1.0 / (2.0 * C) if T else 1.0
    for k in range(T, 0, -1):
        e = etas[k - 1]
        v[k - 1] = 6.0 * s2 * e * e * w[k] * w[k]
        w[k - 1] = w[k] + v[k - 1]
    if fam == "asmd":
        alpha = 2.0 / (np.arange(1, T + 1) + 1.0)
        la = L * alpha * etas
        if np.any(la >= 1.0):
            t = int(np.argmax(la >= 1.0)) + 1
            raise WeightConstructionError(f"L alpha_t eta_t >= 1 at t={t}", t)
        q = w[1:] * etas ** 2 / (1.0 - la)
    else:
        q = w[1:] * etas ** 2
    ws = WeightSequence(regime, sigma, etas, w, v, L, C)
    scaled = q * s2
    if np.any(scaled > 0.25 * (1.0 + 1e-12)):
        t = int(np.argmax(scaled > 0.25 * (1.0 + 1e-12))) + 1
        raise WeightConstructionError(f"weight condition violated at t={t}", t)
    ind = ws.induction_bounds() if T else np.array([1.0 / C]) if C else np.array([np.inf])
    ws.conditions = {
        "recursion_max_rel_error": float(np.max(np.abs(w[1:] + v - w[:-1]) / w[:-1])) if T else 0.0,
        "mgf_condition_max": float(np.max(scaled)) if T else 0.0,
        "mgf_condition_quarter": bool(np.all(scaled <= 0.25 * (1.0 + 1e-12))),
        "mgf_condition_sixth": bool(np.all(scaled <= (1.0 / 6.0) * (1.0 + 1e-12))),
        "induction_max_ratio": float(np.max(w / ind)) if T else 0.0,
        "induction_ok": bool(np.all(w <= ind * (1.0 + 1e-12))) if T else True,
    }
    return ws


def weight_regime_for(algorithm: str, schedule: StepSchedule) -> str:
    k = schedule.kind
    if algorithm == "smd":
        return "MDFixed" if k in ("constant", "md_fixed") else "MDVarying"
    if algorithm == "asmd":
        return "ASMDFixed" if k in ("asmd_fixed", "asmd_linear") else "ASMDVarying"
    if algorithm == "sgd":
        return "SGDConstant" if k in ("constant", "sgd_fixed") else "SGDVarying"
    raise ConfigError(f"no weight regime for {algorithm}")


def martingale_trace(trace: RunTrace, weights: WeightSequence, G: float | None = None,
                     L: float | None = None, x_star=None):
    """Martingale increments Z_t and tail sums S_t = sum_{i>=t} Z_i.

    Returns ``(Z, S)``, both indexed by t-1; ``S[0]`` is S_1.
    """
    fam = {"smd": "md", "asmd": "asmd", "sgd": "sgd"}.get(trace.algorithm)
    if fam != weights.family:
        raise ConfigError(f"weights for {weights.family} do not fit a {trace.algorithm} trace")
    if weights.T != trace.T or not np.array_equal(weights.etas, trace.etas):
        raise ConfigError("weights were built for a different step-size schedule")
    w = weights.w[1:]
    v = weights.v
    if fam == "md":
        A, _, D = md_terms(trace, 0.0 if G is None else G, x_star)
        Z = _col(w, A) * A - _col(v, A) * D[: trace.T]
    elif fam == "asmd":
        B, _, Dz = asmd_terms(trace, 0.0 if G is None else G, 0.0 if L is None else L, x_star)
        Z = _col(w, B) * B - _col(v, B) * Dz
    else:
        C, _ = sgd_terms(trace, weights.L if L is None else L)
        Z = _col(w, C) * C - _col(v, C) * trace.grad_sq
    S = np.cumsum(Z[::-1], axis=0)[::-1]
    return Z, S


def md_high_probability_implication(trace: RunTrace, weights: WeightSequence, G: float,
                                    delta: float, x_star=None) -> dict:
    """If S_1 < 3 sigma^2 sum w_t eta_t^2 + ln(1/delta), then
    sum w_t eta_t (f(x_t) - f*) + w_T D(x*, x_{T+1})
    <= w_0 D(x*, x_1) + (G^2 + 3 sigma^2) sum w_t eta_t^2 + ln(1/delta)."""
    Z, S = martingale_trace(trace, weights, G=G, x_star=x_star)
    _, _, D = md_terms(trace, G, x_star)
    T = trace.T
    w = weights.w
    e = trace.etas
    gap = trace.f_x[:T] - trace.f_star
    swe2 = float(np.sum(w[1:] * e * e))
    l1 = math.log(1.0 / delta)
    event = S[0] < 3.0 * weights.sigma ** 2 * swe2 + l1
    lhs = np.sum(_col(w[1:] * e, gap) * gap, axis=0) + w[T] * D[T]
    rhs = w[0] * D[0] + (G * G + 3.0 * weights.sigma ** 2) * swe2 + l1
    ok = lhs <= rhs + REL_TOL * (1.0 + np.abs(rhs))
    return {"event": event, "lhs": lhs, "rhs": rhs, "holds": ok,
            "implication_ok": bool(np.all(~np.asarray(event) | ok))}


@dataclass
class MgfConfig:
    """Setup for the Monte-Carlo check of E exp(S_1).

    ``algorithm`` is one of smd, asmd, sgd. The constants G (smd/asmd) and L
    (asmd/sgd) default to the objective's; G must bound the dual gradient
    norm on every visited point (smd) or be the upper-model constant (asmd).
    """

    algorithm: str
    objective: Objective
    noise: NoiseModel
    schedule: StepSchedule
    T: int
    x1: Any = None
    mirror: MirrorMap = MirrorMap.EUCLIDEAN
    G: float | None = None
    L: float | None = None
    regime: str | None = None


def mgf_theorem_check(config: MgfConfig, n_trials: int, rng: RngStream) -> CheckReport:
    """Estimate E exp(S_1) over independent runs and compare with its bound.

    Runs are executed as one batch sharing ``rng``. Passes iff the
    estimate is at most ``bound * (1 + 5/sqrt(n_trials))``.
    """
    obj = config.objective
    sigma = config.noise.sigma
    if config.T == 0:
        return CheckReport("mgf_theorem", 1.0, 1.0, 1.0, True, n_trials, {"T": 0})
    alg = config.algorithm
    regime = config.regime or weight_regime_for(alg, config.schedule)
    if alg == "smd":
        G = obj.lipschitz_G if config.G is None else config.G
        L = None
    elif alg == "asmd":
        G = obj.upper_G if config.G is None else config.G
        L = obj.upper_L if config.L is None else config.L
    elif alg == "sgd":
        G = None
        L = obj.smooth_L if config.L is None else config.L
    else:
        raise ConfigError(f"no martingale for {alg}")
    if alg != "sgd" and G is None:
        raise UnsupportedCheckError("a gradient bound G is required")
    if alg != "smd" and L is None:
        raise UnsupportedCheckError("a smoothness constant L is required")
    try:
        weights = build_weights(regime, sigma, config.schedule, config.T, L)
    except WeightConstructionError as exc:
        raise PreconditionError(str(exc)) from exc
    x1 = obj.default_x1() if config.x1 is None else np.asarray(config.x1, dtype=np.float64)
    xb = np.broadcast_to(x1, (n_trials, obj.dim)).copy()
    oracle = StochasticOracle(obj, config.noise)
    if alg == "smd":
        tr = run_smd(oracle, config.mirror, config.schedule, xb, config.T, rng)
    elif alg == "asmd":
        tr = run_asmd(oracle, config.mirror, config.schedule, xb, config.T, rng)
    else:
        tr = run_sgd(oracle, config.schedule, xb, config.T, rng)
    if alg == "smd":
        G_seen = float(np.max(config.mirror.norm.dual(tr.grad)))
        if G_seen > G * (1 + 1e-12):
            raise PreconditionError(f"gradient norm {G_seen} exceeds G={G}")
    _, S = martingale_trace(tr, weights, G=G, L=L)
    S1 = S[0]
    m = float(np.max(S1))
    log_est = m + math.log(float(np.mean(np.exp(S1 - m))))
    log_bound = weights.mgf_log_bound()
    slack = 1.0 + 5.0 / math.sqrt(n_trials)
    est = math.exp(log_est)
    bound = math.exp(log_bound)
    return CheckReport("mgf_theorem", est, bound, bound * slack, bool(est <= bound * slack),
                       n_trials, {"regime": regime, "sigma": sigma, "log_estimate": log_est,
                                  "log_bound": log_bound, "max_S1": m})


# ---------------------------------------------------------------------------
# closed-form bounds

BOUND_INPUTS = {
    "md_fixed": ("D1", "G", "sigma", "delta", "T"),
    "md_varying": ("D1", "G", "sigma", "delta", "T"),
    "sgd_fixed": ("Delta1", "L", "sigma", "delta", "T"),
    "sgd_varying": ("Delta1", "L", "sigma", "delta", "T"),
    "asmd_fixed": ("D0", "G", "sigma", "L", "delta", "T"),
    "asmd_varying": ("D0", "G", "sigma", "L", "delta", "T"),
}
UNSUPPORTED_BOUNDS = {
    "adagrad_norm": "polylog factors of the AdaGrad-Norm rate are not given in closed form",
    "adagrad_coord": "polylog factors of the per-coordinate AdaGrad rate are not given in closed form",
}


@dataclass(frozen=True)
class TheoremBound:
    theorem: str
    inputs: dict
    value: float
    eta: float | None = None
    distance_bound: float | None = None
    supported: bool = True

    def to_dict(self) -> dict:
        return {"theorem": self.theorem, "inputs": self.inputs, "value": self.value,
                "eta": self.eta, "distance_bound": self.distance_bound, "supported": True}


@dataclass(frozen=True)
class UnsupportedBound:
    theorem: str
    reason: str
    supported: bool = False

    def to_dict(self) -> dict:
        return {"theorem": self.theorem, "supported": False, "reason": self.reason}


def theorem_bound(theorem: str, **inputs) -> TheoremBound | UnsupportedBound:
    """Closed-form high-probability bound.

    md_fixed / md_varying bound the average gap of mirror descent (and give
    the distance bound on D(x*, x_{T+1})); sgd_fixed / sgd_varying bound the
    average squared gradient norm of SGD; asmd_fixed / asmd_varying bound
    f(y_T) - f* of the accelerated method (and D(x*, z_T)). ``eta`` is the
    step size eta_t for fixed schedules and eta_1 for varying ones.
    """
    if theorem in UNSUPPORTED_BOUNDS:
        return UnsupportedBound(theorem, UNSUPPORTED_BOUNDS[theorem])
    if theorem not in BOUND_INPUTS:
        raise ConfigError(f"unknown bound {theorem!r}")
    need = BOUND_INPUTS[theorem]
    missing = [k for k in need if k not in inputs]
    extra = [k for k in inputs if k not in need]
    if missing or extra:
        raise ConfigError(f"{theorem}: missing {missing}, unexpected {extra}")
    p = {k: float(inputs[k]) for k in need}
    p["T"] = int(inputs["T"])
    delta = p["delta"]
    if not 0.0 < delta < 1.0:
        raise InvalidInputError("delta must lie in (0, 1)")
    if p["T"] < 1:
        raise InvalidInputError("T must be positive")
    for k in ("D1", "D0", "Delta1"):
        if k in p and not p[k] > 0:
            raise InvalidInputError(f"{k} must be positive")
    for k in ("G", "sigma", "L"):
        if k in p and p[k] < 0:
            raise InvalidInputError(f"{k} must be nonnegative")
    T = p["T"]
    l1 = math.log(1.0 / delta)
    rT = math.sqrt(T)
    if theorem.startswith(("md", "asmd")):
        K = p["G"] ** 2 + p["sigma"] ** 2 * (1.0 + l1)
        if not K > 0 and not (theorem.startswith("asmd") and p["L"] > 0):
            raise InvalidInputError("G and sigma cannot both be zero")
    if theorem == "md_fixed":
        D = p["D1"]
        eta = math.sqrt(D / (6.0 * K)) / rT
        val = 4.0 * math.sqrt(6.0) / rT * math.sqrt(D * K)
        return TheoremBound(theorem, p, val, eta, 4.0 * D)
    if theorem == "md_varying":
        D = p["D1"]
        eta = math.sqrt(D / (6.0 * K))
        val = 2.0 * math.sqrt(6.0) / rT * (2.0 + math.log(T)) * math.sqrt(D * K)
        return TheoremBound(theorem, p, val, eta, 2.0 * (2.0 + math.log(T)) * D)
    if theorem == "sgd_fixed":
        D, L, s = p["Delta1"], p["L"], p["sigma"]
        if not L > 0:
            raise InvalidInputError("L must be positive")
        eta = 1.0 / L if s == 0 else min(1.0 / L, math.sqrt(D / (s * s * L * T)))
        val = 2.0 * D * L / T + 5.0 * s * math.sqrt(D * L / T) + 12.0 * s * s * l1 / T
        return TheoremBound(theorem, p, val, eta, None)
    if theorem == "sgd_varying":
        D, L, s = p["Delta1"], p["L"], p["sigma"]
        if not L > 0:
            raise InvalidInputError("L must be positive")
        val = (2.0 * D * L + 3.0 * s * s * (1.0 + math.log(T)) + 12.0 * s * s * l1) / rT
        return TheoremBound(theorem, p, val, 1.0 / L, None)
    D, L = p["D0"], p["L"]
    if K == 0:
        val = 16.0 * L * D / T ** 2
        return TheoremBound(theorem, p, val, 1.0 / (4.0 * L),
                            4.0 * D if theorem == "asmd_fixed" else 2.0 * (2.0 + math.log(T)) * D)
    if theorem == "asmd_fixed":
        c = math.sqrt(D) / (math.sqrt(6.0) * math.sqrt(K) * T ** 1.5)
        eta = c if L == 0 else min(1.0 / (4.0 * L), c)
        val = 16.0 * L * D / T ** 2 + 8.0 * math.sqrt(6.0) / rT * math.sqrt(D * K)
        return TheoremBound(theorem, p, val, eta, 4.0 * D)
    c = math.sqrt(D) / (math.sqrt(6.0) * math.sqrt(K))
    eta = c if L == 0 else min(1.0 / (4.0 * L), c)
    val = 16.0 * L * D / T ** 2 + 4.0 * math.sqrt(6.0) * (2.0 + math.log(T)) / rT * math.sqrt(D * K)
    return TheoremBound(theorem, p, val, eta, 2.0 * (2.0 + math.log(T)) * D)
