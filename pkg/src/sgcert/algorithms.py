"""Stochastic mirror descent, its accelerated variant, SGD and two AdaGrad variants.

All runners accept either a single starting point of shape ``(d,)`` or a
batch of shape ``(n, d)``; in the batched case every recorded array carries
the batch axis right after the time axis and the rows are independent runs
that share one random stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import ConfigError, Domain, DomainError, InvalidInputError, RngStream, as_vector
from .geometry import MirrorMap, bregman
from .noise import StochasticOracle


def _log_inv_delta(delta: float) -> float:
    if not 0.0 < delta < 1.0:
        raise InvalidInputError("delta must lie in (0, 1)")
    return math.log(1.0 / delta)


def _scale_K(G: float, sigma: float, delta: float) -> float:
    # G^2 + sigma^2 (1 + ln(1/delta)); shared by the mirror-descent schedules and bounds
    return G * G + sigma * sigma * (1.0 + _log_inv_delta(delta))


SCHEDULE_PARAMS = {
    "constant": ("eta",),
    "inv_sqrt_t": ("eta",),
    "md_fixed": ("D1", "G", "sigma", "delta", "T"),
    "md_varying": ("D1", "G", "sigma", "delta"),
    "sgd_fixed": ("Delta1", "sigma", "L", "T"),
    "sgd_varying": ("L",),
    "asmd_fixed": ("D0", "G", "sigma", "L", "delta", "T"),
    "asmd_varying": ("D0", "G", "sigma", "L", "delta"),
    "asmd_linear": ("eta", "L"),
    "asmd_min": ("eta", "L"),
}


@dataclass(frozen=True)
class StepSchedule:
    """Step-size rule eta_t, t = 1, 2, ...

    Kinds
    -----
    constant        eta
    inv_sqrt_t      eta / sqrt(t)
    md_fixed        sqrt(D1 / (6 K T)),  K = G^2 + sigma^2 (1 + ln 1/delta)
    md_varying      sqrt(D1 / (6 K t))
    sgd_fixed       min(1/L, sqrt(Delta1 / (sigma^2 L T)))
    sgd_varying     1 / (L sqrt(t))
    asmd_fixed      min(t/(4L), sqrt(D0) t / (sqrt(6 K) T^1.5))
    asmd_varying    min(t/(4L), sqrt(D0) / sqrt(6 K t))
    asmd_linear     eta t          (needs eta <= 1/(4L))
    asmd_min        min(t/(4L), eta / sqrt(t))
    """

    kind: str
    params: tuple = ()

    @classmethod
    def make(cls, kind: str, **params) -> "StepSchedule":
        if kind not in SCHEDULE_PARAMS:
            raise ConfigError(f"unknown schedule kind {kind!r}")
        need = SCHEDULE_PARAMS[kind]
        missing = [p for p in need if p not in params]
        extra = [p for p in params if p not in need]
        if missing or extra:
            raise ConfigError(f"schedule {kind}: missing {missing}, unexpected {extra}")
        vals = {k: float(params[k]) for k in need}
        if "T" in vals:
            vals["T"] = int(params["T"])
            if vals["T"] < 1:
                raise ConfigError("schedule horizon T must be positive")
        for k in ("eta", "D1", "D0", "Delta1"):
            if k in vals and not vals[k] > 0:
                raise ConfigError(f"schedule {kind}: {k} must be positive")
        for k in ("G", "sigma", "L"):
            if k in vals and vals[k] < 0:
                raise ConfigError(f"schedule {kind}: {k} must be nonnegative")
        if "delta" in vals:
            _log_inv_delta(vals["delta"])
        if kind in ("sgd_fixed", "sgd_varying") and not vals["L"] > 0:
            raise ConfigError(f"schedule {kind}: L must be positive")
        if kind in ("md_fixed", "md_varying", "asmd_fixed", "asmd_varying"):
            # with K = 0 the accelerated schedules reduce to t/(4L); the others are undefined
            K = _scale_K(vals["G"], vals["sigma"], vals["delta"])
            if K <= 0 and not (kind.startswith("asmd") and vals["L"] > 0):
                raise ConfigError(f"schedule {kind}: G and sigma cannot both be zero")
        if kind == "asmd_linear" and vals["L"] > 0 and vals["eta"] > 1.0 / (4.0 * vals["L"]):
            raise ConfigError("asmd_linear needs eta <= 1/(4L)")
        return cls(kind, tuple(sorted(vals.items())))

    @property
    def p(self) -> dict:
        return dict(self.params)

    @property
    def horizon(self) -> int | None:
        return self.p.get("T")

    def etas(self, T: int) -> np.ndarray:
        """Step sizes eta_1..eta_T as an array."""
        if T < 0:
            raise InvalidInputError("T must be nonnegative")
        h = self.horizon
        if h is not None and T > h:
            raise InvalidInputError(f"schedule is defined only up to t={h}")
        t = np.arange(1, T + 1, dtype=np.float64)
        p = self.p
        k = self.kind
        if k == "constant":
            return np.full(T, p["eta"])
        if k == "inv_sqrt_t":
            return p["eta"] / np.sqrt(t)
        if k == "md_fixed":
            K = _scale_K(p["G"], p["sigma"], p["delta"])
            return np.full(T, math.sqrt(p["D1"] / (6.0 * K * p["T"])))
        if k == "md_varying":
            K = _scale_K(p["G"], p["sigma"], p["delta"])
            return np.sqrt(p["D1"] / (6.0 * K * t))
        if k == "sgd_fixed":
            eta = 1.0 / p["L"]
            if p["sigma"] > 0:
                eta = min(eta, math.sqrt(p["Delta1"] / (p["sigma"] ** 2 * p["L"] * p["T"])))
            return np.full(T, eta)
        if k == "sgd_varying":
            return 1.0 / (p["L"] * np.sqrt(t))
        if k == "asmd_fixed":
            K = _scale_K(p["G"], p["sigma"], p["delta"])
            if K == 0:
                return t / (4.0 * p["L"])
            base = math.sqrt(p["D0"]) * t / (math.sqrt(6.0 * K) * p["T"] ** 1.5)
            return _cap(base, t, p["L"])
        if k == "asmd_varying":
            K = _scale_K(p["G"], p["sigma"], p["delta"])
            if K == 0:
                return t / (4.0 * p["L"])
            return _cap(math.sqrt(p["D0"]) / np.sqrt(6.0 * K * t), t, p["L"])
        if k == "asmd_linear":
            return p["eta"] * t
        if k == "asmd_min":
            return _cap(p["eta"] / np.sqrt(t), t, p["L"])
        raise ConfigError(f"unknown schedule kind {k!r}")

    def eta(self, t: int) -> float:
        if t < 1:
            raise InvalidInputError("steps are indexed from 1")
        return float(self.etas(t)[-1])

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.p}


def _cap(base: np.ndarray, t: np.ndarray, L: float) -> np.ndarray:
    if L <= 0:
        return base
    return np.minimum(t / (4.0 * L), base)


@dataclass
class RunTrace:
    """White-box record of one run (or a batch of runs).

    Index conventions (0-based arrays):

    * ``x[k]`` is x_{k+1}; for mirror descent, SGD and AdaGrad ``x`` holds
      x_1..x_{T+1}, for the accelerated method x_1..x_T.
    * ``y[k]``, ``z[k]`` are y_k, z_k for k = 0..T.
    * ``xi[k]``, ``grad[k]``, ``ghat[k]``, ``etas[k]`` belong to step k+1.
    * ``b[k]`` is b_k for k = 0..T and ``a[k]`` is a_{k+1}.
    """

    algorithm: str
    T: int
    etas: np.ndarray
    f_star: float
    x_star: np.ndarray | None
    mirror: MirrorMap | None = None
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    alphas: np.ndarray | None = None
    xi: np.ndarray | None = None
    grad: np.ndarray | None = None
    ghat: np.ndarray | None = None
    f_x: np.ndarray | None = None
    f_y: np.ndarray | None = None
    f_gap: np.ndarray | None = None
    grad_sq: np.ndarray | None = None
    b: np.ndarray | None = None
    a: np.ndarray | None = None
    M: np.ndarray | None = None
    eta: float | None = None
    b0: Any = None
    clamped: int = 0
    x_last: np.ndarray | None = None
    x_avg: np.ndarray | None = None
    f_of_avg: Any = None
    final_bregman: Any = None
    residuals: dict = field(default_factory=dict)

    @property
    def full(self) -> bool:
        return self.xi is not None

    @property
    def family(self) -> str:
        return {"smd": "md", "asmd": "asmd"}.get(self.algorithm, "sgd")

    def summary(self) -> dict:
        out = {
            "avg_gap": np.mean(self.f_gap, axis=0),
            "avg_grad_sq": np.mean(self.grad_sq, axis=0),
            "min_grad_sq": np.min(self.grad_sq, axis=0),
            "final_gap": (self.f_y[-1] if self.algorithm == "asmd" else self.f_x[-1]) - self.f_star,
            "gap_of_average": None if self.f_of_avg is None else self.f_of_avg - self.f_star,
            "final_bregman": self.final_bregman,
        }
        return out


def _check_T(T: int):
    if int(T) != T or T < 1:
        raise InvalidInputError("T must be a positive integer (an empty run has no average)")


def _start(oracle: StochasticOracle, x1, mirror: MirrorMap | None) -> np.ndarray:
    obj = oracle.objective
    x = as_vector(x1, "starting point").copy()
    if x.shape[-1] != obj.dim:
        raise InvalidInputError("starting point has the wrong dimension")
    if mirror is not None and mirror.domain is not obj.domain:
        raise ConfigError(f"mirror map {mirror.value} does not match the {obj.domain.value} domain")
    if not obj.in_domain(x):
        raise DomainError("starting point outside the domain", 0)
    if mirror is MirrorMap.NEG_ENTROPY and np.any(x <= 0):
        raise DomainError("entropic mirror descent needs a strictly positive start", 0)
    return x


def _final_distance(mirror, x_star, point):
    if x_star is None:
        return None
    return bregman(mirror, x_star, point)


def run_smd(oracle: StochasticOracle, mirror: MirrorMap, schedule: StepSchedule, x1, T: int,
            rng: RngStream, summary_only: bool = False) -> RunTrace:
    """x_{t+1} = argmin eta_t <ghat_t, x> + D(x, x_t)."""
    _check_T(T)
    obj = oracle.objective
    x = _start(oracle, x1, mirror)
    etas = schedule.etas(T)
    batch = x.shape[:-1]
    f_x = np.empty((T + 1,) + batch)
    grad_sq = np.empty((T,) + batch)
    if not summary_only:
        xs = np.empty((T + 1,) + x.shape)
        xis = np.empty((T,) + x.shape)
        grads = np.empty((T,) + x.shape)
        ghats = np.empty((T,) + x.shape)
    x_sum = np.zeros_like(x)
    clamped = 0
    for k in range(T):
        ghat, xi, g = oracle.query(x, rng)
        f_x[k] = obj.eval(x)
        grad_sq[k] = np.sum(g * g, axis=-1)
        x_sum += x
        if not summary_only:
            xs[k] = x
            xis[k] = xi
            grads[k] = g
            ghats[k] = ghat
        x, nc = mirror.step(x, ghat, etas[k])
        clamped += nc
        if not np.all(np.isfinite(x)):
            raise DomainError(f"iterate became non-finite at step {k + 1}", k + 1)
    f_x[T] = obj.eval(x)
    x_avg = x_sum / T
    tr = RunTrace("smd", T, etas, obj.f_star, obj.x_star, mirror, f_x=f_x, grad_sq=grad_sq,
                  f_gap=f_x[:T] - obj.f_star, clamped=clamped, x_last=x, x_avg=x_avg,
                  f_of_avg=obj.eval(x_avg), final_bregman=_final_distance(mirror, obj.x_star, x))
    if not summary_only:
        xs[T] = x
        tr.x, tr.xi, tr.grad, tr.ghat = xs, xis, grads, ghats
    return tr


def run_asmd(oracle: StochasticOracle, mirror: MirrorMap, schedule: StepSchedule, x0, T: int,
             rng: RngStream, summary_only: bool = False) -> RunTrace:
    """Accelerated mirror descent with alpha_t = 2/(t+1); returns y_T as the output point."""
    _check_T(T)
    obj = oracle.objective
    y = _start(oracle, x0, mirror)
    z = y.copy()
    etas = schedule.etas(T)
    batch = y.shape[:-1]
    alphas = 2.0 / (np.arange(1, T + 1, dtype=np.float64) + 1.0)
    f_y = np.empty((T + 1,) + batch)
    f_x = np.empty((T,) + batch)
    grad_sq = np.empty((T,) + batch)
    f_y[0] = obj.eval(y)
    if not summary_only:
        xs = np.empty((T,) + y.shape)
        ys = np.empty((T + 1,) + y.shape)
        zs = np.empty((T + 1,) + y.shape)
        xis = np.empty((T,) + y.shape)
        grads = np.empty((T,) + y.shape)
        ghats = np.empty((T,) + y.shape)
        ys[0] = y
        zs[0] = z
    clamped = 0
    for k in range(T):
        alpha = alphas[k]
        x = (1.0 - alpha) * y + alpha * z
        ghat, xi, g = oracle.query(x, rng)
        f_x[k] = obj.eval(x)
        grad_sq[k] = np.sum(g * g, axis=-1)
        z, nc = mirror.step(z, ghat, etas[k])
        clamped += nc
        y = (1.0 - alpha) * y + alpha * z
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(y))):
            raise DomainError(f"iterate became non-finite at step {k + 1}", k + 1)
        f_y[k + 1] = obj.eval(y)
        if not summary_only:
            xs[k] = x
            ys[k + 1] = y
            zs[k + 1] = z
            xis[k] = xi
            grads[k] = g
            ghats[k] = ghat
    tr = RunTrace("asmd", T, etas, obj.f_star, obj.x_star, mirror, alphas=alphas, f_x=f_x,
                  f_y=f_y, f_gap=f_y[1:] - obj.f_star, grad_sq=grad_sq, clamped=clamped,
                  x_last=y, final_bregman=_final_distance(mirror, obj.x_star, z))
    if not summary_only:
        tr.x, tr.y, tr.z, tr.xi, tr.grad, tr.ghat = xs, ys, zs, xis, grads, ghats
    return tr


def run_sgd(oracle: StochasticOracle, schedule: StepSchedule, x1, T: int, rng: RngStream,
            summary_only: bool = False) -> RunTrace:
    """x_{t+1} = x_t - eta_t ghat_t on R^d."""
    _check_T(T)
    obj = oracle.objective
    if obj.domain is not Domain.ALL_SPACE:
        raise ConfigError("SGD runs on R^d only")
    x = _start(oracle, x1, None)
    etas = schedule.etas(T)
    batch = x.shape[:-1]
    f_x = np.empty((T + 1,) + batch)
    grad_sq = np.empty((T,) + batch)
    if not summary_only:
        xs = np.empty((T + 1,) + x.shape)
        xis = np.empty((T,) + x.shape)
        grads = np.empty((T,) + x.shape)
        ghats = np.empty((T,) + x.shape)
    x_sum = np.zeros_like(x)
    for k in range(T):
        ghat, xi, g = oracle.query(x, rng)
        f_x[k] = obj.eval(x)
        grad_sq[k] = np.sum(g * g, axis=-1)
        x_sum += x
        if not summary_only:
            xs[k] = x
            xis[k] = xi
            grads[k] = g
            ghats[k] = ghat
        x = x - etas[k] * ghat
        if not np.all(np.isfinite(x)):
            raise DomainError(f"iterate became non-finite at step {k + 1}", k + 1)
    f_x[T] = obj.eval(x)
    x_avg = x_sum / T
    fb = None if obj.x_star is None else bregman(MirrorMap.EUCLIDEAN, obj.x_star, x)
    tr = RunTrace("sgd", T, etas, obj.f_star, obj.x_star, None, f_x=f_x, grad_sq=grad_sq,
                  f_gap=f_x[:T] - obj.f_star, x_last=x, x_avg=x_avg, f_of_avg=obj.eval(x_avg),
                  final_bregman=fb)
    if not summary_only:
        xs[T] = x
        tr.x, tr.xi, tr.grad, tr.ghat = xs, xis, grads, ghats
    return tr


def _run_adagrad(oracle, eta, b0, x1, T, rng, coordinate: bool, summary_only: bool) -> RunTrace:
    _check_T(T)
    if not eta > 0:
        raise InvalidInputError("eta must be positive")
    obj = oracle.objective
    if obj.domain is not Domain.ALL_SPACE:
        raise ConfigError("AdaGrad runs on R^d only")
    x = _start(oracle, x1, None)
    batch = x.shape[:-1]
    if coordinate:
        b0 = as_vector(b0, "b0")
        if b0.shape != (obj.dim,):
            raise InvalidInputError("b0 needs one entry per coordinate")
        b_shape = batch + (obj.dim,)
    else:
        b0 = float(b0)
        b_shape = batch
    if np.any(np.asarray(b0) <= 0):
        raise InvalidInputError("b0 must be positive")
    b_sq = np.broadcast_to(np.asarray(b0) ** 2, b_shape).copy()
    f_x = np.empty((T + 1,) + batch)
    grad_sq = np.empty((T,) + batch)
    bs = np.empty((T + 1,) + b_shape)
    as_ = np.empty((T,) + b_shape)
    Ms = np.empty((T,) + b_shape)
    bs[0] = np.sqrt(b_sq)
    M = np.zeros(b_shape)
    if not summary_only:
        xs = np.empty((T + 1,) + x.shape)
        xis = np.empty((T,) + x.shape)
        grads = np.empty((T,) + x.shape)
        ghats = np.empty((T,) + x.shape)
    x_sum = np.zeros_like(x)
    for k in range(T):
        ghat, xi, g = oracle.query(x, rng)
        f_x[k] = obj.eval(x)
        x_sum += x
        if coordinate:
            gsq = g * g
            a_sq = b_sq + gsq
            b_sq = b_sq + ghat * ghat
            M = np.maximum(M, np.abs(xi))
            grad_sq[k] = np.sum(gsq, axis=-1)
        else:
            gsq = np.sum(g * g, axis=-1)
            a_sq = b_sq + gsq
            b_sq = b_sq + np.sum(ghat * ghat, axis=-1)
            M = np.maximum(M, np.sqrt(np.sum(xi * xi, axis=-1)))
            grad_sq[k] = gsq
        b = np.sqrt(b_sq)
        as_[k] = np.sqrt(a_sq)
        bs[k + 1] = b
        Ms[k] = M
        if not summary_only:
            xs[k] = x
            xis[k] = xi
            grads[k] = g
            ghats[k] = ghat
        step = eta / b
        x = x - (step if coordinate else step[..., None]) * ghat
        if not np.all(np.isfinite(x)):
            raise DomainError(f"iterate became non-finite at step {k + 1}", k + 1)
    f_x[T] = obj.eval(x)
    x_avg = x_sum / T
    fb = None if obj.x_star is None else bregman(MirrorMap.EUCLIDEAN, obj.x_star, x)
    tr = RunTrace("adagrad_coord" if coordinate else "adagrad_norm", T, eta / bs[1:],
                  obj.f_star, obj.x_star, None, f_x=f_x, f_gap=f_x[:T] - obj.f_star,
                  grad_sq=grad_sq, b=bs, a=as_, M=Ms, eta=float(eta), b0=b0, x_last=x,
                  x_avg=x_avg, f_of_avg=obj.eval(x_avg), final_bregman=fb)
    if not summary_only:
        xs[T] = x
        tr.x, tr.xi, tr.grad, tr.ghat = xs, xis, grads, ghats
    return tr


def run_adagrad_norm(oracle: StochasticOracle, eta: float, b0: float, x1, T: int,
                     rng: RngStream, summary_only: bool = False) -> RunTrace:
    """x_{t+1} = x_t - (eta/b_t) ghat_t with b_t^2 = b_0^2 + sum |ghat_i|^2.

    ``etas`` in the returned trace holds the effective steps eta/b_t, and
    ``a[k]`` the proxy sqrt(b_{t-1}^2 + |grad f(x_t)|^2).
    """
    return _run_adagrad(oracle, eta, b0, x1, T, rng, False, summary_only)


def run_adagrad_coord(oracle: StochasticOracle, eta: float, b0, x1, T: int, rng: RngStream,
                      summary_only: bool = False) -> RunTrace:
    """Per-coordinate AdaGrad; b, a and M are recorded coordinate-wise."""
    return _run_adagrad(oracle, eta, b0, x1, T, rng, True, summary_only)
