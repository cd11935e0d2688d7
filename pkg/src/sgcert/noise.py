"""Sub-Gaussian noise models, stochastic oracles and Monte-Carlo MGF checks.

A random vector X is sigma-sub-Gaussian (in a norm) when
``E exp(lam^2 |X|^2) <= exp(lam^2 sigma^2)`` for every ``|lam| <= 1/sigma``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import InvalidInputError, NormPair, Objective, RngStream, as_vector


class PreconditionError(ValueError):
    """A documented precondition of a check does not hold."""


class NoiseKind(enum.Enum):
    NONE = "none"
    GAUSSIAN_ISO = "gaussian_iso"
    GAUSSIAN_DIAG = "gaussian_diag"
    BOUNDED_RADEMACHER = "bounded_rademacher"


def default_sigma(kind: NoiseKind, scale, dim: int, per_coordinate: bool = False):
    """Sub-Gaussian parameter (Euclidean norm) that each model is certified for.

    Gaussian with std s in d coordinates: |X|^2 = s^2 chi^2_d, whose MGF
    ``(1 - 2 lam^2 s^2)^(-d/2)`` stays below ``exp(4 lam^2 s^2 d)`` as long as
    ``lam^2 s^2 <= 1/(4d)``, hence sigma = 2 s sqrt(d). Rademacher signs scaled
    by c have |X| = c sqrt(d) exactly.
    """
    if kind is NoiseKind.NONE:
        return 0.0
    if kind is NoiseKind.GAUSSIAN_ISO:
        return 2.0 * float(scale) * math.sqrt(dim)
    if kind is NoiseKind.GAUSSIAN_DIAG:
        s = np.asarray(scale, dtype=np.float64)
        if per_coordinate:
            return 2.0 * s
        return 2.0 * float(np.sqrt(np.sum(s * s)))
    return float(scale) * math.sqrt(dim)


@dataclass(frozen=True)
class NoiseModel:
    """Additive zero-mean gradient noise with a declared sub-Gaussian parameter."""

    kind: NoiseKind
    dim: int
    scale: Any = 0.0
    declared_sigma: Any = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError("noise dimension must be at least 1")
        if self.kind is NoiseKind.GAUSSIAN_DIAG:
            s = np.asarray(self.scale, dtype=np.float64)
            if s.shape != (self.dim,) or np.any(s <= 0):
                raise InvalidInputError("GaussianDiag needs one positive std per coordinate")
        elif self.kind is not NoiseKind.NONE and not float(self.scale) > 0:
            raise InvalidInputError("noise scale must be positive")
        sig = np.asarray(self.declared_sigma, dtype=np.float64)
        if self.kind is NoiseKind.NONE:
            if np.any(sig != 0):
                raise InvalidInputError("declared sigma must be 0 for the noiseless model")
        elif np.any(sig <= 0) or not np.all(np.isfinite(sig)):
            raise InvalidInputError("declared sigma must be positive")

    @classmethod
    def none(cls, dim: int) -> "NoiseModel":
        return cls(NoiseKind.NONE, dim, 0.0, 0.0)

    @classmethod
    def gaussian_iso(cls, std: float, dim: int, sigma: float | None = None) -> "NoiseModel":
        if sigma is None:
            sigma = default_sigma(NoiseKind.GAUSSIAN_ISO, std, dim)
        return cls(NoiseKind.GAUSSIAN_ISO, dim, float(std), float(sigma))

    @classmethod
    def gaussian_diag(cls, stds, sigma=None, per_coordinate: bool = False) -> "NoiseModel":
        s = tuple(float(v) for v in np.atleast_1d(stds))
        if sigma is None:
            sigma = default_sigma(NoiseKind.GAUSSIAN_DIAG, s, len(s), per_coordinate)
        if np.ndim(sigma):
            sigma = tuple(float(v) for v in sigma)
        return cls(NoiseKind.GAUSSIAN_DIAG, len(s), s, sigma)

    @classmethod
    def rademacher(cls, scale: float, dim: int, sigma: float | None = None) -> "NoiseModel":
        if sigma is None:
            sigma = default_sigma(NoiseKind.BOUNDED_RADEMACHER, scale, dim)
        return cls(NoiseKind.BOUNDED_RADEMACHER, dim, float(scale), float(sigma))

    @property
    def sigma(self) -> float:
        """Scalar sigma; per-coordinate declarations reduce by the Euclidean norm."""
        s = np.asarray(self.declared_sigma, dtype=np.float64)
        if s.ndim == 0:
            return float(s)
        return float(np.sqrt(np.sum(s * s)))

    def draw(self, rng: RngStream, batch_shape: tuple = ()) -> np.ndarray:
        shape = tuple(batch_shape) + (self.dim,)
        if self.kind is NoiseKind.NONE:
            return np.zeros(shape)
        if self.kind is NoiseKind.BOUNDED_RADEMACHER:
            return self.scale * rng.signs(shape)
        z = rng.standard_normal(shape)
        if self.kind is NoiseKind.GAUSSIAN_DIAG:
            return np.asarray(self.scale) * z
        return self.scale * z

    def gaussian_log_mgf_sq(self, lam: float) -> float:
        """log E exp(lam^2 |X|_2^2) in closed form for the Gaussian kinds (inf if divergent)."""
        s = np.broadcast_to(np.asarray(self.scale, dtype=np.float64), (self.dim,))
        u = 2.0 * lam * lam * s * s
        if np.any(u >= 1.0):
            return math.inf
        return float(-0.5 * np.sum(np.log1p(-u)))


@dataclass(frozen=True)
class StochasticOracle:
    objective: Objective
    noise: NoiseModel
    white_box: bool = True

    def query(self, x: np.ndarray, rng: RngStream):
        """Return (ghat, xi, grad) with ghat = grad + xi."""
        g = self.objective.grad(x)
        xi = self.noise.draw(rng, np.shape(x)[:-1])
        return g + xi, xi, g


def sample(oracle: StochasticOracle, x, rng: RngStream):
    """Stochastic gradient and its noise at x."""
    ghat, xi, _ = oracle.query(np.asarray(x, dtype=np.float64), rng)
    return ghat, xi


def _log_mean_exp(v: np.ndarray) -> float:
    m = float(np.max(v))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.mean(np.exp(v - m))))


@dataclass
class CertReport:
    lambdas: list
    estimates: list
    bounds: list
    passed: bool
    worst_margin: float
    reason: str = ""
    sigma: Any = None

    def to_dict(self) -> dict:
        return {
            "lambda_grid": self.lambdas,
            "estimates": self.estimates,
            "bounds": self.bounds,
            "pass": self.passed,
            "worst_margin": self.worst_margin,
            "reason": self.reason,
            "sigma": self.sigma,
        }


def certify_subgaussian(model: NoiseModel, n_samples: int = 100_000, n_lambda: int = 16,
                        rng: RngStream | None = None, slack: float | None = None,
                        per_coordinate: bool | None = None) -> CertReport:
    """Empirically test the sub-Gaussian definition for ``model.declared_sigma``.

    The grid is ``lam_k = k / (n_lambda * sigma)``, k = 1..n_lambda. For
    Gaussian models the closed-form MGF is consulted as well, so a grid point
    where the true MGF is infinite is reported as a failure even if the
    finite sample happens to look tame.
    """
    if n_samples < 100_000:
        raise PreconditionError("certification needs at least 1e5 samples")
    if rng is None:
        rng = RngStream(0)
    if slack is None:
        slack = 3.0 / math.sqrt(n_samples)
    sig = np.asarray(model.declared_sigma, dtype=np.float64)
    if per_coordinate is None:
        per_coordinate = sig.ndim == 1
    X = model.draw(rng, (n_samples,))

    if model.kind is NoiseKind.NONE:
        lams = [float(k) / n_lambda for k in range(1, n_lambda + 1)]
        return CertReport(lams, [1.0] * n_lambda, [math.exp(l * l * 0.0) for l in lams],
                          True, 0.0, "", 0.0)

    if per_coordinate:
        sig = np.broadcast_to(sig, (model.dim,))
        lam_rows, est_rows, bnd_rows = [], [], []
        passed, worst, reason = True, math.inf, ""
        stds = np.broadcast_to(np.asarray(model.scale, dtype=np.float64), (model.dim,))
        for i in range(model.dim):
            sub = NoiseModel(NoiseKind.GAUSSIAN_ISO, 1, float(stds[i]), float(sig[i])) \
                if model.kind is not NoiseKind.BOUNDED_RADEMACHER else None
            r = _certify_values(X[:, i] ** 2, float(sig[i]), n_lambda, slack, sub)
            lam_rows.append(r.lambdas)
            est_rows.append(r.estimates)
            bnd_rows.append(r.bounds)
            if not r.passed:
                passed = False
                reason = reason or f"coordinate {i}: {r.reason}"
            worst = min(worst, r.worst_margin)
        return CertReport(lam_rows, est_rows, bnd_rows, passed, worst, reason, sig.tolist())

    sq = np.sum(X * X, axis=-1)
    gauss = model if model.kind in (NoiseKind.GAUSSIAN_ISO, NoiseKind.GAUSSIAN_DIAG) else None
    return _certify_values(sq, float(sig) if sig.ndim == 0 else model.sigma, n_lambda, slack, gauss)


def _certify_values(sq: np.ndarray, sigma: float, n_lambda: int, slack: float,
                    gauss: NoiseModel | None) -> CertReport:
    lams, ests, bnds = [], [], []
    passed, worst, reason = True, math.inf, ""
    for k in range(1, n_lambda + 1):
        lam = k / (n_lambda * sigma)
        log_est = _log_mean_exp(lam * lam * sq)
        log_bound = lam * lam * sigma * sigma
        divergent = not math.isfinite(log_est)
        if gauss is not None and not math.isfinite(gauss.gaussian_log_mgf_sq(lam)):
            divergent = True
        est = math.exp(log_est) if math.isfinite(log_est) and log_est < 700 else math.inf
        bound = math.exp(log_bound)
        lams.append(lam)
        ests.append(est if not divergent else math.inf)
        bnds.append(bound)
        if divergent:
            passed = False
            reason = "divergent MGF"
            worst = -math.inf
            continue
        margin = bound * (1.0 + slack) - est
        worst = min(worst, margin / bound)
        if margin < 0:
            passed = False
            reason = reason or f"estimate exceeds bound at lambda={lam:.6g}"
    return CertReport(lams, ests, bnds, passed, worst, reason, sigma)


@dataclass
class CheckReport:
    name: str
    estimate: float
    bound: float
    threshold: float
    passed: bool
    n: int
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "estimate": self.estimate,
            "bound": self.bound,
            "threshold": self.threshold,
            "pass": self.passed,
            "n": self.n,
            "details": self.details,
        }


def mgf_lemma_check(a, b: float, model: NoiseModel, pair: NormPair = NormPair.EUCLIDEAN_L2,
                    n_samples: int = 100_000, rng: RngStream | None = None,
                    sigma: float | None = None) -> CheckReport:
    """Monte-Carlo check of ``E exp(<a,X> + b^2 |X|^2) <= exp(3(|a|^2 + b^2) sigma^2)``.

    X is measured in the dual norm of ``pair`` (the norm its sub-Gaussian
    parameter refers to) and ``a`` in the primal norm, which is the pairing
    that makes ``<a, X> <= |a| |X|_*``. With b = 0 the sharper bound
    ``exp(2 |a|^2 sigma^2)`` is checked too.
    """
    a = as_vector(a, "a")
    if a.shape != (model.dim,):
        raise InvalidInputError("a must match the noise dimension")
    if rng is None:
        rng = RngStream(0)
    if sigma is None:
        sigma = model.sigma
    if b < 0:
        raise PreconditionError("b must be nonnegative")
    if sigma > 0 and b > 1.0 / (2.0 * sigma):
        raise PreconditionError(f"b={b} exceeds 1/(2 sigma)={1.0 / (2.0 * sigma)}")
    X = model.draw(rng, (n_samples,))
    nx = pair.dual(X)
    log_est = _log_mean_exp(X @ a + b * b * nx * nx)
    na = float(pair.primal(a))
    log_bound = 3.0 * (na * na + b * b) * sigma * sigma
    tol = 1.0 + 3.0 / math.sqrt(n_samples)
    est = math.exp(log_est)
    bound = math.exp(log_bound)
    passed = est <= bound * tol
    details = {"sigma": sigma, "a_norm": na, "b": b}
    if b == 0:
        sharp = math.exp(2.0 * na * na * sigma * sigma)
        details["sharp_bound"] = sharp
        details["sharp_pass"] = est <= sharp * tol
        passed = passed and details["sharp_pass"]
    return CheckReport("mgf_lemma", est, bound, bound * tol, bool(passed), n_samples, details)
