"""Norms, objectives, test problems and seeded randomness.

Every function here works on float64 arrays whose last axis holds the
coordinates, so a batch of independent iterates of shape ``(n, d)`` can be
evaluated in one call.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np


class InvalidInputError(ValueError):
    """Raised for malformed numeric input (empty or non-finite vectors)."""


class ConfigError(ValueError):
    """Raised for an unknown or inconsistent configuration."""


class DomainError(RuntimeError):
    """An iterate left the domain of the objective."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


def as_vector(v: Any, name: str = "vector") -> np.ndarray:
    """Convert to a float64 array with at least one coordinate and finite entries."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] == 0:
        raise InvalidInputError(f"{name} has dimension 0")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


class NormPair(enum.Enum):
    """A primal norm together with its dual."""

    EUCLIDEAN_L2 = "euclidean_l2"
    L1_LINF = "l1_linf"

    def primal(self, v: np.ndarray) -> np.ndarray | float:
        v = np.asarray(v, dtype=np.float64)
        if self is NormPair.EUCLIDEAN_L2:
            return _l2(v)
        return np.sum(np.abs(v), axis=-1)

    def dual(self, v: np.ndarray) -> np.ndarray | float:
        v = np.asarray(v, dtype=np.float64)
        if self is NormPair.EUCLIDEAN_L2:
            return _l2(v)
        return np.max(np.abs(v), axis=-1)


def _l2(v: np.ndarray):
    # scaled by the largest entry so tiny and huge vectors neither underflow nor overflow
    m = np.max(np.abs(v), axis=-1, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    u = v / safe
    return np.sqrt(np.sum(u * u, axis=-1)) * safe[..., 0]


def dual_norm(pair: NormPair, v: Any) -> float:
    """Dual norm of a single vector."""
    arr = as_vector(v)
    return float(pair.dual(arr))


def primal_norm(pair: NormPair, v: Any) -> float:
    arr = as_vector(v)
    return float(pair.primal(arr))


class Domain(enum.Enum):
    ALL_SPACE = "all_space"
    SIMPLEX = "simplex"


class Objective:
    """Deterministic objective with gradient oracle and known constants.

    Attributes
    ----------
    lipschitz_G : bound on the dual norm of the (sub)gradient, or None when
        the gradient is unbounded.
    smooth_L : Lipschitz constant of the gradient, or None.
    upper_G, upper_L : constants of the upper model
        ``f(y) <= f(x) + <g(x), y - x> + upper_G*|y - x| + upper_L/2*|y - x|^2``
        used by the accelerated method; None when unavailable.
    f_star : exact optimal value or a certified lower bound
        (``f_star_exact`` tells which).
    """

    name = "objective"
    domain = Domain.ALL_SPACE
    norm = NormPair.EUCLIDEAN_L2

    def __init__(self, dim: int):
        if dim < 1:
            raise ConfigError("dimension must be at least 1")
        self.dim = int(dim)
        self.lipschitz_G: float | None = None
        self.smooth_L: float | None = None
        self.upper_G: float | None = None
        self.upper_L: float | None = None
        self.f_star: float = 0.0
        self.f_star_exact = False
        self.x_star: np.ndarray | None = None

    def eval(self, x: np.ndarray) -> np.ndarray | float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def default_x1(self) -> np.ndarray:
        raise NotImplementedError

    def in_domain(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        x = np.asarray(x)
        if not np.all(np.isfinite(x)):
            return False
        if self.domain is Domain.SIMPLEX:
            return bool(np.all(x >= 0) and np.all(np.abs(np.sum(x, axis=-1) - 1.0) <= tol))
        return True

    def describe(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "lipschitz_G": self.lipschitz_G,
            "smooth_L": self.smooth_L,
            "f_star": self.f_star,
            "f_star_exact": self.f_star_exact,
        }


class Quadratic(Objective):
    """f(x) = 1/2 sum a_i x_i^2 - <b, x> with a_i > 0."""

    name = "Quadratic"

    def __init__(self, diag, b=None):
        a = as_vector(diag, "diag")
        if a.ndim != 1 or np.any(a <= 0):
            raise ConfigError("Quadratic needs a positive diagonal")
        super().__init__(a.size)
        self.a = a
        self.b = np.zeros_like(a) if b is None else as_vector(b, "b")
        if self.b.shape != a.shape:
            raise ConfigError("Quadratic: b must match diag")
        self.smooth_L = float(np.max(a))
        self.upper_G = 0.0
        self.upper_L = self.smooth_L
        self.x_star = self.b / self.a
        self.f_star = float(-0.5 * np.sum(self.b * self.b / self.a))
        self.f_star_exact = True

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * np.sum(self.a * x * x, axis=-1) - np.sum(self.b * x, axis=-1)

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.a * x - self.b

    def default_x1(self):
        return self.x_star + 1.0


class AbsSum(Objective):
    """f(x) = sum |x_i - c_i| with subgradient sign(x - c), sign(0) = 0."""

    name = "AbsSum"

    def __init__(self, dim: int, center=None):
        super().__init__(dim)
        self.center = np.zeros(self.dim) if center is None else as_vector(center, "center")
        if self.center.shape != (self.dim,):
            raise ConfigError("AbsSum: center must have length dim")
        self.lipschitz_G = math.sqrt(self.dim)
        # |y| - |x| - s(y - x) <= 2|y - x|_1 <= 2 sqrt(d) |y - x|_2
        self.upper_G = 2.0 * math.sqrt(self.dim)
        self.upper_L = 0.0
        self.x_star = self.center.copy()
        self.f_star = 0.0
        self.f_star_exact = True

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.sum(np.abs(x - self.center), axis=-1)

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.sign(x - self.center)

    def default_x1(self):
        return self.center + 1.0


class SmoothNonconvex(Objective):
    """f(x) = sum x_i^2 + 3 sin^2(x_i).

    The second derivative per coordinate is 2 + 6 cos(2 x_i), so the
    gradient is 8-Lipschitz. The origin is the only stationary point.
    """

    name = "SmoothNonconvex"

    def __init__(self, dim: int):
        super().__init__(dim)
        self.smooth_L = 8.0
        self.x_star = np.zeros(self.dim)
        self.f_star = 0.0
        self.f_star_exact = True

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        s = np.sin(x)
        return np.sum(x * x + 3.0 * s * s, axis=-1)

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        return 2.0 * x + 3.0 * np.sin(2.0 * x)

    def default_x1(self):
        return np.full(self.dim, 2.0)


class SimplexLinEntropy(Objective):
    """f(x) = <c, x> + tau sum x_i ln x_i over the probability simplex."""

    name = "SimplexLinEntropy"
    domain = Domain.SIMPLEX
    norm = NormPair.L1_LINF

    def __init__(self, c, tau: float = 0.0):
        c = as_vector(c, "c")
        if c.ndim != 1:
            raise ConfigError("SimplexLinEntropy: c must be a vector")
        if tau < 0:
            raise ConfigError("SimplexLinEntropy: tau must be nonnegative")
        super().__init__(c.size)
        self.c = c
        self.tau = float(tau)
        if self.tau == 0.0:
            j = int(np.argmin(c))
            if np.sum(c == c[j]) > 1:
                raise ConfigError("SimplexLinEntropy with tau=0 needs a unique minimal cost")
            self.x_star = np.zeros(self.dim)
            self.x_star[j] = 1.0
            self.f_star = float(c[j])
            self.lipschitz_G = float(np.max(np.abs(c)))
            self.upper_G = 0.0
            self.upper_L = 0.0
        else:
            z = -c / self.tau
            m = np.max(z)
            e = np.exp(z - m)
            self.x_star = e / np.sum(e)
            self.f_star = float(-self.tau * (m + math.log(np.sum(e))))
        self.f_star_exact = True

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        val = np.sum(self.c * x, axis=-1)
        if self.tau > 0:
            xlogx = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)
            val = val + self.tau * np.sum(xlogx, axis=-1)
        return val

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.tau > 0:
            return self.c + self.tau * (np.log(x) + 1.0)
        return np.broadcast_to(self.c, x.shape).copy()

    def default_x1(self):
        return np.full(self.dim, 1.0 / self.dim)


class LogisticSynthetic(Objective):
    """Average logistic loss on a seeded synthetic data set.

    The optimal value is unknown; 0 is stored as a certified lower bound.
    """

    name = "LogisticSynthetic"

    def __init__(self, n: int, dim: int, seed: int = 0):
        super().__init__(dim)
        if n < 1:
            raise ConfigError("LogisticSynthetic needs n >= 1")
        gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
        A = gen.standard_normal((n, dim))
        w = gen.standard_normal(dim)
        y = np.sign(A @ w + 0.5 * gen.standard_normal(n))
        y[y == 0] = 1.0
        self.n = int(n)
        self.A = A
        self.y = y
        self.YA = y[:, None] * A
        self.smooth_L = float(np.linalg.norm(A, 2) ** 2 / (4.0 * n))
        self.lipschitz_G = float(np.max(np.linalg.norm(A, axis=1)))
        self.f_star = 0.0
        self.f_star_exact = False

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        m = x @ self.YA.T
        return np.mean(np.logaddexp(0.0, -m), axis=-1)

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        m = x @ self.YA.T
        s = -0.5 * (1.0 - np.tanh(0.5 * m))  # -sigmoid(-m), stable
        return (s @ self.YA) / self.n

    def default_x1(self):
        return np.zeros(self.dim)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    params: Mapping[str, Any] = field(default_factory=dict)


_PROBLEMS = {
    "Quadratic": (Quadratic, {"diag", "b"}),
    "AbsSum": (AbsSum, {"dim", "center"}),
    "SmoothNonconvex": (SmoothNonconvex, {"dim"}),
    "SimplexLinEntropy": (SimplexLinEntropy, {"c", "tau"}),
    "LogisticSynthetic": (LogisticSynthetic, {"n", "dim", "seed"}),
}


def make_problem(spec: ProblemSpec | Mapping[str, Any]) -> Objective:
    """Build one of the bundled test problems.

    ``spec`` is a ProblemSpec or a mapping ``{"name": ..., **params}``.
    """
    if isinstance(spec, Mapping):
        params = dict(spec)
        name = params.pop("name", None)
        spec = ProblemSpec(name, params)
    if spec.name not in _PROBLEMS:
        raise ConfigError(f"unknown problem {spec.name!r}")
    cls, allowed = _PROBLEMS[spec.name]
    extra = set(spec.params) - allowed
    if extra:
        raise ConfigError(f"{spec.name}: unknown parameters {sorted(extra)}")
    try:
        return cls(**spec.params)
    except TypeError as exc:
        raise ConfigError(f"{spec.name}: {exc}") from exc


class RngStream:
    """Seeded random stream for one trial.

    The generator is PCG64 seeded with ``SeedSequence(seed, spawn_key=(stream_id,))``,
    so streams for distinct trial indices are derived by numpy's SeedSequence
    hashing of the pair and never overlap in practice.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise InvalidInputError("seed and stream_id must be nonnegative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def standard_normal(self, shape) -> np.ndarray:
        return self.gen.standard_normal(shape)

    def signs(self, shape) -> np.ndarray:
        return 2.0 * self.gen.integers(0, 2, size=shape).astype(np.float64) - 1.0

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"
