"""Mirror maps, Bregman divergences and closed-form mirror steps."""

from __future__ import annotations

import enum

import numpy as np

from .core import Domain, InvalidInputError, NormPair

CLAMP_FLOOR = 1e-300


class DivergenceInfiniteError(ValueError):
    """The KL divergence is infinite (y_i = 0 where x_i > 0)."""


class MirrorMap(enum.Enum):
    """Half squared Euclidean norm on R^d, or negative entropy on the simplex."""

    EUCLIDEAN = "euclidean"
    NEG_ENTROPY = "neg_entropy"

    @property
    def norm(self) -> NormPair:
        return NormPair.EUCLIDEAN_L2 if self is MirrorMap.EUCLIDEAN else NormPair.L1_LINF

    @property
    def domain(self) -> Domain:
        return Domain.ALL_SPACE if self is MirrorMap.EUCLIDEAN else Domain.SIMPLEX

    def psi(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self is MirrorMap.EUCLIDEAN:
            return 0.5 * np.sum(x * x, axis=-1)
        return np.sum(_xlogx(x), axis=-1)

    def grad_psi(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self is MirrorMap.EUCLIDEAN:
            return x.copy()
        return np.log(x) + 1.0

    def step(self, x, g, eta):
        """Mirror step; returns the new point and the number of clamped entries."""
        x = np.asarray(x, dtype=np.float64)
        if self is MirrorMap.EUCLIDEAN:
            return x - eta * g, 0
        if eta == 0:
            return x.copy(), 0
        logits = np.log(x) - eta * g
        logits = logits - np.max(logits, axis=-1, keepdims=True)
        w = np.exp(logits)
        out = w / np.sum(w, axis=-1, keepdims=True)
        low = out < CLAMP_FLOOR
        n_clamped = int(np.count_nonzero(low))
        if n_clamped:
            out = np.where(low, CLAMP_FLOOR, out)
        return out, n_clamped


def _xlogx(x):
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, x * np.log(safe), 0.0)


def bregman(mirror: MirrorMap, x, y):
    """D(x, y) = psi(x) - psi(y) - <grad psi(y), x - y>.

    For the negative entropy this is the generalized KL divergence
    ``sum x ln(x/y) - sum x + sum y`` with 0 ln 0 = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[-1] == 0:
        raise InvalidInputError("empty vector")
    if mirror is MirrorMap.EUCLIDEAN:
        d = x - y
        return 0.5 * np.sum(d * d, axis=-1)
    if np.any((y <= 0) & (x > 0)):
        raise DivergenceInfiniteError("y has a zero entry where x is positive")
    safe_y = np.where(y > 0, y, 1.0)
    safe_x = np.where(x > 0, x, 1.0)
    terms = np.where(x > 0, x * (np.log(safe_x) - np.log(safe_y)), 0.0)
    return np.sum(terms, axis=-1) - np.sum(x, axis=-1) + np.sum(y, axis=-1)


def mirror_step(mirror: MirrorMap, x, g, eta: float):
    """argmin over the domain of eta <g, u> + D(u, x), in closed form."""
    if eta < 0:
        raise InvalidInputError("step size must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if mirror is MirrorMap.NEG_ENTROPY and np.any(x <= 0):
        raise InvalidInputError("entropic step needs a strictly positive point")
    return mirror.step(x, g, eta)[0]
