"""Exponential-family kernels and single-coordinate derivatives of U.

A family enters the problem only through its log-partition function
``A(eta)`` and the first two derivatives. Everything the coordinate
descent engine needs about one coordinate ``j`` with the other coefficients
frozen, ``U_j(b) = (1/n) sum_i A(eta_i^(-j) + x_ij b)``, is derived here from
a cached vector of linear predictors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import DataError, NumericalError

__all__ = [
    "FamilyKernel",
    "GAUSSIAN",
    "BINOMIAL",
    "POISSON",
    "get_family",
    "PredictorCache",
    "CoordinateSlice",
    "u_prime_j",
    "u_second_j",
    "w0_j",
    "cache_shift",
]


def _gaussian_a(eta):
    return 0.5 * eta * eta


def _gaussian_a1(eta):
    return np.asarray(eta, dtype=float)


def _gaussian_a2(eta):
    return np.ones_like(eta, dtype=float)


def _logistic_a(eta):
    # log(1 + e^eta) without overflow for large |eta|
    return np.maximum(eta, 0.0) + np.log1p(np.exp(-np.abs(eta)))


def _logistic_a2(eta):
    return expit(eta) * expit(-np.asarray(eta))


def _poisson_a(eta):
    eta = np.asarray(eta)
    if eta.max() < 709.0:
        return np.exp(eta)
    with np.errstate(over="ignore"):
        return np.exp(eta)


def _check_gaussian(y):
    pass


def _check_binomial(y):
    bad = np.flatnonzero((y != 0.0) & (y != 1.0))
    if bad.size:
        raise DataError(
            f"binomial response must be 0/1; row {bad[0] + 1} has value {y[bad[0]]!r}"
        )


def _check_poisson(y):
    bad = np.flatnonzero((y < 0.0) | (y != np.floor(y)))
    if bad.size:
        raise DataError(
            f"poisson response must be a non-negative integer; "
            f"row {bad[0] + 1} has value {y[bad[0]]!r}"
        )


@dataclass(frozen=True)
class FamilyKernel:
    """Log-partition function of a canonical-link exponential family.

    Attributes
    ----------
    family_id : str
        One of ``"gaussian"``, ``"binomial"``, ``"poisson"``.
    a, a1, a2 : callable
        ``A``, ``A'`` and ``A''`` evaluated elementwise on an array of
        natural parameters.
    curvature_floor : float
        Lower bound applied to ``A''`` when it is used as a Newton
        denominator. Reported curvatures are never floored.
    """

    family_id: str
    a: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    a1: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    a2: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    curvature_floor: float = 0.0
    check_response: Callable[[np.ndarray], None] = field(repr=False, default=_check_gaussian)

    def a2_floored(self, eta):
        h = self.a2(eta)
        if self.curvature_floor > 0.0:
            h = np.maximum(h, self.curvature_floor)
        return h


GAUSSIAN = FamilyKernel("gaussian", _gaussian_a, _gaussian_a1, _gaussian_a2)
BINOMIAL = FamilyKernel(
    "binomial", _logistic_a, expit, _logistic_a2,
    curvature_floor=1e-10, check_response=_check_binomial,
)
POISSON = FamilyKernel(
    "poisson", _poisson_a, _poisson_a, _poisson_a, check_response=_check_poisson,
)

_FAMILIES = {
    "gaussian": GAUSSIAN,
    "binomial": BINOMIAL,
    "logistic": BINOMIAL,
    "poisson": POISSON,
}


def get_family(name: str | FamilyKernel) -> FamilyKernel:
    if isinstance(name, FamilyKernel):
        return name
    try:
        return _FAMILIES[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown family {name!r}; expected one of gaussian, binomial, poisson"
        ) from None


def _mean(values: np.ndarray, n: int) -> float:
    # np.add.reduce over a contiguous 1-d array is pairwise
    return float(np.add.reduce(values)) / n


def _finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise NumericalError(f"non-finite {what}")
    return value


class PredictorCache:
    """Linear predictors ``eta = X @ coef`` kept in step with ``coef``.

    Incremental shifts are cheap but accumulate round-off, so the cache is
    rebuilt from scratch every ``refresh_period`` shifts (``2p`` by default).
    The cache owns its copy of the coefficient vector.
    """

    def __init__(self, dataset, coef=None, refresh_period: int | None = None):
        self._xt = dataset.xt
        self._x = dataset.x
        p = dataset.p
        if coef is None:
            coef = np.zeros(p)
        self.coef = np.array(coef, dtype=float)
        if self.coef.shape != (p,):
            raise ValueError(f"coefficient vector must have length {p}")
        self.refresh_period = refresh_period or 2 * p
        self.refresh_counter = 0
        self.version = 0
        self._memo = {}
        self._memo_version = -1
        self.eta = self._x @ self.coef

    def refresh(self) -> None:
        self.eta = self._x @ self.coef
        self.refresh_counter = 0
        self.version += 1

    def shift(self, j: int, delta: float) -> None:
        """Move coefficient ``j`` by ``delta`` and update ``eta`` to match."""
        self.assign(j, self.coef[j] + delta)

    def assign(self, j: int, value: float, eta=None, memo=None) -> None:
        """Set coefficient ``j``.

        A caller that already holds the new predictors (``eta``) and some
        function values at them (``memo``, keyed like :meth:`evaluate`) may
        hand them over instead of having them recomputed.
        """
        delta = value - self.coef[j]
        self.coef[j] = value
        if delta != 0.0:
            if eta is None:
                self.eta += self._xt[j] * delta
            else:
                self.eta = eta
            self.version += 1
            if memo:
                self._memo = dict(memo)
                self._memo_version = self.version
        self.refresh_counter += 1
        if self.refresh_counter >= self.refresh_period:
            self.refresh()

    def evaluate(self, fn) -> np.ndarray:
        """``fn(eta)`` memoised until ``eta`` next changes.

        Keyed on the function object, so families whose ``A``, ``A'`` and
        ``A''`` coincide (poisson) evaluate it once.
        """
        if self._memo_version != self.version:
            self._memo = {}
            self._memo_version = self.version
        out = self._memo.get(fn)
        if out is None:
            out = self._memo[fn] = fn(self.eta)
        return out

    def means(self, kernel: FamilyKernel) -> np.ndarray:
        return self.evaluate(kernel.a1)


def cache_shift(cache: PredictorCache, dataset, j: int, delta: float) -> PredictorCache:
    cache.shift(j, delta)
    return cache


class CoordinateSlice:
    """``U_j`` restricted to coordinate ``j``, other coefficients frozen.

    Includes the ridge term ``lam * b**2`` for every coordinate except the
    intercept (``j == 0``).
    """

    def __init__(self, dataset, kernel: FamilyKernel, cache: PredictorCache, j: int, lam: float = 0.0):
        self.kernel = kernel
        self.cache = cache
        self.n = dataset.n
        self.x = dataset.xt[j]
        self.x2 = dataset.xt2[j]
        self.current = float(cache.coef[j])
        self.ridge = 2.0 * lam if j > 0 else 0.0
        if self.current != 0.0:
            self.offset = cache.eta - self.x * self.current
        else:
            self.offset = cache.eta

    def _eta(self, b: float) -> np.ndarray:
        if b == self.current:
            return self.cache.eta
        if b == 0.0:
            return self.offset
        return self.offset + self.x * b

    def _apply(self, fn, b: float) -> np.ndarray:
        if b == self.current:
            return self.cache.evaluate(fn)
        return fn(self._eta(b))

    def value(self, b: float) -> float:
        u = _mean(self._apply(self.kernel.a, b), self.n) + 0.5 * self.ridge * b * b
        return _finite(u, "value of U_j")

    def d1(self, b: float) -> float:
        g = _mean(self.x * self._apply(self.kernel.a1, b), self.n) + self.ridge * b
        return _finite(g, "first derivative of U_j")

    def d2(self, b: float, floored: bool = False) -> float:
        h = self._apply(self.kernel.a2, b)
        if floored and self.kernel.curvature_floor > 0.0:
            h = np.maximum(h, self.kernel.curvature_floor)
        return _finite(_mean(self.x2 * h, self.n) + self.ridge, "second derivative of U_j")

    def value_change(self, b_from: float, b_to: float, keep: bool = False):
        """``U_j(b_to) - U_j(b_from)`` summed termwise, and ``U_j(b_from)``.

        The second value sets the scale of the round-off in the first. With
        ``keep`` a third item ``(eta, A(eta))`` at ``b_to`` is returned for
        reuse by :meth:`PredictorCache.assign`.
        """
        a_from = self._apply(self.kernel.a, b_from)
        eta_to = self._eta(b_to)
        a_to = self.kernel.a(eta_to) if b_to != self.current else self.cache.evaluate(self.kernel.a)
        d = _mean(a_to - a_from, self.n)
        d += 0.5 * self.ridge * (b_to * b_to - b_from * b_from)
        base = _mean(a_from, self.n) + 0.5 * self.ridge * b_from * b_from
        d = _finite(d, "change of U_j")
        if keep:
            return d, base, (eta_to, a_to)
        return d, base


def u_prime_j(dataset, kernel, cache, j, beta_j, lam=0.0) -> float:
    """``dU_j/db`` at ``b = beta_j`` (ridge included for ``j > 0``)."""
    return CoordinateSlice(dataset, kernel, cache, j, lam).d1(float(beta_j))


def u_second_j(dataset, kernel, cache, j, beta_j, lam=0.0) -> float:
    return CoordinateSlice(dataset, kernel, cache, j, lam).d2(float(beta_j))


def w0_j(dataset, kernel, cache, j, lam=0.0) -> float:
    """Threshold centre ``U_j'(0)``; the ridge term vanishes at zero."""
    return CoordinateSlice(dataset, kernel, cache, j, lam).d1(0.0)
