"""Problem definition: data, penalties, solver configuration and the objective.

The penalised cost minimised throughout the package is::

    H(beta) = U(beta) - w @ beta + lam * sum_{j>=1} beta_j**2 + sum_j mu_j |beta_j|

with ``U(beta) = (1/n) sum_i A(x_i @ beta)`` and ``w = (1/n) sum_i y_i x_i``.
Column 0 of the design matrix is the intercept and carries neither the
l1 nor the l2 penalty.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, NumericalError
from .family import FamilyKernel

__all__ = [
    "Dataset",
    "PenaltySpec",
    "FitConfig",
    "FitResult",
    "UPDATE_RULES",
    "pairwise_sum",
    "moment_vector",
    "score",
    "relative_score_difference",
]

UPDATE_RULES = ("exact", "linear", "glmnet")


def pairwise_sum(values) -> float:
    """Sum a 1-d array with numpy's pairwise (tree) reduction."""
    return float(np.add.reduce(np.ascontiguousarray(values, dtype=float)))


def moment_vector(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``w = (1/n) sum_i y_i x_i``, independent of the sample order.

    Each column's terms are sorted before the pairwise reduction, so any
    permutation of the rows gives a bit-identical result.
    """
    n = x.shape[0]
    terms = np.sort(np.ascontiguousarray((x * y[:, None]).T), axis=1)
    return np.add.reduce(terms, axis=1) / n


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix with intercept column, response and moment vector.

    Parameters
    ----------
    x : (n, p) array
        Predictors; column 0 must be identically 1.0.
    y : (n,) array
        Responses.
    column_names : sequence of str, optional
        Names of all ``p`` columns, the first being the intercept.
    column_scales : (p,) array, optional
        Divisors applied to the raw predictors when the data were
        standardised on load. ``None`` means raw scale.

    Attributes
    ----------
    w : (p,) array
        ``(1/n) sum_i y_i x_i``, computed at construction.
    xt : (p, n) array
        C-contiguous transpose, so that each predictor column is a
        contiguous row.
    xt2 : (p, n) array
        Elementwise square of ``xt``.
    """

    x: np.ndarray
    y: np.ndarray
    column_names: Optional[tuple] = None
    column_scales: Optional[np.ndarray] = None
    w: np.ndarray = field(init=False, repr=False)
    xt: np.ndarray = field(init=False, repr=False)
    xt2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.array(self.x, dtype=float, order="C")
        y = np.array(self.y, dtype=float)
        if x.ndim != 2:
            raise DataError("design matrix must be two-dimensional")
        n, p = x.shape
        if n < 1 or p < 1:
            raise DataError("design matrix needs at least one row and one column")
        if y.shape != (n,):
            raise DataError(f"response must have length {n}, got shape {y.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("design matrix and response must be finite")
        if not np.all(x[:, 0] == 1.0):
            raise DataError("column 0 of the design matrix must be the intercept (all 1.0)")
        names = tuple(self.column_names) if self.column_names is not None else None
        if names is not None and len(names) != p:
            raise DataError(f"expected {p} column names, got {len(names)}")
        scales = None
        if self.column_scales is not None:
            scales = np.array(self.column_scales, dtype=float)
            scales.flags.writeable = False
        xt = np.ascontiguousarray(x.T)
        xt2 = xt * xt
        w = moment_vector(x, y)
        for arr in (x, y, xt, xt2, w):
            arr.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "xt", xt)
        object.__setattr__(self, "xt2", xt2)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "column_scales", scales)

    @classmethod
    def from_predictors(cls, z, y, names: Sequence[str] | None = None, **kwargs) -> "Dataset":
        """Build a dataset from predictors without the intercept column."""
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        x = np.column_stack([np.ones(z.shape[0]), z])
        if names is not None:
            names = ("(intercept)", *names)
        return cls(x, y, column_names=names, **kwargs)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class PenaltySpec:
    """Per-coefficient l1 weights ``mu`` and global l2 strength ``lam``."""

    mu: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        if mu.ndim != 1 or mu.size < 1:
            raise ValueError("mu must be a non-empty vector")
        if not np.all(np.isfinite(mu)) or np.any(mu < 0):
            raise ValueError("mu must be finite and non-negative")
        if mu[0] != 0.0:
            raise ValueError("the intercept is unpenalised: mu[0] must be 0")
        lam = float(self.lam)
        if not np.isfinite(lam) or lam < 0:
            raise ValueError("lam must be finite and non-negative")
        mu.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def uniform(cls, p: int, mu: float, lam: float = 0.0) -> "PenaltySpec":
        """The same l1 weight on every coefficient except the intercept."""
        weights = np.full(p, float(mu))
        weights[0] = 0.0
        return cls(weights, lam)

    @property
    def p(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class FitConfig:
    """Coordinate descent settings.

    ``root_tol`` defaults to ``eps / 10`` and may not exceed it, so that the
    accuracy of the scalar root solves never dominates the convergence test.
    """

    eps: float = 1e-6
    max_outer_cycles: int = 10_000
    max_active_cycles: int = 100_000
    update_rule: str = "linear"
    root_tol: Optional[float] = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_outer_cycles < 1 or self.max_active_cycles < 1:
            raise ValueError("cycle limits must be positive")
        if self.update_rule not in UPDATE_RULES:
            raise ValueError(f"update_rule must be one of {UPDATE_RULES}")
        root_tol = self.eps / 10 if self.root_tol is None else float(self.root_tol)
        if not 0 < root_tol <= self.eps / 10 * (1 + 1e-12):
            raise ValueError("root_tol must be positive and at most eps/10")
        object.__setattr__(self, "root_tol", root_tol)


@dataclass
class FitResult:
    beta: np.ndarray
    objective: float
    dual_u: np.ndarray
    outer_cycles: int
    active_cycles: int
    coordinate_updates: int
    converged: bool
    last_cycle_max_delta: float
    update_rule: str = "linear"

    @property
    def nonzero(self) -> np.ndarray:
        return np.flatnonzero(self.beta)


def score(dataset: Dataset, family: FamilyKernel, penalty: PenaltySpec, beta) -> float:
    """Penalised objective ``H(beta)`` evaluated from scratch."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (dataset.p,):
        raise ValueError(f"beta must have length {dataset.p}")
    if not np.all(np.isfinite(beta)):
        raise NumericalError("beta has non-finite entries")
    eta = dataset.x @ beta
    u = pairwise_sum(family.a(eta)) / dataset.n
    if not np.isfinite(u):
        raise NumericalError(f"U(beta) is not finite for the {family.family_id} family")
    linear = pairwise_sum(dataset.w * beta)
    ridge = penalty.lam * pairwise_sum(beta[1:] ** 2)
    l1 = pairwise_sum(penalty.mu * np.abs(beta))
    return u - linear + ridge + l1


def relative_score_difference(h1, h2) -> float:
    """``max_k (h1[k] - h2[k]) / h1[k]`` for two runs over the same penalties."""
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    if h1.shape != h2.shape or h1.ndim != 1:
        raise ValueError("objective vectors must be one-dimensional with equal length")
    if h1.size == 0:
        raise ValueError("objective vectors must be non-empty")
    if np.any(h1 == 0.0):
        raise ZeroDivisionError("reference objective is zero")
    return float(np.max((h1 - h2) / h1))
