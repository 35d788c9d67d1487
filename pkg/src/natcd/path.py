"""Geometric regularisation paths with cold or warm starts."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import PathError
from .family import FamilyKernel
from .model import Dataset, FitConfig, FitResult, PenaltySpec
from .solver import fit

__all__ = [
    "HEAD_MARGIN",
    "PathSpec",
    "PathResult",
    "intercept_only_threshold",
    "intercept_only_start",
    "make_path",
    "run_path",
    "model_size",
]

# relative headroom on the path head so that the first fit sits strictly
# above the intercept-only threshold despite round-off
HEAD_MARGIN = 1e-9


def intercept_only_threshold(dataset: Dataset) -> float:
    """Smallest l1 weight at which every penalised coefficient is zero.

    For a canonical link the intercept-only fit has ``A'(b_0) = mean(y)``,
    so the threshold of coordinate ``j`` is
    ``|w_j - mean(y) * mean(x_j)|``. For centred predictors this is
    ``|w_j|``.
    """
    if dataset.p < 2:
        raise PathError("a path needs at least one penalised predictor")
    ybar = np.add.reduce(dataset.y) / dataset.n
    xbar = np.add.reduce(dataset.xt[1:], axis=1) / dataset.n
    return float(np.max(np.abs(dataset.w[1:] - ybar * xbar)))


def intercept_only_start(dataset: Dataset, kernel: FamilyKernel) -> np.ndarray | None:
    """Closed-form intercept-only optimum ``(A')^{-1}(mean(y)), 0, ..., 0``.

    ``None`` when the mean response lies on the boundary of the family's
    mean space (all-0 or all-1 binomial, all-0 poisson).
    """
    ybar = float(np.add.reduce(dataset.y)) / dataset.n
    with np.errstate(divide="ignore"):
        if kernel.family_id == "gaussian":
            b0 = ybar
        elif kernel.family_id == "binomial":
            b0 = float(np.log(ybar) - np.log1p(-ybar))
        else:
            b0 = float(np.log(ybar))
    if not np.isfinite(b0):
        return None
    start = np.zeros(dataset.p)
    start[0] = b0
    return start


@dataclass(frozen=True)
class PathSpec:
    """Penalties ``mu_max / m**((k-1)/(m-1))`` for ``k = 1..m``."""

    m: int
    mu_max: float
    values: np.ndarray = field(repr=False)

    @property
    def ratio(self) -> float:
        return float(self.m ** (-1.0 / (self.m - 1)))


def make_path(dataset: Dataset, m: int = 100, margin: float = HEAD_MARGIN) -> PathSpec:
    if m < 2:
        raise PathError("path length must be at least 2")
    threshold = intercept_only_threshold(dataset)
    if not threshold > 0.0:
        raise PathError("degenerate path: no predictor is correlated with the response")
    mu_max = threshold * (1.0 + margin)
    k = np.arange(m)
    values = mu_max / float(m) ** (k / (m - 1))
    values[0] = mu_max
    values.flags.writeable = False
    return PathSpec(m, mu_max, values)


@dataclass
class PathResult:
    """Fits along a path. Failed entries hold ``None`` and an error message."""

    path: PathSpec
    start_mode: str
    fits: list
    runtimes: list
    errors: list

    @property
    def objectives(self) -> np.ndarray:
        return np.array([np.nan if r is None else r.objective for r in self.fits])

    @property
    def all_converged(self) -> bool:
        return all(r is not None and r.converged for r in self.fits)


def _timed_fit(dataset, kernel, penalty, config, beta_init):
    t0 = time.perf_counter()
    try:
        result = fit(dataset, kernel, penalty, config, beta_init)
        error = None
    except (ArithmeticError, ValueError) as exc:
        result, error = None, f"{type(exc).__name__}: {exc}"
    return result, time.perf_counter() - t0, error


def run_path(
    dataset: Dataset,
    kernel: FamilyKernel,
    lam: float,
    path: PathSpec,
    config: FitConfig | None = None,
    start_mode: str = "warm",
    max_workers: Optional[int] = None,
) -> PathResult:
    """Fit every penalty on ``path``.

    In ``"warm"`` mode each fit starts from the last successful solution;
    in ``"cold"`` mode every fit starts from zero, and with
    ``max_workers > 1`` the independent fits run on a thread pool.
    A failing fit is recorded and the rest of the path still runs.
    """
    if start_mode not in ("cold", "warm"):
        raise ValueError("start_mode must be 'cold' or 'warm'")
    config = config or FitConfig()
    p = dataset.p
    penalties = [PenaltySpec.uniform(p, mu, lam) for mu in path.values]

    # the head fit starts at the exact intercept-only optimum, so that its
    # penalised coefficients stay exactly zero whatever the root tolerance
    head_start = intercept_only_start(dataset, kernel)

    if start_mode == "cold":
        starts = [head_start] + [None] * (len(penalties) - 1)
        if max_workers and max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                outcomes = list(pool.map(
                    lambda args: _timed_fit(dataset, kernel, args[0], config, args[1]),
                    zip(penalties, starts),
                ))
        else:
            outcomes = [_timed_fit(dataset, kernel, pen, config, b) for pen, b in zip(penalties, starts)]
    else:
        outcomes = []
        start = head_start
        for pen in penalties:
            outcome = _timed_fit(dataset, kernel, pen, config, start)
            if outcome[0] is not None and outcome[0].converged:
                start = outcome[0].beta
            outcomes.append(outcome)

    fits, runtimes, errors = (list(t) for t in zip(*outcomes))
    return PathResult(path, start_mode, fits, runtimes, errors)


def model_size(result: FitResult, threshold: float = 1e-3) -> int:
    """Number of penalised coefficients with ``|beta_j| > threshold``."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    return int(np.count_nonzero(np.abs(result.beta[1:]) > threshold))
