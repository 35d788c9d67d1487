"""Reference solvers and synthetic problems for cross-checking the solver.

Nothing here calls into the coordinate descent code. The oracles see the
problem only through the family functions ``A``, ``A'`` and the raw data,
so agreement with the coordinate descent fits is a genuine second opinion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import GenerationError
from .family import FamilyKernel, get_family
from .model import Dataset, PenaltySpec

__all__ = [
    "SyntheticSpec",
    "generate",
    "ista_solve",
    "OracleConvergenceError",
    "golden_section",
    "scalar_grid_solve",
    "scalar_family_objective",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class OracleConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a reproducible synthetic regression problem.

    Predictors follow a one-factor model
    ``x_ij = sqrt(rho) z_i + sqrt(1 - rho) e_ij`` and are centred. The
    ``sparsity`` true non-zero coefficients get magnitude ``signal`` with
    random signs at random positions. For binomial data,
    ``min_class_fraction`` is the smallest acceptable share of either class.
    """

    n: int
    p: int
    family_id: str = "gaussian"
    correlation: float = 0.0
    sparsity: int = 0
    seed: int = 0
    min_class_fraction: float = 0.0
    signal: Optional[float] = None
    intercept: float = 0.0
    noise_sd: float = 1.0
    center: bool = True

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if not 0.0 <= self.correlation < 1.0:
            raise ValueError("correlation must be in [0, 1)")
        if not 0 <= self.sparsity <= self.p - 1:
            raise ValueError("sparsity must be between 0 and p - 1")
        if not 0.0 <= self.min_class_fraction <= 0.5:
            raise ValueError("min_class_fraction must be in [0, 0.5]")
        get_family(self.family_id)


_DEFAULT_SIGNAL = {"gaussian": 1.0, "binomial": 1.0, "poisson": 0.3}


def generate(spec: SyntheticSpec) -> tuple[Dataset, np.ndarray]:
    """Draw a dataset and return it with the true coefficient vector."""
    family = get_family(spec.family_id).family_id
    rng = np.random.default_rng(spec.seed)
    n, q = spec.n, spec.p - 1
    rho = spec.correlation
    factor = rng.standard_normal((n, 1))
    z = math.sqrt(rho) * factor + math.sqrt(1.0 - rho) * rng.standard_normal((n, q))
    if spec.center and q:
        z = z - z.mean(axis=0)

    beta = np.zeros(spec.p)
    beta[0] = spec.intercept
    if spec.sparsity:
        signal = spec.signal if spec.signal is not None else _DEFAULT_SIGNAL[family]
        idx = rng.choice(q, size=spec.sparsity, replace=False) + 1
        beta[idx] = signal * rng.choice([-1.0, 1.0], size=spec.sparsity)
    eta = beta[0] + z @ beta[1:]

    if family == "gaussian":
        y = eta + spec.noise_sd * rng.standard_normal(n)
    elif family == "binomial":
        prob = 1.0 / (1.0 + np.exp(-eta))
        for _ in range(1000):
            y = (rng.random(n) < prob).astype(float)
            share = y.mean()
            if min(share, 1.0 - share) >= spec.min_class_fraction and 0.0 < share < 1.0:
                break
        else:
            raise GenerationError("class balance constraint not met after 1000 redraws")
    else:
        y = rng.poisson(np.exp(eta)).astype(float)

    names = [f"x{k}" for k in range(1, q + 1)]
    return Dataset.from_predictors(z.reshape(n, q), y, names=names), beta


def _soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def ista_solve(
    dataset: Dataset,
    kernel: FamilyKernel,
    penalty: PenaltySpec,
    tol: float = 1e-10,
    max_iter: int = 500_000,
    beta0=None,
    accelerate: bool = True,
) -> np.ndarray:
    """Proximal gradient descent on the penalised objective.

    Uses Nesterov momentum with gradient-based restarts unless
    ``accelerate`` is False, and a backtracking step size that starts from
    a curvature bound (``||X||^2/n`` gaussian, ``||X||^2/(4n)`` binomial,
    the local bound at the start point for poisson). Stops once the plain
    proximal-gradient map moves the iterate by less than ``tol`` in the
    max norm.
    """
    x = np.asarray(dataset.x, dtype=float)
    y = np.asarray(dataset.y, dtype=float)
    n, p = x.shape
    w = x.T @ y / n
    mu = np.asarray(penalty.mu, dtype=float)
    lam = penalty.lam
    ridge_mask = np.ones(p)
    ridge_mask[0] = 0.0

    def smooth(beta):
        eta = x @ beta
        with np.errstate(over="ignore", invalid="ignore"):
            value = np.sum(kernel.a(eta)) / n - w @ beta + lam * np.sum(ridge_mask * beta**2)
        return value, eta

    def grad(eta, beta):
        return x.T @ kernel.a1(eta) / n - w + 2.0 * lam * ridge_mask * beta

    spectral = np.linalg.norm(x, 2) ** 2 / n
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    if kernel.family_id == "gaussian":
        step_bound = spectral
    elif kernel.family_id == "binomial":
        step_bound = spectral / 4.0
    else:
        step_bound = spectral * float(np.max(kernel.a2(x @ beta)))
    big_l = step_bound + 2.0 * lam

    def prox_step(point, f_point, g_point, big_l):
        # backtrack until the quadratic upper model holds at the new point
        for _ in range(200):
            cand = _soft_threshold(point - g_point / big_l, mu / big_l)
            f_cand, eta_cand = smooth(cand)
            d = cand - point
            if np.isfinite(f_cand) and f_cand <= f_point + g_point @ d + 0.5 * big_l * (d @ d) + 1e-15 * abs(f_point):
                return cand, f_cand, eta_cand, big_l
            big_l *= 2.0
        raise OracleConvergenceError("step size search failed")

    f_beta, eta_beta = smooth(beta)
    y_pt, f_y, eta_y = beta, f_beta, eta_beta
    t = 1.0
    for _ in range(max_iter):
        g_y = grad(eta_y, y_pt)
        new, f_new, eta_new, big_l = prox_step(y_pt, f_y, g_y, big_l)
        moved = np.max(np.abs(new - y_pt))
        if moved < tol:
            # confirm with a plain step from the iterate itself
            g_new = grad(eta_new, new)
            check, _, _, big_l = prox_step(new, f_new, g_new, big_l)
            if np.max(np.abs(check - new)) < tol:
                return new
        if not accelerate:
            y_pt, f_y, eta_y = new, f_new, eta_new
            beta = new
            continue
        # restart momentum when it points uphill
        if g_y @ (new - beta) > 0.0:
            t = 1.0
            y_pt, f_y, eta_y = new, f_new, eta_new
        else:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y_pt = new + ((t - 1.0) / t_next) * (new - beta)
            f_y, eta_y = smooth(y_pt)
            if not np.isfinite(f_y):
                y_pt, f_y, eta_y = new, f_new, eta_new
                t_next = 1.0
            t = t_next
        beta = new
    raise OracleConvergenceError(f"proximal gradient did not reach tol={tol} in {max_iter} iterations")


def golden_section(phi: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Minimiser of a unimodal function on ``[lo, hi]`` to within ``tol``."""
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = phi(c), phi(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = phi(d)
        if c >= d:
            break
    candidates = [(phi(a), a), (fc, c), (fd, d), (phi(b), b)]
    return min(candidates)[1]


def _expand(phi, sign):
    h = 1.0
    f_prev = phi(0.0)
    f_h = phi(sign * h)
    for _ in range(200):
        f_next = phi(sign * 2.0 * h)
        if f_next >= f_h or f_h > f_prev:
            return 2.0 * h
        f_prev, f_h, h = f_h, f_next, 2.0 * h
    raise OracleConvergenceError("scalar objective keeps decreasing; minimiser unbounded")


def scalar_grid_solve(
    u: Callable[[float], float],
    w: float,
    mu: float,
    bounds: Optional[tuple[float, float]] = None,
    grid_tol: float = 1e-9,
) -> float:
    """Minimise ``u(b) - w b + mu |b|`` for a convex scalar ``u``.

    Each sign region is searched separately by golden section and the
    point ``0`` is kept as a candidate; ties go to ``0``.
    """
    def phi(b):
        return u(b) - w * b + mu * abs(b)

    if bounds is None:
        bounds = (-_expand(phi, -1.0), _expand(phi, 1.0))
    lo, hi = bounds
    best_b, best_f = 0.0, phi(0.0)
    if hi > 0.0:
        b = golden_section(phi, max(lo, 0.0), hi, grid_tol)
        fb = phi(b)
        if fb < best_f:
            best_b, best_f = b, fb
    if lo < 0.0:
        b = golden_section(phi, lo, min(hi, 0.0), grid_tol)
        fb = phi(b)
        if fb < best_f:
            best_b, best_f = b, fb
    return best_b


def scalar_family_objective(kernel: FamilyKernel, x, offset=None) -> Callable[[float], float]:
    """``b -> (1/n) sum_i A(offset_i + x_i b)`` as a plain scalar function."""
    x = np.asarray(x, dtype=float)
    offset = np.zeros_like(x) if offset is None else np.asarray(offset, dtype=float)
    n = x.size

    def u(b):
        return float(np.sum(kernel.a(offset + x * b))) / n

    return u
