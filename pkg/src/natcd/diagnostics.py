"""Optimality certificates for candidate solutions.

At the optimum the gradient ``u = grad U(beta)`` (l2 term included) sits
inside the box ``|u - w| <= mu`` and touches its boundary exactly on the
active coordinates, ``u_j = w_j - sign(beta_j) mu_j``. The checks here
measure how far a given coefficient vector is from that picture; they are
independent of how the vector was produced.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .family import FamilyKernel
from .model import Dataset, PenaltySpec

__all__ = [
    "DualCertificate",
    "AuditRecord",
    "ThresholdAudit",
    "AuditSummary",
    "dual_vector",
    "certify",
    "duality_gap",
    "audit_fixed_point",
    "threshold_audit_check",
    "scalar_prop1_check",
]


def dual_vector(dataset: Dataset, kernel: FamilyKernel, lam: float, beta) -> np.ndarray:
    """Gradient of ``U(beta) + lam * sum_{j>=1} beta_j**2``."""
    beta = np.asarray(beta, dtype=float)
    means = kernel.a1(dataset.x @ beta)
    # row-wise reduction over contiguous rows of X^T stays pairwise
    u = np.add.reduce(dataset.xt * means, axis=1) / dataset.n
    u[1:] += 2.0 * lam * beta[1:]
    return u


@dataclass(frozen=True)
class DualCertificate:
    """KKT residuals of a candidate solution; all zero at the exact optimum."""

    u_hat: np.ndarray
    box_violation: float
    complementarity_violation: float
    stationarity_violation: float

    @property
    def max_violation(self) -> float:
        return max(self.box_violation, self.complementarity_violation, self.stationarity_violation)

    def passes(self, tol: float) -> bool:
        return (
            self.box_violation < tol
            and self.complementarity_violation < tol
            and self.stationarity_violation < tol
        )

    def as_dict(self) -> dict:
        return {
            "box_violation": self.box_violation,
            "complementarity_violation": self.complementarity_violation,
            "stationarity_violation": self.stationarity_violation,
        }


def certify(dataset: Dataset, kernel: FamilyKernel, penalty: PenaltySpec, beta) -> DualCertificate:
    beta = np.asarray(beta, dtype=float)
    u = dual_vector(dataset, kernel, penalty.lam, beta)
    w, mu = dataset.w, penalty.mu
    gap = np.abs(u - w) - mu
    box = float(np.max(np.maximum(gap, 0.0)))

    active = beta != 0.0
    if np.any(active):
        target = w[active] - np.sign(beta[active]) * mu[active]
        comp = float(np.max(np.abs(u[active] - target)))
    else:
        comp = 0.0

    inactive = ~active & (mu > 0)
    stat = float(np.max(np.maximum(gap[inactive], 0.0))) if np.any(inactive) else 0.0
    return DualCertificate(u, box, comp, stat)


def duality_gap(dataset: Dataset, kernel: FamilyKernel, penalty: PenaltySpec, beta, u_hat=None) -> float:
    """Primal value minus the dual value at ``u_hat``.

    ``u_hat`` is the gradient at ``beta``, so ``beta`` itself minimises
    ``U(b) + ridge(b) - u_hat @ b`` and the dual value is available without
    another solve. The gap reduces to
    ``sum_j mu_j |beta_j| - (w_j - u_j) beta_j``, which is non-negative
    whenever ``u_hat`` lies in the box.
    """
    beta = np.asarray(beta, dtype=float)
    if u_hat is None:
        u_hat = dual_vector(dataset, kernel, penalty.lam, beta)
    terms = penalty.mu * np.abs(beta) - (dataset.w - u_hat) * beta
    return float(np.add.reduce(terms))


@dataclass(frozen=True)
class AuditRecord:
    j: int
    exact_decision: bool
    approx_decision: bool

    @property
    def agree(self) -> bool:
        return self.exact_decision == self.approx_decision


@dataclass
class ThresholdAudit:
    """Append-only log comparing the exact and linearised threshold tests.

    The exact test is ``|w_j - U_j'(0)| > mu_j``; the linearised one replaces
    ``U_j'(0)`` by ``U_j'(b) - U_j''(b) b`` at the current value ``b``.
    """

    records: list = field(default_factory=list)

    def record(self, j: int, exact_decision: bool, approx_decision: bool) -> None:
        self.records.append(AuditRecord(int(j), bool(exact_decision), bool(approx_decision)))

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class AuditSummary:
    total: int
    agreements: int
    disagreements: int
    disagreeing_coordinates: dict

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "agreements": self.agreements,
            "disagreements": self.disagreements,
            "disagreeing_coordinates": {str(k): v for k, v in self.disagreeing_coordinates.items()},
        }


def threshold_audit_check(audit: ThresholdAudit) -> AuditSummary:
    """Tally agreements. Disagreements are reported, never raised."""
    bad = Counter(r.j for r in audit.records if not r.agree)
    total = len(audit.records)
    n_bad = sum(bad.values())
    return AuditSummary(total, total - n_bad, n_bad, dict(sorted(bad.items())))


def audit_fixed_point(dataset: Dataset, kernel: FamilyKernel, penalty: PenaltySpec, beta) -> ThresholdAudit:
    """Evaluate both threshold tests for every coordinate at ``beta``.

    Nothing is updated; each coordinate is examined with all the others at
    their values in ``beta``.
    """
    beta = np.asarray(beta, dtype=float)
    n = dataset.n
    eta = dataset.x @ beta
    audit = ThresholdAudit()
    for j in range(dataset.p):
        x = dataset.xt[j]
        b = beta[j]
        offset = eta - x * b if b != 0.0 else eta
        w0 = float(np.add.reduce(x * kernel.a1(offset))) / n
        g = float(np.add.reduce(x * kernel.a1(eta))) / n
        h = float(np.add.reduce(x * x * kernel.a2(eta))) / n
        # the ridge terms of U_j' and U_j'' cancel in g - h * b
        w0_tilde = g - h * b
        wj, mu = dataset.w[j], penalty.mu[j]
        audit.record(j, abs(wj - w0) > mu, abs(wj - w0_tilde) > mu)
    return audit


def scalar_prop1_check(
    u_prime: Callable[[float], float],
    u_second: Callable[[float], float],
    w: float,
    mu: float,
    beta_hat: float,
) -> bool:
    """Whether the exact and linearised thresholds agree at a scalar optimum.

    ``beta_hat`` must minimise ``U(b) - w b + mu |b|`` for the scalar convex
    ``U`` whose derivatives are ``u_prime`` and ``u_second``.
    """
    w0 = u_prime(0.0)
    w0_tilde = u_prime(beta_hat) - u_second(beta_hat) * beta_hat
    return (abs(w - w0) > mu) == (abs(w - w0_tilde) > mu)
