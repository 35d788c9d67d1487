"""Problem builders shared by the test modules."""
from __future__ import annotations

import numpy as np

from natcd import Dataset, PenaltySpec
from natcd.testkit import SyntheticSpec, generate

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def orthonormal_design(n: int, p: int, rng) -> np.ndarray:
    """``X`` with an all-ones first column and ``X.T @ X / n == I``."""
    raw = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    q, _ = np.linalg.qr(raw)
    x = q * np.sqrt(n)
    x[:, 0] = 1.0
    return x


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def analytic_lasso(dataset: Dataset, penalty: PenaltySpec) -> np.ndarray:
    """Closed-form minimiser for a gaussian problem with orthonormal design."""
    c = np.einsum("ij,ij->j", dataset.x, dataset.x) / dataset.n
    ridge = np.full(dataset.p, 2.0 * penalty.lam)
    ridge[0] = 0.0
    return soft_threshold(dataset.w, penalty.mu) / (c + ridge)


def random_suite_problem(seed: int):
    """One of the 200 mixed-family problems used by the acceptance suite.

    Returns ``(dataset, family_id, lam, k, rule)``; ``k`` indexes the
    100-point penalty grid.
    """
    rng = np.random.default_rng(10_000 + seed)
    family = ("gaussian", "binomial", "poisson")[seed % 3]
    p = int(rng.integers(3, 51))
    n = int(rng.integers(max(30, 2 * p), 201))
    spec = SyntheticSpec(
        n=n,
        p=p,
        family_id=family,
        correlation=float(rng.uniform(0.0, 0.5)),
        sparsity=int(rng.integers(0, min(5, p - 1) + 1)),
        seed=seed,
        min_class_fraction=0.2 if family == "binomial" else 0.0,
    )
    dataset, _ = generate(spec)
    lam = (0.0, 0.1)[(seed // 3) % 2]
    k = int(rng.integers(0, 100))
    rule = ("linear", "exact")[seed % 2]
    return dataset, family, lam, k, rule
