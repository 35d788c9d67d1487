import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from helpers import analytic_lasso, orthonormal_design
from natcd import BINOMIAL, GAUSSIAN, POISSON, Dataset, FitConfig, PenaltySpec, certify, duality_gap, fit
from natcd.diagnostics import (
    ThresholdAudit,
    audit_fixed_point,
    dual_vector,
    scalar_prop1_check,
    threshold_audit_check,
)
from natcd.testkit import SyntheticSpec, generate, scalar_grid_solve


def test_analytic_solution_has_zero_violations():
    rng = np.random.default_rng(0)
    ds = Dataset(orthonormal_design(64, 8, rng), rng.standard_normal(64))
    pen = PenaltySpec.uniform(8, 0.08)
    cert = certify(ds, GAUSSIAN, pen, analytic_lasso(ds, pen))
    assert cert.max_violation < 1e-12


def test_zero_solution_above_threshold_is_in_box():
    ds, _ = generate(SyntheticSpec(n=40, p=6, family_id="binomial", seed=1, sparsity=1))
    pen = PenaltySpec.uniform(ds.p, np.max(np.abs(ds.w[1:])) * 1.1)
    beta = np.zeros(ds.p)
    beta[0] = np.log(ds.y.mean() / (1 - ds.y.mean()))
    assert certify(ds, BINOMIAL, pen, beta).box_violation == 0.0


def test_perturbation_is_flagged():
    ds, _ = generate(SyntheticSpec(n=100, p=6, family_id="binomial", seed=2, sparsity=3, signal=2.0))
    pen = PenaltySpec.uniform(ds.p, 0.01)
    beta = fit(ds, BINOMIAL, pen, FitConfig(eps=1e-10)).beta
    j = int(np.flatnonzero(beta[1:])[0]) + 1
    bumped = beta.copy()
    bumped[j] += 0.1
    cert = certify(ds, BINOMIAL, pen, bumped)
    curvature = np.mean(ds.x[:, j] ** 2 * expit(ds.x @ beta) * expit(-(ds.x @ beta)))
    assert cert.complementarity_violation > 1e-4
    assert cert.complementarity_violation == pytest.approx(0.1 * curvature, rel=0.1)
    assert not cert.passes(1e-4)


def test_dual_vector_includes_ridge():
    ds, _ = generate(SyntheticSpec(n=30, p=4, seed=3))
    beta = np.array([0.5, 1.0, -1.0, 0.0])
    u = dual_vector(ds, GAUSSIAN, 0.25, beta)
    np.testing.assert_allclose(u, ds.x.T @ (ds.x @ beta) / ds.n + 0.5 * np.r_[0.0, beta[1:]], atol=1e-14)


def test_duality_gap_vanishes_at_optimum():
    ds, _ = generate(SyntheticSpec(n=60, p=8, family_id="poisson", sparsity=2, seed=4))
    pen = PenaltySpec.uniform(ds.p, 0.02, 0.1)
    beta = fit(ds, POISSON, pen, FitConfig(eps=1e-10)).beta
    assert abs(duality_gap(ds, POISSON, pen, beta)) < 1e-8


def test_gaussian_audit_has_no_disagreements():
    ds, _ = generate(SyntheticSpec(n=50, p=10, sparsity=3, seed=5))
    pen = PenaltySpec.uniform(ds.p, 0.05)
    audit = ThresholdAudit()
    beta = fit(ds, GAUSSIAN, pen, audit=audit).beta
    assert threshold_audit_check(audit).disagreements == 0
    assert threshold_audit_check(audit_fixed_point(ds, GAUSSIAN, pen, beta)).disagreements == 0


def test_logistic_fixed_point_audit_agrees():
    ds, _ = generate(SyntheticSpec(n=120, p=15, family_id="binomial", sparsity=4, seed=6))
    pen = PenaltySpec.uniform(ds.p, 0.01)
    beta = fit(ds, BINOMIAL, pen, FitConfig(update_rule="exact")).beta
    summary = threshold_audit_check(audit_fixed_point(ds, BINOMIAL, pen, beta))
    assert summary.total == ds.p
    assert summary.disagreements == 0


def test_audit_summary_counts_disagreements():
    audit = ThresholdAudit()
    audit.record(3, True, False)
    audit.record(3, True, True)
    audit.record(1, False, True)
    summary = threshold_audit_check(audit)
    assert (summary.total, summary.agreements, summary.disagreements) == (3, 1, 2)
    assert summary.as_dict()["disagreeing_coordinates"] == {"1": 1, "3": 1}


def test_prop1_scalar_cases():
    up = lambda b: expit(b)  # noqa: E731
    us = lambda b: expit(b) * expit(-b)  # noqa: E731
    assert scalar_prop1_check(up, us, 0.55, 0.1, 0.0)
    w, mu = 0.9, 0.1
    b = scalar_grid_solve(lambda t: np.logaddexp(0.0, t), w, mu)
    assert b > 0
    # active case: w - w0_tilde = mu + U''(b) b > mu
    assert w - (up(b) - us(b) * b) == pytest.approx(mu + us(b) * b, abs=1e-6)
    assert scalar_prop1_check(up, us, w, mu, b)


@settings(max_examples=1000, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.0, 0.4), st.floats(0.2, 3.0))
def test_prop1_random_scalar_logistic(ybar, mu, scale):
    # U(b) = A(scale * b) with w = ybar * scale
    u = lambda b: float(np.logaddexp(0.0, scale * b))  # noqa: E731
    up = lambda b: scale * expit(scale * b)  # noqa: E731
    us = lambda b: scale**2 * expit(scale * b) * expit(-scale * b)  # noqa: E731
    w = ybar * scale
    b = scalar_grid_solve(u, w, mu, grid_tol=1e-12)
    # stay clear of the threshold boundary, where the grid optimum is ambiguous
    if abs(abs(w - up(0.0)) - mu) < 1e-6:
        return
    assert scalar_prop1_check(up, us, w, mu, b)
