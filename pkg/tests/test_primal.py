from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hopt.data import generate_synthetic, tau_bounded_spec
from hopt.errors import DimensionMismatch, Diverged, StepSizeWarning
from hopt.primal import (RidgeProblem, default_step, gd_closed_form, gd_run, primal_bound,
                         primal_bound_weighted, primal_gradient, primal_minimizer,
                         primal_objective, suboptimality)
from hopt.spectral import measure_tau

from conftest import random_problem


def _naive_objective(p, beta):
    n, d = p.x.shape
    total = 0.0
    for i in range(d):
        for j in range(d):
            h = sum(p.x[k, i] * p.x[k, j] for k in range(n)) / n + (p.mu if i == j else 0.0)
            total += 0.5 * beta[i] * h * beta[j]
    for i in range(d):
        total -= beta[i] * sum(p.x[k, i] * p.y[k] for k in range(n)) / n
    return total


def test_objective_at_zero_and_optimum(rng):
    p = RidgeProblem.from_dataset(random_problem(rng, 30, 3), 0.1)
    assert primal_objective(p, np.zeros(3)) == 0.0
    bs = p.minimizer
    assert primal_objective(p, bs) == pytest.approx(-0.5 * p.linear @ bs, rel=1e-12)


def test_objective_naive_loops(rng):
    p = RidgeProblem.from_dataset(random_problem(rng, 12, 3), 0.05)
    beta = rng.standard_normal(3)
    assert abs(primal_objective(p, beta) - _naive_objective(p, beta)) <= 1e-12


def test_dimension_mismatch(rng):
    p = RidgeProblem.from_dataset(random_problem(rng, 10, 3), 0.1)
    with pytest.raises(DimensionMismatch):
        primal_objective(p, np.zeros(4))


def test_minimizer_cases(rng):
    p = RidgeProblem(np.zeros((4, 2)), np.zeros(4), 1.0)
    assert np.array_equal(p.minimizer, np.zeros(2))
    # H = 2I, b = (2, 4): X^T X / n = I with mu = 1 and X^T y / n = (2, 4)
    x = np.sqrt(2.0) * np.eye(2)
    y = np.array([2.0, 4.0]) * np.sqrt(2.0)
    p = RidgeProblem(x, y, 1.0)
    assert np.allclose(p.hessian, 2 * np.eye(2)) and np.allclose(p.linear, [2, 4])
    assert np.allclose(p.minimizer, [1.0, 2.0])
    q = RidgeProblem.from_dataset(random_problem(rng, 40, 5), 1e-2)
    assert np.linalg.norm(q.hessian @ q.minimizer - q.linear) <= 1e-8 * np.linalg.norm(q.linear)
    assert np.allclose(primal_minimizer(q, "normal"), primal_minimizer(q), atol=1e-8)


def test_hessian_lambda_min(rng):
    p = RidgeProblem.from_dataset(random_problem(rng, 5, 8), 0.3)
    assert p.lambda_min >= 0.3 - 1e-10


def test_fixed_point(rng):
    p = RidgeProblem.from_dataset(random_problem(rng, 30, 4), 0.1)
    tr = gd_run(p, p.minimizer, steps=20, store_iterates=True)
    for b in tr.iterates:
        assert np.allclose(b, p.minimizer, atol=1e-14)


def test_one_dimensional_hand_iteration():
    # lambda = 2, c = 1: X^T X / n + mu = 2 and X^T y / n = 1
    x = np.array([[1.0], [-1.0]])
    y = np.array([1.0, -1.0])
    p = RidgeProblem(x, y, 1.0)
    assert p.hessian[0, 0] == 2.0 and p.linear[0] == 1.0
    tr = gd_run(p, np.zeros(1), 0.25, 2, store_iterates=True)
    assert tr.iterates[1][0] == pytest.approx(0.25) and tr.iterates[2][0] == pytest.approx(0.375)


def test_closed_form_cases(rng):
    p = RidgeProblem.from_dataset(random_problem(rng, 25, 4), 0.05)
    b0 = rng.standard_normal(4)
    assert np.array_equal(gd_closed_form(p, b0, 0.1, 0), b0)
    tr = gd_run(p, b0, 0.3, 7, store_iterates=True)
    assert np.abs(gd_closed_form(p, b0, 0.3, 7) - tr.iterates[7]).max() <= 1e-10
    one = RidgeProblem(np.array([[1.0], [-1.0]]), np.array([1.0, -1.0]), 1.0)
    assert np.allclose(gd_closed_form(one, np.zeros(1), 0.5, 1), one.minimizer, atol=1e-15)


def test_suboptimality_cases(rng):
    data = random_problem(rng, 50, 5)
    p = RidgeProblem.from_dataset(data, 0.1)
    assert abs(suboptimality(p, p.minimizer)) <= 1e-14
    spec = p.spectral
    lam = spec.regularized_variances
    expect = 0.5 * np.sum(spec.response_cov ** 2 / lam)
    assert suboptimality(p, np.zeros(5)) == pytest.approx(expect, rel=1e-10)
    beta = rng.standard_normal(5)
    assert suboptimality(p, beta, "direct") == pytest.approx(suboptimality(p, beta, "quadratic"),
                                                             rel=1e-10)


def test_gradient_finite_differences(rng):
    p = RidgeProblem.from_dataset(random_problem(rng, 30, 6), 0.2)
    h = 1e-6
    for _ in range(10):
        beta = rng.standard_normal(6)
        g = primal_gradient(p, beta)
        fd = np.array([(primal_objective(p, beta + h * e) - primal_objective(p, beta - h * e)) / (2 * h)
                       for e in np.eye(6)])
        assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(g)


def test_step_flag_and_divergence(rng):
    p = RidgeProblem.from_dataset(random_problem(rng, 30, 3), 0.1)
    with pytest.warns(StepSizeWarning):
        tr = gd_run(p, steps=2, gamma=2.5 / p.lambda_max)
    assert tr.meta["admissible"] is False
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StepSizeWarning)
        with pytest.raises(Diverged):
            gd_run(p, steps=500, gamma=4.0 / p.lambda_max)


def test_monotone_and_coordinate_contraction(rng):
    p = RidgeProblem.from_dataset(random_problem(rng, 60, 6), 0.01)
    gamma = default_step(p)
    tr = gd_run(p, np.zeros(6), gamma, 100, store_iterates=True)
    sub = np.array(tr.subopt)
    assert np.all(np.diff(sub) <= 1e-12)
    assert sub[-1] <= sub[0]
    assert min(sub) >= -1e-10
    v = p.spectral.basis
    lam = p.spectral.regularized_variances
    kappa = p.condition_number
    e0 = v.T @ (tr.iterates[3] - p.minimizer)
    e1 = v.T @ (tr.iterates[4] - p.minimizer)
    assert np.allclose(e1[-1] / e0[-1], 1 - gamma * lam[-1], rtol=1e-8)
    assert 1 - gamma * lam[-1] > 1 - 2 / kappa


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 200), st.integers(1, 20), st.integers(0, 2**31 - 1))
def test_lemma1_equivalence(n, d, seed):
    r = np.random.default_rng(seed)
    p = RidgeProblem.from_dataset(random_problem(r, n, d), 10 ** r.uniform(-3, 0))
    b0 = r.standard_normal(d)
    tr = gd_run(p, b0, steps=25, store_iterates=True)
    gamma = tr.meta["step_size"]
    for t in (1, 5, 25):
        assert np.abs(gd_closed_form(p, b0, gamma, t) - tr.iterates[t]).max() <= 1e-10


def test_bound_limits():
    from hopt.spectral import from_moments

    spec = from_moments(np.diag([1.0, 0.5, 0.1]), np.array([0.3, 0.2, 0.1]))
    prof = measure_tau(spec)
    big_t = primal_bound(prof, spec, 0.5, 0.3, 10_000)
    assert big_t == pytest.approx(0.5 * (3 - 2) * prof.tau * 0.3)
    assert primal_bound(prof, spec, 0.5, 0.0, 5) == 0.0


def test_bound_at_median_variance():
    data = generate_synthetic(tau_bounded_spec(2000, 20, 0.5, 1e3, seed=3))
    p = RidgeProblem.from_dataset(data, 1e-3)
    spec = p.spectral
    prof = measure_tau(spec)
    gamma = default_step(p)
    zeta = float(np.median(spec.z_variances))
    tr = gd_run(p, None, gamma, 200)
    for t, sub in zip(tr.t, tr.subopt):
        assert sub <= primal_bound(prof, spec, gamma, zeta, t)


def test_weighted_bound_dominates_everywhere(tau_data):
    p = RidgeProblem.from_dataset(tau_data, 1e-3)
    spec = p.spectral
    prof = measure_tau(spec)
    gamma = default_step(p)
    tr = gd_run(p, None, gamma, 500)
    for zeta in np.logspace(-3, 0, 10):
        for t, sub in zip(tr.t, tr.subopt):
            assert sub <= primal_bound_weighted(prof, spec, gamma, zeta, t) * (1 + 1e-12)


def test_trace_csv(tmp_path, rng):
    p = RidgeProblem.from_dataset(random_problem(rng, 20, 3), 0.1)
    tr = gd_run(p, steps=3)
    tr.to_csv(tmp_path / "t.csv", log10=True)
    head = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert head == "t,subopt,grad_norm,dist,epochs,log10_subopt"


def test_trace_logging_cadence(rng):
    p = RidgeProblem.from_dataset(random_problem(rng, 20, 3), 0.1)
    tr = gd_run(p, steps=1200)
    t = tr.t
    assert t[:1001] == list(range(1001))
    assert t[1001:] == list(range(1010, 1201, 10))
