from __future__ import annotations

import numpy as np
import pytest

from hopt.data import Dataset
from hopt.errors import ZetaOutOfRange
from hopt.glm import (LOGISTIC, SQUARED, BiasedStepSchedule, GlmProblem, biased_gd_run,
                      closed_form_iterate, contraction_factors, default_grid, glm_bound,
                      glm_gradient, glm_risk, glm_tau_profile, lemma_constants, lemma_schedule,
                      make_gaussian_glm, schedule_search, squared_link_schedule, stein_residual,
                      stein_slope)
from hopt.primal import RidgeProblem, primal_gradient, primal_objective

SIGMA2 = np.array([[2.0, 0.5], [0.5, 0.5]])
W2 = np.array([1.0, -0.5])


def _sigma4(seed=0):
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((4, 4)))
    return (q * np.array([1.0, 0.6, 0.25, 0.1])) @ q.T


@pytest.fixture(scope="module")
def logistic2():
    return make_gaussian_glm(20000, SIGMA2, W2, "logistic", seed=1)


@pytest.fixture(scope="module")
def squared4():
    w = np.array([0.5, -1.0, 0.3, 0.8])
    return make_gaussian_glm(20000, _sigma4(), w, "squared", seed=2).with_empirical_sigma()


@pytest.mark.parametrize("link", [LOGISTIC, SQUARED])
def test_link_derivatives(link):
    a = np.linspace(-8, 8, 161)
    h = 1e-6
    fd1 = (link.value(a + h) - link.value(a - h)) / (2 * h)
    assert np.all(np.abs(link.d1(a) - fd1) <= 1e-5 * np.maximum(1, np.abs(fd1)))
    fd2 = (link.d1(a + h) - link.d1(a - h)) / (2 * h)
    assert np.all(np.abs(link.d2(a) - fd2) <= 1e-5 * np.maximum(1, np.abs(fd2)))
    assert np.all(np.abs(link.d2(a)) <= link.d2_bound)


def test_logistic_overflow_guard():
    assert np.isfinite(LOGISTIC.value(np.array([1e4, -1e4]))).all()
    assert LOGISTIC.value(np.array([1e4]))[0] == 1e4


def test_risk_at_zero(logistic2):
    assert glm_risk(logistic2, np.zeros(2)) == pytest.approx(np.log(2))


def test_risk_naive_loop(logistic2, rng):
    small = GlmProblem(Dataset(logistic2.x[:200], logistic2.y[:200]), SIGMA2, "logistic")
    w = rng.standard_normal(2)
    naive = sum(np.log1p(np.exp(xi @ w)) - yi * (xi @ w) for xi, yi in zip(small.x, small.y)) / 200
    assert abs(glm_risk(small, w) - naive) <= 1e-12


def test_squared_link_is_ridge_at_zero_mu(squared4, rng):
    p = squared4
    # R(w) = w^T S w - w^T E[yx]; the ridge objective at mu -> 0 with y' = y / 2 scaled by 2
    ridge = RidgeProblem(p.x, p.y / 2.0, 1e-300)
    for _ in range(5):
        w = rng.standard_normal(4)
        assert glm_risk(p, w) == pytest.approx(2 * primal_objective(ridge, w), rel=1e-10)
        assert np.allclose(glm_gradient(p, w), 2 * primal_gradient(ridge, w), rtol=1e-10, atol=1e-12)
        assert np.allclose(glm_gradient(p, w), 2 * p.empirical_sigma @ w - p.cross_moment)


def test_gradient_at_zero_symmetric_design(logistic2):
    g = glm_gradient(logistic2, np.zeros(2))
    mean_x = logistic2.x.mean(axis=0)
    assert np.allclose(g, 0.5 * mean_x - logistic2.cross_moment, atol=1e-14)
    assert np.linalg.norm(g + logistic2.cross_moment) < 0.05


@pytest.mark.parametrize("name", ["logistic", "squared"])
def test_gradient_finite_differences(name, rng):
    p = make_gaussian_glm(3000, _sigma4(1), np.array([0.5, -0.2, 0.1, 0.4]), name, seed=3)
    h = 1e-6
    for _ in range(20):
        w = rng.standard_normal(4)
        g = glm_gradient(p, w)
        fd = np.array([(glm_risk(p, w + h * e) - glm_risk(p, w - h * e)) / (2 * h) for e in np.eye(4)])
        assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(g)


def test_stein_residual_zero_and_squared():
    p = make_gaussian_glm(4000, SIGMA2, W2, "logistic", seed=5)
    assert stein_residual(p, np.zeros(2)) == pytest.approx(0.5 * np.linalg.norm(p.x.mean(0)))
    sq = make_gaussian_glm(4000, SIGMA2, W2, "squared", seed=5)
    # constant curvature: the residual is 2 (S_hat - Sigma) w, pure sampling noise
    assert stein_residual(sq, W2) == pytest.approx(np.linalg.norm(2 * (sq.empirical_sigma - SIGMA2) @ W2))
    assert stein_residual(sq.with_empirical_sigma(), W2) <= 1e-12


def test_stein_slope():
    slope, means = stein_slope(SIGMA2, W2, "logistic", reps=20, seed=0)
    assert -0.7 <= slope <= -0.3
    assert means[0] > means[-1]


def test_fixed_point(logistic2):
    ws = logistic2.minimizer
    assert np.linalg.norm(glm_gradient(logistic2, ws)) <= 1e-10
    tr = biased_gd_run(logistic2, ws, BiasedStepSchedule("lemma"), 10, store_iterates=True)
    assert max(np.abs(w - ws).max() for w in tr.iterates) <= 1e-6


def test_squared_lemma_constants(squared4):
    ws = squared4.minimizer
    xi1, xi2, res = lemma_constants(squared4, np.ones(4), ws)
    assert xi1 == pytest.approx(2.0) and abs(xi2) <= 1e-8 and res <= 1e-8
    g, e = lemma_schedule(squared4, np.ones(4), ws)
    assert g == pytest.approx(1 / (2 * squared4.L)) and abs(e) <= 1e-8


def test_squared_closed_form(squared4):
    p = squared4
    ws = p.minimizer
    w0 = np.zeros(4)
    tr = biased_gd_run(p, w0, squared_link_schedule(p), 40, ws, store_iterates=True)
    err = max(np.abs(closed_form_iterate(p, w0, ws, t) - w).max() for t, w in enumerate(tr.iterates))
    assert err <= 1e-6


def test_logistic_contraction(logistic2):
    p = logistic2
    ws = p.minimizer
    w0 = np.array([-1.0, 2.0])
    tr = biased_gd_run(p, w0, BiasedStepSchedule("lemma"), 6, ws, store_iterates=True)
    v = p.sigma_eig.eigenvectors
    factors = 1 - p.sigma_eig.eigenvalues / p.L
    its = tr.iterates
    for t in range(len(its) - 1):
        before, after = v.T @ (its[t] - ws), v.T @ (its[t + 1] - ws)
        scale = np.linalg.norm(before)
        assert np.all(np.abs(after - factors * before) <= 0.1 * scale)
    ratios = contraction_factors(p, its[:2], ws)[0]
    assert abs(ratios[1] - factors[1]) <= 0.1 * factors[1]


def test_plain_gd_monotone(logistic2):
    lhat = np.linalg.eigvalsh(logistic2.empirical_sigma).max()
    sched = BiasedStepSchedule("fixed", 1 / lhat, 0.0)
    tr = biased_gd_run(logistic2, None, sched, 50)
    assert np.all(np.diff(tr.subopt) <= 1e-15)


def test_schedule_search_squared(squared4):
    p = squared4
    ws = p.minimizer
    w = np.array([0.3, 0.9, -0.4, 0.1])
    gam, eta = schedule_search(p, w, w_star=ws)
    ratio = 10 ** (4 / 19)
    assert 1 / np.sqrt(ratio) <= gam * 2 * p.L <= np.sqrt(ratio)
    assert eta == 0.0


def test_schedule_search_superset_of_plain(logistic2):
    p = logistic2
    gammas, etas = default_grid(p)
    w = np.array([0.2, 0.1])
    g, e = schedule_search(p, w, (gammas, etas), objective="risk")
    g0, _ = schedule_search(p, w, (gammas, [0.0]), objective="risk")
    grad = glm_gradient(p, w)
    best = glm_risk(p, w - g * grad - e * p.cross_moment)
    plain = glm_risk(p, w - g0 * grad)
    assert best <= plain


def test_schedule_search_single_point(logistic2):
    assert schedule_search(logistic2, np.zeros(2), ([0.3], [-0.1])) == (0.3, -0.1)


def test_schedule_validation():
    with pytest.raises(ValueError):
        BiasedStepSchedule("fixed", -1.0)
    with pytest.raises(ValueError):
        BiasedStepSchedule("nope")


def test_bound_limits_and_range(squared4):
    p = squared4
    prof = glm_tau_profile(p)
    b = glm_bound(prof, p, 0.5 * p.L, np.array([0.0, 1e6]))
    assert b["primal_analogous"][1] == pytest.approx(
        b["c_wstar"] * prof.tau * 2.0 * (p.d - b["r"]) * 0.5 * p.L)
    near = glm_bound(prof, p, p.L * (1 - 1e-12), np.array([1.0]))
    r = near["r"]
    assert near["literal"][0] == pytest.approx(near["c_wstar"] * prof.tau * 2.0 * r * p.L, rel=1e-6)
    with pytest.raises(ZetaOutOfRange):
        glm_bound(prof, p, p.L, 1)
    with pytest.raises(ZetaOutOfRange):
        glm_bound(prof, p, 0.0, 1)


def test_bound_primal_analogous_dominates(squared4):
    p = squared4
    prof = glm_tau_profile(p)
    tr = biased_gd_run(p, None, squared_link_schedule(p), 100)
    t = np.array(tr.t)
    eig = p.sigma_eig.eigenvalues
    for zeta in np.logspace(np.log10(eig[-1]) - 0.5, np.log10(eig[0]) - 0.01, 10):
        b = glm_bound(prof, p, zeta, t)["primal_analogous"]
        assert np.all(np.array(tr.subopt) <= b)
