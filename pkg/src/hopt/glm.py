"""Generalized linear models with a biased gradient step.

The risk is ``R(w) = E[phi(x^T w) - y x^T w]`` over an empirical sample, with
``phi(a) = log(1 + e^a)`` (logistic) or ``phi(a) = a^2`` (squared). The
biased step is ``w+ = w - gamma R'(w) - eta E[yx]``. For Gaussian designs
Stein's identity gives ``E[x phi'(x^T w)] = E[phi''(x^T w)] Sigma w``, so the
gradient is an affine function of ``Sigma (w - w*)`` and ``E[yx]``; a suitable
``(gamma, eta)`` per step then reproduces gradient descent on a quadratic
with curvature ``Sigma``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .data import Dataset
from .errors import DimensionMismatch, Diverged, NoConvergence, ZetaOutOfRange
from .linalg import cholesky, sym_eig
from .spectral import TauProfile, from_moments, measure_tau
from .trace import OptimizerTrace, should_log


@dataclass(frozen=True)
class LinkFunction:
    name: str
    value: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]
    d2_bound: float


def _sigmoid(a):
    a = np.asarray(a, dtype=float)
    return np.exp(-np.logaddexp(0.0, -a))


def _logistic_d2(a):
    s = _sigmoid(a)
    return s * (1.0 - s)


LOGISTIC = LinkFunction("logistic", lambda a: np.logaddexp(0.0, a), _sigmoid, _logistic_d2, 0.25)
SQUARED = LinkFunction("squared", lambda a: np.asarray(a, dtype=float) ** 2,
                       lambda a: 2.0 * np.asarray(a, dtype=float),
                       lambda a: np.full(np.shape(a), 2.0), 2.0)
LINKS = {"logistic": LOGISTIC, "squared": SQUARED}


def get_link(name: str | LinkFunction) -> LinkFunction:
    if isinstance(name, LinkFunction):
        return name
    try:
        return LINKS[name]
    except KeyError:
        raise ValueError(f"unknown link {name!r}; expected one of {sorted(LINKS)}") from None


class GlmProblem:
    """Empirical GLM risk on ``sample`` with reference covariance ``sigma``."""

    def __init__(self, sample: Dataset, sigma, link: str | LinkFunction = "logistic"):
        self.sample = sample
        self.x = np.asarray(sample.x, dtype=float)
        self.y = np.asarray(sample.y, dtype=float)
        self.sigma = np.asarray(sigma, dtype=float)
        n, d = self.x.shape
        if self.sigma.shape != (d, d):
            raise DimensionMismatch(f"sigma has shape {self.sigma.shape}, expected ({d}, {d})")
        self.n, self.d = n, d
        self.link = get_link(link)
        self.cross_moment = self.x.T @ self.y / n

    @cached_property
    def sigma_eig(self):
        return sym_eig(self.sigma)

    @property
    def L(self) -> float:
        return float(self.sigma_eig.eigenvalues[0])

    @cached_property
    def empirical_sigma(self) -> np.ndarray:
        return self.x.T @ self.x / self.n

    def with_empirical_sigma(self) -> "GlmProblem":
        """Same sample, with the sample second moment as the reference covariance."""
        return GlmProblem(self.sample, self.empirical_sigma, self.link)

    @cached_property
    def minimizer(self) -> np.ndarray:
        return glm_minimizer(self)

    @cached_property
    def optimum(self) -> float:
        return glm_risk(self, self.minimizer)

    def c_wstar(self, w_star=None) -> float:
        """``1 / E[phi''(x^T w*)]`` on the sample."""
        w_star = self.minimizer if w_star is None else w_star
        return 1.0 / float(np.mean(self.link.d2(self.x @ w_star)))

    def _check(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.d,):
            raise DimensionMismatch(f"w has shape {w.shape}, expected ({self.d},)")
        return w


def make_gaussian_glm(n: int, sigma, w_true, link: str = "logistic", seed: int = 0,
                      noise: float = 1.0) -> GlmProblem:
    """Draw ``x ~ N(0, sigma)`` and a response whose population minimizer is ``w_true``.

    Logistic: ``y ~ Bernoulli(sigmoid(x^T w_true))``. Squared:
    ``y = 2 x^T w_true + noise * eps``.
    """
    sigma = np.asarray(sigma, dtype=float)
    w_true = np.asarray(w_true, dtype=float)
    link = get_link(link)
    rng = np.random.default_rng(seed)
    chol = cholesky(sigma)
    x = rng.standard_normal((n, sigma.shape[0])) @ chol.T
    a = x @ w_true
    if link.name == "logistic":
        y = (rng.random(n) < _sigmoid(a)).astype(float)
    else:
        y = 2.0 * a + noise * rng.standard_normal(n)
    return GlmProblem(Dataset(x, y, split_tag=f"gaussian-{seed}"), sigma, link)


def glm_risk(p: GlmProblem, w) -> float:
    a = p.x @ p._check(w)
    return float(np.mean(p.link.value(a) - p.y * a))


def glm_gradient(p: GlmProblem, w) -> np.ndarray:
    """``E[x phi'(x^T w)] - E[yx]``."""
    a = p.x @ p._check(w)
    return p.x.T @ p.link.d1(a) / p.n - p.cross_moment


def stein_residual(p: GlmProblem, w) -> float:
    """``|| E[x phi'(x^T w)] - E[phi''(x^T w)] Sigma w ||``."""
    w = p._check(w)
    a = p.x @ w
    lhs = p.x.T @ p.link.d1(a) / p.n
    rhs = float(np.mean(p.link.d2(a))) * (p.sigma @ w)
    return float(np.linalg.norm(lhs - rhs))


def stein_slope(sigma, w, link: str = "logistic", sizes=(1000, 4000, 16000),
                reps: int = 20, seed: int = 0) -> tuple[float, np.ndarray]:
    """Log-log slope of the mean Stein residual against sample size."""
    sizes = np.asarray(sizes)
    w = np.asarray(w, dtype=float)
    means = np.empty(len(sizes))
    for k, n in enumerate(sizes):
        vals = [stein_residual(make_gaussian_glm(int(n), sigma, w, link, seed=seed + 1000 * k + r), w)
                for r in range(reps)]
        means[k] = np.mean(vals)
    slope = np.polyfit(np.log(sizes), np.log(means), 1)[0]
    return float(slope), means


def glm_minimizer(p: GlmProblem, tol: float = 1e-10, max_iter: int = 200_000,
                  w0=None) -> np.ndarray:
    """Plain gradient descent with step ``1 / (phi_bar L_hat)`` until ``||R'(w)|| <= tol``."""
    w = np.zeros(p.d) if w0 is None else p._check(w0).copy()
    lhat = float(sym_eig(p.empirical_sigma).eigenvalues[0])
    gamma = 1.0 / (p.link.d2_bound * lhat)
    for _ in range(max_iter):
        g = glm_gradient(p, w)
        if np.linalg.norm(g) <= tol:
            return w
        w = w - gamma * g
    raise NoConvergence(f"gradient norm {np.linalg.norm(g):.3e} after {max_iter} steps")


# --------------------------------------------------------------------------- schedules

def lemma_target(p: GlmProblem, w, w_star) -> np.ndarray:
    """``w* + (I - Sigma / L)(w - w*)``: where the biased step should land."""
    delta = p._check(w) - w_star
    return w_star + delta - p.sigma @ delta / p.L


def lemma_constants(p: GlmProblem, w, w_star) -> tuple[float, float, float]:
    """Constants with ``R'(w) ~ xi1 Sigma (w - w*) + xi2 E[yx]``.

    Stein's identity fixes ``xi1 = E[phi''(x^T w)]``; ``xi2`` is then the
    least-squares coefficient on ``E[yx]``. The third element is the residual
    norm, which vanishes for the squared link with the sample covariance
    (``xi1 = 2``, ``xi2 = 0``).
    """
    w = p._check(w)
    g = glm_gradient(p, w)
    xi1 = float(np.mean(p.link.d2(p.x @ w)))
    rest = g - xi1 * (p.sigma @ (w - w_star))
    b = p.cross_moment
    bb = float(b @ b)
    xi2 = float(rest @ b) / bb if bb > 0 else 0.0
    return xi1, xi2, float(np.linalg.norm(rest - xi2 * b))


def lemma_schedule(p: GlmProblem, w, w_star) -> tuple[float, float]:
    """``gamma = 1 / (L xi1)``, ``eta = -gamma xi2``."""
    xi1, xi2, _ = lemma_constants(p, w, w_star)
    if not xi1 > 0:
        raise Diverged(f"fitted curvature xi1={xi1:.3g} is not positive")
    gamma = 1.0 / (p.L * xi1)
    return gamma, -gamma * xi2


def default_grid(p: GlmProblem) -> tuple[np.ndarray, np.ndarray]:
    gammas = np.logspace(-3.0, 1.0, 20) / p.L
    etas = np.linspace(-1.0, 1.0, 21) / p.L
    return gammas, etas


def schedule_search(p: GlmProblem, w, grid=None, w_star=None,
                    objective: str | None = None) -> tuple[float, float]:
    """Exhaustive search of ``(gamma, eta)`` over ``grid = (gammas, etas)``.

    ``objective`` is ``"target"`` (Sigma-distance to the lemma target),
    ``"distance"`` (Sigma-distance to ``w_star``) or ``"risk"``. The default
    is ``"target"`` when ``w_star`` is given and ``"risk"`` otherwise. Ties go
    to the smaller ``gamma``, then the smaller ``|eta|``.
    """
    w = p._check(w)
    gammas, etas = default_grid(p) if grid is None else grid
    gammas = np.sort(np.atleast_1d(np.asarray(gammas, dtype=float)))
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    etas = etas[np.argsort(np.abs(etas), kind="stable")]
    if gammas.size == 0 or etas.size == 0:
        raise ValueError("grid must be nonempty")
    if objective is None:
        objective = "risk" if w_star is None else "target"
    if objective in ("target", "distance") and w_star is None:
        raise ValueError(f"objective {objective!r} needs w_star")
    ref = None
    if objective == "target":
        ref = lemma_target(p, w, w_star)
    elif objective == "distance":
        ref = np.asarray(w_star, dtype=float)
    elif objective != "risk":
        raise ValueError(f"unknown objective {objective!r}")
    g = glm_gradient(p, w)
    best, best_val = (float(gammas[0]), float(etas[0])), np.inf
    for gamma in gammas:
        for eta in etas:
            wp = w - gamma * g - eta * p.cross_moment
            if ref is None:
                val = glm_risk(p, wp)
            else:
                diff = wp - ref
                val = float(diff @ p.sigma @ diff)
            if val < best_val:
                best, best_val = (float(gamma), float(eta)), val
    return best


@dataclass
class BiasedStepSchedule:
    """Step rule for :func:`biased_gd_run`.

    ``mode="fixed"`` uses ``gammas``/``etas`` (scalars or per-step arrays);
    ``"lemma"`` solves for the lemma's schedule each step; ``"search"`` runs
    :func:`schedule_search` on ``grid`` each step.
    """

    mode: str = "fixed"
    gammas: object = None
    etas: object = 0.0
    grid: tuple | None = None
    objective: str | None = None

    def __post_init__(self):
        if self.mode not in ("fixed", "lemma", "search"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "fixed":
            if self.gammas is None:
                raise ValueError("fixed schedule needs gammas")
            if np.any(np.asarray(self.gammas, dtype=float) <= 0):
                raise ValueError("gamma_t must be positive")

    def step(self, p: GlmProblem, t: int, w, w_star) -> tuple[float, float]:
        if self.mode == "fixed":
            g = np.asarray(self.gammas, dtype=float)
            e = np.asarray(self.etas, dtype=float)
            return float(g if g.ndim == 0 else g[t]), float(e if e.ndim == 0 else e[t])
        if self.mode == "lemma":
            return lemma_schedule(p, w, w_star)
        return schedule_search(p, w, self.grid, w_star, self.objective)


def squared_link_schedule(p: GlmProblem) -> BiasedStepSchedule:
    """For ``phi(a) = a^2`` the lemma constants are ``xi1 = 2``, ``xi2 = 0``."""
    return BiasedStepSchedule("fixed", 1.0 / (2.0 * p.L), 0.0)


def biased_gd_run(p: GlmProblem, w0=None, schedule: BiasedStepSchedule | None = None,
                  steps: int = 100, w_star=None, store_iterates: bool = False) -> OptimizerTrace:
    """Run ``w <- w - gamma_t R'(w) - eta_t E[yx]``.

    The default schedule is plain gradient descent with ``gamma = 1 / (phi_bar L)``.
    """
    w = np.zeros(p.d) if w0 is None else p._check(w0).copy()
    if schedule is None:
        schedule = BiasedStepSchedule("fixed", 1.0 / (p.link.d2_bound * p.L), 0.0)
    w_star = p.minimizer if w_star is None else np.asarray(w_star, dtype=float)
    r_star = glm_risk(p, w_star)
    trace = OptimizerTrace(meta={"schedule": schedule.mode, "link": p.link.name, "seed": None})
    if store_iterates:
        trace.iterates = [w.copy()]
    d0 = max(np.linalg.norm(w - w_star), 1.0)
    for t in range(steps + 1):
        g = glm_gradient(p, w)
        dist = float(np.linalg.norm(w - w_star))
        if not np.isfinite(dist) or dist > 1e12 * d0:
            raise Diverged(f"distance to w* {dist:.3e} at step {t}")
        if t == steps:
            trace.log(t, glm_risk(p, w) - r_star, np.linalg.norm(g), dist, t,
                      gamma=np.nan, eta=np.nan)
            break
        gamma, eta = schedule.step(p, t, w, w_star)
        if should_log(t):
            trace.log(t, glm_risk(p, w) - r_star, np.linalg.norm(g), dist, t,
                      gamma=gamma, eta=eta)
        w = w - gamma * g - eta * p.cross_moment
        if store_iterates:
            trace.iterates.append(w.copy())
    return trace


def closed_form_iterate(p: GlmProblem, w0, w_star, t: int) -> np.ndarray:
    """``w* + (I - Sigma / L)^t (w0 - w*)`` in the eigenbasis of ``Sigma``."""
    eig = p.sigma_eig
    v = eig.eigenvectors
    coef = v.T @ (np.asarray(w0, dtype=float) - w_star)
    return w_star + v @ ((1.0 - eig.eigenvalues / p.L) ** t * coef)


def contraction_factors(p: GlmProblem, iterates, w_star) -> np.ndarray:
    """Per-step ratios of the error along each eigendirection of ``Sigma``.

    Row ``t`` holds ``v_i^T (w^{t+1} - w*) / v_i^T (w^t - w*)``.
    """
    v = p.sigma_eig.eigenvectors
    coords = np.array([v.T @ (w - w_star) for w in iterates])
    return coords[1:] / coords[:-1]


# --------------------------------------------------------------------------- bound

def glm_bound(profile: TauProfile, p: GlmProblem, zeta: float, t, w_star=None) -> dict:
    """Suboptimality envelope for zero-initialized biased descent, in two readings.

    ``literal``: ``c tau phi_bar ((1 - zeta/L)^{2t} (1 - r) + r zeta)``.
    ``primal_analogous``: ``c tau phi_bar (r (1 - zeta/L)^{2t} + (d - r)) zeta``.
    ``c = 1 / E[phi''(x^T w*)]`` and ``r`` counts Sigma-eigenvalues above ``zeta``.
    """
    if not 0.0 < zeta < p.L:
        raise ZetaOutOfRange(f"zeta={zeta} outside (0, L={p.L})")
    c = p.c_wstar(w_star)
    eig = p.sigma_eig.eigenvalues
    r = int(np.sum(eig > zeta))
    decay = (1.0 - zeta / p.L) ** (2 * np.asarray(t, dtype=float))
    scale = c * profile.tau * p.link.d2_bound
    return {
        "literal": scale * (decay * (1 - r) + r * zeta),
        "primal_analogous": scale * (r * decay + (p.d - r)) * zeta,
        "c_wstar": c,
        "r": r,
    }


def glm_tau_profile(p: GlmProblem):
    """Tau profile of ``(Sigma, E[yx])`` through the moment form of the decomposition."""
    spec = from_moments(p.sigma, p.cross_moment, float(np.mean(p.y ** 2)), 0.0, p.n)
    return measure_tau(spec)

