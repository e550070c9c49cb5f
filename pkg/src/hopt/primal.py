"""Primal ridge regression: objective, minimizer, gradient descent and the
tau-based suboptimality envelope.

``Q(beta) = 1/2 beta^T H beta - beta^T b`` with ``H = X^T X / n + mu I`` and
``b = X^T y / n``.
"""

from __future__ import annotations

import warnings
from functools import cached_property

import numpy as np

from .data import Dataset
from .errors import DimensionMismatch, Diverged, StepSizeWarning
from .linalg import solve_spd
from .spectral import SpectralDecomposition, TauProfile, count_above, decompose
from .trace import OptimizerTrace, should_log

DIVERGENCE_FACTOR = 1e12


class RidgeProblem:
    """Ridge objective for a design ``x`` (n x d) and response ``y``."""

    def __init__(self, x, y, mu: float):
        if not mu > 0:
            raise ValueError(f"mu must be positive, got {mu}")
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        n, d = self.x.shape
        if self.y.shape != (n,):
            raise DimensionMismatch(f"y has shape {self.y.shape}, expected ({n},)")
        self.n, self.d, self.mu = n, d, float(mu)
        self.hessian = self.x.T @ self.x / n + self.mu * np.eye(d)
        self.linear = self.x.T @ self.y / n

    @classmethod
    def from_dataset(cls, data: Dataset, mu: float) -> "RidgeProblem":
        return cls(data.x, data.y, mu)

    @cached_property
    def spectral(self) -> SpectralDecomposition:
        return decompose(Dataset(self.x, self.y), self.mu)

    @cached_property
    def minimizer(self) -> np.ndarray:
        return solve_spd(self.hessian, self.linear)

    @cached_property
    def optimum(self) -> float:
        return -0.5 * float(self.linear @ self.minimizer)

    @property
    def lambda_max(self) -> float:
        return float(self.spectral.regularized_variances[0])

    @property
    def lambda_min(self) -> float:
        return float(self.spectral.regularized_variances[-1])

    @property
    def condition_number(self) -> float:
        return self.lambda_max / self.lambda_min

    def _check(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.d,):
            raise DimensionMismatch(f"beta has shape {beta.shape}, expected ({self.d},)")
        return beta


def primal_objective(p: RidgeProblem, beta) -> float:
    beta = p._check(beta)
    return 0.5 * float(beta @ p.hessian @ beta) - float(beta @ p.linear)


def primal_gradient(p: RidgeProblem, beta) -> np.ndarray:
    beta = p._check(beta)
    return p.hessian @ beta - p.linear


def primal_minimizer(p: RidgeProblem, form: str = "hessian") -> np.ndarray:
    """``H^{-1} b``, or with ``form="normal"`` ``(X^T X + n mu I)^{-1} X^T y``."""
    if form == "hessian":
        return p.minimizer.copy()
    if form == "normal":
        a = p.x.T @ p.x + p.n * p.mu * np.eye(p.d)
        return solve_spd(a, p.x.T @ p.y)
    raise ValueError(f"unknown form {form!r}")


def suboptimality(p: RidgeProblem, beta, method: str = "direct") -> float:
    """``Q(beta) - Q*``.

    ``method="direct"`` subtracts the cached optimum from the objective;
    ``method="quadratic"`` evaluates ``1/2 (beta - beta*)^T H (beta - beta*)``.
    """
    beta = p._check(beta)
    if method == "direct":
        return primal_objective(p, beta) - p.optimum
    if method == "quadratic":
        delta = beta - p.minimizer
        return 0.5 * float(delta @ p.hessian @ delta)
    raise ValueError(f"unknown method {method!r}")


def default_step(p: RidgeProblem) -> float:
    return 1.0 / p.lambda_max


def _check_step(p: RidgeProblem, gamma: float) -> bool:
    if not gamma > 0:
        raise ValueError(f"step size must be positive, got {gamma}")
    ok = gamma < 2.0 / p.lambda_max
    if not ok:
        warnings.warn(f"gamma={gamma:.3g} >= 2/lambda_1={2 / p.lambda_max:.3g}; "
                      "convergence is not guaranteed", StepSizeWarning, stacklevel=3)
    return ok


def gd_run(p: RidgeProblem, beta0=None, gamma: float | None = None, steps: int = 100,
           store_iterates: bool = False, init_label: str = "zero") -> OptimizerTrace:
    """Plain gradient descent ``beta <- beta - gamma * grad Q(beta)``.

    Every step is logged up to step 1000, every 10th afterwards.
    """
    beta = np.zeros(p.d) if beta0 is None else p._check(beta0).copy()
    gamma = default_step(p) if gamma is None else float(gamma)
    admissible = _check_step(p, gamma)
    trace = OptimizerTrace(meta={"step_size": gamma, "init_label": init_label,
                                 "admissible": admissible, "seed": None})
    if store_iterates:
        trace.iterates = [beta.copy()]
    beta_star = p.minimizer
    sub0 = suboptimality(p, beta, "quadratic")
    for t in range(steps + 1):
        grad = p.hessian @ beta - p.linear
        if should_log(t) or t == steps:
            sub = suboptimality(p, beta, "quadratic")
            if sub0 > 0 and sub > DIVERGENCE_FACTOR * sub0:
                raise Diverged(f"suboptimality {sub:.3e} at step {t}")
            trace.log(t, sub, np.linalg.norm(grad), np.linalg.norm(beta - beta_star), t)
        if t == steps:
            break
        beta = beta - gamma * grad
        if store_iterates:
            trace.iterates.append(beta.copy())
    return trace


def gd_closed_form(p: RidgeProblem, beta0, gamma: float, t: int) -> np.ndarray:
    """Iterate ``t`` of gradient descent, ``beta* + (I - gamma H)^t (beta0 - beta*)``,
    evaluated in the eigenbasis of ``H``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    beta0 = p._check(beta0)
    if t == 0:
        return beta0.copy()
    spec = p.spectral
    v = spec.basis
    lam = spec.regularized_variances[: spec.rank]
    delta = beta0 - p.minimizer
    coef = v.T @ delta
    rest = delta - v @ coef
    moved = v @ ((1.0 - gamma * lam) ** t * coef) + (1.0 - gamma * p.mu) ** t * rest
    return p.minimizer + moved


def primal_bound(profile: TauProfile, spec: SpectralDecomposition, gamma: float,
                 zeta: float, t: int, d: int | None = None) -> float:
    """``1/2 [r (1 - gamma zeta)^{2t} + (d - r)] tau zeta`` with ``r`` the number
    of eigenfeatures whose variance exceeds ``zeta``."""
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    d = spec.d if d is None else d
    r = count_above(spec, zeta)
    return 0.5 * (r * (1.0 - gamma * zeta) ** (2 * t) + (d - r)) * profile.tau * zeta


def primal_bound_weighted(profile: TauProfile, spec: SpectralDecomposition, gamma: float,
                          zeta: float, t: int) -> float:
    """Envelope that charges each fast eigenfeature its own variance.

    ``1/2 tau [(1 - gamma zeta)^{2t} sum_{sigma_j^2 > zeta} sigma_j^2 + (d - r) zeta]``.
    Valid for zero initialization whenever ``gamma * lambda_1 <= 1``.
    """
    sig2 = spec.z_variances
    fast = sig2 > zeta
    r = int(fast.sum())
    return 0.5 * profile.tau * ((1.0 - gamma * zeta) ** (2 * t) * float(sig2[fast].sum())
                                + (spec.d - r) * zeta)


def worst_case_envelope(initial: float, kappa: float, t) -> np.ndarray:
    """``initial * (1 - 2/kappa)^{2t}``: the rate read off the condition number."""
    return initial * (1.0 - 2.0 / kappa) ** (2 * np.asarray(t, dtype=float))
