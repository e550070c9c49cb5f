"""Dual ridge regression and homotopic initialization.

The dual objective is ``Q_mu(alpha) = 1/2 alpha^T G alpha - b^T alpha`` with
``G = X X^T / (mu n^2) + I / n`` and ``b = y / n``. Its minimizer maps to the
primal one through ``beta = X^T alpha / (n mu)``. In the left singular basis
of the scaled SVD, ``G`` has eigenvalue ``(sigma_i^2 / mu + 1) / n`` on the
image of ``X`` and ``1 / n`` on the ``n - rank`` dimensional kernel of
``X^T``. The kernel coordinates of the minimizer do not depend on ``mu``,
which is what initializing from the minimizer at a larger regularizer
``nu`` exploits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .data import Dataset
from .errors import DimensionMismatch
from .linalg import ThinSVD, solve_spd, thin_svd
from .spectral import SpectralDecomposition, TauProfile, count_above
from .trace import OptimizerTrace, should_log

MAX_DENSE_N = 2000


def quarter_sqrt_nu(mu: float) -> float:
    """Default homotopic regularizer ``nu = 0.25 * sqrt(mu)``."""
    return 0.25 * float(np.sqrt(mu))


class DualRidgeProblem:
    def __init__(self, x, y, mu: float):
        if not mu > 0:
            raise ValueError(f"mu must be positive, got {mu}")
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        n, d = self.x.shape
        if self.y.shape != (n,):
            raise DimensionMismatch(f"y has shape {self.y.shape}, expected ({n},)")
        self.n, self.d, self.mu = n, d, float(mu)
        self.scale = 1.0 / (self.mu * n * n)
        self.row_sq = np.einsum("ij,ij->i", self.x, self.x)
        self.hessian_diag = self.row_sq * self.scale + 1.0 / n
        self.dual_linear = self.y / n

    @classmethod
    def from_dataset(cls, data: Dataset, mu: float) -> "DualRidgeProblem":
        return cls(data.x, data.y, mu)

    def with_mu(self, mu: float) -> "DualRidgeProblem":
        other = DualRidgeProblem(self.x, self.y, mu)
        if "svd" in self.__dict__:
            other.__dict__["svd"] = self.svd
        return other

    @cached_property
    def svd(self) -> ThinSVD:
        return thin_svd(self.x, scaled=True)

    @property
    def image_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of ``G`` on the image of ``X``, descending."""
        return (self.svd.singulars ** 2 / self.mu + 1.0) / self.n

    @property
    def norm(self) -> float:
        ev = self.image_eigenvalues
        return float(ev[0]) if ev.size else 1.0 / self.n

    def matvec(self, alpha) -> np.ndarray:
        return self.x @ (self.x.T @ alpha) * self.scale + alpha / self.n

    def dense_hessian(self) -> np.ndarray:
        if self.n > MAX_DENSE_N:
            raise MemoryError(f"refusing to materialize G for n={self.n} > {MAX_DENSE_N}")
        return self.x @ self.x.T * self.scale + np.eye(self.n) / self.n

    @cached_property
    def minimizer(self) -> np.ndarray:
        return dual_minimizer(self)

    @cached_property
    def optimum(self) -> float:
        return -0.5 * float(self.dual_linear @ self.minimizer)

    def _check(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (self.n,):
            raise DimensionMismatch(f"alpha has shape {alpha.shape}, expected ({self.n},)")
        return alpha


def dual_objective(p: DualRidgeProblem, alpha) -> float:
    alpha = p._check(alpha)
    v = p.x.T @ alpha
    return 0.5 * (float(v @ v) * p.scale + float(alpha @ alpha) / p.n) - float(p.dual_linear @ alpha)


def dual_gradient(p: DualRidgeProblem, alpha) -> np.ndarray:
    return p.matvec(p._check(alpha)) - p.dual_linear


def dual_suboptimality(p: DualRidgeProblem, alpha) -> float:
    """``1/2 (alpha - alpha*)^T G (alpha - alpha*)``."""
    delta = p._check(alpha) - p.minimizer
    return 0.5 * float(delta @ p.matvec(delta))


def dual_minimizer(p: DualRidgeProblem, method: str = "woodbury") -> np.ndarray:
    """Solve ``G alpha = b``.

    ``"woodbury"`` uses ``alpha* = y - X (X^T X + n mu I)^{-1} X^T y`` (a d x d
    solve); ``"direct"`` factors the dense n x n ``G``.
    """
    if method == "woodbury":
        a = p.x.T @ p.x + p.n * p.mu * np.eye(p.d)
        beta = solve_spd(a, p.x.T @ p.y)
        return p.y - p.x @ beta
    if method == "direct":
        return solve_spd(p.dense_hessian(), p.dual_linear)
    raise ValueError(f"unknown method {method!r}")


def dual_to_primal(p: DualRidgeProblem, alpha) -> np.ndarray:
    """``beta = X^T alpha / (n mu)``."""
    return p.x.T @ p._check(alpha) / (p.n * p.mu)


def kernel_projection(p: DualRidgeProblem, v) -> np.ndarray:
    """Component of ``v`` in the null space of ``X^T``."""
    u = p.svd.left
    return v - u @ (u.T @ v)


@dataclass(frozen=True)
class HomotopicInit:
    nu: float
    alpha0: np.ndarray
    solve_cost: dict = field(default_factory=dict)


def homotopic_init(p: DualRidgeProblem, nu: float | None = None, method: str = "woodbury",
                   tol: float = 1e-6, max_epochs: int = 10_000, seed: int = 0) -> HomotopicInit:
    """Minimizer of the dual problem at regularizer ``nu`` (default ``0.25 sqrt(mu)``).

    ``method`` is ``"woodbury"`` or ``"direct"`` for an exact solve, or
    ``"rcdm"`` for coordinate descent stopped once
    ``||grad Q_nu|| <= tol * ||b||``.
    """
    nu = quarter_sqrt_nu(p.mu) if nu is None else float(nu)
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    pn = p.with_mu(nu)
    if method in ("woodbury", "direct"):
        return HomotopicInit(nu, dual_minimizer(pn, method), {"method": method})
    if method == "rcdm":
        from .rcdm import solve_to_tolerance

        alpha, epochs = solve_to_tolerance(pn, tol=tol, max_epochs=max_epochs, seed=seed)
        return HomotopicInit(nu, alpha, {"method": "rcdm", "epochs": epochs, "tol": tol})
    raise ValueError(f"unknown method {method!r}")


def image_weights(p: DualRidgeProblem) -> np.ndarray:
    """Per-coordinate curvature of the image part, i.e. the diagonal of the
    dual Hessian in the left singular basis."""
    return p.image_eigenvalues


def dual_suboptimality_split(p: DualRidgeProblem, alpha) -> tuple[float, float]:
    """Split ``Q_mu(alpha) - Q_mu*`` into its image and kernel parts."""
    delta = p._check(alpha) - p.minimizer
    u = p.svd.left
    coords = u.T @ delta
    image = 0.5 * float(np.sum(image_weights(p) * coords ** 2))
    ker = delta - u @ coords
    kernel = 0.5 * float(ker @ ker) / p.n
    return image, kernel


def dual_init_gap(spec: SpectralDecomposition, mu: float, nu: float,
                  literal: bool = False) -> np.ndarray:
    """Squared gap between the dual minimizers at ``mu`` and ``nu`` along each
    left singular direction.

    The default returns ``n (mu - nu)^2 sigma_i^2 c_i^2 / ((sigma_i^2 + mu)(sigma_i^2 + nu))^2``,
    which is what the two closed-form minimizers give. ``literal=True``
    returns ``n ((mu - nu) sigma_i^2 / ((sigma_i^2 + mu)(sigma_i^2 + nu)))^2 c_i^2``,
    larger by a factor ``sigma_i^2``; it agrees with the exact gap only on
    unit-variance eigenfeatures.
    """
    if not (mu > 0 and nu > 0):
        raise ValueError("mu and nu must be positive")
    s = spec.z_variances
    c = spec.response_cov
    denom = (s + mu) * (s + nu)
    base = spec.n * ((mu - nu) / denom) ** 2 * c ** 2
    return base * s ** 2 if literal else base * s


def homotopic_distance_bound(profile: TauProfile, spec: SpectralDecomposition, mu: float,
                             nu: float, zeta: float, n: int | None = None,
                             d: int | None = None) -> float:
    """``((mu - nu)^2 / nu) (d - r) n tau zeta`` bounding ``||alpha*_nu - alpha*_mu||^2``."""
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    n = spec.n if n is None else n
    d = spec.d if d is None else d
    r = count_above(spec, zeta)
    return (mu - nu) ** 2 / nu * (d - r) * n * profile.tau * zeta


def dual_gd_bound(profile: TauProfile, spec: SpectralDecomposition, mu: float, nu: float,
                  gamma: float, zeta: float, t: int) -> float:
    """``tau zeta (nu - mu)^2 / (2 nu mu) [r (1 - gamma zeta)^{2t} + (d - r)]`` for
    gradient descent started at the ``nu`` minimizer.

    ``gamma`` is taken as given; the step on the dual objective it corresponds
    to is ``(n mu) gamma``.
    """
    r = count_above(spec, zeta)
    return (profile.tau * zeta * (nu - mu) ** 2 / (2 * nu * mu)
            * (r * (1.0 - gamma * zeta) ** (2 * t) + (spec.d - r)))


def dual_gd_run(p: DualRidgeProblem, alpha0=None, gamma: float | None = None,
                steps: int = 100, init_label: str = "zero") -> OptimizerTrace:
    """Full-gradient descent on the dual objective (default step ``1 / ||G||``)."""
    alpha = np.zeros(p.n) if alpha0 is None else p._check(alpha0).copy()
    gamma = 1.0 / p.norm if gamma is None else float(gamma)
    trace = OptimizerTrace(meta={"step_size": gamma, "init_label": init_label, "seed": None})
    astar = p.minimizer
    for t in range(steps + 1):
        grad = p.matvec(alpha) - p.dual_linear
        if should_log(t) or t == steps:
            image, kernel = dual_suboptimality_split(p, alpha)
            trace.log(t, image + kernel, np.linalg.norm(grad), np.linalg.norm(alpha - astar), t,
                      kernel_part=kernel, image_part=image)
        if t == steps:
            break
        alpha = alpha - gamma * grad
    return trace
