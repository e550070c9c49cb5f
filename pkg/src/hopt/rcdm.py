"""Randomized coordinate descent on the dual ridge objective.

One step picks a coordinate ``r`` and applies
``alpha_r <- alpha_r - gamma_r * dQ/dalpha_r``, where the partial derivative
``x_r^T v / (mu n^2) + (alpha_r - y_r) / n`` uses ``v = X^T alpha`` kept up
to date incrementally (``v += delta * x_r``) and re-synchronized every epoch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dual import (
    DualRidgeProblem,
    dual_objective,
    dual_suboptimality_split,
    homotopic_init,
)
from .errors import Diverged, RhoOutOfRange
from .report import Report
from .trace import OptimizerTrace

EXACT_STEP_LIMIT = 2000
MC_SLACK = 1.1


@dataclass(frozen=True)
class StepSizes:
    gamma: np.ndarray
    rule: str
    estimated: bool = False

    @property
    def gamma_min(self) -> float:
        return float(self.gamma.min())

    @property
    def gamma_max(self) -> float:
        return float(self.gamma.max())

    @property
    def ratio(self) -> float:
        return self.gamma_max / self.gamma_min


@dataclass(frozen=True)
class RcdmConfig:
    """``init`` is ``"zero"``, ``"homotopic"`` (with ``nu``, default
    ``0.25 sqrt(mu)``) or an explicit start vector."""

    step_rule: str = "diagonal"
    sampling: str = "permutation"
    epochs: int = 10
    seed: int = 0
    init: object = "zero"
    nu: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.step_rule not in ("theoretical", "diagonal"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.sampling not in ("permutation", "iid"):
            raise ValueError(f"unknown sampling {self.sampling!r}")
        if self.nu is not None and not self.nu > 0:
            raise ValueError("nu must be positive")


def _abs_gram_row_sums(x: np.ndarray, block: int = 512) -> np.ndarray:
    n = x.shape[0]
    out = np.empty(n)
    for start in range(0, n, block):
        out[start:start + block] = np.abs(x[start:start + block] @ x.T).sum(axis=1)
    return out


def step_sizes(p: DualRidgeProblem, rule: str = "diagonal",
               exact_limit: int = EXACT_STEP_LIMIT) -> StepSizes:
    """Coordinate step sizes.

    ``"diagonal"``: ``gamma_r = 1 / G_rr``, the coordinate Lipschitz
    constants. ``"theoretical"``: ``1 / gamma_r = G_rr + sum_j |G_rj|``. For
    ``n > exact_limit`` the row sums use ``|x_r^T x_j| <= ||x_r|| ||x_j||`` and
    the result is flagged as estimated.
    """
    if rule == "diagonal":
        return StepSizes(1.0 / p.hessian_diag, rule)
    if rule != "theoretical":
        raise ValueError(f"unknown step rule {rule!r}")
    if p.n <= exact_limit:
        sums = _abs_gram_row_sums(p.x)
        estimated = False
    else:
        norms = np.sqrt(p.row_sq)
        sums = norms * norms.sum()
        estimated = True
    # G_rr > 0, so the diagonal's absolute value is the Gram term plus 1/n
    abs_row = sums * p.scale + 1.0 / p.n
    return StepSizes(1.0 / (p.hessian_diag + abs_row), rule, estimated)


def _start(p: DualRidgeProblem, cfg: RcdmConfig) -> tuple[np.ndarray, str]:
    init = cfg.init
    if isinstance(init, str):
        if init == "zero":
            return np.zeros(p.n), "zero"
        if init == "homotopic":
            h = homotopic_init(p, cfg.nu)
            return h.alpha0.copy(), f"homotopic(nu={h.nu:.6g})"
        raise ValueError(f"unknown init {init!r}")
    return p._check(init).copy(), "explicit"


def _orders(n: int, sampling: str, rng: np.random.Generator):
    if sampling == "permutation":
        return rng.permutation(n)
    return rng.integers(0, n, size=n)


def coordinate_sweep(p: DualRidgeProblem, alpha: np.ndarray, v: np.ndarray,
                     gamma: np.ndarray, coords) -> None:
    """Apply one coordinate update per entry of ``coords`` in place."""
    x, y = p.x, p.y
    scale, inv_n = p.scale, 1.0 / p.n
    for r in coords:
        xr = x[r]
        g = float(xr @ v) * scale + (alpha[r] - y[r]) * inv_n
        step = -gamma[r] * g
        if step != 0.0:
            alpha[r] += step
            v += step * xr


def rcdm_run(p: DualRidgeProblem, cfg: RcdmConfig,
             monitor: Callable[[np.ndarray], dict] | None = None,
             store_iterates: bool = False, steps_per_log: int | None = None) -> OptimizerTrace:
    """Run RCDM and log one trace row per epoch (``t`` counts coordinate steps).

    ``monitor(alpha)`` may return extra named columns to log. With
    ``steps_per_log`` rows are logged every that many steps instead.
    """
    gamma = step_sizes(p, cfg.step_rule).gamma
    alpha, label = _start(p, cfg)
    rng = np.random.default_rng(cfg.seed)
    astar, qstar = p.minimizer, p.optimum
    v = p.x.T @ alpha
    trace = OptimizerTrace(meta={"step_size": cfg.step_rule, "init_label": label,
                                 "seed": cfg.seed, "sampling": cfg.sampling, "max_v_drift": 0.0})
    if store_iterates:
        trace.iterates = [alpha.copy()]
    chunk = p.n if steps_per_log is None else int(steps_per_log)

    def record(step):
        image, kernel = dual_suboptimality_split(p, alpha)
        sub = image + kernel
        grad = p.matvec(alpha) - p.dual_linear
        extra = {"epoch": step / p.n, "kernel_part": kernel, "image_part": image}
        if monitor is not None:
            extra.update(monitor(alpha))
        trace.log(step, sub, np.linalg.norm(grad), np.linalg.norm(alpha - astar), step / p.n,
                  **extra)
        return sub

    sub0 = record(0)
    total = cfg.epochs * p.n
    step = 0
    pending = np.empty(0, dtype=np.intp)
    while step < total:
        while pending.size < chunk:
            pending = np.concatenate([pending, _orders(p.n, cfg.sampling, rng)])
        take = min(chunk, total - step)
        coordinate_sweep(p, alpha, v, gamma, pending[:take])
        pending = pending[take:]
        step += take
        fresh = p.x.T @ alpha
        drift = float(np.linalg.norm(v - fresh))
        trace.meta["max_v_drift"] = max(trace.meta["max_v_drift"],
                                        drift / (1.0 + float(np.linalg.norm(alpha))))
        v = fresh
        if store_iterates:
            trace.iterates.append(alpha.copy())
        sub = record(step)
        if not np.isfinite(sub) or (sub0 > 0 and sub > 1e12 * sub0):
            raise Diverged(f"dual suboptimality {sub:.3e} after {step} steps")
    trace.meta["final"] = alpha
    trace.meta["optimum"] = qstar
    return trace


def solve_to_tolerance(p: DualRidgeProblem, tol: float = 1e-6, max_epochs: int = 10_000,
                       seed: int = 0) -> tuple[np.ndarray, int]:
    """Diagonal-step RCDM from zero until ``||grad|| <= tol * ||b||``."""
    gamma = step_sizes(p, "diagonal").gamma
    rng = np.random.default_rng(seed)
    alpha = np.zeros(p.n)
    target = tol * float(np.linalg.norm(p.dual_linear))
    for epoch in range(1, max_epochs + 1):
        v = p.x.T @ alpha
        coordinate_sweep(p, alpha, v, gamma, rng.permutation(p.n))
        if np.linalg.norm(p.matvec(alpha) - p.dual_linear) <= target:
            return alpha, epoch
    return alpha, max_epochs


def epochs_to_reach(trace: OptimizerTrace, threshold: float) -> float:
    """First logged epoch with ``subopt <= threshold`` (``inf`` if never)."""
    sub = trace.column("subopt")
    ep = trace.column("epochs")
    hit = np.flatnonzero(sub <= threshold)
    return float(ep[hit[0]]) if hit.size else float("inf")


# --------------------------------------------------------------------------- rho split

@dataclass(frozen=True)
class RhoSplit:
    """``G = L + S`` with ``L`` the spectral part at eigenvalues ``>= rho``.

    Image directions are stored explicitly; the kernel block (eigenvalue
    ``1/n``) belongs to ``L`` only when ``rho <= 1/n``.
    """

    rho: float
    n: int
    l_vectors: np.ndarray
    l_values: np.ndarray
    s_vectors: np.ndarray
    s_values: np.ndarray
    image_basis: np.ndarray
    kernel_in_l: bool

    def _kernel(self, delta):
        u = self.image_basis
        return delta - u @ (u.T @ delta)

    def l_apply(self, delta) -> np.ndarray:
        out = self.l_vectors @ (self.l_values * (self.l_vectors.T @ delta))
        if self.kernel_in_l:
            out = out + self._kernel(delta) / self.n
        return out

    def s_apply(self, delta) -> np.ndarray:
        out = self.s_vectors @ (self.s_values * (self.s_vectors.T @ delta))
        if not self.kernel_in_l:
            out = out + self._kernel(delta) / self.n
        return out

    def l_quad(self, delta) -> float:
        return float(delta @ self.l_apply(delta))

    def s_quad(self, delta) -> float:
        return float(delta @ self.s_apply(delta))

    def l_matrix(self) -> np.ndarray:
        return np.column_stack([self.l_apply(e) for e in np.eye(self.n)])

    def s_matrix(self) -> np.ndarray:
        return np.column_stack([self.s_apply(e) for e in np.eye(self.n)])

    @property
    def s_norm(self) -> float:
        vals = list(self.s_values)
        if not self.kernel_in_l and self.n > self.image_basis.shape[1]:
            vals.append(1.0 / self.n)
        return max(vals, default=0.0)

    @property
    def l_min(self) -> float:
        vals = list(self.l_values)
        if self.kernel_in_l and self.n > self.image_basis.shape[1]:
            vals.append(1.0 / self.n)
        return min(vals, default=float("inf"))


def rho_split(p: DualRidgeProblem, rho: float, rtol: float = 1e-12) -> RhoSplit:
    lo, hi = 1.0 / p.n, p.norm
    if rho < lo * (1 - rtol) or rho > hi * (1 + rtol):
        raise RhoOutOfRange(f"rho={rho:.6g} outside [1/n, ||G||] = [{lo:.6g}, {hi:.6g}]")
    u = p.svd.left
    ev = p.image_eigenvalues
    big = ev >= rho
    return RhoSplit(float(rho), p.n, u[:, big], ev[big], u[:, ~big], ev[~big], u,
                    kernel_in_l=lo >= rho)


def spectral_gap_rho(p: DualRidgeProblem) -> float:
    """Smallest eigenvalue of ``G`` on the image of ``X``: the top of the gap
    separating the data directions from the ``1/n`` kernel block."""
    ev = p.image_eigenvalues
    return float(ev[-1]) if ev.size else 1.0 / p.n


# --------------------------------------------------------------------------- checks

def _monte_carlo(p: DualRidgeProblem, cfg: RcdmConfig, trials: int):
    astar = p.minimizer
    sums = None
    for k in range(trials):
        run_cfg = RcdmConfig(cfg.step_rule, cfg.sampling, cfg.epochs, cfg.seed + k,
                             cfg.init, cfg.nu)
        tr = rcdm_run(p, run_cfg)
        cols = np.vstack([tr.column("subopt"), tr.column("grad_norm") ** 2,
                          tr.column("dist") ** 2])
        sums = cols if sums is None else sums + cols
        steps = tr.column("t")
    mean = sums / trials
    alpha0, _ = _start(p, cfg)
    d0 = float(np.sum((alpha0 - astar) ** 2))
    q0 = max(dual_objective(p, alpha0) - p.optimum, 0.0)
    return steps, mean, d0, q0


def _floors(p: DualRidgeProblem) -> tuple[float, float, float]:
    """Rounding floors for suboptimality, squared gradient and squared distance.

    Measured values at an exact minimizer are not zero but of order
    ``eps * scale``; without these floors a bound of exactly 0 would fail.
    """
    eps = 1e-12
    b2 = float(p.dual_linear @ p.dual_linear)
    a2 = float(p.minimizer @ p.minimizer)
    return eps * abs(p.optimum), eps * b2, eps * a2


def rcdm_theorem_check(p: DualRidgeProblem, cfg: RcdmConfig, rho: float,
                       trials: int = 50, slack: float = MC_SLACK) -> Report:
    """Monte-Carlo check that, at every logged step ``t``, either

    ``E||grad||^2 <= 2 rho^2 (g_max/g_min) ||a0 - a*||^2`` or
    ``E[Q - Q*] <= 1/2 (1 - rho g_min / n)^t (Q0 - Q*) + 1/2 rho (g_max/g_min) ||a0 - a*||^2``

    holds up to the factor ``slack``.
    """
    if cfg.step_rule != "theoretical":
        raise ValueError("the convergence theorem is stated for the theoretical step sizes")
    rho_split(p, rho)
    st = step_sizes(p, "theoretical")
    steps, mean, d0, q0 = _monte_carlo(p, cfg, trials)
    f_sub, f_grad, _ = _floors(p)
    report = Report(("t", "lhs_subopt", "rhs_subopt", "lhs_grad", "rhs_grad", "disjunction_holds"),
                    meta={"rho": rho, "trials": trials, "slack": slack, "gamma_min": st.gamma_min,
                          "gamma_max": st.gamma_max, "estimated_steps": st.estimated})
    for k, t in enumerate(steps):
        rhs_sub = (0.5 * (1.0 - rho * st.gamma_min / p.n) ** t * q0
                   + 0.5 * rho * st.ratio * d0)
        rhs_grad = 2.0 * rho ** 2 * st.ratio * d0
        lhs_sub, lhs_grad = float(mean[0, k]), float(mean[1, k])
        holds = lhs_sub <= slack * rhs_sub + f_sub or lhs_grad <= slack * rhs_grad + f_grad
        report.add(int(t), lhs_sub, float(rhs_sub), lhs_grad, float(rhs_grad), bool(holds))
    return report


def distance_tracking_check(p: DualRidgeProblem, cfg: RcdmConfig, trials: int = 50,
                            slack: float = MC_SLACK) -> Report:
    """Monte-Carlo ``E||a_t - a*||^2`` against ``(g_max/g_min) ||a0 - a*||^2``.

    The ``bound_inverse`` column uses the reciprocal ratio ``g_min/g_max``.
    """
    st = step_sizes(p, cfg.step_rule)
    steps, mean, d0, _ = _monte_carlo(p, cfg, trials)
    floor = _floors(p)[2]
    report = Report(("t", "mean_dist_sq", "bound", "holds", "bound_inverse", "holds_inverse"),
                    meta={"trials": trials, "slack": slack, "ratio": st.ratio})
    for k, t in enumerate(steps):
        dist = float(mean[2, k])
        bound = st.ratio * d0
        inv = d0 / st.ratio
        report.add(int(t), dist, bound, bool(dist <= slack * bound + floor), inv,
                   bool(dist <= slack * inv + floor))
    return report


def fast_convergence_check(p: DualRidgeProblem, rho: float, alpha, gamma: np.ndarray) -> dict:
    """One-step expected contraction of the ``L``-part, computed exactly.

    Averages over the ``n`` coordinate choices the quantity
    ``||a+ - a*||_L^2`` and compares it to ``(1 - g_min rho / n) ||a - a*||_L^2``;
    ``condition`` reports whether ``||grad||^2 >= 2 ||S (a - a*)||^2``.
    """
    split = rho_split(p, rho)
    delta = np.asarray(alpha, dtype=float) - p.minimizer
    grad = p.matvec(delta)
    before = split.l_quad(delta)
    after = 0.0
    for r in range(p.n):
        d = delta.copy()
        d[r] -= gamma[r] * grad[r]
        after += split.l_quad(d)
    after /= p.n
    rate = 1.0 - gamma.min() * rho / p.n
    s_delta = split.s_apply(delta)
    return {"expected_after": after, "bound": rate * before, "before": before,
            "condition": float(grad @ grad) >= 2.0 * float(s_delta @ s_delta)}

