"""Small dense linear algebra kernels.

Everything downstream is built on three routines:

* :func:`sym_eig` -- cyclic Jacobi eigendecomposition of a symmetric matrix,
* :func:`thin_svd` -- (optionally sqrt(n)-scaled) thin SVD obtained from the
  eigendecomposition of the smaller Gram matrix,
* :func:`solve_spd` -- Cholesky solve of a symmetric positive-definite system.

Matrices are plain ``float64`` numpy arrays. The Jacobi sweep uses the
round-robin (chess tournament) ordering, so each of the ``m - 1`` rounds of a
sweep applies ``m / 2`` disjoint rotations at once as vectorized row and
column updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NonFinite, NonSymmetric, NotPositiveDefinite

EIG_TOL = 1e-12
SYM_TOL = 1e-10
RANK_TOL = 1e-10
MAX_SWEEPS = 60


@dataclass(frozen=True)
class SymEig:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


@dataclass(frozen=True)
class ThinSVD:
    """Thin SVD ``x = s * left @ diag(singulars) @ right.T``.

    ``s`` is ``sqrt(n)`` when ``scaled`` is set and 1 otherwise.
    """

    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray
    scaled: bool

    @property
    def rank(self) -> int:
        return int(self.singulars.shape[0])

    @property
    def scale(self) -> float:
        return float(np.sqrt(self.left.shape[0])) if self.scaled else 1.0

    def reconstruct(self) -> np.ndarray:
        return self.scale * (self.left * self.singulars) @ self.right.T


def _as_finite_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix contains NaN or Inf entries")
    return a


def _round_robin(m: int):
    """Yield ``m - 1`` rounds of disjoint index pairs covering all pairs once."""
    players = list(range(m))
    for _ in range(m - 1):
        half = m // 2
        yield [(players[i], players[m - 1 - i]) for i in range(half)]
        players = [players[0], players[-1]] + players[1:-1]


def sym_eig(a, tol: float = EIG_TOL, sym_tol: float = SYM_TOL,
            max_sweeps: int = MAX_SWEEPS) -> SymEig:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    a : array_like, shape (k, k)
        Symmetric matrix. Asymmetry above ``sym_tol * max(1, max|a|)`` is an
        error.
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm drops below
        ``tol * ||a||_F``.

    Returns
    -------
    SymEig
        Eigenvalues sorted descending with matching orthonormal eigenvectors.
    """
    a = _as_finite_matrix(a)
    k = a.shape[0]
    if a.shape[1] != k:
        raise NonSymmetric(f"matrix is not square: {a.shape}")
    amax = float(np.max(np.abs(a))) if a.size else 0.0
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > sym_tol * max(1.0, amax):
        raise NonSymmetric(f"asymmetry {asym:.3e} exceeds tolerance")

    a = 0.5 * (a + a.T)
    v = np.eye(k)
    fro = float(np.linalg.norm(a))
    if k <= 1 or fro == 0.0:
        return SymEig(np.diag(a).copy(), v)

    m = k + (k % 2)
    rounds = list(_round_robin(m))
    # pairs touching the padding index are dropped
    rounds = [np.array([(p, q) for p, q in r if p < k and q < k], dtype=np.intp)
              for r in rounds]
    target = tol * fro

    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off < target:
            break
        for pairs in rounds:
            if pairs.size == 0:
                continue
            p, q = pairs[:, 0], pairs[:, 1]
            apq = a[p, q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            safe = np.where(big, 1.0, theta)
            t = np.where(
                big,
                0.5 / np.where(big, theta, 1.0),
                np.where(safe >= 0, 1.0, -1.0) / (np.abs(safe) + np.sqrt(safe * safe + 1.0)),
            )
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * rp - s[:, None] * rq
            a[q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = cp * c - cq * s
            a[:, q] = cp * s + cq * c
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
    else:
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off >= target:
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")

    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return SymEig(w[order], v[:, order])


def thin_svd(x, scaled: bool = True, rank_tol: float = RANK_TOL) -> ThinSVD:
    """Thin SVD via the eigendecomposition of the smaller Gram matrix.

    With ``scaled`` the factorization is ``x = sqrt(n) U diag(sigma) V^T`` so
    that ``x^T x / n = V diag(sigma^2) V^T``. Singular values below
    ``max(rank_tol, sqrt(k * eps)) * sigma_max`` are dropped, ``k`` being the
    Gram dimension; the second term is the resolution limit of a Gram-based
    SVD.
    """
    x = _as_finite_matrix(x)
    n, d = x.shape
    if scaled and n < 1:
        raise ValueError("scaled SVD needs at least one row")
    scale = np.sqrt(n) if scaled else 1.0
    xs = x / scale

    if d <= n:
        eig = sym_eig(xs.T @ xs)
    else:
        eig = sym_eig(xs @ xs.T)
    sig = np.sqrt(np.clip(eig.eigenvalues, 0.0, None))
    k = sig.shape[0]
    smax = float(sig[0]) if k else 0.0
    cutoff = max(rank_tol, np.sqrt(max(k, 1) * np.finfo(float).eps)) * smax
    r = int(np.sum(sig > cutoff)) if smax > 0 else 0
    sig = sig[:r]
    vecs = eig.eigenvectors[:, :r]

    if d <= n:
        right = vecs
        left = (xs @ right) / sig
    else:
        left = vecs
        right = (xs.T @ left) / sig
    return ThinSVD(left=left, singulars=sig, right=right, scaled=scaled)


def cholesky(a) -> np.ndarray:
    """Lower-triangular ``L`` with ``a = L L^T`` (left-looking, column by column)."""
    a = _as_finite_matrix(a)
    k = a.shape[0]
    if a.shape[1] != k:
        raise NonSymmetric(f"matrix is not square: {a.shape}")
    low = np.zeros_like(a)
    for j in range(k):
        col = a[j:, j] - low[j:, :j] @ low[j, :j]
        pivot = col[0]
        if not pivot > 0.0:
            raise NotPositiveDefinite(j, float(pivot))
        root = np.sqrt(pivot)
        low[j, j] = root
        low[j + 1:, j] = col[1:] / root
    return low


def _forward(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    x = np.zeros_like(b)
    for i in range(low.shape[0]):
        x[i] = (b[i] - low[i, :i] @ x[:i]) / low[i, i]
    return x


def _backward(up: np.ndarray, b: np.ndarray) -> np.ndarray:
    x = np.zeros_like(b)
    for i in range(up.shape[0] - 1, -1, -1):
        x[i] = (b[i] - up[i, i + 1:] @ x[i + 1:]) / up[i, i]
    return x


def solve_spd(a, b) -> np.ndarray:
    """Solve ``a x = b`` for symmetric positive-definite ``a``.

    ``b`` may be a vector or a matrix of right-hand sides. Raises
    :class:`NotPositiveDefinite` when a Cholesky pivot is not positive.
    """
    low = cholesky(a)
    b = np.asarray(b, dtype=np.float64)
    if not np.all(np.isfinite(b)):
        raise NonFinite("right-hand side contains NaN or Inf")
    return _backward(low.T, _forward(low, b))
