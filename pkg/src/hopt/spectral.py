"""Eigenfeature representation of a dataset and its regularity statistics.

With the scaled SVD ``X = sqrt(n) U diag(sigma) V^T`` the eigenfeatures are
``Z = X V``; their variances are ``sigma_j^2 = E[Z_j^2]`` and their
covariances with the response are ``c_j = E[Y Z_j]``. The squared
correlation is ``rho_j^2 = c_j^2 / sigma_j^2`` and a dataset is
tau-bounded when ``rho_j^2 <= tau * sigma_j^2`` for every eigenfeature with
non-zero variance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import AllZeroVariance
from .linalg import ThinSVD, sym_eig, thin_svd

TAU_RANK_TOL = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    z_variances: np.ndarray  # length d, descending, zero past the rank
    response_cov: np.ndarray  # length d
    mu: float
    basis: np.ndarray  # d x r right singular vectors
    y_second_moment: float
    n: int
    svd: ThinSVD | None = None

    @property
    def d(self) -> int:
        return self.z_variances.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def regularized_variances(self) -> np.ndarray:
        return self.z_variances + self.mu

    def with_mu(self, mu: float) -> "SpectralDecomposition":
        return SpectralDecomposition(self.z_variances, self.response_cov, float(mu),
                                     self.basis, self.y_second_moment, self.n, self.svd)


def _pad(v: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros(d)
    out[: v.shape[0]] = v
    return out


def decompose(data: Dataset, mu: float = 0.0) -> SpectralDecomposition:
    """Eigenfeature statistics of a (preprocessed) dataset at regularizer ``mu``."""
    if mu < 0:
        raise ValueError(f"mu must be non-negative, got {mu}")
    x, y = data.x, data.y
    n, d = x.shape
    svd = thin_svd(x, scaled=True)
    sig2 = svd.singulars ** 2
    z = x @ svd.right
    c = z.T @ y / n
    return SpectralDecomposition(
        z_variances=_pad(sig2, d),
        response_cov=_pad(c, d),
        mu=float(mu),
        basis=svd.right,
        y_second_moment=float(y @ y / n),
        n=n,
        svd=svd,
    )


def from_moments(second_moment: np.ndarray, cross_moment: np.ndarray,
                 y_second_moment: float = 1.0, mu: float = 0.0,
                 n: int = 0) -> SpectralDecomposition:
    """Decomposition built from ``E[x x^T]`` and ``E[y x]`` directly.

    Used where the population moments are known (Gaussian GLM designs).
    """
    eig = sym_eig(second_moment)
    lam = np.clip(eig.eigenvalues, 0.0, None)
    top = lam[0] if lam.size else 0.0
    r = int(np.sum(lam > TAU_RANK_TOL * top)) if top > 0 else 0
    basis = eig.eigenvectors[:, :r]
    c = basis.T @ np.asarray(cross_moment, dtype=float)
    return SpectralDecomposition(_pad(lam[:r], lam.size), _pad(c, lam.size), float(mu),
                                 basis, float(y_second_moment), n)


@dataclass(frozen=True)
class TauProfile:
    index: np.ndarray  # 0-based eigenfeature index of each kept feature
    sigma2: np.ndarray
    rho2: np.ndarray
    ratio: np.ndarray
    tau: float
    n_omitted: int


def measure_tau(spec: SpectralDecomposition, rank_tol: float = TAU_RANK_TOL) -> TauProfile:
    """Per-eigenfeature ratios ``rho_j^2 / sigma_j^2`` and their maximum ``tau``."""
    sig2 = spec.z_variances
    top = float(sig2[0]) if sig2.size else 0.0
    if top <= 0.0:
        raise AllZeroVariance("every eigenfeature has zero variance")
    keep = np.flatnonzero(sig2 > rank_tol * top)
    s = sig2[keep]
    c2 = spec.response_cov[keep] ** 2
    rho2 = c2 / s
    ratio = rho2 / s
    return TauProfile(keep, s, rho2, ratio, float(ratio.max()), int(sig2.size - keep.size))


def count_above(spec: SpectralDecomposition, zeta: float) -> int:
    """Number of eigenfeatures with variance strictly above ``zeta``."""
    if zeta < 0:
        raise ValueError(f"zeta must be non-negative, got {zeta}")
    return int(np.sum(spec.z_variances > zeta))


@dataclass(frozen=True)
class ScatterTable:
    """One row per kept eigenfeature.

    ``log10_h = log10(E[Z_j^2]^2)`` and ``log10_v = log10(E[Y Z_j]^2 / E[Z_j^2]^2)``.
    """

    j: np.ndarray
    log10_h: np.ndarray
    log10_v: np.ndarray
    sigma2: np.ndarray
    rho2: np.ndarray
    ratio: np.ndarray
    omitted: int

    HEADER = ("j", "log10_h", "log10_v", "sigma2", "rho2", "ratio")

    def rows(self):
        for k in range(self.j.shape[0]):
            yield (int(self.j[k]), float(self.log10_h[k]), float(self.log10_v[k]),
                   float(self.sigma2[k]), float(self.rho2[k]), float(self.ratio[k]))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.HEADER)
            for row in self.rows():
                w.writerow([row[0]] + [repr(v) for v in row[1:]])


def export_scatter(profile: TauProfile) -> ScatterTable:
    s = profile.sigma2
    c2 = profile.rho2 * s
    with np.errstate(divide="ignore"):
        h = np.log10(s ** 2)
        v = np.log10(c2 / s ** 2)
    return ScatterTable(profile.index + 1, h, v, s, profile.rho2, profile.ratio,
                        profile.n_omitted)
