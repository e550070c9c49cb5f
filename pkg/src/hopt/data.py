"""Dataset ingestion: LIBSVM text, the HOPT1 binary cache, preprocessing and
synthetic data with prescribed eigenfeature spectrum and response correlations.
"""

from __future__ import annotations

import gzip
import io
import math
import struct
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .errors import DegenerateResponse, InfeasibleSpec, ParseError

MAGIC = b"HOPT1"


@dataclass(frozen=True)
class RawDataset:
    """Parsed LIBSVM rows. Feature indices are 1-based and strictly increasing."""

    labels: np.ndarray
    rows: list[tuple[np.ndarray, np.ndarray]]
    dim: int

    @property
    def n(self) -> int:
        return len(self.rows)

    def dense(self, dim: int | None = None) -> np.ndarray:
        dim = self.dim if dim is None else dim
        x = np.zeros((self.n, dim))
        for i, (idx, val) in enumerate(self.rows):
            keep = idx <= dim
            x[i, idx[keep] - 1] = val[keep]
        return x


@dataclass(frozen=True)
class Preprocessing:
    feature_means: np.ndarray
    y_mean: float
    y_scale: float
    feature_scales: np.ndarray | None = None
    degenerate_response: bool = False


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    preprocessing: Preprocessing | None = None
    split_tag: str = "all"

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class SyntheticSpec:
    """Target eigenfeature variances ``spectrum`` (descending) and signed
    response correlations ``correlations`` for a generated dataset."""

    n: int
    d: int
    spectrum: np.ndarray
    correlations: np.ndarray
    noise_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "spectrum", np.asarray(self.spectrum, dtype=float))
        object.__setattr__(self, "correlations", np.asarray(self.correlations, dtype=float))


# --------------------------------------------------------------------------- LIBSVM

def _parse_number(tok: str, lineno: int, what: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(lineno, f"malformed {what} {tok!r}") from None
    if not math.isfinite(v):
        raise ParseError(lineno, f"non-finite {what} {tok!r}")
    return v


def parse_libsvm(stream: TextIO | str | Iterable[str]) -> RawDataset:
    """Parse LIBSVM text (``label idx:val idx:val ...`` per line).

    ``stream`` may be an open text file, any iterable of lines, or the text
    itself. Blank lines and ``#`` comments are skipped.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    labels: list[float] = []
    rows: list[tuple[np.ndarray, np.ndarray]] = []
    dim = 0
    for lineno, line in enumerate(stream, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        label = _parse_number(tokens[0], lineno, "label")
        idx = np.empty(len(tokens) - 1, dtype=np.int64)
        val = np.empty(len(tokens) - 1)
        prev = 0
        for k, tok in enumerate(tokens[1:]):
            head, sep, tail = tok.partition(":")
            if not sep:
                raise ParseError(lineno, f"token {tok!r} is not index:value")
            try:
                j = int(head)
            except ValueError:
                raise ParseError(lineno, f"malformed index {head!r}") from None
            if j < 1:
                raise ParseError(lineno, f"index {j} is below 1")
            if j <= prev:
                raise ParseError(lineno, f"index {j} does not increase (previous {prev})")
            idx[k] = j
            val[k] = _parse_number(tail, lineno, "value")
            prev = j
        dim = max(dim, prev)
        labels.append(label)
        rows.append((idx, val))
    return RawDataset(np.asarray(labels, dtype=float), rows, dim)


def load_libsvm(path: str | Path) -> RawDataset:
    """Read a LIBSVM file; ``.gz`` files are decompressed transparently."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8") as fh:
        return parse_libsvm(fh)


def format_libsvm(x: np.ndarray, y: np.ndarray) -> str:
    """Serialize a dense design to LIBSVM text, omitting exact zeros."""
    out = []
    for xi, yi in zip(np.asarray(x), np.asarray(y)):
        nz = np.flatnonzero(xi)
        feats = " ".join(f"{j + 1}:{float(xi[j])!r}" for j in nz)
        out.append(f"{float(yi)!r} {feats}".rstrip())
    return "\n".join(out) + ("\n" if out else "")


# --------------------------------------------------------------------------- binary cache

def save_hopt1(path: str | Path, x: np.ndarray, y: np.ndarray) -> None:
    """Write ``x`` and ``y`` as a HOPT1 container (little-endian, row-major)."""
    x = np.ascontiguousarray(x, dtype="<f8")
    y = np.ascontiguousarray(y, dtype="<f8")
    n, d = x.shape
    if y.shape != (n,):
        raise ValueError(f"response length {y.shape} does not match {n} rows")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", n, d))
        fh.write(x.tobytes(order="C"))
        fh.write(y.tobytes())


def load_hopt1(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise ValueError(f"{path}: not a HOPT1 file")
    n, d = struct.unpack_from("<QQ", data, 5)
    off = 5 + 16
    expected = off + 8 * (n * d + n)
    if len(data) != expected:
        raise ValueError(f"{path}: size {len(data)} does not match header ({expected})")
    x = np.frombuffer(data, dtype="<f8", count=n * d, offset=off).reshape(n, d)
    y = np.frombuffer(data, dtype="<f8", count=n, offset=off + 8 * n * d)
    return x.astype(np.float64), y.astype(np.float64)


# --------------------------------------------------------------------------- preprocessing

def fit_transform(x: np.ndarray, y: np.ndarray, scale_features: bool = False):
    """Center features, standardize the response (population variance)."""
    means = x.mean(axis=0)
    xc = x - means
    scales = None
    if scale_features:
        scales = xc.std(axis=0)
        scales[scales == 0] = 1.0
        xc = xc / scales
    y_mean = float(y.mean())
    y_scale = float(y.std())
    degenerate = y_scale == 0.0
    if degenerate:
        warnings.warn("training response is constant; y_scale set to 1", DegenerateResponse)
        y_scale = 1.0
    prep = Preprocessing(means, y_mean, y_scale, scales, degenerate)
    return xc, (y - y_mean) / y_scale, prep


def apply_transform(x: np.ndarray, y: np.ndarray, prep: Preprocessing):
    xc = x - prep.feature_means
    if prep.feature_scales is not None:
        xc = xc / prep.feature_scales
    return xc, (y - prep.y_mean) / prep.y_scale


def standardize(data: Dataset, scale_features: bool = False) -> Dataset:
    """Re-center and re-standardize a dataset on its own statistics."""
    x, y, prep = fit_transform(data.x, data.y, scale_features)
    return Dataset(x, y, prep, data.split_tag)


def preprocess(raw: RawDataset, split_seed: int = 0, train_fraction: float = 0.8,
               scale_features: bool = False) -> tuple[Dataset, Dataset]:
    """Shuffle, split and standardize a raw dataset.

    Statistics are estimated on the training rows only and the same affine
    transform is applied to the test rows.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if raw.n < 2:
        raise ValueError("need at least 2 rows to split")
    x = raw.dense()
    y = raw.labels
    perm = np.random.default_rng(split_seed).permutation(raw.n)
    n_train = min(raw.n, max(1, int(round(train_fraction * raw.n))))
    tr, te = perm[:n_train], perm[n_train:]
    xtr, ytr, prep = fit_transform(x[tr], y[tr], scale_features)
    xte, yte = apply_transform(x[te], y[te], prep)
    return Dataset(xtr, ytr, prep, "train"), Dataset(xte, yte, prep, "test")


# --------------------------------------------------------------------------- synthetic

def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Dataset whose scaled SVD and response correlations are set exactly.

    ``X = sqrt(n) U diag(sigma) V^T`` with ``U`` orthonormal and orthogonal
    to the all-ones vector, and ``y = sqrt(n) (U rho + s e)`` where ``e`` is a
    unit residual direction orthogonal to ``U`` and to the ones vector. Hence
    the features are centered, ``mean(y) = 0``, ``var(y) = 1``, the
    eigenfeature variances equal ``spectrum`` and ``E[Y Z_j] = sigma_j rho_j``
    up to rounding.
    """
    n, d = spec.n, spec.d
    sig2, rho = spec.spectrum, spec.correlations
    if sig2.shape != (d,) or rho.shape != (d,):
        raise ValueError("spectrum and correlations must have length d")
    if np.any(sig2 < 0) or np.any(np.diff(sig2) > 0):
        raise ValueError("spectrum must be non-negative and sorted descending")
    if np.any(rho ** 2 > 1):
        raise ValueError("correlations must satisfy rho_j^2 <= 1")
    explained = float(np.sum(rho ** 2))
    if explained > 1.0 + 1e-12:
        raise InfeasibleSpec(f"sum of squared correlations is {explained:.4g} > 1")
    if n < d + 2:
        raise ValueError(f"need n >= d + 2 rows, got n={n}, d={d}")

    rng = np.random.default_rng(spec.noise_seed)
    g = rng.standard_normal((n, d + 1))
    g -= g.mean(axis=0)
    q, _ = np.linalg.qr(g)
    u, e = q[:, :d], q[:, d]
    v, _ = np.linalg.qr(rng.standard_normal((d, d)))
    x = np.sqrt(n) * (u * np.sqrt(sig2)) @ v.T
    resid = np.sqrt(max(0.0, 1.0 - explained))
    y = np.sqrt(n) * (u @ rho + resid * e)
    return standardize(Dataset(x, y))


def tau_bounded_spec(n: int, d: int, tau: float, kappa: float = 1e3,
                     decay: float = 1.0, seed: int = 0) -> SyntheticSpec:
    """Spec with geometric spectrum from 1 down to ``1/kappa`` and
    ``rho_j^2 = tau * sigma_j^2 * (sigma_j^2 / sigma_1^2) ** decay``.

    The largest ratio ``rho_j^2 / sigma_j^2`` is ``tau`` (attained at the top
    eigenfeature). Signs of the correlations are drawn from ``seed``.
    """
    sig2 = np.logspace(0.0, -np.log10(kappa), d)
    rho2 = tau * sig2 * (sig2 / sig2[0]) ** decay
    if rho2.sum() > 1.0:
        raise InfeasibleSpec(f"tau={tau} gives sum of squared correlations {rho2.sum():.3g} > 1")
    signs = np.random.default_rng(seed + 7919).choice([-1.0, 1.0], size=d)
    return SyntheticSpec(n, d, sig2, signs * np.sqrt(rho2), seed)


def with_split(data: Dataset, tag: str) -> Dataset:
    return replace(data, split_tag=tag)
