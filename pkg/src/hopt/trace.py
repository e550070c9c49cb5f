"""Optimizer traces and their CSV export."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BASE_COLUMNS = ("t", "subopt", "grad_norm", "dist", "epochs")


@dataclass
class OptimizerTrace:
    """Per-step (or per-epoch) statistics of one optimizer run.

    The base columns are ``t, subopt, grad_norm, dist, epochs``; ``extra``
    holds further named columns of the same length (``kernel_part``,
    ``epoch``, ``test_error`` ...).
    """

    t: list = field(default_factory=list)
    subopt: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    dist: list = field(default_factory=list)
    epochs: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    iterates: list | None = None

    def log(self, t, subopt, grad_norm, dist, epochs, **extra) -> None:
        if self.t and t <= self.t[-1]:
            raise ValueError(f"trace steps must increase: {t} after {self.t[-1]}")
        self.t.append(int(t))
        self.subopt.append(float(subopt))
        self.grad_norm.append(float(grad_norm))
        self.dist.append(float(dist))
        self.epochs.append(float(epochs))
        for key, val in extra.items():
            self.extra.setdefault(key, []).append(float(val))

    def __len__(self) -> int:
        return len(self.t)

    def column(self, name: str) -> np.ndarray:
        if name in BASE_COLUMNS:
            return np.asarray(getattr(self, name), dtype=float)
        return np.asarray(self.extra[name], dtype=float)

    @property
    def columns(self) -> tuple[str, ...]:
        return BASE_COLUMNS + tuple(self.extra)

    def to_csv(self, path: str | Path, log10: bool = False) -> None:
        """Write the trace; ``log10`` appends a ``log10_subopt`` column."""
        cols = list(self.columns)
        data = [self.column(c) for c in cols]
        if log10:
            cols.append("log10_subopt")
            with np.errstate(divide="ignore", invalid="ignore"):
                data.append(np.log10(np.clip(self.column("subopt"), 0.0, None)))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for k in range(len(self)):
                row = []
                for c, col in zip(cols, data):
                    row.append(str(int(col[k])) if c == "t" else repr(float(col[k])))
                w.writerow(row)


def should_log(step: int, dense_until: int = 1000, every: int = 10) -> bool:
    """Every step up to ``dense_until``, then every ``every``-th step."""
    return step <= dense_until or step % every == 0
