from __future__ import annotations

import numpy as np
import pytest

from hopt.data import Dataset, generate_synthetic, tau_bounded_spec


def random_problem(rng: np.random.Generator, n: int, d: int) -> Dataset:
    """Centered Gaussian design with a standardized noisy linear response."""
    x = rng.standard_normal((n, d)) * rng.uniform(0.2, 2.0, size=d)
    x -= x.mean(axis=0)
    y = x @ rng.standard_normal(d) + rng.standard_normal(n)
    y -= y.mean()
    y /= y.std()
    return Dataset(x, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tau_data():
    """d=20, n=2000 synthetic set with tau = 0.5 and kappa = 1e3."""
    return generate_synthetic(tau_bounded_spec(2000, 20, 0.5, 1e3, seed=3))
