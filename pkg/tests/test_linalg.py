from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hopt.errors import NonFinite, NonSymmetric, NotPositiveDefinite
from hopt.linalg import cholesky, solve_spd, sym_eig, thin_svd


def _orth_err(v):
    return np.abs(v.T @ v - np.eye(v.shape[1])).max()


def test_identity_eigenvalues():
    e = sym_eig(np.eye(3))
    assert np.allclose(e.eigenvalues, 1.0)
    assert _orth_err(e.eigenvectors) <= 1e-10


def test_diagonal_axis_aligned():
    e = sym_eig(np.diag([1.0, 4.0]))
    assert np.allclose(e.eigenvalues, [4.0, 1.0])
    assert np.allclose(np.abs(e.eigenvectors), [[0, 1], [1, 0]])


def test_two_by_two_by_hand():
    e = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert np.allclose(e.eigenvalues, [3.0, 1.0], atol=1e-14)
    s = 1 / np.sqrt(2)
    v = e.eigenvectors * np.sign(e.eigenvectors[0])
    assert np.allclose(v, [[s, s], [s, -s]], atol=1e-14)


def test_rejects_asymmetric_and_nonfinite():
    with pytest.raises(NonSymmetric):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NonFinite):
        sym_eig(np.array([[1.0, np.nan], [np.nan, 1.0]]))


def test_deterministic(rng):
    a = rng.standard_normal((12, 12))
    a = a + a.T
    e1, e2 = sym_eig(a), sym_eig(a)
    assert np.array_equal(e1.eigenvalues, e2.eigenvalues)
    assert np.array_equal(e1.eigenvectors, e2.eigenvectors)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**31 - 1))
def test_eig_invariants(m, seed):
    r = np.random.default_rng(seed)
    a = r.standard_normal((m, m))
    a = (a + a.T) * r.uniform(0.01, 100)
    e = sym_eig(a)
    assert np.all(np.diff(e.eigenvalues) <= 0)
    assert _orth_err(e.eigenvectors) <= 1e-10
    assert np.abs(a - e.reconstruct()).max() <= 1e-8 * np.abs(a).max()
    # independent oracle: numpy's LAPACK eigensolver
    assert np.allclose(e.eigenvalues, np.linalg.eigvalsh(a)[::-1], atol=1e-9 * np.abs(a).max())


def test_svd_zero_matrix():
    s = thin_svd(np.zeros((4, 3)))
    assert s.rank == 0
    assert s.left.shape == (4, 0) and s.right.shape == (3, 0) and s.singulars.size == 0


def test_svd_scaled_identity():
    s = thin_svd(np.sqrt(2.0) * np.eye(2), scaled=True)
    assert np.allclose(s.singulars, [1.0, 1.0])


def test_svd_random_matches_gram(rng):
    x = rng.standard_normal((6, 3))
    s = thin_svd(x, scaled=True)
    assert np.abs(s.reconstruct() - x).max() < 1e-8
    gram = sym_eig(x.T @ x / 6).eigenvalues
    assert np.allclose(s.singulars ** 2, gram, rtol=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 25), st.integers(1, 25), st.integers(0, 2**31 - 1), st.booleans())
def test_svd_invariants(n, d, seed, lowrank):
    r = np.random.default_rng(seed)
    x = r.standard_normal((n, d))
    if lowrank and min(n, d) > 1:
        x = r.standard_normal((n, 1)) @ r.standard_normal((1, d))
    s = thin_svd(x, scaled=True)
    scale = np.abs(x).max()
    assert np.abs(s.reconstruct() - x).max() <= 1e-8 * max(scale, 1.0)
    assert _orth_err(s.left) <= 1e-8 and _orth_err(s.right) <= 1e-8
    ref = np.linalg.svd(x, compute_uv=False) / np.sqrt(n)
    ref = ref[ref > 1e-7 * ref[0]]
    assert s.rank == ref.size
    assert np.allclose(s.singulars, ref, rtol=1e-8)


def test_solve_identity_and_diagonal():
    b = np.array([1.0, -2.0, 3.0])
    assert np.allclose(solve_spd(np.eye(3), b), b)
    assert np.allclose(solve_spd(np.diag([2.0, 4.0]), np.array([2.0, 8.0])), [1.0, 2.0])


def test_solve_against_spectral_inverse(rng):
    m = rng.standard_normal((5, 5))
    a = m @ m.T + 0.5 * np.eye(5)
    b = rng.standard_normal(5)
    e = sym_eig(a)
    oracle = e.eigenvectors @ ((e.eigenvectors.T @ b) / e.eigenvalues)
    assert np.allclose(solve_spd(a, b), oracle, rtol=1e-10)


def test_not_positive_definite():
    with pytest.raises(NotPositiveDefinite) as info:
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert info.value.pivot_index == 1


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 50), st.integers(0, 2**31 - 1))
def test_solve_residual(m, seed):
    r = np.random.default_rng(seed)
    g = r.standard_normal((m, m))
    a = g @ g.T + 1e-2 * np.eye(m)
    b = r.standard_normal(m)
    x = solve_spd(a, b)
    res = np.linalg.norm(a @ x - b)
    assert res <= 1e-8 * (np.linalg.norm(a, 2) * np.linalg.norm(x) + np.linalg.norm(b))
