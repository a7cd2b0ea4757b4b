import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import subspace_angles

from causefs.embedding import EmbeddingError, _polar, gpi_solve, spectral_init, trace_objective
from causefs.graphs import laplacian


def _random_orthonormal(rng, n, h):
    Q, _ = np.linalg.qr(rng.normal(size=(n, h)))
    return Q


def test_spectral_init_is_orthonormal_with_fixed_signs(rng):
    S = rng.random((12, 12))
    np.fill_diagonal(S, 0)
    F = spectral_init(laplacian(S / S.sum(axis=0)), 3)
    np.testing.assert_allclose(F.T @ F, np.eye(3), atol=1e-12)
    for j in range(3):
        first = F[np.flatnonzero(np.abs(F[:, j]) > 1e-12)[0], j]
        assert first > 0


def test_spectral_init_two_components_spans_indicators():
    S = np.zeros((6, 6))
    S[:3, :3] = 0.5
    S[3:, 3:] = 0.5
    np.fill_diagonal(S, 0)
    F = spectral_init(laplacian(S), 2)
    indicators = np.zeros((6, 2))
    indicators[:3, 0] = indicators[3:, 1] = 1
    assert np.max(subspace_angles(F, indicators)) < 1e-8


def test_spectral_init_rejects_bad_h():
    with pytest.raises(ValueError):
        spectral_init(np.eye(3), 4)


def test_gpi_diagonal_picks_smallest_entry():
    A = np.diag([1.0, 2.0, 3.0])
    F0 = _random_orthonormal(np.random.default_rng(0), 3, 1)
    F = gpi_solve(A, np.zeros((3, 1)), F0, max_iter=5000, tol=0.0)
    np.testing.assert_allclose(np.abs(F[:, 0]), [1, 0, 0], atol=1e-6)


def test_gpi_matches_bottom_eigenvectors():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(25):
        n = rng.integers(4, 21)
        h = rng.integers(1, min(5, n - 1) + 1)
        M = rng.normal(size=(n, n))
        A = 0.5 * (M + M.T)
        _, V = np.linalg.eigh(A)
        F = gpi_solve(A, np.zeros((n, h)), _random_orthonormal(rng, n, h), max_iter=100000, tol=0.0)
        worst = max(worst, np.max(subspace_angles(F, V[:, :h])))
    assert worst < 1e-5


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 12), st.integers(1, 3), st.integers(0, 2**31))
def test_gpi_history_is_monotone_and_feasible(n, h, seed):
    h = min(h, n)
    r = np.random.default_rng(seed)
    M = r.normal(size=(n, n))
    A = M @ M.T
    B = r.normal(size=(n, h))
    F, hist = gpi_solve(A, B, _random_orthonormal(r, n, h), max_iter=200, return_history=True)
    slack = 1e-12 * (np.abs(A).sum() + np.abs(B).sum())
    assert all(b <= a + slack for a, b in zip(hist, hist[1:]))
    np.testing.assert_allclose(F.T @ F, np.eye(h), atol=1e-10)
    assert trace_objective(A, B, F) == pytest.approx(hist[-1])


def test_polar_factor_maximizes_trace(rng):
    M = rng.normal(size=(8, 3))
    P = _polar(M)
    best = np.trace(P.T @ M)
    for _ in range(200):
        Q = _random_orthonormal(rng, 8, 3)
        assert np.trace(Q.T @ M) <= best + 1e-12


def test_gpi_rejects_asymmetric_A():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(EmbeddingError, match="symmetric"):
        gpi_solve(A, np.zeros((2, 1)), np.array([[1.0], [0.0]]))
