"""Orthonormal cluster-indicator embeddings: spectral start and the GPI solver."""
from __future__ import annotations

import numpy as np
from scipy import linalg


class EmbeddingError(RuntimeError):
    pass


def _fix_signs(V, tol: float = 1e-12):
    """Flip columns so the first entry with magnitude above ``tol`` is positive."""
    V = V.copy()
    for j in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, j]) > tol)
        if nz.size and V[nz[0], j] < 0:
            V[:, j] = -V[:, j]
    return V


def spectral_init(L, h: int) -> np.ndarray:
    """Eigenvectors of ``L`` for its ``h`` smallest eigenvalues, as an ``n x h`` orthonormal matrix."""
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if not 1 <= h <= n:
        raise ValueError(f"h={h} out of range [1, {n}]")
    try:
        _, V = linalg.eigh(0.5 * (L + L.T), subset_by_index=[0, h - 1])
    except linalg.LinAlgError as exc:
        raise EmbeddingError(
            f"eigensolver failed on a {n}x{n} Laplacian (cond estimate "
            f"{np.linalg.cond(L):.3g}): {exc}") from exc
    Q, _ = np.linalg.qr(V)
    return _fix_signs(Q)


def _polar(M):
    """``argmax_F Tr(F^T M)`` over orthonormal ``F``: the polar factor ``U V^T``."""
    U, _, Vt = np.linalg.svd(M, full_matrices=False)
    return U @ Vt


def trace_objective(A, B, F) -> float:
    """``Tr(F^T A F - 2 F^T B)``."""
    return float(np.sum(F * (A @ F)) - 2.0 * np.sum(F * B))


def gpi_solve(A, B, F0, max_iter: int = 100, tol: float = 1e-8, return_history: bool = False):
    """Minimize ``Tr(F^T A F - 2 F^T B)`` subject to ``F^T F = I`` by generalized power iteration.

    ``A`` is shifted to ``c I - A`` with ``c`` one above the largest absolute
    row sum, which makes it positive definite; each step then takes the polar
    factor of ``(cI - A) F + B``. The objective never increases.

    Parameters
    ----------
    A : ndarray (n, n), symmetric
    B : ndarray (n, h)
    F0 : ndarray (n, h), orthonormal starting point
    max_iter : int
    tol : float
        Stop once the relative objective change falls below this value.
    return_history : bool
        Also return the objective after every iterate (starting with ``F0``).
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    F = np.asarray(F0, dtype=float)
    asym = np.max(np.abs(A - A.T))
    if asym > 1e-8:
        raise EmbeddingError(f"A is not symmetric (max asymmetry {asym:.3g})")
    c = np.max(np.sum(np.abs(A), axis=1)) + 1.0
    A_hat = c * np.eye(A.shape[0]) - A

    f = trace_objective(A, B, F)
    history = [f]
    roundoff = 1e-13 * (c * F.shape[1] + np.abs(B).sum())
    for _ in range(max_iter):
        F_new = _polar(A_hat @ F + B)
        f_new = trace_objective(A, B, F_new)
        if f_new > f + roundoff:
            break
        F, change = F_new, abs(f - f_new)
        f = f_new
        history.append(f)
        if change <= tol * max(abs(f), 1e-12):
            break
    return (F, history) if return_history else F
