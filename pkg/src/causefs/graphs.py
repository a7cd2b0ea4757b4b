"""k-sparse adaptive similarity graphs and their Laplacians.

A graph is a dense ``n x n`` array ``S`` whose column ``i`` holds the
neighbour weights of sample ``i``: zero diagonal, non-negative, columns sum to
one, at most ``k`` positive entries per column.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .balance import project_simplex


def _sorted_columns(T):
    """Stable column-wise argsort; equal values keep ascending row order."""
    order = np.argsort(T, axis=0, kind="stable")
    return order, np.take_along_axis(T, order, axis=0)


def sparse_simplex_columns(T, k: int):
    """Closed-form k-neighbour simplex weights for every column of ``T``.

    Column ``i`` solves ``min_s 0.5 * ||s + t / (2 gamma)||^2`` on the simplex
    with ``gamma = (k t_(k+1) - sum_{p<=k} t_(p)) / 2``, which gives
    ``s_j = (t_(k+1) - t_j) / (2 gamma)`` on the ``k`` smallest entries. Entries
    equal to ``+inf`` are never selected; callers use that to mask the
    diagonal.

    Returns
    -------
    S : ndarray, same shape as ``T``
    gamma : ndarray of shape (n_columns,)
        Zero where the ``k+1`` smallest entries tie; those columns fall back to
        uniform ``1/k`` weights on the first ``k`` tied indices.
    """
    T = np.asarray(T, dtype=float)
    n, m = T.shape
    finite = np.isfinite(T).sum(axis=0)
    if k < 1 or np.any(finite < k):
        raise ValueError(f"k={k} must be in [1, number of finite entries per column]")
    order, Ts = _sorted_columns(T)
    head = Ts[:k]
    kth1 = Ts[k] if k < n else np.full(m, np.inf)
    cols = np.arange(m)
    S = np.zeros_like(T)
    gamma = np.empty(m)

    denom = k * kth1 - head.sum(axis=0)
    scale = np.maximum(1.0, np.max(np.abs(np.where(np.isfinite(Ts[:k + 1]), Ts[:k + 1], 0.0)), axis=0))
    regular = np.isfinite(kth1) & (denom > 1e-12 * k * scale)

    weights = np.where(regular, (kth1 - head) / np.where(regular, denom, 1.0), 1.0 / k)
    S[order[:k], cols] = weights
    gamma[:] = np.where(regular, denom / 2.0, 0.0)
    gamma[~np.isfinite(kth1)] = np.inf
    return S, gamma


def simplex_sparse_solve(tau, k: int, return_gamma: bool = False):
    """Single-column version of :func:`sparse_simplex_columns`.

    >>> simplex_sparse_solve([0.1, 0.4, 0.2], 2)
    array([0.6, 0. , 0.4])
    """
    S, gamma = sparse_simplex_columns(np.asarray(tau, dtype=float)[:, None], k)
    return (S[:, 0], float(gamma[0])) if return_gamma else S[:, 0]


def sparse_simplex_fixed(T, gamma, k: int) -> np.ndarray:
    """Minimize ``t @ s + gamma * ||s||^2`` per column over k-sparse simplex points.

    Keeps the ``k`` smallest entries (ties by index) and projects
    ``-t / (2 gamma)`` restricted to them onto the simplex, which is the exact
    k-sparse minimizer. ``gamma <= 0`` degenerates to a one-hot at the
    smallest entry.
    """
    T = np.asarray(T, dtype=float)
    n, m = T.shape
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (m,))
    order, Ts = _sorted_columns(T)
    cols = np.arange(m)
    S = np.zeros_like(T)
    pos = gamma > 0
    head = Ts[:k]
    safe = np.where(pos, gamma, 1.0)
    # shift by the column minimum; the projection is invariant to it
    V = -(head - head[0]) / (2.0 * safe)
    W = project_simplex(V)
    W[:, ~pos] = 0.0
    W[0, ~pos] = 1.0
    S[order[:k], cols] = W
    return S


def column_objective(T, S, gamma) -> np.ndarray:
    """Per-column value ``t @ s + gamma * ||s||^2`` with ``inf * 0`` read as 0."""
    TS = np.where(S > 0, T, 0.0) * S
    return TS.sum(axis=0) + np.where(np.isinf(gamma), 0.0, gamma) * np.sum(S * S, axis=0)


def masked_half_sqdist(Y) -> np.ndarray:
    """``0.5 * ||y_i - y_j||^2`` between rows of ``Y`` with ``+inf`` on the diagonal."""
    D = 0.5 * cdist(Y, Y, "sqeuclidean")
    np.fill_diagonal(D, np.inf)
    return D


def knn_init(X, k: int, return_gamma: bool = False):
    """Adaptive k-nearest-neighbour graph of the columns of ``X`` (``p x n``)."""
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    if not 1 <= k <= n - 2:
        raise ValueError(f"k={k} out of range [1, {n - 2}] for n={n} samples")
    S, gamma = sparse_simplex_columns(masked_half_sqdist(X.T), k)
    return (S, gamma) if return_gamma else S


def projected_samples(X, W, mu, mask=None) -> np.ndarray:
    """Rows ``mu_i * x_i^T R W``: weighted samples projected through the masked ``W``."""
    if mask is None:
        return (X * mu).T @ W
    return (X[mask] * mu).T @ W[mask]


def granularity_costs(X, W, mu, G, nu_m: float, mask) -> np.ndarray:
    """Cost matrix ``tau``: column ``i`` scores neighbours of sample ``i`` at one granularity."""
    tau = masked_half_sqdist(projected_samples(X, W, mu, mask))
    if nu_m:
        tau = tau - nu_m * G
    return tau


def fusion_costs(F, S_bar) -> np.ndarray:
    """Cost matrix ``delta`` for the fused graph: embedding distances minus the weighted consensus."""
    delta = masked_half_sqdist(F)
    if S_bar is not None:
        delta = delta - S_bar
    return delta


def update_S(X, W, mu, G, nu_m: float, mask, k: int):
    """Closed-form update of one granularity graph.

    Returns ``(S, gamma)`` where ``gamma`` holds the per-column regularization
    weights implied by the sparsity level ``k``.
    """
    return sparse_simplex_columns(granularity_costs(X, W, mu, G, nu_m, mask), k)


def update_G(F, S_list, nu, k: int):
    """Closed-form update of the fused graph. Returns ``(G, xi)``."""
    S_bar = sum(v * S for v, S in zip(nu, S_list)) if len(S_list) else None
    return sparse_simplex_columns(fusion_costs(F, S_bar), k)


def laplacian(S) -> np.ndarray:
    """Unnormalized Laplacian of the symmetrized graph ``(S + S^T) / 2``."""
    A = 0.5 * (S + S.T)
    return np.diag(A.sum(axis=1)) - A


def graph_violations(S, k: int, tol: float = 1e-10) -> list[str]:
    """Describe every broken graph invariant; an empty list means the graph is valid."""
    problems = []
    if np.any(np.abs(np.diag(S)) > tol):
        problems.append("non-zero diagonal")
    if np.any(S < -tol):
        problems.append("negative weights")
    dev = np.max(np.abs(S.sum(axis=0) - 1.0))
    if dev > tol:
        problems.append(f"column sums deviate from 1 by {dev:.3g}")
    nnz = (S > 0).sum(axis=0).max()
    if nnz > k:
        problems.append(f"a column has {nnz} > k={k} positive entries")
    return problems


def export_triplets(S, path) -> None:
    """Write the non-zero entries as ``i j value`` lines with 0-based indices."""
    rows, cols = np.nonzero(S)
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in zip(rows, cols):
            fh.write(f"{i} {j} {float(S[i, j])!r}\n")
