"""Row-sparse selection matrix: reweighted least-squares update and feature ranking."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .graphs import laplacian


class SelectionError(RuntimeError):
    pass


def system_matrix(Xt, D, S_list, masks, alpha: float, lam: float) -> np.ndarray:
    """``alpha Xt Xt^T + lam diag(D) + sum_m R_m Xt L_m Xt^T R_m`` for weighted data ``Xt``."""
    A = alpha * (Xt @ Xt.T)
    A[np.diag_indices_from(A)] += lam * D
    for S, mask in zip(S_list, masks):
        Xm = Xt[mask]
        A[np.ix_(mask, mask)] += Xm @ laplacian(S) @ Xm.T
    return 0.5 * (A + A.T)


def update_W(Xt, F, D, S_list, masks, alpha: float, lam: float) -> np.ndarray:
    """Minimize the reweighted regression objective in ``W`` for fixed ``D``.

    Solves ``(alpha Xt Xt^T + lam D + sum_m R_m Xt L_m Xt^T R_m) W = alpha Xt F``
    by Cholesky. ``F=None`` gives a zero right-hand side.

    Parameters
    ----------
    Xt : ndarray (d, n)
        Data with column ``i`` scaled by ``mu_i``.
    F : ndarray (n, h) or None
    D : ndarray (d,)
        Positive reweighting diagonal.
    S_list, masks : sequences
        Granularity graphs and their boolean feature masks.
    """
    A = system_matrix(Xt, D, S_list, masks, alpha, lam)
    d = A.shape[0]
    if F is None:
        return np.zeros((d, 1))
    rhs = alpha * (Xt @ F)
    try:
        factor = linalg.cho_factor(A, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise SelectionError(
            "W system is not positive definite; use lambda > 0 so the "
            f"reweighting term keeps it invertible ({exc})") from exc
    return linalg.cho_solve(factor, rhs)


def refresh_D(W, epsilon: float = 1e-6) -> np.ndarray:
    """Reweighting diagonal ``1 / (2 sqrt(||W_i||^2 + epsilon))``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return 0.5 / np.sqrt(np.sum(W * W, axis=1) + epsilon)


def smoothed_l21(W, epsilon: float) -> float:
    """``sum_i sqrt(||W_i||^2 + epsilon)``, the row-sparsity penalty the reweighting majorizes."""
    return float(np.sum(np.sqrt(np.sum(W * W, axis=1) + epsilon)))


@dataclass(frozen=True)
class FeatureRanking:
    """Features ordered by score, highest first, ties broken by lower index.

    Serialized records carry 1-based ranks.
    """

    scores: np.ndarray
    order: np.ndarray
    rho: int

    @property
    def selected(self) -> np.ndarray:
        return self.order[: self.rho]

    def to_records(self, feature_ids=None) -> list[dict]:
        ids = feature_ids if feature_ids is not None else [f"f{i}" for i in range(self.scores.size)]
        return [{"feature_id": ids[i], "score": float(self.scores[i]), "rank": r}
                for r, i in enumerate(self.order.tolist(), start=1)]

    def to_json(self, feature_ids=None) -> str:
        return json.dumps(self.to_records(feature_ids), indent=1)


def rank_scores(scores, rho: int) -> FeatureRanking:
    scores = np.asarray(scores, dtype=float)
    d = scores.size
    if not 1 <= rho <= d:
        raise ValueError(f"rho={rho} out of range [1, {d}]")
    order = np.lexsort((np.arange(d), -scores))
    return FeatureRanking(scores, order, int(rho))


def rank_features(W, rho: int) -> FeatureRanking:
    """Rank features by the row norms of ``W``."""
    return rank_scores(np.linalg.norm(np.asarray(W, dtype=float), axis=1), rho)


def load_ranking(path, feature_ids) -> FeatureRanking:
    """Read a ranking JSON written by :meth:`FeatureRanking.to_json`.

    ``feature_ids`` maps the stored ids back to row indices of the dataset.
    """
    with open(path, encoding="utf-8") as fh:
        records = json.load(fh)
    index = {fid: i for i, fid in enumerate(feature_ids)}
    missing = [r["feature_id"] for r in records if r["feature_id"] not in index]
    if missing or len(records) != len(index):
        raise ValueError(f"ranking does not match the dataset features (unknown ids: {missing[:5]})")
    records = sorted(records, key=lambda r: r["rank"])
    order = np.array([index[r["feature_id"]] for r in records])
    scores = np.empty(len(records))
    scores[order] = [r["score"] for r in records]
    return FeatureRanking(scores, order, len(records))
