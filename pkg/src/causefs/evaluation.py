"""Clustering-based evaluation of a feature ranking: k-means, ACC, NMI and simple baselines."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .dataset import DataMatrix
from .regression import FeatureRanking, rank_scores

DEFAULT_RHO_LIST = (20, 40, 60, 80, 100)


@dataclass(frozen=True)
class ClusteringResult:
    assignments: np.ndarray
    inertia: float
    restarts: int
    history: tuple = field(default=(), compare=False)


def _kmeans_pp(P, K, rng):
    """Greedy k-means++ seeding: each new center is the best of a few D^2-sampled candidates."""
    n = P.shape[0]
    trials = 2 + int(np.log(K))
    centers = [P[rng.integers(n)]]
    closest = cdist(P, centers[:1], "sqeuclidean")[:, 0]
    for _ in range(1, K):
        total = closest.sum()
        if total <= 0:
            cand = rng.integers(n, size=trials)
        else:
            cand = np.searchsorted(np.cumsum(closest), rng.random(trials) * total)
            cand = np.minimum(cand, n - 1)
        dist = np.minimum(closest[None, :], cdist(P[cand], P, "sqeuclidean"))
        best = np.argmin(dist.sum(axis=1))
        centers.append(P[cand[best]])
        closest = dist[best]
    return np.array(centers)


def _lloyd(P, centers, max_iter):
    history = []
    labels = None
    for _ in range(max_iter):
        dist = cdist(P, centers, "sqeuclidean")
        new_labels = np.argmin(dist, axis=1)
        history.append(float(dist[np.arange(P.shape[0]), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(centers.shape[0]):
            members = P[labels == j]
            if members.size:
                centers[j] = members.mean(axis=0)
            else:
                # empty cluster: move it onto the worst-served point
                far = np.argmax(dist[np.arange(P.shape[0]), labels])
                centers[j] = P[far]
    dist = cdist(P, centers, "sqeuclidean")
    labels = np.argmin(dist, axis=1)
    return labels, float(dist[np.arange(P.shape[0]), labels].sum()), history


def kmeans(points, K: int, restarts: int = 10, seed: int = 0, max_iter: int = 300) -> ClusteringResult:
    """Lloyd's algorithm from greedy k-means++ starts; keeps the lowest-inertia restart.

    ``history`` holds the per-iteration inertia of the kept restart.
    """
    P = np.asarray(points, dtype=float)
    n = P.shape[0]
    if not 1 <= K <= n:
        raise ValueError(f"K={K} must be in [1, n={n}]")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        labels, inertia, history = _lloyd(P, _kmeans_pp(P, K, rng), max_iter)
        if best is None or inertia < best[1]:
            best = (labels, inertia, history)
    return ClusteringResult(best[0], best[1], restarts, tuple(best[2]))


def _check_pair(pred, truth):
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    return pred, truth


def contingency(pred, truth) -> np.ndarray:
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1))
    np.add.at(table, (p, t), 1)
    return table


def acc(pred, truth) -> float:
    """Clustering accuracy under the best one-to-one matching of clusters to classes."""
    pred, truth = _check_pair(pred, truth)
    if pred.size == 0:
        return 0.0
    table = contingency(pred, truth)
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum() / pred.size)


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth, average: str = "geometric") -> float:
    """Mutual information normalized by ``sqrt(H(pred) H(truth))`` (or their mean).

    Two identical single-cluster partitions score 1; otherwise a zero entropy
    scores 0.
    """
    pred, truth = _check_pair(pred, truth)
    table = contingency(pred, truth)
    h_pred, h_truth = _entropy(table.sum(axis=1)), _entropy(table.sum(axis=0))
    if h_pred == 0.0 or h_truth == 0.0:
        return 1.0 if h_pred == h_truth == 0.0 else 0.0
    joint = table / table.sum()
    outer = np.outer(joint.sum(axis=1), joint.sum(axis=0))
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
    norm = np.sqrt(h_pred * h_truth) if average == "geometric" else 0.5 * (h_pred + h_truth)
    return float(np.clip(mi / norm, 0.0, 1.0))


def causal_precision(ranking: FeatureRanking, truth_sets: dict, top: int) -> float:
    """Fraction of the ``top`` highest-ranked features that are truly causal."""
    d = ranking.order.size
    if not 1 <= top <= d:
        raise ValueError(f"top={top} out of range [1, {d}]")
    chosen = set(ranking.order[:top].tolist())
    return len(chosen & set(truth_sets["causal"])) / top


def variance_baseline(data: DataMatrix, rho: int) -> FeatureRanking:
    """Rank features by sample variance, largest first."""
    return rank_scores(data.values.var(axis=1), rho)


def evaluate_selection(data: DataMatrix, features, runs: int = 50, seed: int = 0,
                       K: int | None = None) -> dict:
    """Run k-means ``runs`` times (one seeded start each) on the chosen features.

    Returns mean and standard deviation of ACC and NMI across the runs.
    """
    if data.labels is None:
        raise ValueError("evaluation requires labels")
    K = K or data.n_classes
    P = data.values[np.asarray(features)].T
    accs, nmis = [], []
    for r in range(runs):
        result = kmeans(P, K, restarts=1, seed=seed + r)
        accs.append(acc(result.assignments, data.labels))
        nmis.append(nmi(result.assignments, data.labels))
    return {"acc_mean": float(np.mean(accs)), "acc_std": float(np.std(accs)),
            "nmi_mean": float(np.mean(nmis)), "nmi_std": float(np.std(nmis))}


def evaluate_ranking(data: DataMatrix, ranking: FeatureRanking, rho_list=DEFAULT_RHO_LIST,
                     runs: int = 50, seed: int = 0) -> list[dict]:
    """ACC/NMI for the top-``rho`` features at every ``rho`` not exceeding ``d``."""
    rows = []
    for rho in rho_list:
        if rho > ranking.order.size:
            continue
        rows.append({"rho": int(rho), **evaluate_selection(data, ranking.order[:rho], runs, seed)})
    return rows
