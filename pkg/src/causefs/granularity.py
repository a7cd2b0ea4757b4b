"""Grouping features into granularities by average-linkage clustering with CH model selection."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.cluster.hierarchy import cut_tree, linkage
from scipy.spatial.distance import squareform


@dataclass(frozen=True)
class GranularityPartition:
    """Assignment of each feature to one of ``n_groups`` granularities.

    Attributes
    ----------
    assignments : ndarray of int, shape (d,)
        Group labels, numbered by first appearance in feature order.
    nu : ndarray of shape (n_groups,)
        Fusion weights; uniform until :func:`compute_nu` sets them.
    ch : float
        Calinski-Harabasz score of the chosen cut (``nan`` if degenerate).
    degenerate : bool
        All feature points coincided, so no cut is better than another.
    """

    assignments: np.ndarray
    nu: np.ndarray
    ch: float = float("nan")
    degenerate: bool = False

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=int)
        M = int(a.max()) + 1
        if a.min() < 0 or np.unique(a).size != M:
            raise ValueError("every granularity must be non-empty")
        nu = np.asarray(self.nu, dtype=float)
        if nu.shape != (M,) or np.any(nu < 0) or abs(nu.sum() - 1.0) > 1e-10:
            raise ValueError("nu must be a probability vector with one weight per granularity")
        object.__setattr__(self, "assignments", a)
        object.__setattr__(self, "nu", nu)

    @property
    def n_groups(self) -> int:
        return self.nu.size

    def masks(self) -> list[np.ndarray]:
        return [self.assignments == m for m in range(self.n_groups)]

    def to_records(self, feature_ids) -> list[dict]:
        return [{"feature_id": fid, "granularity": int(g)}
                for fid, g in zip(feature_ids, self.assignments)]


def _first_appearance(labels) -> np.ndarray:
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    return rank[inverse]


def calinski_harabasz(points, labels) -> float:
    """Between/within dispersion ratio, each scaled by its degrees of freedom.

    Returns ``inf`` for zero within-group dispersion with distinct groups and
    ``nan`` when both dispersions vanish.
    """
    X = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    groups = np.unique(labels)
    N, M = X.shape[0], groups.size
    center = X.mean(axis=0)
    between = within = 0.0
    for g in groups:
        Xg = X[labels == g]
        cg = Xg.mean(axis=0)
        between += Xg.shape[0] * np.sum((cg - center) ** 2)
        within += np.sum((Xg - cg) ** 2)
    tiny = 1e-12 * max(np.sum((X - center) ** 2), 1e-300)
    if within <= tiny:
        return float("inf") if between > tiny else float("nan")
    return float((between / (M - 1)) / (within / (N - M)))


def default_group_range(d: int) -> tuple[int, int]:
    return 2, max(2, min(10, d - 1))


def cluster_features(points, group_range=None, distances=None) -> GranularityPartition:
    """Average-linkage clustering of feature points, cut at the CH-best group count.

    Parameters
    ----------
    points : ndarray (d, p)
        One row per feature; used for the CH score and, unless ``distances``
        is given, for Euclidean linkage.
    group_range : (int, int), optional
        Inclusive range of group counts. Defaults to ``[2, min(10, d-1)]``.
    distances : ndarray (d, d), optional
        Precomputed symmetric feature distances for the linkage.

    Ties in CH go to the smaller group count. If every point coincides the
    result is an index-contiguous split into the smallest allowed
    number of groups, flagged ``degenerate``.
    """
    P = np.asarray(points, dtype=float)
    d = P.shape[0]
    if d < 2:
        raise ValueError(f"need at least 2 features to cluster, got {d}")
    lo, hi = group_range or default_group_range(d)
    hi = min(hi, d)
    if distances is None:
        Z = linkage(P, method="average", metric="euclidean")
    else:
        Dm = 0.5 * (np.asarray(distances, dtype=float) + np.asarray(distances, dtype=float).T)
        np.fill_diagonal(Dm, 0.0)
        Z = linkage(squareform(Dm, checks=False), method="average")

    best_labels, best_ch = None, -np.inf
    cuts = cut_tree(Z, n_clusters=list(range(lo, hi + 1)))
    for col in range(cuts.shape[1]):
        labels = cuts[:, col]
        ch = calinski_harabasz(P, labels)
        if np.isnan(ch):
            continue
        if ch > best_ch:
            best_ch, best_labels = ch, labels

    if best_labels is None:
        M = min(lo, d)
        split = np.repeat(np.arange(M), [len(c) for c in np.array_split(np.arange(d), M)])
        return GranularityPartition(split, np.full(M, 1.0 / M), float("nan"), degenerate=True)
    labels = _first_appearance(best_labels)
    M = int(labels.max()) + 1
    return GranularityPartition(labels, np.full(M, 1.0 / M), best_ch)


def correlation_distances(X) -> np.ndarray:
    """``1 - |Pearson|`` between feature rows; constant features sit at distance 1 from all others."""
    X = np.asarray(X, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        R = np.corrcoef(X)
    R = np.nan_to_num(R, nan=0.0)
    Dm = 1.0 - np.abs(R)
    Dm = np.clip(0.5 * (Dm + Dm.T), 0.0, 1.0)
    np.fill_diagonal(Dm, 0.0)
    return Dm


def initial_partition(X, group_range=None) -> GranularityPartition:
    """Cluster features on correlation distance; rows of the distance matrix serve as CH points."""
    Dm = correlation_distances(X)
    return cluster_features(Dm, group_range, distances=Dm)


def causal_partition(W, group_range=None) -> GranularityPartition:
    """Cluster features by Euclidean distance between their rows of ``W``."""
    return cluster_features(np.asarray(W, dtype=float), group_range)


def compute_nu(W, partition: GranularityPartition) -> GranularityPartition:
    """Weight each granularity by its share of ``||W||_F^2``; uniform when ``W = 0``."""
    sq = np.sum(np.asarray(W, dtype=float) ** 2, axis=1)
    M = partition.n_groups
    totals = np.bincount(partition.assignments, weights=sq, minlength=M)
    total = totals.sum()
    nu = totals / total if total > 0 else np.full(M, 1.0 / M)
    nu = nu / nu.sum()
    return replace(partition, nu=nu)


def match_labels(old: GranularityPartition, new: GranularityPartition) -> GranularityPartition:
    """Relabel ``new`` to overlap ``old`` as much as possible (same group count only)."""
    from scipy.optimize import linear_sum_assignment

    M = old.n_groups
    if new.n_groups != M:
        return new
    overlap = np.zeros((M, M))
    np.add.at(overlap, (old.assignments, new.assignments), 1)
    rows, cols = linear_sum_assignment(-overlap)
    relabel = np.empty(M, dtype=int)
    relabel[cols] = rows
    nu = np.empty(M)
    nu[relabel] = new.nu
    return replace(new, assignments=relabel[new.assignments], nu=nu)
