"""scikit-learn compatible wrapper around the alternating optimizer."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .dataset import DataMatrix
from .solver import FULL, HyperParams, fit


class CauseFS(SelectorMixin, BaseEstimator):
    """Causally-aware unsupervised feature selector.

    Learns a row-sparse projection ``W`` jointly with a cluster embedding,
    sample weights that balance every feature's confounders, and similarity
    graphs built per group of features. Features are ranked by the row norms
    of ``W``.

    Parameters
    ----------
    n_features_to_select : int, default=20
    alpha, beta, lam : float
        Regression, balancing and row-sparsity weights.
    k : int, default=5
        Neighbours per sample in every similarity graph.
    h : int, optional
        Embedding dimension. Defaults to the number of distinct ``y`` values
        passed to :meth:`fit`; required when ``y`` is omitted.
    epsilon : float, default=1e-6
    max_outer : int, default=50
    outer_tol : float, default=1e-5
    variant : {"full", "no_causal_regression", "no_multigranular"}
    standardize : bool, default=True
    freeze_partition : bool, default=False
    random_state : int, default=0

    Attributes
    ----------
    scores_ : ndarray of shape (n_features,)
        Row norms of ``W``.
    ranking_ : ndarray of shape (n_features,)
        Feature indices, best first.
    sample_weight_ : ndarray of shape (n_samples,)
        Learned balancing weights (sum to one).
    granularity_ : ndarray of shape (n_features,)
        Feature group labels at the end of fitting.
    objective_trace_ : list of float
    n_iter_ : int
    state_ : ModelState

    Examples
    --------
    >>> from causefs import CauseFS, SyntheticSpec, synthesize
    >>> data, truth = synthesize(SyntheticSpec(n=90, n_causal=4, n_spurious=4, n_noise=12))
    >>> X, y = data.values.T, data.labels
    >>> selector = CauseFS(n_features_to_select=4, h=3).fit(X)
    >>> selector.transform(X).shape
    (90, 4)
    """

    def __init__(self, n_features_to_select=20, alpha=1.0, beta=1e7, lam=1.0, k=5, h=None,
                 epsilon=1e-6, max_outer=50, outer_tol=1e-5, variant=FULL, standardize=True,
                 freeze_partition=False, random_state=0):
        self.n_features_to_select = n_features_to_select
        self.alpha = alpha
        self.beta = beta
        self.lam = lam
        self.k = k
        self.h = h
        self.epsilon = epsilon
        self.max_outer = max_outer
        self.outer_tol = outer_tol
        self.variant = variant
        self.standardize = standardize
        self.freeze_partition = freeze_partition
        self.random_state = random_state

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64, ensure_min_samples=4, ensure_min_features=2)
        h = self.h
        if h is None:
            if y is None:
                raise ValueError("h must be given when fitting without y")
            h = np.unique(np.asarray(y)).size
        hyper = HyperParams(alpha=self.alpha, beta=self.beta, lam=self.lam, k=self.k, h=h,
                            rho=min(self.n_features_to_select, X.shape[1]), epsilon=self.epsilon,
                            max_outer=self.max_outer, outer_tol=self.outer_tol,
                            seed=self.random_state, variant=self.variant,
                            standardize=self.standardize, freeze_partition=self.freeze_partition)
        state, ranking = fit(DataMatrix.from_samples(X), hyper)
        self.state_ = state
        self.scores_ = ranking.scores
        self.ranking_ = ranking.order
        self.sample_weight_ = state.mu
        self.granularity_ = state.partition.assignments
        self.objective_trace_ = list(state.objective_trace)
        self.n_iter_ = state.iteration
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "ranking_")
        mask = np.zeros(self.scores_.size, dtype=bool)
        mask[self.ranking_[: self.n_features_to_select]] = True
        return mask
