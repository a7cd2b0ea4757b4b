"""Confounder balancing: linear-kernel MMD, the sample-weight QP and its solver."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import DataMatrix, TreatmentDesign

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QpProblem:
    """Quadratic ``mu @ H @ mu + a @ mu + constant`` over the probability simplex."""

    H: np.ndarray
    a: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        if self.H.shape != (self.a.size, self.a.size):
            raise ValueError(f"H has shape {self.H.shape} but a has {self.a.size} entries")
        asym = np.max(np.abs(self.H - self.H.T)) if self.a.size else 0.0
        if asym > 1e-8 * max(1.0, np.max(np.abs(self.H))):
            raise ValueError(f"H is not symmetric (max asymmetry {asym:.3g})")

    def value(self, mu) -> float:
        return float(mu @ self.H @ mu + self.a @ mu + self.constant)

    def gradient(self, mu) -> np.ndarray:
        return 2.0 * self.H @ mu + self.a


@dataclass(frozen=True)
class QpResult:
    mu: np.ndarray
    objective: float
    n_iter: int
    kkt_residual: float


def project_simplex(v, axis: int = 0) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    For 2-D input each slice along ``axis`` is projected independently.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return project_simplex(v[:, None])[:, 0]
    if axis == 1:
        return project_simplex(v.T).T
    n = v.shape[0]
    u = -np.sort(-v, axis=0)
    css = np.cumsum(u, axis=0) - 1.0
    idx = np.arange(1, n + 1)[:, None]
    cond = u - css / idx > 0
    rho = n - 1 - np.argmax(cond[::-1], axis=0)
    theta = css[rho, np.arange(v.shape[1])] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def mmd_value(data: DataMatrix, design: TreatmentDesign, mu, feature: int) -> float:
    """Squared linear-kernel MMD between the weighted treated and control groups of one feature.

    The confounders are all features except ``feature``; each sample enters its
    group mean scaled by its weight ``mu_i``.
    """
    if feature in design.degenerate:
        raise ValueError(f"feature {feature}: empty treatment or control group")
    mu = np.asarray(mu, dtype=float)
    Z = np.delete(data.values, feature, axis=0)
    treated = design.E[feature] > 0
    control = ~treated
    mean_t = (Z[:, treated] * mu[treated]).sum(axis=1) / treated.sum()
    mean_c = (Z[:, control] * mu[control]).sum(axis=1) / control.sum()
    diff = mean_t - mean_c
    return float(diff @ diff)


def mmd_gram(X: np.ndarray, design: TreatmentDesign) -> np.ndarray:
    """Matrix ``M`` with ``mu @ M @ mu == sum_r mmd_value(r)`` over non-degenerate features.

    Uses ``<Z^r_i, Z^r_j> = <x_i, x_j> - x_ri x_rj`` so the sum over features
    costs ``O(d n^2)`` instead of ``O(d^2 n^2)``.
    """
    coef = design.contrast()
    K = X.T @ X
    CX = coef * X
    return K * (coef.T @ coef) - CX.T @ CX


def mmd_total(X: np.ndarray, design: TreatmentDesign, mu) -> float:
    """``sum_r mmd_value(r)``, evaluated without forming the ``n x n`` Gram."""
    coef = design.contrast() * mu
    means = coef @ X.T                      # row r: sum_i c_ri mu_i x_i
    own = np.einsum("ri,ri->r", coef, X)    # contribution of the treatment feature itself
    return float(np.sum(means ** 2) - np.sum(own ** 2))


def assemble_qp(X, design: TreatmentDesign, W, F, S_list, masks, alpha: float, beta: float,
                extra_constant: float = 0.0) -> QpProblem:
    """Collect every ``mu``-dependent term of the objective into a QP.

    Parameters
    ----------
    X : ndarray (d, n)
        Data used both for regression and as confounders.
    W : ndarray (d, h)
    F : ndarray (n, h) or None
        ``None`` drops the regression block.
    S_list, masks : sequences
        Granularity graphs (column-stochastic ``n x n``) and boolean feature
        masks of equal length. Empty sequences drop the graph block.
    alpha, beta : float
        Regression and balancing weights.
    extra_constant : float
        Added to ``constant`` so ``qp.value(mu)`` reproduces the full objective.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    H = np.zeros((n, n))
    a = np.zeros(n)
    constant = float(extra_constant)

    if F is not None:
        XW = X.T @ W
        H[np.diag_indices(n)] += alpha * np.einsum("ij,ij->i", XW, XW)
        a += -2.0 * alpha * np.einsum("ij,ij->i", XW, F)
        constant += alpha * float(np.sum(F * F))

    for S, mask in zip(S_list, masks):
        Y = X[mask].T @ W[mask]
        P = Y @ Y.T
        Ssym = S + S.T
        H[np.diag_indices(n)] += 0.5 * np.diag(P) * Ssym.sum(axis=1)
        H -= 0.5 * P * Ssym

    if beta:
        H += beta * mmd_gram(X, design)

    H = 0.5 * (H + H.T)
    return QpProblem(H, a, constant)


def kkt_residual(qp: QpProblem, mu, support_tol: float = 1e-12) -> float:
    """Largest violation of the simplex KKT conditions at ``mu``."""
    g = qp.gradient(mu)
    active = mu > support_tol
    if not active.any():
        return float("inf")
    theta = g[active].min()
    on_support = np.max(np.abs(g[active] - theta))
    off_support = np.max(np.maximum(theta - g[~active], 0.0)) if (~active).any() else 0.0
    return float(max(on_support, off_support))


def solve_simplex_qp(qp: QpProblem, mu0=None, max_iter: int = 2000, tol: float = 1e-12) -> QpResult:
    """Projected gradient descent with step ``1/L`` on the simplex.

    ``L`` is the max absolute row sum of ``2H``, an upper bound on its largest
    eigenvalue, so every step is a descent step for convex ``H``. Stops when
    the relative objective change drops below ``tol``.
    """
    n = qp.a.size
    mu = np.full(n, 1.0 / n) if mu0 is None else np.asarray(mu0, dtype=float).copy()
    if np.any(mu < -1e-12) or abs(mu.sum() - 1.0) > 1e-9:
        raise ValueError("mu0 must lie on the probability simplex")
    lip = np.max(np.sum(np.abs(2.0 * qp.H), axis=1))
    f = qp.value(mu)
    if not np.isfinite(f):
        raise FloatingPointError("non-finite QP objective at the starting point")
    if lip <= 0:
        return QpResult(mu, f, 0, kkt_residual(qp, mu))

    step = 1.0 / lip
    it = 0
    for it in range(1, max_iter + 1):
        cand = project_simplex(mu - step * qp.gradient(mu))
        f_new = qp.value(cand)
        if not np.isfinite(f_new):
            raise FloatingPointError(f"non-finite QP objective at iteration {it}")
        if f_new > f:
            # round-off only; keep the better point
            break
        change = abs(f - f_new)
        mu, f = cand, f_new
        if change <= tol * max(abs(f), 1e-300):
            break
    return QpResult(mu, f, it, kkt_residual(qp, mu))
