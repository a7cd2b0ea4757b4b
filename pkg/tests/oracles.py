"""Independent reference implementations used only by the tests.

Each oracle solves its problem by a different route than the package code:
exhaustive support enumeration, dense grids, explicit loops or generic
optimizers.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import minimize


def simplex_qp_bruteforce(t, gamma):
    """Minimize ``t @ s + gamma * ||s||^2`` over the probability simplex, ``gamma > 0``.

    Enumerates every support set, solves the equality-constrained problem on
    it in closed form and keeps the best feasible candidate. Exact for the
    strictly convex case, exponential in ``len(t)``.
    """
    t = np.asarray(t, dtype=float)
    n = t.size
    best, best_val = None, np.inf
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            idx = list(support)
            # stationarity on the support: t_j + 2 gamma s_j = theta
            theta = (2.0 * gamma + t[idx].sum()) / size
            s_sup = (theta - t[idx]) / (2.0 * gamma)
            if np.any(s_sup < -1e-15):
                continue
            s = np.zeros(n)
            s[idx] = np.maximum(s_sup, 0.0)
            val = t @ s + gamma * s @ s
            if val < best_val - 1e-15:
                best, best_val = s, val
    return best


def kth_gamma(t, k):
    """Regularization weight that makes the simplex solution exactly ``k``-sparse."""
    ts = np.sort(np.asarray(t, dtype=float))
    return 0.5 * (k * ts[k] - ts[:k].sum())


def projection_bruteforce(v):
    """Euclidean projection onto the simplex via the same support enumeration."""
    v = np.asarray(v, dtype=float)
    # ||s - v||^2 = -2 v @ s + ||s||^2 + const
    return simplex_qp_bruteforce(-2.0 * v, 1.0)


def simplex_grid(n_steps):
    """All points of the 3-simplex grid with spacing ``1 / n_steps``."""
    i, j = np.meshgrid(np.arange(n_steps + 1), np.arange(n_steps + 1), indexing="ij")
    keep = i + j <= n_steps
    a, b = i[keep] / n_steps, j[keep] / n_steps
    return np.column_stack([a, b, 1.0 - a - b])


def laplacian_loop(S):
    n = S.shape[0]
    L = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            w = 0.5 * (S[i, j] + S[j, i])
            if i != j:
                L[i, j] = -w
                L[i, i] += w
    return L


def w_objective_loop(Xt, F, D, S_list, masks, alpha, lam, W):
    """Reweighted regression objective in ``W`` written with per-sample and per-pair loops."""
    d, n = Xt.shape
    val = 0.0
    for i in range(n):
        r = Xt[:, i] @ W - F[i]
        val += alpha * r @ r
    for f in range(d):
        val += lam * D[f] * W[f] @ W[f]
    for S, mask in zip(S_list, masks):
        Y = Xt[mask].T @ W[mask]
        for i in range(n):
            for j in range(n):
                diff = Y[i] - Y[j]
                val += 0.25 * (S[i, j] + S[j, i]) * (diff @ diff)
    return val


def w_gradient_fd(fun, W, step=1e-6):
    G = np.zeros_like(W)
    for idx in np.ndindex(*W.shape):
        E = np.zeros_like(W)
        E[idx] = step
        G[idx] = (fun(W + E) - fun(W - E)) / (2.0 * step)
    return G


def lbfgs_minimize(fun, x0, shape):
    res = minimize(lambda w: fun(w.reshape(shape)), x0.ravel(), method="L-BFGS-B",
                   options={"maxiter": 20000, "gtol": 1e-12, "ftol": 1e-15})
    return res.x.reshape(shape)


def mmd_loop(X, treated, mu, feature):
    """Squared linear-kernel MMD for one treatment feature, written out sample by sample."""
    d, n = X.shape
    others = [r for r in range(d) if r != feature]
    n_t = sum(1 for i in range(n) if treated[i])
    n_c = n - n_t
    mean_t = np.zeros(len(others))
    mean_c = np.zeros(len(others))
    for i in range(n):
        z = X[others, i] * mu[i]
        if treated[i]:
            mean_t += z / n_t
        else:
            mean_c += z / n_c
    diff = mean_t - mean_c
    return float(diff @ diff)


def objective_loop(X, treated_sets, state, hyper, variant="full"):
    """Full objective assembled term by term from explicit loops."""
    d, n = X.shape
    W, F, mu = state.W, state.F, state.mu
    val = hyper.lam * sum(np.sqrt(W[f] @ W[f] + hyper.epsilon) for f in range(d))
    if variant != "no_causal_regression":
        for i in range(n):
            r = mu[i] * X[:, i] @ W - F[i]
            val += hyper.alpha * r @ r
        L = laplacian_loop(state.G)
        val += np.trace(F.T @ L @ F)
        for r, treated in treated_sets.items():
            val += hyper.beta * mmd_loop(X, treated, mu, r)
    if variant != "no_multigranular":
        for m, mask in enumerate(state.partition.masks()):
            S, g = state.S_list[m], state.gamma[m]
            Y = (X[mask] * mu).T @ W[mask]
            for i in range(n):
                for j in range(n):
                    diff = Y[i] - Y[j]
                    val += 0.25 * (S[i, j] + S[j, i]) * (diff @ diff)
                    val -= state.partition.nu[m] * state.G[i, j] * S[i, j]
                val += g[i] * S[:, i] @ S[:, i]
        for i in range(n):
            val += state.xi[i] * state.G[:, i] @ state.G[:, i]
    return float(val)


def hungarian_free_acc(pred, truth):
    """Clustering accuracy by trying every mapping of clusters to classes."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    clusters, classes = np.unique(pred), np.unique(truth)
    best = 0
    width = max(len(clusters), len(classes))
    for perm in itertools.permutations(range(width), len(clusters)):
        hits = 0
        for c, target in zip(clusters, perm):
            if target < len(classes):
                hits += np.sum((pred == c) & (truth == classes[target]))
        best = max(best, hits)
    return best / pred.size


def average_linkage_naive(P, n_clusters):
    """Textbook agglomerative clustering with average linkage; O(d^3)."""
    d = P.shape[0]
    dist = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(-1))
    clusters = [[i] for i in range(d)]
    while len(clusters) > n_clusters:
        best = (np.inf, None, None)
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                link = dist[np.ix_(clusters[a], clusters[b])].mean()
                if link < best[0] - 1e-12:
                    best = (link, a, b)
        _, a, b = best
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]
    labels = np.empty(d, dtype=int)
    for g, members in enumerate(clusters):
        labels[members] = g
    return labels


def same_partition(a, b):
    a, b = np.asarray(a), np.asarray(b)
    pairs = set(zip(a.tolist(), b.tolist()))
    return len(pairs) == len(set(a.tolist())) == len(set(b.tolist()))
