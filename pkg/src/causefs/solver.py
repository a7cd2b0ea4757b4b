"""Alternating optimizer: initialization, block updates, objective and convergence."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import graphs
from .balance import assemble_qp, mmd_total, solve_simplex_qp
from .dataset import DataMatrix, TreatmentDesign, derive_treatment, standardize
from .embedding import gpi_solve, spectral_init
from .granularity import (GranularityPartition, causal_partition, compute_nu,
                          initial_partition, match_labels)
from .regression import FeatureRanking, rank_features, refresh_D, smoothed_l21, update_W

logger = logging.getLogger(__name__)

FULL = "full"
NO_CAUSAL_REGRESSION = "no_causal_regression"
NO_MULTIGRANULAR = "no_multigranular"
VARIANTS = (FULL, NO_CAUSAL_REGRESSION, NO_MULTIGRANULAR)


class DescentViolation(RuntimeError):
    def __init__(self, trace):
        self.trace = list(trace)
        super().__init__(
            f"descent violation at outer iteration {len(trace)}: "
            f"objective went from {trace[-2]!r} to {trace[-1]!r}; trace={self.trace}")


class ObjectiveError(FloatingPointError):
    pass


@dataclass(frozen=True)
class HyperParams:
    """Model and optimizer settings.

    ``lam`` is the row-sparsity weight (``--lambda`` on the command line).
    ``h`` defaults to the number of classes when the data carries labels.
    """

    alpha: float = 1.0
    beta: float = 1e7
    lam: float = 1.0
    k: int = 5
    h: int | None = None
    rho: int = 20
    epsilon: float = 1e-6
    max_outer: int = 50
    outer_tol: float = 1e-5
    seed: int = 0
    variant: str = FULL
    standardize: bool = True
    freeze_partition: bool = False
    monotone: bool = True
    descent_slack: float = 1e-7
    gpi_max_iter: int = 100
    gpi_tol: float = 1e-8
    qp_max_iter: int = 2000
    qp_tol: float = 1e-12
    group_range: tuple | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.alpha <= 0 or self.lam <= 0:
            raise ValueError("alpha and lambda must be positive")
        if self.beta <= 0 and self.variant != NO_CAUSAL_REGRESSION:
            raise ValueError("beta must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.k < 1 or self.rho < 1 or self.max_outer < 1:
            raise ValueError("k, rho and max_outer must be positive")
        if self.h is not None and self.h < 1:
            raise ValueError("h must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ModelState:
    """Every optimization variable plus the per-column graph regularization weights.

    ``gamma[m]`` and ``xi`` are the weights attached to ``||S_m||^2`` and
    ``||G||^2`` column by column. The closed-form graph updates set them;
    the objective reads them from here.
    """

    W: np.ndarray
    D: np.ndarray
    F: np.ndarray
    mu: np.ndarray
    S_list: list
    gamma: list
    G: np.ndarray
    xi: np.ndarray
    partition: GranularityPartition
    iteration: int = 0
    objective_trace: list = field(default_factory=list)
    repartitions_accepted: int = 0
    repartitions_rejected: int = 0

    def copy(self) -> "ModelState":
        return replace(self, S_list=list(self.S_list), gamma=list(self.gamma),
                       objective_trace=list(self.objective_trace))

    @property
    def masks(self) -> list:
        return self.partition.masks()


# -- setup ---------------------------------------------------------------------

def prepare(data: DataMatrix, hyper: HyperParams) -> tuple[np.ndarray, TreatmentDesign]:
    """Standardize (unless disabled) and derive the treatment design."""
    if hyper.standardize:
        data, _ = standardize(data)
    design = derive_treatment(data)
    if design.degenerate:
        logger.info("%d feature(s) with an empty treatment or control group are left out of balancing",
                    len(design.degenerate))
    return data.values, design


def resolve_h(data: DataMatrix, hyper: HyperParams) -> int:
    h = hyper.h if hyper.h is not None else data.n_classes
    if h is None:
        raise ValueError("h is required when the data has no labels")
    if not 1 <= h <= data.n:
        raise ValueError(f"h={h} out of range [1, {data.n}]")
    return int(h)


def initialize(X, hyper: HyperParams, h: int) -> ModelState:
    """Starting point: correlation-based granularities, k-NN graphs, spectral F, uniform weights."""
    d, n = X.shape
    k = hyper.k
    if not 1 <= k <= n - 2:
        raise ValueError(f"k={k} out of range [1, {n - 2}]")
    G, xi = graphs.knn_init(X, k, return_gamma=True)
    if hyper.variant == NO_MULTIGRANULAR:
        partition = GranularityPartition(np.zeros(d, dtype=int), np.ones(1))
        S_list, gamma = [], []
    else:
        partition = initial_partition(X, hyper.group_range)
        S_list, gamma = [], []
        for mask in partition.masks():
            S, g = graphs.knn_init(X[mask], k, return_gamma=True)
            S_list.append(S)
            gamma.append(g)
    F = spectral_init(graphs.laplacian(G), h)
    return ModelState(W=np.zeros((d, h)), D=np.ones(d), F=F, mu=np.full(n, 1.0 / n),
                      S_list=S_list, gamma=gamma, G=G, xi=xi, partition=partition)


# -- objective -------------------------------------------------------------------

def objective_terms(X, design: TreatmentDesign, state: ModelState, hyper: HyperParams) -> dict:
    """Each term of the objective at ``state``, by name."""
    v = hyper.variant
    W, F, mu = state.W, state.F, state.mu
    terms = {"sparsity": hyper.lam * smoothed_l21(W, hyper.epsilon)}
    if v != NO_CAUSAL_REGRESSION:
        resid = (X * mu).T @ W - F
        terms["regression"] = hyper.alpha * float(np.sum(resid * resid))
        terms["spectral"] = float(np.sum(F * (graphs.laplacian(state.G) @ F)))
        terms["balance"] = hyper.beta * mmd_total(X, design, mu)
    if v != NO_MULTIGRANULAR:
        granular = 0.0
        fusion = float(np.sum(state.xi * np.sum(state.G * state.G, axis=0)))
        for S, g, mask, nu_m in zip(state.S_list, state.gamma, state.masks, state.partition.nu):
            Y = graphs.projected_samples(X, W, mu, mask)
            granular += float(np.sum(Y * (graphs.laplacian(S) @ Y)))
            granular += float(np.sum(g * np.sum(S * S, axis=0)))
            fusion -= nu_m * float(np.sum(state.G * S))
        terms["granular"] = granular
        terms["fusion"] = fusion
    for name, value in terms.items():
        if not np.isfinite(value):
            raise ObjectiveError(f"objective term {name!r} is not finite ({value})")
    return terms


def objective_value(X, design: TreatmentDesign, state: ModelState, hyper: HyperParams) -> float:
    return float(sum(objective_terms(X, design, state, hyper).values()))


def converged(trace, tol: float) -> bool:
    """Relative change between the last two trace entries is below ``tol``."""
    if len(trace) < 2:
        return False
    prev, last = trace[-2], trace[-1]
    return abs(last - prev) / max(abs(prev), 1e-12) < tol


# -- block updates -------------------------------------------------------------------

def _weighted(X, state: ModelState, hyper: HyperParams):
    if hyper.variant == NO_CAUSAL_REGRESSION:
        return X / X.shape[1]
    return X * state.mu


def step_W(X, state: ModelState, hyper: HyperParams) -> None:
    graph_terms = hyper.variant != NO_MULTIGRANULAR
    S_list = state.S_list if graph_terms else []
    masks = state.masks if graph_terms else []
    F = None if hyper.variant == NO_CAUSAL_REGRESSION else state.F
    W = update_W(_weighted(X, state, hyper), F, state.D, S_list, masks, hyper.alpha, hyper.lam)
    if W.shape != state.W.shape:
        W = np.zeros_like(state.W)
    state.W = W
    state.D = refresh_D(W, hyper.epsilon)


def _pick_columns(T, S_old, g_old, k, monotone):
    """Closed-form columns, guarded so no column's cost rises under the stored weights."""
    S_new, g_new = graphs.sparse_simplex_columns(T, k)
    if not monotone:
        return S_new, g_new
    S_fix = graphs.sparse_simplex_fixed(T, g_old, k)
    costs = np.vstack([graphs.column_objective(T, S_new, g_new),
                       graphs.column_objective(T, S_fix, g_old),
                       graphs.column_objective(T, S_old, g_old)])
    pick = np.argmin(costs, axis=0)
    S = np.where(pick == 0, S_new, np.where(pick == 1, S_fix, S_old))
    g = np.where(pick == 0, g_new, g_old)
    return S, g


def step_S(X, state: ModelState, hyper: HyperParams) -> None:
    mu = state.mu if hyper.variant != NO_CAUSAL_REGRESSION else np.full(X.shape[1], 1.0 / X.shape[1])
    for m, mask in enumerate(state.masks):
        T = graphs.granularity_costs(X, state.W, mu, state.G, state.partition.nu[m], mask)
        state.S_list[m], state.gamma[m] = _pick_columns(
            T, state.S_list[m], state.gamma[m], hyper.k, hyper.monotone)


def step_G(state: ModelState, hyper: HyperParams) -> None:
    S_bar = sum(v * S for v, S in zip(state.partition.nu, state.S_list))
    if hyper.variant == NO_CAUSAL_REGRESSION:
        T = -S_bar.copy()
        np.fill_diagonal(T, np.inf)
    else:
        T = graphs.fusion_costs(state.F, S_bar)
    state.G, state.xi = _pick_columns(T, state.G, state.xi, hyper.k, hyper.monotone)


def step_F(X, state: ModelState, hyper: HyperParams) -> None:
    n = X.shape[1]
    A = hyper.alpha * np.eye(n) + graphs.laplacian(state.G)
    B = hyper.alpha * (X * state.mu).T @ state.W
    state.F = gpi_solve(A, B, state.F, hyper.gpi_max_iter, hyper.gpi_tol)


def step_mu(X, design, state: ModelState, hyper: HyperParams) -> None:
    graph_terms = hyper.variant != NO_MULTIGRANULAR
    qp = assemble_qp(X, design, state.W, state.F,
                     state.S_list if graph_terms else [],
                     state.masks if graph_terms else [],
                     hyper.alpha, hyper.beta)
    state.mu = solve_simplex_qp(qp, state.mu, hyper.qp_max_iter, hyper.qp_tol).mu


def step_partition(X, design, state: ModelState, hyper: HyperParams, current: float | None) -> float:
    """Re-cluster features on ``W`` and refresh the fusion weights.

    With ``monotone`` set the candidate is kept only if it does not raise the
    objective. Returns the objective of the state that was kept.
    """
    if hyper.freeze_partition:
        candidate = state.partition
    else:
        candidate = match_labels(state.partition, causal_partition(state.W, hyper.group_range))
    candidate = compute_nu(state.W, candidate)
    trial = state.copy()
    trial.partition = candidate
    if candidate.n_groups != state.partition.n_groups:
        mu = state.mu if hyper.variant != NO_CAUSAL_REGRESSION else np.full(X.shape[1], 1.0 / X.shape[1])
        trial.S_list, trial.gamma = [], []
        for m, mask in enumerate(candidate.masks()):
            S, g = graphs.update_S(X, state.W, mu, state.G, candidate.nu[m], mask, hyper.k)
            trial.S_list.append(S)
            trial.gamma.append(g)
    value = objective_value(X, design, trial, hyper)
    if not hyper.monotone or current is None or value <= current:
        state.partition, state.S_list, state.gamma = trial.partition, trial.S_list, trial.gamma
        state.repartitions_accepted += 1
        return value
    state.repartitions_rejected += 1
    return current


def outer_iteration(X, design, state: ModelState, hyper: HyperParams) -> float:
    """One pass of the update schedule; returns the objective at its end."""
    v = hyper.variant
    step_W(X, state, hyper)
    if v != NO_MULTIGRANULAR:
        step_S(X, state, hyper)
        step_G(state, hyper)
    if v != NO_CAUSAL_REGRESSION:
        step_F(X, state, hyper)
        step_mu(X, design, state, hyper)
    if v != NO_MULTIGRANULAR:
        current = objective_value(X, design, state, hyper)
        return step_partition(X, design, state, hyper, current)
    return objective_value(X, design, state, hyper)


def fit(data: DataMatrix, hyper: HyperParams) -> tuple[ModelState, FeatureRanking]:
    """Run the alternating optimizer until the objective settles.

    Raises
    ------
    DescentViolation
        If the recorded objective rises by more than ``descent_slack``
        (relative) between outer iterations while ``monotone`` is set.
    """
    X, design = prepare(data, hyper)
    h = resolve_h(data, hyper)
    if hyper.rho > data.d:
        raise ValueError(f"rho={hyper.rho} exceeds the number of features {data.d}")
    state = initialize(X, hyper, h)
    for it in range(1, hyper.max_outer + 1):
        value = outer_iteration(X, design, state, hyper)
        state.iteration = it
        state.objective_trace.append(value)
        logger.info("iter %d objective %.10g (M=%d)", it, value, state.partition.n_groups)
        trace = state.objective_trace
        if len(trace) > 1 and trace[-1] > trace[-2] + hyper.descent_slack * abs(trace[-2]):
            if hyper.monotone:
                raise DescentViolation(trace)
            logger.warning("objective increased at iteration %d: %r -> %r", it, trace[-2], trace[-1])
        if converged(trace, hyper.outer_tol):
            break
    return state, rank_features(state.W, hyper.rho)
