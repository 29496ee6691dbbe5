"""Estimators on the observed dyads: closed-form complete-data MLE and
mean-field variational EM.

Because the observation design is ignorable, both estimators read only
the observed entries of the value matrix; everything is masked so that
unobserved entries never touch the arithmetic (tested bit-for-bit).

The variational posterior is a product over nodes, stored as an n x Q
row-stochastic matrix ``tau`` (rows clamped into [1e-10, 1 - 1e-10] and
renormalized).  One E-step is a sequential sweep of exact per-node
updates, which makes the lower bound nondecreasing at every step; the
M-step maximizes the bound in closed form (tau-weighted cell means).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, xlogy

from .errors import ConfigError, EstimationError, EstimationWarning, SizeError
from .families import get_family
from .model import Assignment, SbmParams
from .simulate import ObservedGraph

__all__ = [
    "FitConfig",
    "FitResult",
    "complete_log_likelihood",
    "complete_mle",
    "e_step",
    "m_step",
    "elbo",
    "vem_fit",
    "exact_observed_loglik",
    "map_assignment",
]

TAU_FLOOR = 1e-10
EXACT_ENUM_LIMIT = 10**6


@dataclass(frozen=True)
class FitConfig:
    """Knobs of the variational fit."""

    n_restarts: int = 10
    max_iters: int = 200
    elbo_rel_tol: float = 1e-6
    init: str = "kmeans"  # "kmeans" | "random" | "warm"
    warm_tau: np.ndarray | None = None
    prop_floor: float = 1e-4

    def __post_init__(self):
        if self.n_restarts < 1 or self.max_iters < 1:
            raise ConfigError("n_restarts and max_iters must be positive")
        if self.elbo_rel_tol <= 0 or self.prop_floor <= 0:
            raise ConfigError("tolerances must be positive")
        if self.init not in ("kmeans", "random", "warm"):
            raise ConfigError(f"unknown init {self.init!r}")
        if self.init == "warm" and self.warm_tau is None:
            raise ConfigError("warm init needs warm_tau")


@dataclass
class FitResult:
    params: SbmParams
    tau: np.ndarray
    elbo_trace: list[float]
    n_iters: int
    converged: bool
    restart_id: int
    map_labels: Assignment
    diagnostics: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# likelihoods
# --------------------------------------------------------------------------


def _dyad_loglik_sum(g: ObservedGraph, z: Assignment, conn, family) -> float:
    labels = z.labels
    a = conn[labels[:, None], labels[None, :]]
    obs = g.mask.observed
    ld = family.log_density(g.filled_values(), a)
    return float(np.sum(ld, where=obs))


def _complete_loglik_raw(g: ObservedGraph, z: Assignment, props, conn, family) -> float:
    """Joint log-likelihood of observed dyads and labels, for raw arrays.

    ``props`` need not sum to one here; this form is what local
    expansions around the truth perturb.
    """
    counts = z.counts()
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.log(props)
    prop_part = float(np.dot(counts, np.where(counts > 0, logp, 0.0)))
    return prop_part + _dyad_loglik_sum(g, z, conn, family)


def complete_log_likelihood(g: ObservedGraph, z: Assignment, params: SbmParams) -> float:
    """Log-likelihood of the observed dyads jointly with known labels.

    Only observed dyads contribute; with an empty mask this reduces to
    the label part sum_i log props[z_i].
    """
    if z.n != g.n:
        raise ValueError("assignment and graph sizes differ")
    if z.n_blocks != params.n_blocks:
        raise ValueError("assignment and parameters disagree on the block count")
    return _complete_loglik_raw(g, z, params.props, params.conn, params.family)


def _cell_sums(g: ObservedGraph, weights_left, weights_right):
    """Weighted per-cell sums of observed values and observation counts.

    Returns (num, den) with num[q, l] = sum_ij w_iq w_jl r_ij y_ij and
    den[q, l] = sum_ij w_iq w_jl r_ij (the diagonal never contributes
    because r_ii is always False).
    """
    obs = g.mask.observed.astype(float)
    vals = g.filled_values() * obs
    num = weights_left.T @ vals @ weights_right
    den = weights_left.T @ obs @ weights_right
    return num, den


def _conn_from_cell_means(num, den, family, empty_value=None):
    """Invert cell means into clamped natural parameters.

    Cells with (near) zero weight fall back to ``empty_value`` (the
    global observed mean's parameter unless overridden).  Returns the
    connectivity matrix and the number of degenerate cells.
    """
    den = np.asarray(den, dtype=float)
    nonempty = den > 1e-12
    total_den = float(den.sum())
    if empty_value is None:
        if total_den > 0:
            global_mean = float(num.sum() / total_den)
        else:
            # no observed dyad anywhere; any interior value works
            global_mean = {"bernoulli": 0.5, "poisson": 1.0, "gaussian": 0.0}[
                family.name
            ]
        empty_value = float(
            family.clamp_natural(
                family.natural_from_mean(family.clamp_mean(global_mean))
            )
        )
    means = np.divide(num, den, out=np.zeros_like(np.asarray(num, dtype=float)), where=nonempty)
    conn = np.full(den.shape, empty_value)
    if nonempty.any():
        conn[nonempty] = family.clamp_natural(
            family.natural_from_mean(family.clamp_mean(means[nonempty]))
        )
    return conn, int(np.size(nonempty) - np.count_nonzero(nonempty))


def complete_mle(g: ObservedGraph, z: Assignment) -> SbmParams:
    """Closed-form maximizer of the complete-observed likelihood.

    Proportions are block frequencies; each connectivity cell is the
    inverse mean map applied to the observed within-cell average.  Cells
    without any observed dyad fall back to the global observed mean and
    raise an EstimationWarning; a graph with no observed dyad at all is
    an EstimationError.
    """
    if z.n != g.n:
        raise ValueError("assignment and graph sizes differ")
    family = get_family(g.family_id) if g.family_id else None
    if family is None:
        raise ConfigError("graph carries no family id; set ObservedGraph.family_id")
    if g.mask.n_observed() == 0:
        raise EstimationError("no observed dyad: connectivity is not estimable")
    one_hot = z.one_hot()
    num, den = _cell_sums(g, one_hot, one_hot)
    conn, n_empty = _conn_from_cell_means(num, den, family)
    if n_empty:
        warnings.warn(
            f"{n_empty} connectivity cell(s) had no observed dyad; "
            "using the global observed mean",
            EstimationWarning,
            stacklevel=2,
        )
    props = z.counts() / z.n
    return SbmParams(props, conn, family)


# --------------------------------------------------------------------------
# variational lower bound
# --------------------------------------------------------------------------


def _clamp_rows(tau: np.ndarray) -> np.ndarray:
    tau = np.clip(tau, TAU_FLOOR, 1.0 - TAU_FLOOR)
    return tau / tau.sum(axis=1, keepdims=True)


def _loglik_tensor(g: ObservedGraph, params: SbmParams) -> np.ndarray:
    """ld[q, l, i, j] = r_ij * log density(y_ij; conn[q, l]), zero when unobserved."""
    obs = g.mask.observed
    filled = g.filled_values()
    q = params.n_blocks
    ld = np.empty((q, q, g.n, g.n))
    for a in range(q):
        for b in range(q):
            ld[a, b] = np.where(
                obs, params.family.log_density(filled, params.conn[a, b]), 0.0
            )
    return ld


def elbo(g: ObservedGraph, tau: np.ndarray, params: SbmParams) -> float:
    """Variational lower bound on the observed log-likelihood.

    Expected complete-observed log-likelihood under the product
    posterior plus its entropy, both exact under mean field.  With a
    one-hot ``tau`` this equals the complete log-likelihood.
    """
    tau = np.asarray(tau, dtype=float)
    ld = _loglik_tensor(g, params)
    pair_part = float(np.einsum("iq,qlij,jl->", tau, ld, tau))
    with np.errstate(divide="ignore"):
        logp = np.where(params.props > 0, np.log(params.props), -np.inf)
    prior_part = float(np.sum(np.where(tau > 0, tau * logp, 0.0)))
    entropy = -float(np.sum(xlogy(tau, tau)))
    return pair_part + prior_part + entropy


def _sweep_tau(tau: np.ndarray, ld: np.ndarray, log_props: np.ndarray) -> np.ndarray:
    """One sequential pass of exact per-node updates (in place on a copy)."""
    tau = tau.copy()
    n = tau.shape[0]
    for i in range(n):
        score = (
            log_props
            + np.einsum("qln,nl->q", ld[:, :, i, :], tau)
            + np.einsum("lqn,nl->q", ld[:, :, :, i], tau)
        )
        score -= score.max()
        row = np.exp(score)
        tau[i] = row / row.sum()
    return _clamp_rows(tau)


def e_step(g: ObservedGraph, tau: np.ndarray, params: SbmParams) -> np.ndarray:
    """Update the variational posterior with parameters held fixed.

    Each row update sets log tau_iq proportional to log props_q plus the
    tau-weighted log-densities of node i's observed dyads in both
    directions; rows are normalized in the log domain.  Updates are
    applied sequentially, so the bound never decreases.  With an empty
    mask every row equals the proportions.
    """
    tau = _clamp_rows(np.asarray(tau, dtype=float))
    ld = _loglik_tensor(g, params)
    with np.errstate(divide="ignore"):
        log_props = np.where(params.props > 0, np.log(params.props), -np.inf)
    return _sweep_tau(tau, ld, log_props)


def _m_step_impl(g: ObservedGraph, tau: np.ndarray, family, prop_floor: float):
    tau = np.asarray(tau, dtype=float)
    props = tau.mean(axis=0)
    floored = bool(np.any(props < prop_floor))
    if floored:
        props = np.maximum(props, prop_floor)
    props = props / props.sum()
    num, den = _cell_sums(g, tau, tau)
    conn, n_empty = _conn_from_cell_means(num, den, family)
    return SbmParams(props, conn, family), {"floored": floored, "empty_cells": n_empty}


def m_step(
    g: ObservedGraph, tau: np.ndarray, family=None, prop_floor: float = 1e-4
) -> SbmParams:
    """Maximize the bound in the parameters with the posterior held fixed.

    Proportions are column means of tau (floored at ``prop_floor`` and
    renormalized); cell means are tau-weighted observed averages pushed
    through the inverse mean map with boundary clamping.  With a one-hot
    tau this reproduces the complete-data MLE.
    """
    family = get_family(family if family is not None else g.family_id)
    params, _ = _m_step_impl(g, tau, family, prop_floor)
    return params


# --------------------------------------------------------------------------
# initialization
# --------------------------------------------------------------------------


def _kmeans_init(g: ObservedGraph, q: int, seed: int) -> np.ndarray:
    """Cluster rows of the value matrix, filling unobserved entries with
    the row's observed mean (global mean for fully unobserved rows)."""
    from sklearn.cluster import KMeans

    obs = g.mask.observed
    filled = g.filled_values()
    row_count = obs.sum(axis=1)
    row_mean = np.divide(
        filled.sum(axis=1), row_count, out=np.zeros(g.n), where=row_count > 0
    )
    total = obs.sum()
    global_mean = filled.sum() / total if total > 0 else 0.0
    row_fill = np.where(row_count > 0, row_mean, global_mean)
    x = np.where(obs, filled, row_fill[:, None])
    labels = KMeans(n_clusters=q, n_init=1, random_state=seed).fit_predict(x)
    tau = np.full((g.n, q), 0.0)
    tau[np.arange(g.n), labels] = 1.0
    return _clamp_rows(tau)


def _random_init(n: int, q: int, rng) -> np.ndarray:
    return _clamp_rows(rng.dirichlet(np.ones(q), size=n))


def map_assignment(tau: np.ndarray, q: int) -> Assignment:
    """Row-wise argmax posterior labels; ties go to the smallest index."""
    return Assignment(np.argmax(tau, axis=1), q)


# --------------------------------------------------------------------------
# main fit loop
# --------------------------------------------------------------------------


def vem_fit(
    g: ObservedGraph,
    q: int,
    family=None,
    config: FitConfig | None = None,
    seed: int = 0,
) -> FitResult:
    """Variational EM with restarts; returns the best final bound.

    The first restart uses the configured initializer (row k-means by
    default), the remaining ones are random.  Every trace is retained in
    ``diagnostics["restart_traces"]``; the bound is nondecreasing along
    each (slack 1e-9).
    """
    config = config or FitConfig()
    family = get_family(family if family is not None else g.family_id)
    if q < 1:
        raise ConfigError("q must be >= 1")
    if q > g.n:
        raise ConfigError(f"q={q} exceeds the number of nodes n={g.n}")
    g = ObservedGraph(g.values, g.mask, family_id=family.name)

    best = None
    traces, finals = [], []
    flags = {"floored": 0, "empty_cells": 0}
    for restart in range(config.n_restarts):
        child = np.random.default_rng([seed, restart])
        if restart == 0 and config.init == "warm":
            tau = _clamp_rows(np.array(config.warm_tau, dtype=float))
        elif restart == 0 and config.init == "kmeans" and q > 1:
            tau = _kmeans_init(g, q, seed)
        elif q == 1:
            tau = np.ones((g.n, 1))
        else:
            tau = _random_init(g.n, q, child)

        params, ev = _m_step_impl(g, tau, family, config.prop_floor)
        floored, emptied = ev["floored"], ev["empty_cells"] > 0
        trace = [elbo(g, tau, params)]
        converged = False
        for _ in range(config.max_iters):
            tau = e_step(g, tau, params)
            params, ev = _m_step_impl(g, tau, family, config.prop_floor)
            floored |= ev["floored"]
            emptied |= ev["empty_cells"] > 0
            trace.append(elbo(g, tau, params))
            if abs(trace[-1] - trace[-2]) <= config.elbo_rel_tol * (
                abs(trace[-2]) + 1e-12
            ):
                converged = True
                break
        flags["floored"] += int(floored)
        flags["empty_cells"] += int(emptied)
        traces.append(trace)
        finals.append(trace[-1])
        if best is None or trace[-1] > best["final"]:
            best = {
                "final": trace[-1],
                "params": params,
                "tau": tau,
                "trace": trace,
                "converged": converged,
                "restart": restart,
            }

    return FitResult(
        params=best["params"],
        tau=best["tau"],
        elbo_trace=best["trace"],
        n_iters=len(best["trace"]) - 1,
        converged=best["converged"],
        restart_id=best["restart"],
        map_labels=map_assignment(best["tau"], q),
        diagnostics={
            "restart_traces": traces,
            "restart_final_elbos": finals,
            "prop_floor_restarts": flags["floored"],
            "empty_cell_restarts": flags["empty_cells"],
        },
    )


def exact_observed_loglik(g: ObservedGraph, params: SbmParams) -> float:
    """Exact log-marginal over all Q^n assignments (tiny instances only)."""
    q, n = params.n_blocks, g.n
    if q**n > EXACT_ENUM_LIMIT:
        raise SizeError(f"{q}^{n} assignments exceed the enumeration limit")
    terms = [
        complete_log_likelihood(g, Assignment(np.array(lab), q), params)
        for lab in itertools.product(range(q), repeat=n)
    ]
    return float(logsumexp(terms))
