"""Monte Carlo experiment runner.

A study simulates graphs on a grid of (n, rho) settings, estimates the
parameters on each replicate (complete-data MLE or variational EM),
aligns the estimate to the truth by parameter matching, and accumulates
the standardized residuals sqrt(n) (p_hat - p*) and
sqrt(n(n-1)) (a_hat - a*) next to their theoretical limit covariances.

Replicates are independent; each one draws its randomness from a stream
derived as (master_seed, grid_index, replicate_index), so reports are
identical for a fixed master seed regardless of the worker count
(``SBMISS_MAX_WORKERS`` caps an optional process pool; the default is
serial).  Failing replicates are flagged and retained, never dropped:
the per-status counts always sum to the replicate count.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .asymptotics import theoretical_limits
from .errors import ConfigError, EstimationError, EstimationWarning, SizeError
from .inference import FitConfig, complete_mle, vem_fit
from .model import (
    SbmParams,
    align,
    apply_permutation,
    hamming_distance_up_to_perm,
    params_from_means,
)
from .sampling import MaskDesign, check_no_isolated_node
from .simulate import simulate_observed

__all__ = [
    "STUDIES",
    "ExperimentConfig",
    "ExperimentReport",
    "run_experiment",
    "normality_summary",
    "resolve_rho",
]

STUDIES = ("clt_props", "clt_conn", "rho_inflation", "threshold_sweep", "vem_recovery")
ESTIMATORS = ("complete_mle", "vem")
ELBO_SLACK = 1e-9
STATUS_ORDER = ("estimation_failed", "isolated_nodes", "empty_cells", "non_convergence", "ok")


def resolve_rho(entry, n: int) -> float:
    """Resolve a grid entry into a probability: a number, or a rule like
    {"rule": "logn_over_n", "coef": 6.0}."""
    if isinstance(entry, (int, float)):
        rho = float(entry)
    elif isinstance(entry, dict):
        rule = entry.get("rule")
        if rule == "fixed":
            rho = float(entry["value"])
        elif rule == "logn_over_n":
            rho = float(entry["coef"]) * math.log(n) / n
        else:
            raise ConfigError(f"unknown rho rule {rule!r}")
    else:
        raise ConfigError(f"bad rho grid entry {entry!r}")
    if not 0.0 < rho <= 1.0:
        if rho > 1.0:
            rho = 1.0
        else:
            raise ConfigError(f"resolved rho {rho} is not in (0, 1]")
    return rho


@dataclass
class ExperimentConfig:
    study: str
    family: str
    props: list
    conn_means: list | None = None
    conn_natural: list | None = None
    n_grid: list = field(default_factory=list)
    rho_grid: list = field(default_factory=list)
    replicates: int = 100
    master_seed: int | None = None
    estimator: str = "complete_mle"
    fit: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.fit is None:
            self.fit = {}
        if self.study not in STUDIES:
            raise ConfigError(f"study must be one of {STUDIES}, got {self.study!r}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}")
        if self.study == "vem_recovery" and self.estimator != "vem":
            raise ConfigError("vem_recovery requires the vem estimator")
        if (self.conn_means is None) == (self.conn_natural is None):
            raise ConfigError("give exactly one of conn_means or conn_natural")
        if self.replicates < 1 or not self.n_grid or not self.rho_grid:
            raise ConfigError("need replicates >= 1 and nonempty grids")

    def params_star(self) -> SbmParams:
        if self.conn_means is not None:
            return params_from_means(self.family, self.props, self.conn_means)
        return SbmParams(
            np.asarray(self.props, dtype=float),
            np.asarray(self.conn_natural, dtype=float),
            self.family,
        )

    def to_dict(self) -> dict:
        return {
            "study": self.study,
            "family": self.family,
            "props": list(self.props),
            "conn_means": self.conn_means,
            "conn_natural": self.conn_natural,
            "n_grid": list(self.n_grid),
            "rho_grid": list(self.rho_grid),
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "estimator": self.estimator,
            "fit": dict(self.fit),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad experiment config: {exc}") from None


@dataclass
class ExperimentReport:
    study: str
    config: dict
    grid: list
    summary: dict
    schema_version: int = 1

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "study": self.study,
            "config": self.config,
            "grid": self.grid,
            "summary": self.summary,
        }


def _run_replicate(task) -> dict:
    params_star, estimator, fit_kwargs, seed_tuple, n, rho = task
    g, truth = simulate_observed(
        params_star, MaskDesign.random_dyad(rho), n, seed=list(seed_tuple)
    )
    out = {
        "isolated_nodes": not check_no_isolated_node(g.mask),
        "empty_cells": False,
        "non_convergence": False,
        "estimation_failed": False,
        "hamming": None,
        "elbo_violations": None,
    }
    params_hat = None
    if estimator == "complete_mle":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", EstimationWarning)
            try:
                params_hat = complete_mle(g, truth.z_star)
            except EstimationError:
                out["estimation_failed"] = True
        out["empty_cells"] = any(
            issubclass(w.category, EstimationWarning) for w in caught
        )
    else:
        cfg = FitConfig(**fit_kwargs) if fit_kwargs else FitConfig()
        fit = vem_fit(g, params_star.n_blocks, params_star.family, cfg, seed=seed_tuple[-1])
        params_hat = fit.params
        out["non_convergence"] = not fit.converged
        out["empty_cells"] = fit.diagnostics["empty_cell_restarts"] > 0
        dist, _ = hamming_distance_up_to_perm(fit.map_labels, truth.z_star)
        out["hamming"] = dist / n
        out["elbo_violations"] = sum(
            1
            for tr in fit.diagnostics["restart_traces"]
            for a, b in zip(tr, tr[1:])
            if b < a - ELBO_SLACK
        )
        out["elbo_steps"] = sum(
            len(tr) - 1 for tr in fit.diagnostics["restart_traces"]
        )

    if params_hat is not None:
        perm = align(params_hat, params_star)
        aligned = apply_permutation(params_hat, perm)
        out["perm"] = list(perm)
        out["prop_resid"] = (
            math.sqrt(n) * (aligned.props - params_star.props)
        ).tolist()
        out["conn_resid"] = (
            math.sqrt(n * (n - 1)) * (aligned.conn - params_star.conn)
        ).tolist()
        out["conn_abs_err"] = float(np.mean(np.abs(aligned.conn - params_star.conn)))
    for status in STATUS_ORDER[:-1]:
        if out[status]:
            out["status"] = status
            break
    else:
        out["status"] = "ok"
    return out


def _aggregate_point(config, params_star, n, rho, results) -> dict:
    point = {
        "n": n,
        "rho": rho,
        "replicates": config.replicates,
        "status_counts": {s: 0 for s in STATUS_ORDER},
        "failure_flags": {
            "isolated_nodes": 0,
            "empty_cells": 0,
            "non_convergence": 0,
            "estimation_failed": 0,
        },
        "align_perms": [],
        "prop_residuals": [],
        "conn_residuals": [],
        "conn_abs_err": [],
    }
    limits = theoretical_limits(params_star, rho)
    point["theory"] = {
        "sigma_props": limits.sigma_props.tolist(),
        "sigma_conn": limits.sigma_conn.tolist(),
        "rho": rho,
    }
    hamming, violations, steps = [], 0, 0
    for res in results:
        point["status_counts"][res["status"]] += 1
        for k in point["failure_flags"]:
            point["failure_flags"][k] += int(res[k])
        if "prop_resid" in res:
            point["prop_residuals"].append(res["prop_resid"])
            point["conn_residuals"].append(res["conn_resid"])
            point["align_perms"].append(res["perm"])
            point["conn_abs_err"].append(res["conn_abs_err"])
        if res["hamming"] is not None:
            hamming.append(res["hamming"])
            violations += res["elbo_violations"]
            steps += res["elbo_steps"]
    if config.estimator == "vem":
        point["hamming"] = hamming
        point["elbo_violations"] = violations
        point["elbo_steps"] = steps
    point["empirical"] = {}
    pr = np.asarray(point["prop_residuals"])
    cr = np.asarray(point["conn_residuals"])
    if pr.size:
        point["empirical"] = {
            "prop_mean": pr.mean(axis=0).tolist(),
            "prop_cov": np.cov(pr.T, bias=False).tolist() if pr.shape[0] > 1 else None,
            "conn_mean": cr.mean(axis=0).tolist(),
            "conn_var": cr.var(axis=0, ddof=1).tolist() if cr.shape[0] > 1 else None,
            "conn_bias": (cr.mean(axis=0) / math.sqrt(n * (n - 1))).tolist(),
        }
    return point


def _summarize(config, grid: list) -> dict:
    summary: dict = {"study": config.study}
    if config.study == "clt_props":
        rel = []
        for p in grid:
            emp = p["empirical"].get("prop_cov")
            ref = np.asarray(p["theory"]["sigma_props"])
            if emp is not None:
                rel.append(
                    float(np.linalg.norm(np.asarray(emp) - ref) / np.linalg.norm(ref))
                )
        summary["prop_cov_rel_frobenius"] = rel
    elif config.study in ("clt_conn", "rho_inflation", "threshold_sweep"):
        ratios, med_err, iso_rate = [], [], []
        for p in grid:
            if p["empirical"].get("conn_var") is not None:
                emp = np.asarray(p["empirical"]["conn_var"])
                ref = np.asarray(p["theory"]["sigma_conn"])
                ratios.append((emp / ref).tolist())
            med_err.append(float(np.median(p["conn_abs_err"])))
            iso_rate.append(p["failure_flags"]["isolated_nodes"] / p["replicates"])
        summary["conn_var_over_theory"] = ratios
        summary["median_conn_abs_err"] = med_err
        summary["isolated_node_rate"] = iso_rate
        if config.study == "rho_inflation" and len(grid) >= 2:
            base = np.asarray(grid[0]["empirical"]["conn_var"])
            summary["var_ratio_vs_first"] = [
                (np.asarray(p["empirical"]["conn_var"]) / base).tolist() for p in grid
            ]
            summary["theory_ratio_vs_first"] = [
                grid[0]["rho"] / p["rho"] for p in grid
            ]
    elif config.study == "vem_recovery":
        summary["recovery_rate_2pct"] = [
            float(np.mean(np.asarray(p["hamming"]) <= 0.02)) for p in grid
        ]
        summary["elbo_violations"] = [p["elbo_violations"] for p in grid]
        summary["elbo_steps"] = [p["elbo_steps"] for p in grid]
    return summary


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run the configured study; deterministic given the master seed."""
    if config.master_seed is None:
        raise ConfigError("master_seed is required to run an experiment")
    params_star = config.params_star()
    grid_points = [(n, entry) for n in config.n_grid for entry in config.rho_grid]
    n_workers = int(os.environ.get("SBMISS_MAX_WORKERS", "1"))
    grid = []
    for gi, (n, entry) in enumerate(grid_points):
        rho = resolve_rho(entry, n)
        fit_kwargs = dict(config.fit)
        tasks = [
            (params_star, config.estimator, fit_kwargs, (config.master_seed, gi, rep), n, rho)
            for rep in range(config.replicates)
        ]
        if n_workers > 1:
            with ProcessPoolExecutor(max_workers=n_workers) as pool:
                results = list(pool.map(_run_replicate, tasks))
        else:
            results = [_run_replicate(t) for t in tasks]
        grid.append(_aggregate_point(config, params_star, n, rho, results))
    return ExperimentReport(
        study=config.study,
        config=config.to_dict(),
        grid=grid,
        summary=_summarize(config, grid),
    )


def normality_summary(residuals, theoretical_sd: float) -> dict:
    """Distributional diagnostics of standardized residuals.

    Divides by the theoretical standard deviation, then reports moments,
    the Kolmogorov-Smirnov distance to the standard normal, and QQ data
    points for external plotting.  Needs at least 100 residuals;
    (near-)constant samples are flagged degenerate instead of tested.
    """
    x = np.asarray(residuals, dtype=float)
    if x.size < 100:
        raise SizeError(f"need at least 100 residuals, got {x.size}")
    if np.ptp(x) < 1e-12:
        return {"degenerate": True, "n": int(x.size)}
    z = x / theoretical_sd
    order = np.sort(z)
    probs = (np.arange(1, z.size + 1) - 0.5) / z.size
    return {
        "degenerate": False,
        "n": int(z.size),
        "mean": float(z.mean()),
        "std": float(z.std(ddof=1)),
        "skewness": float(stats.skew(z)),
        "excess_kurtosis": float(stats.kurtosis(z)),
        "ks_distance": float(stats.kstest(z, "norm").statistic),
        "qq": {
            "theoretical": stats.norm.ppf(probs).tolist(),
            "sample": order.tolist(),
        },
    }
