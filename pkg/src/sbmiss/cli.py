"""Command-line interface.

Four subcommands map onto the library: ``simulate`` draws a graph and
its ground truth, ``fit`` runs the variational estimator on a graph
CSV, ``diagnose`` scores a fit against stored ground truth, and
``experiment`` runs a Monte Carlo study from a JSON config.  Machine
output goes to ``--out`` files; a short human summary goes to stdout.
Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import graph_io
from .asymptotics import elr, profile_elr
from .errors import ConfigError, SbmissError
from .harness import ExperimentConfig, run_experiment
from .inference import FitConfig, vem_fit
from .model import (
    align,
    apply_permutation,
    assumption_report,
    class_distinctness,
    hamming_distance_up_to_perm,
    param_distance,
    params_from_means,
    symmetry_group,
)
from .sampling import MaskDesign, rho_hat
from .simulate import simulate_observed

# Default planted structure per family when no parameter file is given:
# strong diagonal, weak off-diagonal cell means.
DEFAULT_MEANS = {"bernoulli": (0.7, 0.2), "poisson": (8.0, 1.0), "gaussian": (1.0, 0.0)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbmiss")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="draw a graph and its ground truth")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--q", type=int, required=True)
    sim.add_argument("--family", required=True, choices=["bernoulli", "poisson", "gaussian"])
    sim.add_argument("--design", choices=["dyad", "node", "double"], default="dyad")
    sim.add_argument("--rho", type=float)
    sim.add_argument("--rho0", type=float)
    sim.add_argument("--rho1", type=float)
    sim.add_argument("--symmetric", action="store_true")
    sim.add_argument("--params", help="JSON file {props, conn, family} overriding defaults")
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--out", required=True)

    fit = sub.add_parser("fit", help="variational fit of a graph CSV")
    fit.add_argument("--input", required=True)
    fit.add_argument("--q", type=int, required=True)
    fit.add_argument("--family", required=True, choices=["bernoulli", "poisson", "gaussian"])
    fit.add_argument("--restarts", type=int, default=10)
    fit.add_argument("--max-iters", type=int, default=200)
    fit.add_argument("--tol", type=float, default=1e-6)
    fit.add_argument("--init", choices=["kmeans", "random"], default="kmeans")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", required=True)

    diag = sub.add_parser("diagnose", help="score a fit against stored ground truth")
    diag.add_argument("--fit", required=True)
    diag.add_argument("--truth", required=True)
    diag.add_argument("--out", required=True)

    exp = sub.add_parser("experiment", help="run a Monte Carlo study from a JSON config")
    exp.add_argument("--config", required=True)
    exp.add_argument("--seed", type=int, help="master seed (overrides the config)")
    exp.add_argument("--out", required=True)
    return parser


def _default_params(family: str, q: int):
    hi, lo = DEFAULT_MEANS[family]
    means = np.full((q, q), lo)
    np.fill_diagonal(means, hi)
    return params_from_means(family, np.full(q, 1.0 / q), means)


def _cmd_simulate(args) -> int:
    if args.params:
        from .model import SbmParams

        params = SbmParams.from_dict(graph_io.read_json(args.params))
        if params.n_blocks != args.q:
            raise ConfigError(f"--q {args.q} does not match the parameter file")
        if params.family.name != args.family:
            raise ConfigError("--family does not match the parameter file")
    else:
        params = _default_params(args.family, args.q)
    if args.design == "double":
        if args.rho0 is None or args.rho1 is None:
            raise ConfigError("double design needs --rho0 and --rho1")
        design = MaskDesign.double_standard(args.rho0, args.rho1, symmetric=args.symmetric)
    else:
        if args.rho is None:
            raise ConfigError(f"{args.design} design needs --rho")
        maker = MaskDesign.random_dyad if args.design == "dyad" else MaskDesign.random_node
        design = maker(args.rho, symmetric=args.symmetric)
    g, truth = simulate_observed(params, design, args.n, seed=args.seed)
    graph_io.write_graph(args.out, g)
    truth_path = Path(args.out).with_suffix(".truth.json")
    graph_io.write_truth(truth_path, truth)
    print(
        f"simulated n={args.n} {args.family} graph, design={args.design}, "
        f"observed fraction={rho_hat(g.mask):.4f}"
    )
    print(f"wrote {args.out} and {truth_path}")
    return 0


def _cmd_fit(args) -> int:
    g = graph_io.read_graph(args.input, family_id=args.family)
    config = FitConfig(
        n_restarts=args.restarts,
        max_iters=args.max_iters,
        elbo_rel_tol=args.tol,
        init=args.init,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = vem_fit(g, args.q, args.family, config, seed=args.seed)
    graph_io.write_fit(args.out, fit)
    print(
        f"fit: final bound={fit.elbo_trace[-1]:.4f} after {fit.n_iters} iterations "
        f"(restart {fit.restart_id}, converged={fit.converged})"
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_diagnose(args) -> int:
    fit = graph_io.read_fit(args.fit)
    truth = graph_io.read_truth(args.truth)
    params_hat, params_star = fit["params"], truth["params_star"]
    z_star, design = truth["z_star"], truth["design"]
    perm = align(params_hat, params_star)
    aligned = apply_permutation(params_hat, perm)
    dist, _ = hamming_distance_up_to_perm(fit["map_labels"], z_star)
    rho = design.rho if design.kind == "dyad" else None
    report = {
        "schema_version": graph_io.SCHEMA_VERSION,
        "align_perm": list(perm),
        "param_max_error": param_distance(aligned, params_star),
        "hamming_error": dist / z_star.n,
        "class_distinctness_truth": class_distinctness(params_star),
        "class_distinctness_fit": class_distinctness(params_hat),
        "symmetry_size_truth": len(symmetry_group(params_star)),
        "symmetry_size_fit": len(symmetry_group(params_hat)),
        "assumptions": assumption_report(params_star, rho=rho, n=z_star.n),
        "elr": None,
        "profile_elr": None,
        "rho": rho,
    }
    if rho is not None:
        report["elr"] = elr(params_hat, fit["map_labels"], z_star, params_star, rho)
        report["profile_elr"] = profile_elr(fit["map_labels"], z_star, params_star, rho)
    graph_io.write_json(args.out, report)
    print(
        f"diagnose: hamming error={report['hamming_error']:.4f}, "
        f"param max error={report['param_max_error']:.4f}, "
        f"elr={report['elr']}"
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    raw = graph_io.read_json(args.config)
    config = ExperimentConfig.from_dict(raw)
    if args.seed is not None:
        config.master_seed = args.seed
    if config.master_seed is None:
        raise ConfigError("give --seed or put master_seed in the config")
    report = run_experiment(config)
    graph_io.write_json(args.out, report.to_dict())
    for point in report.grid:
        ok = point["status_counts"]["ok"]
        print(
            f"{report.study}: n={point['n']} rho={point['rho']:.4f} "
            f"ok={ok}/{point['replicates']}"
        )
    print(f"wrote {args.out}")
    return 0


COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "diagnose": _cmd_diagnose,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (SbmissError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
