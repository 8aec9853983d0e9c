"""Batch command line: each subcommand runs one experiment and writes a CSV.

Output goes to --out (plus a Details_*.json file and a gnuplot script next
to it) or to stdout. Exit codes: 0 success, 2 bad configuration,
3 numerical failure.
"""

import argparse
import sys
from functools import partial
from typing import Callable, Optional, Sequence

from pydantic import ValidationError

from btlbounds.core import logger
from btlbounds.core.errors import ConfigError, ModelError, NumericalError
from btlbounds.core.storage import (
    load_json,
    resolve_output_path,
    write_csv,
    write_details,
    write_plot_script,
)
from btlbounds.models.models import Norm, ResultTable
from btlbounds.models.schemas import ExperimentConfig
from btlbounds.services import experiments

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

Runner = Callable[[ExperimentConfig], ResultTable]


def _ha_sweep(cfg: ExperimentConfig) -> ResultTable:
    # the HCRB columns need a > 2; below that only the IT curve is defined
    return experiments.run_ha_sweeps(cfg, include_it=True, include_hcrb=cfg.a > 2)


# name -> (runner, experiment kind, x column, y columns, help)
SUBCOMMANDS: dict[str, tuple[Runner, Optional[str], str, list[str], str]] = {
    "simulate": (
        experiments.run_simulate, None, "n", ["w_ij"],
        "columns: n, trial, i, j, n_ij, w_ij, w_ji, lambda_i, lambda_j",
    ),
    "em-fit": (
        experiments.run_em_fit, None, "n", ["lambda_hat"],
        "columns: n, trial, item, lambda_true, lambda_hat, iterations, converged",
    ),
    "mse-vs-bounds": (
        experiments.run_mse_vs_bounds, "mse-vs-bounds", "n",
        ["em_mse", "it_bound", "cor1_bound", "bcrb"],
        "columns: experiment, k, a, b, topology, n, trials, seed, em_mse, em_mse_ci95, "
        "it_bound, log_it_bound, cor1_bound, bcrb",
    ),
    "it-bound": (
        partial(experiments.run_bounds, include_bcrb=False), "topology-it", "n", ["it_bound", "cor1_bound"],
        "columns: experiment, k, a, b, topology, topology_seed, n, norm, r, it_bound, "
        "log_it_bound, cor1_bound, bcrb (nan)",
    ),
    "bcrb": (
        partial(experiments.run_bounds, include_it=False), "topology-bcrb", "n", ["bcrb"],
        "columns: experiment, k, a, b, topology, topology_seed, n, norm, r, it_bound (nan), "
        "log_it_bound (nan), cor1_bound (nan), bcrb",
    ),
    "sweep-topology": (
        experiments.run_topology_sweep, "topology-sweep", "n", ["it_bound", "bcrb"],
        "columns: experiment, k, a, b, topology, topology_seed, n, norm, r, it_bound, "
        "log_it_bound, cor1_bound, bcrb",
    ),
    "phase-transition": (
        experiments.run_phase_transition, "phase-transition", "normalized_p", ["it_bound", "bcrb"],
        "columns: experiment, k, a, b, n, normalized_p, p, seed, seeds, mean_edges, "
        "connected_fraction, it_bound, log_it_bound, bcrb",
    ),
    "hcrb": (
        partial(experiments.run_ha_sweeps, include_it=False), "ha-hcrb", "theta", ["hcrb_total", "bcrb"],
        "columns: experiment, k, a, b, topology, n, alpha, theta, it_bound (nan), "
        "log_it_bound (nan), basic_it_bound (nan), hcrb_total, hcrb_skills, bcrb",
    ),
    "ha-sweep": (
        _ha_sweep, "ha-it", "theta", ["it_bound", "basic_it_bound", "hcrb_total"],
        "columns: experiment, k, a, b, topology, n, alpha, theta, it_bound, log_it_bound, "
        "basic_it_bound, hcrb_total, hcrb_skills, bcrb",
    ),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="btl-bounds",
        description="Bayesian BTL simulation, EM fitting and Bayes-risk lower bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, _, _, _, columns) in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=columns, description=columns)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--out", help="CSV path; stdout when omitted")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--workers", type=int, help="threads for independent trials")
        p.add_argument("--norm", choices=[n.value for n in Norm])
        p.add_argument("--r", type=float, help="risk exponent")
    return parser


def load_config(args: argparse.Namespace, experiment: Optional[str]) -> ExperimentConfig:
    """Config document first, then CLI flags on top."""
    document = load_json(args.config) if args.config else {}
    if not isinstance(document, dict):
        raise ConfigError("config must be a JSON object")
    overrides = {
        "seed": args.seed,
        "trials": args.trials,
        "workers": args.workers,
        "norm": args.norm,
        "r": args.r,
        "out_path": args.out,
    }
    document.update({key: value for key, value in overrides.items() if value is not None})
    if experiment is not None:
        document["experiment"] = experiment
    return ExperimentConfig.model_validate(document)


def emit(table: ResultTable, cfg: ExperimentConfig, x_column: str, y_columns: Sequence[str]) -> None:
    path = write_csv(table.columns, table.rows, resolve_output_path(cfg.out_path))
    if path is None:
        return
    details_path = write_details(path, table.details)
    logger.info(f"Wrote details path={details_path}")
    script = write_plot_script(path, x_column, y_columns, table.columns)
    if script:
        logger.info(f"Wrote plot script path={script}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    runner, experiment, x_column, y_columns, _ = SUBCOMMANDS[args.command]
    try:
        cfg = load_config(args, experiment)
        logger.info(f"Running command={args.command} experiment={cfg.experiment} seed={cfg.seed}")
        table = runner(cfg)
        emit(table, cfg, x_column, y_columns)
    except (ConfigError, ModelError, ValidationError) as e:
        logger.error(f"Configuration error in command={args.command}: {e}")
        return EXIT_CONFIG
    except NumericalError as e:
        logger.error(f"Numerical failure in command={args.command}: {e}")
        return EXIT_NUMERICAL
    logger.info(f"Finished command={args.command} rows={len(table.rows)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
