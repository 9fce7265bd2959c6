"""``kernel-cblb simulate|timing|analyze --config <path>``.

Exit status: 0 on success, 2 for configuration errors, 3 for failures while
running.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .aol import AOLPlugin
from .cblb import run_cblb
from .config import COMMANDS, ConfigError, RunConfig, load_config
from .core import CBLBConfig, Dataset, to_sign_coding
from .dataio import load_analysis_csv, write_csv
from .dgp import ATE_TRUTH, OPTIMAL_VALUE, generate_ate, generate_policy
from .dml import DMLConfig, DMLPlugin
from .minimax import MinimaxPlugin
from .numerics import RngStream
from .timing import QuadraticCostPlugin, benchmark

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

# stream purposes for outer loops; bag-level purposes live in cblb
DATA_STREAM = 10
RUN_STREAM = 11

COVERAGE_HEADER = ("replication", "estimator", "s", "b", "n", "lower", "upper", "point",
                   "covered", "truth", "seconds")
ZIPPLOT_HEADER = ("rank", "lower", "upper", "covered")
TIMING_HEADER = ("method", "estimator", "n", "b", "s", "r", "repetition", "fit_seconds",
                 "resample_seconds", "total_seconds")
ANALYSIS_HEADER = ("estimator", "n_used", "n_dropped", "point", "lower", "upper", "se",
                   "seconds")


def make_plugin(estimator: str, options: dict):
    if estimator == "minimax":
        return MinimaxPlugin(**options)
    if estimator == "dml":
        return DMLPlugin(DMLConfig(**options))
    if estimator in ("aol_value", "aol_criterion"):
        estimand = "value" if estimator == "aol_value" else "criterion"
        return AOLPlugin(estimand=estimand, name=estimator, **options)
    if estimator == "synthetic_quadratic":
        return QuadraticCostPlugin(**options)
    raise ValueError(f"unknown estimator {estimator!r}")


def _design(cfg: RunConfig):
    dgp = cfg.dgp or ("policy" if cfg.estimator.startswith("aol") else "ate")
    if dgp == "policy":
        return generate_policy, OPTIMAL_VALUE
    return generate_ate, ATE_TRUTH


def _cblb_config(cfg: RunConfig, n: int, seed: int) -> CBLBConfig:
    b, s = cfg.bag_plan(n)
    return CBLBConfig(n, b, s, cfg.r, cfg.alpha, seed, cfg.gamma_exponent)


def _simulate_one(cfg: RunConfig, rep: int):
    generate, truth = _design(cfg)
    data = generate(RngStream(cfg.seed, (DATA_STREAM, rep)), cfg.n)
    run_seed = RngStream(cfg.seed, (RUN_STREAM, rep)).derive_seed()
    ccfg = _cblb_config(cfg, cfg.n, run_seed)
    res, _ = run_cblb(data, make_plugin(cfg.estimator, cfg.estimator_options), ccfg)
    seconds = res.wall_time_seconds if cfg.record_seconds else 0.0
    return (rep, cfg.estimator, ccfg.n_bags, ccfg.bag_size, cfg.n, res.lower, res.upper,
            res.point_estimate, int(res.covers(truth)), truth, seconds), res.se


def _simulate_star(args):
    return _simulate_one(*args)


def zipplot_rows(rows, ses):
    """Rank replications by ``|point - truth| / se``, ties by replication."""
    keyed = []
    for row, se in zip(rows, ses):
        dev = abs(row[7] - row[9])
        z = dev / se if se > 0 else (0.0 if dev == 0 else np.inf)
        keyed.append((z, row[0], row))
    keyed.sort(key=lambda t: (t[0], t[1]))
    return [(rank, row[5], row[6], row[8]) for rank, (_, _, row) in enumerate(keyed, 1)]


def cmd_simulate(cfg: RunConfig, out: Path, workers: int) -> list[Path]:
    tasks = [(cfg, rep) for rep in range(cfg.replications)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            results = list(pool.map(_simulate_star, tasks))
    else:
        results = [_simulate_one(*t) for t in tasks]
    rows = [r for r, _ in results]
    ses = [se for _, se in results]
    paths = [out / "coverage.csv", out / "zipplot.csv"]
    write_csv(paths[0], COVERAGE_HEADER, rows)
    write_csv(paths[1], ZIPPLOT_HEADER, zipplot_rows(rows, ses))
    return paths


def cmd_timing(cfg: RunConfig, out: Path, workers: int) -> list[Path]:
    generate, _ = _design(cfg)
    plugin = make_plugin(cfg.estimator, cfg.estimator_options)
    rows = []
    for i, n in enumerate(cfg.n_grid):
        data = generate(RngStream(cfg.seed, (DATA_STREAM, i)), n)
        ccfg = _cblb_config(cfg, n, RngStream(cfg.seed, (RUN_STREAM, i)).derive_seed())
        for rec in benchmark(plugin, data, ccfg, cfg.repetitions, workers):
            times = ((rec.fit_seconds, rec.resample_seconds, rec.total_seconds)
                     if cfg.record_seconds else (0.0, 0.0, 0.0))
            rows.append((rec.method, rec.estimator, rec.n, rec.b, rec.s, rec.r,
                         rec.repetition, *times))
    path = out / "timing.csv"
    write_csv(path, TIMING_HEADER, rows)
    return [path]


def cmd_analyze(cfg: RunConfig, out: Path, workers: int) -> list[Path]:
    t0 = time.perf_counter()
    loaded = load_analysis_csv(cfg.input_csv, cfg.columns, cfg.filters, cfg.missing_values,
                               cfg.standardize)
    data: Dataset = loaded.data
    if cfg.estimator.startswith("aol"):
        data = to_sign_coding(data)
    ccfg = _cblb_config(cfg, data.n, cfg.seed)
    res, _ = run_cblb(data, make_plugin(cfg.estimator, cfg.estimator_options), ccfg, workers)
    seconds = time.perf_counter() - t0 if cfg.record_seconds else 0.0
    path = out / "analysis.csv"
    write_csv(path, ANALYSIS_HEADER, [(cfg.estimator, data.n, loaded.n_dropped,
                                       res.point_estimate, res.lower, res.upper, res.se,
                                       seconds)])
    return [path]


COMMAND_FUNCS = {"simulate": cmd_simulate, "timing": cmd_timing, "analyze": cmd_analyze}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernel-cblb",
        description="Bag-of-little-bootstraps intervals for kernel causal estimators.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: all cores; timing: 1)")
    parser.add_argument("--output-dir", default=None,
                        help="directory for output CSVs (overrides output_dir)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, args.command)
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be at least 1")
    except ConfigError as exc:
        print(f"kernel-cblb: config error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.workers is not None:
        workers = args.workers
    else:
        workers = 1 if args.command == "timing" else (os.cpu_count() or 1)
    out = Path(args.output_dir or cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = COMMAND_FUNCS[args.command](cfg, out, workers)
    except ConfigError as exc:
        print(f"kernel-cblb: config error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # surfaced as an exit code, never as blank output
        print(f"kernel-cblb: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
