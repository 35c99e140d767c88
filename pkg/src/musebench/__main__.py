from __future__ import annotations

import argparse
import logging
import sys
import time
from collections.abc import Sequence
from pathlib import Path

import structlog

from musebench import __version__
from musebench.config import RunConfig, Settings
from musebench.data.loader import load_csv, load_iris, make_linear_regression
from musebench.data.preprocess import RawDataset
from musebench.diagnostics import TraceReport, trace_study, write_report
from musebench.errors import MuseBenchError
from musebench.learn.model import Task
from musebench.metrics import export_metrics, init_metrics
from musebench.results.record import RunRecord, save_record
from musebench.search.muse import driver, random_search_baseline
from musebench.search.objective import PipelineObjective

DEFAULT_RECORD = "musebench_run.json"
DEFAULT_REPORT = "tracediff.csv"


def configure_logging(level: str) -> None:
    # ConsoleRenderer renders exc_info itself; JSONRenderer needs format_exc_info
    # first or tracebacks serialize as a bare `"exc_info": true`.
    processors: list = [
        structlog.contextvars.merge_contextvars,
        structlog.processors.add_log_level,
        structlog.processors.StackInfoRenderer(),
        structlog.processors.TimeStamper(fmt="iso"),
    ]
    if sys.stderr.isatty():
        processors.append(structlog.dev.ConsoleRenderer())
    else:
        processors.append(structlog.processors.format_exc_info)
        processors.append(structlog.processors.JSONRenderer())

    log_level = logging.getLevelNamesMapping().get(level.upper(), logging.INFO)
    structlog.configure(
        processors=processors,
        wrapper_class=structlog.make_filtering_bound_logger(log_level),
        # stdout carries the result lines; logs go to stderr
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=True,
    )


def load_dataset(task: Task, path: str | None, seed: int) -> RawDataset:
    """A CSV when given; otherwise the bundled fixture for the task."""
    if path:
        return load_csv(path)
    if task is Task.CLASSIFY:
        return load_iris()
    return make_linear_regression(seed=seed)


def cmd_search(config: RunConfig) -> RunRecord:
    logger = structlog.get_logger()
    started = time.monotonic()
    ds = load_dataset(config.task, config.dataset, config.seed)
    objective = PipelineObjective(
        dataset=ds,
        task=config.task,
        dims=config.dims,
        train_fraction=config.train_fraction,
        seed=config.seed,
        iterations=config.iterations,
        reapply_hadamard=config.reapply_hadamard,
    )
    grid = config.grid()
    template = config.search_args()
    logger.info(
        "search_starting",
        task=config.task.value,
        samples=ds.n_samples,
        features=ds.n_features,
        combinations=len(grid.combinations()) * grid.n_trials,
        seed=config.seed,
    )
    outcome = driver(
        grid,
        template,
        objective,
        config.seed,
        workers=config.workers,
        strict_budget=config.strict_budget,
    )
    baseline = None
    if config.baseline:
        baseline = random_search_baseline(
            grid, template, objective, config.seed, workers=config.workers
        )
    record = RunRecord.build(
        config,
        outcome,
        baseline=baseline,
        wall_time_seconds=round(time.monotonic() - started, 3),
    )
    save_record(record, config.out or DEFAULT_RECORD)

    print("best init point", record.best_point)
    print("best score", record.best_score)
    print("best args", outcome.best_params.label)
    if record.worst_params is not None:
        print("worst args", record.worst_params.to_params().label)
    print("lowest score", record.lowest_score)
    if record.baseline is not None:
        print("random search best score", record.baseline.best_score)
    return record


def cmd_tracediff(
    dataset: str | None,
    k: int,
    out: str | Path,
    *,
    task: Task = Task.CLASSIFY,
    single_stage: bool = False,
    seed: int = 0,
) -> list[TraceReport]:
    ds = load_dataset(task, dataset, seed)
    reports = trace_study(
        ds, k, single_stage=single_stage, continuous_target=task is Task.REGRESS
    )
    write_report(reports, out)
    for r in reports:
        print(f"{r.variant},{r.mean_trace_diff!r}")
    return reports


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="musebench",
        description="MUSE initial-point search for variational quantum learners",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="overrides MUSEBENCH_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    search = sub.add_parser("search", help="run the MUSE driver over the grid")
    search.add_argument("--task", choices=[t.value for t in Task], default=Task.CLASSIFY.value)
    search.add_argument("--dataset", default=None, help="CSV path; bundled fixture if omitted")
    search.add_argument("--seed", type=int, default=None)
    search.add_argument("--trials", type=int, default=None, dest="n_trials")
    search.add_argument("--depth", type=int, default=None)
    search.add_argument("--epsilon", type=float, default=None)
    search.add_argument("--alpha", type=float, default=None)
    search.add_argument("--beta", type=float, default=None)
    search.add_argument("--workers", type=int, default=None)
    search.add_argument("--dims", type=int, default=None, help="features after reduction")
    search.add_argument("--iterations", type=int, default=None, help="optimizer budget")
    search.add_argument(
        "--baseline", action="store_true", help="also run the 2 x depth random search"
    )
    search.add_argument(
        "--no-strict-budget",
        action="store_false",
        dest="strict_budget",
        default=None,
        help="let each instantiation follow the recursion without the 2 x depth cap",
    )
    search.add_argument("--out", default=DEFAULT_RECORD, help="RunRecord JSON path")
    search.add_argument("--metrics-out", default=None, help="write Prometheus text metrics here")

    trace = sub.add_parser("tracediff", help="trace-difference study of preprocessing variants")
    trace.add_argument("--task", choices=[t.value for t in Task], default=Task.CLASSIFY.value)
    trace.add_argument("--dataset", default=None)
    trace.add_argument("--k", type=int, default=None, help="reduced feature count")
    trace.add_argument("--single-stage", action="store_true", help="add scaler-only and reducer-only rows")
    trace.add_argument("--out", default=DEFAULT_REPORT)
    return parser


def _export_metrics(path: str) -> None:
    # the run record is already on disk; a failed export does not fail the run
    try:
        export_metrics(path)
    except OSError:
        structlog.get_logger().warning("metrics_export_failed", path=path, exc_info=True)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    settings = Settings()
    configure_logging(args.log_level or settings.log_level)
    logger = structlog.get_logger()
    init_metrics(version=__version__, task=args.task)
    logger.info("musebench_starting", version=__version__, command=args.command)

    try:
        if args.command == "search":
            config = RunConfig.build(
                settings,
                task=args.task,
                dataset=args.dataset,
                seed=args.seed,
                n_trials=args.n_trials,
                depth=args.depth,
                epsilon=args.epsilon,
                alpha=args.alpha,
                beta=args.beta,
                workers=args.workers,
                dims=args.dims,
                iterations=args.iterations,
                strict_budget=args.strict_budget,
                baseline=args.baseline,
                out=args.out,
            )
            cmd_search(config)
            if args.metrics_out:
                _export_metrics(args.metrics_out)
        else:
            cmd_tracediff(
                args.dataset,
                args.k if args.k is not None else settings.tracediff_k,
                args.out,
                task=Task(args.task),
                single_stage=args.single_stage,
                seed=settings.seed,
            )
    except (MuseBenchError, OSError):
        logger.error("command_failed", command=args.command, exc_info=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
