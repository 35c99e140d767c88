#!/usr/bin/env python3
"""Repeat the MUSE driver over several seeds and compare it with random starts.

For every seed the same grid is searched twice: once by the MUSE driver and
once by scoring random initial points per combination (``--random-evals``,
default 2 x depth; 1 gives "one random initialization per combination").
Per-seed best scores and the medians are printed as CSV on stdout.

Usage:
    python scripts/seed_sweep.py --seeds 0 1 2 3 4
    python scripts/seed_sweep.py --task regress --seeds 0 1 2 --random-evals 1

Settings come from MUSEBENCH_* environment variables like the CLI.
"""
from __future__ import annotations

import argparse
import statistics

import structlog

from musebench.__main__ import configure_logging, load_dataset
from musebench.config import RunConfig, Settings
from musebench.search.muse import driver, random_search_baseline
from musebench.search.objective import PipelineObjective


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--task", choices=["classify", "regress"], default="classify")
    parser.add_argument("--dataset", default=None)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--random-evals", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args()

    settings = Settings()
    configure_logging(settings.log_level)
    logger = structlog.get_logger()

    muse_scores: list[float] = []
    random_scores: list[float] = []
    print("seed,muse_best,random_best,muse_params")
    for seed in args.seeds:
        config = RunConfig.build(
            settings, task=args.task, dataset=args.dataset, seed=seed, workers=args.workers
        )
        ds = load_dataset(config.task, config.dataset, seed)
        objective = PipelineObjective(
            dataset=ds,
            task=config.task,
            dims=config.dims,
            train_fraction=config.train_fraction,
            seed=seed,
            iterations=config.iterations,
            reapply_hadamard=config.reapply_hadamard,
        )
        grid, template = config.grid(), config.search_args()
        found = driver(
            grid, template, objective, seed,
            workers=config.workers, strict_budget=config.strict_budget,
        )
        rand = random_search_baseline(
            grid, template, objective, seed,
            evals_per_combo=args.random_evals, workers=config.workers,
        )
        muse_scores.append(found.best_sc)
        random_scores.append(rand.best_sc)
        print(f"{seed},{found.best_sc!r},{rand.best_sc!r},{found.best_params.label}")
        logger.info("seed_done", seed=seed, muse=found.best_sc, random=rand.best_sc)

    print(f"median,{statistics.median(muse_scores)!r},{statistics.median(random_scores)!r},")


if __name__ == "__main__":
    main()
