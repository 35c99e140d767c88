from __future__ import annotations

import pytest

from musebench.config import RunConfig, Settings
from musebench.data.loader import make_linear_regression
from musebench.learn.model import Task
from musebench.search.muse import driver
from musebench.search.objective import PipelineObjective

pytestmark = pytest.mark.slow


def test_search_turns_negative_r2_positive():
    config = RunConfig.build(Settings(_env_file=None), task=Task.REGRESS, seed=0)
    objective = PipelineObjective(
        dataset=make_linear_regression(200, 2, noise=0.1, seed=0),
        task=Task.REGRESS,
        dims=config.dims,
        train_fraction=config.train_fraction,
        seed=config.seed,
        iterations=config.iterations,
    )
    outcome = driver(config.grid(), config.search_args(), objective, config.seed)

    assert outcome.best_sc > 0.0
    assert min(e.score for e in outcome.trace) < 0.0
    seeds = [e.score for e in outcome.trace if e.branch == "seed"]
    assert len(seeds) == len(outcome.combinations)
    assert outcome.best_sc >= max(seeds)
