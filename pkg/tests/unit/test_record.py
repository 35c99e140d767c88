from __future__ import annotations

import json
import math

import pytest

from musebench.config import RunConfig, Settings
from musebench.results.record import (
    ParamsRecord,
    RunRecord,
    SearchSummary,
    atomic_write_text,
    load_record,
    save_record,
)
from musebench.search.muse import GridParams, GridSpec, SearchArgs, driver, random_search_baseline
from tests.conftest import peak_score


class _SelectionFails:
    def run(self, point, params):
        if params.reducer.value == "f":
            raise FloatingPointError("non-finite score")
        return peak_score(point), point


@pytest.fixture
def config() -> RunConfig:
    return RunConfig.build(
        Settings(_env_file=None),
        dims=2,
        depth=2,
        n_trials=1,
        feat_ans=[(1, 1)],
        sca_red=[("mm", "pca"), ("std", "f")],
    )


@pytest.fixture
def outcome(config):
    return driver(config.grid(), config.search_args(), _SelectionFails(), config.seed)


def test_params_record_round_trip():
    params = GridParams(2, 3, "std", "f")
    assert ParamsRecord.of(params).to_params() == params
    assert ParamsRecord.of(None) is None


def test_summary_fields(outcome):
    summary = SearchSummary.of(outcome)
    assert summary.best_score == outcome.best_sc
    assert summary.best_params.to_params().label == "fm1-an1-mm+pca"
    # the only successful combination is both best and worst
    assert summary.worst_params == summary.best_params
    assert summary.lowest_score == min(e.score for e in outcome.trace)
    assert summary.improvement_ratio == pytest.approx(summary.best_score / summary.lowest_score)
    assert len(summary.trace) == outcome.n_evaluations

    failed = [c for c in summary.combinations if c.error is not None]
    assert len(failed) == 1
    assert failed[0].best_score == -math.inf
    assert failed[0].error_reason == "training"
    assert failed[0].best_point is None


def test_combination_records_carry_localities(outcome):
    ok = next(c for c in SearchSummary.of(outcome).combinations if c.error is None)
    assert ok.localities == 1 + sum(m != "neighbor" for m in ok.moves)


def test_run_record_round_trip(tmp_path, config, outcome):
    baseline = random_search_baseline(
        config.grid(), config.search_args(), _SelectionFails(), config.seed
    )
    record = RunRecord.build(config, outcome, baseline=baseline, wall_time_seconds=1.5)
    path = save_record(record, tmp_path / "runs" / "record.json")

    raw = json.loads(path.read_text(encoding="utf-8"), parse_constant=str)
    assert raw["config"]["depth"] == 2
    assert "-Infinity" in {c["best_score"] for c in raw["combinations"]}

    loaded = load_record(path)
    assert loaded == record
    assert loaded.baseline.best_score == baseline.best_sc
    assert loaded.config.sca_red == config.sca_red


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    target = tmp_path / "out.txt"
    atomic_write_text(target, "one")
    atomic_write_text(target, "two")
    assert target.read_text(encoding="utf-8") == "two"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


class _StdFailsAfterSeed:
    def __init__(self) -> None:
        self.std_calls = 0

    def run(self, point, params):
        if params.scaler.value == "std":
            self.std_calls += 1
            if self.std_calls > 1:
                raise FloatingPointError("non-finite score")
            return 0.01, point
        return 0.5, point


def test_failed_partial_trace_is_kept_apart(config):
    out = driver(config.grid(), config.search_args(), _StdFailsAfterSeed(), config.seed)
    summary = SearchSummary.of(out)
    assert summary.lowest_score == 0.5
    assert summary.improvement_ratio == 1.0
    assert [(e.branch, e.score) for e in summary.failed_trace] == [("seed", 0.01)]
    assert all(e.params.scaler.value == "mm" for e in summary.trace)
