"""RunRecord: the self-describing JSON document a ``search`` run leaves behind."""

from __future__ import annotations

import math
import os
import tempfile
from pathlib import Path

import structlog
from pydantic import BaseModel, ConfigDict

from musebench.config import RunConfig
from musebench.data.preprocess import Reducer, Scaler
from musebench.search.muse import CombinationResult, GridParams, SearchOutcome, TraceEntry

logger = structlog.get_logger()


class _Model(BaseModel):
    # -inf marks failed combinations; keep it as a JSON constant
    model_config = ConfigDict(ser_json_inf_nan="constants", frozen=True)


class ParamsRecord(_Model):
    fm_reps: int
    ansatz_reps: int
    scaler: Scaler
    reducer: Reducer

    @classmethod
    def of(cls, p: GridParams | None) -> ParamsRecord | None:
        if p is None:
            return None
        return cls(fm_reps=p.fm_reps, ansatz_reps=p.ansatz_reps, scaler=p.scaler, reducer=p.reducer)

    def to_params(self) -> GridParams:
        return GridParams(self.fm_reps, self.ansatz_reps, self.scaler, self.reducer)


class TraceRecord(_Model):
    point: list[float]
    score: float
    branch: str
    running_best: float
    params: ParamsRecord | None = None
    trial: int | None = None

    @classmethod
    def of(cls, e: TraceEntry) -> TraceRecord:
        return cls(
            point=list(e.point),
            score=e.score,
            branch=e.branch,
            running_best=e.running_best,
            params=ParamsRecord.of(e.params),
            trial=e.trial,
        )


class CombinationRecord(_Model):
    trial: int
    params: ParamsRecord
    best_score: float
    best_point: list[float] | None
    n_evaluations: int
    moves: list[str]
    localities: int
    error: str | None = None
    error_reason: str | None = None

    @classmethod
    def of(cls, c: CombinationResult) -> CombinationRecord:
        return cls(
            trial=c.trial,
            params=ParamsRecord.of(c.params),
            best_score=c.best_score,
            best_point=None if c.best_point is None else list(c.best_point),
            n_evaluations=c.n_evaluations,
            moves=list(c.moves),
            localities=c.localities,
            error=c.error,
            error_reason=c.error_reason,
        )


class SearchSummary(_Model):
    best_point: list[float]
    best_score: float
    best_params: ParamsRecord
    worst_params: ParamsRecord | None
    lowest_score: float
    improvement_ratio: float | None
    trace: list[TraceRecord]
    combinations: list[CombinationRecord]
    # partial traces of failed combinations, kept out of best and lowest
    failed_trace: list[TraceRecord] = []

    @classmethod
    def of(cls, outcome: SearchOutcome) -> SearchSummary:
        ok = [c for c in outcome.combinations if not c.failed]
        worst = min(ok, key=lambda c: c.best_score) if ok else None
        finite = [e.score for e in outcome.trace if math.isfinite(e.score)]
        lowest = min(finite) if finite else outcome.best_sc
        return cls(
            best_point=[float(v) for v in outcome.best_pt],
            best_score=outcome.best_sc,
            best_params=ParamsRecord.of(outcome.best_params),
            worst_params=ParamsRecord.of(worst.params) if worst else None,
            lowest_score=lowest,
            improvement_ratio=outcome.best_sc / lowest if lowest > 0 else None,
            trace=[TraceRecord.of(e) for e in outcome.trace],
            combinations=[CombinationRecord.of(c) for c in outcome.combinations],
            failed_trace=[TraceRecord.of(e) for e in outcome.failed_trace],
        )


class RunRecord(SearchSummary):
    config: RunConfig
    baseline: SearchSummary | None = None
    wall_time_seconds: float

    @classmethod
    def build(
        cls,
        config: RunConfig,
        outcome: SearchOutcome,
        *,
        baseline: SearchOutcome | None = None,
        wall_time_seconds: float,
    ) -> RunRecord:
        summary = SearchSummary.of(outcome)
        return cls(
            **summary.model_dump(),
            config=config,
            baseline=SearchSummary.of(baseline) if baseline is not None else None,
            wall_time_seconds=wall_time_seconds,
        )


def atomic_write_text(path: Path, text: str) -> Path:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def save_record(record: RunRecord, path: str | Path) -> Path:
    out = atomic_write_text(Path(path), record.model_dump_json(indent=2) + "\n")
    logger.info("record_written", path=str(out), evaluations=len(record.trace))
    return out


def load_record(path: str | Path) -> RunRecord:
    return RunRecord.model_validate_json(Path(path).read_text(encoding="utf-8"))
