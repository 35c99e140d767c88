"""MUSE: multi-locality recursive search for initial points, plus the grid driver
and the random-initialization baseline.

One instantiation starts from a point and its score, then hops between up to
three localities: the reflection ``U - best_pt``, the neighbourhood of
``best_pt`` itself, and the scaled points ``alpha * best_pt`` / ``beta * best_pt``.
Every objective call is recorded in an ordered trace.
"""

from __future__ import annotations

import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np
import numpy.typing as npt
import structlog

from musebench.data.preprocess import Reducer, Scaler
from musebench.errors import ConfigError, SearchError, classify_failure
from musebench.metrics import (
    BEST_SCORE,
    COMBINATION_DURATION,
    COMBINATION_FAILURES,
    OBJECTIVE_EVALUATIONS,
    SEARCH_INSTANTIATIONS,
    capture_training,
    replay_training,
)

logger = structlog.get_logger()

Point = npt.NDArray[np.float64]

# generator streams; a driver trial and the baseline never share draws
_DRIVER_STREAM = 0
_BASELINE_STREAM = 1


@dataclass(frozen=True)
class GridParams:
    """One grid combination: circuit repetitions and preprocessing options."""

    fm_reps: int
    ansatz_reps: int
    scaler: Scaler
    reducer: Reducer

    def __post_init__(self) -> None:
        object.__setattr__(self, "scaler", Scaler(self.scaler))
        object.__setattr__(self, "reducer", Reducer(self.reducer))
        if self.fm_reps < 1 or self.ansatz_reps < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.fm_reps}, {self.ansatz_reps}")

    @property
    def label(self) -> str:
        return f"fm{self.fm_reps}-an{self.ansatz_reps}-{self.scaler.value}+{self.reducer.value}"

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class SearchArgs:
    epsilon: float
    alpha: float
    beta: float
    upper: Point
    lower: Point
    depth: int
    params: GridParams | None = None
    # hard cap on objective calls per instantiation; None follows the recursion alone
    eval_cap: int | None = None

    def __post_init__(self) -> None:
        upper = np.atleast_1d(np.asarray(self.upper, dtype=np.float64))
        lower = np.atleast_1d(np.asarray(self.lower, dtype=np.float64))
        if upper.shape != lower.shape or upper.ndim != 1:
            raise ConfigError(f"bounds must be equal-length vectors, got {upper.shape}, {lower.shape}")
        if np.any(lower > upper):
            raise ConfigError("lower bound exceeds upper bound")
        if not 0.0 < self.epsilon < float(np.max(upper - lower)):
            raise ConfigError(f"epsilon must be in (0, max(U - L)), got {self.epsilon}")
        if not 0.0 < self.beta < self.alpha <= 1.0:
            raise ConfigError(f"need 0 < beta < alpha <= 1, got alpha={self.alpha} beta={self.beta}")
        if self.depth < 0:
            raise ConfigError(f"depth must be >= 0, got {self.depth}")
        if self.eval_cap is not None and self.eval_cap < 0:
            raise ConfigError(f"eval_cap must be >= 0, got {self.eval_cap}")
        upper.setflags(write=False)
        lower.setflags(write=False)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "lower", lower)

    @classmethod
    def unit_box(cls, dims: int, **kwargs) -> SearchArgs:
        return cls(upper=np.ones(dims), lower=np.zeros(dims), **kwargs)

    @property
    def dims(self) -> int:
        return self.upper.size

    def contains(self, pt: npt.ArrayLike) -> bool:
        p = np.asarray(pt, dtype=np.float64)
        return bool(np.all(p >= self.lower) and np.all(p <= self.upper))


class Objective(Protocol):
    """Scores a candidate point for a grid combination; higher is better.

    Must be deterministic in ``(point, params)``.
    """

    def run(self, point: Point, params: GridParams | None) -> tuple[float, Point]: ...


@dataclass
class FunctionObjective:
    """Adapts a plain ``fn(point) -> score`` into an :class:`Objective`."""

    fn: Callable[[Point], float]

    def run(self, point: Point, params: GridParams | None) -> tuple[float, Point]:
        return float(self.fn(point)), point


@dataclass(frozen=True)
class TraceEntry:
    point: tuple[float, ...]
    score: float
    branch: str  # seed | reflect | neighbor | alpha | beta | random
    running_best: float
    params: GridParams | None = None
    trial: int | None = None


@dataclass(frozen=True)
class CombinationResult:
    trial: int
    params: GridParams
    best_score: float
    best_point: tuple[float, ...] | None
    n_evaluations: int
    # branches whose point became the new best, in order
    moves: tuple[str, ...] = ()
    error: str | None = None
    error_reason: str | None = None
    duration_s: float = 0.0

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def localities(self) -> int:
        """The start locality plus every jump away from the neighbourhood of the best."""
        return 1 + sum(m != "neighbor" for m in self.moves)


@dataclass
class SearchOutcome:
    best_pt: Point
    best_sc: float
    best_params: GridParams | None
    trace: list[TraceEntry] = field(default_factory=list)
    combinations: list[CombinationResult] = field(default_factory=list)
    moves: tuple[str, ...] = ()
    # evaluations of combinations that later failed; never part of the best
    failed_trace: list[TraceEntry] = field(default_factory=list)

    @property
    def n_evaluations(self) -> int:
        return len(self.trace)


# ── Candidate points ──────────────────────────────────────────────────


def neighbor_point(
    pt: npt.ArrayLike, epsilon: float, rng: np.random.Generator, upper: npt.ArrayLike = 1.0
) -> Point:
    """``min(U, pt + eps_r)`` with one ``eps_r ~ U[0, epsilon)`` shared by all coordinates."""
    eps_r = rng.uniform(0.0, epsilon)
    return np.minimum(upper, np.asarray(pt, dtype=np.float64) + eps_r)


def opposite_point(
    pt: npt.ArrayLike,
    epsilon: float,
    rng: np.random.Generator,
    upper: npt.ArrayLike = 1.0,
    lower: npt.ArrayLike = 0.0,
) -> Point:
    """Reflection across the box: ``min(max(U - pt, L) + eps_l, U)``."""
    eps_l = rng.uniform(0.0, epsilon)
    return np.minimum(np.maximum(upper - np.asarray(pt, dtype=np.float64), lower) + eps_l, upper)


# ── MUSE ──────────────────────────────────────────────────────────────


class _Search:
    """Bookkeeping of one instantiation: the trace, the running best and the
    evaluation cap. Single owner; only objective calls may run on the executor."""

    def __init__(
        self,
        args: SearchArgs,
        obj: Objective,
        rng: np.random.Generator,
        executor: Executor | None,
        entry_score: float,
    ) -> None:
        self.args = args
        self.obj = obj
        self.rng = rng
        self.executor = executor
        self.trace: list[TraceEntry] = []
        self.moves: list[str] = []
        self.running_best = entry_score

    def _remaining(self) -> float:
        if self.args.eval_cap is None:
            return math.inf
        return self.args.eval_cap - len(self.trace)

    def _record(self, point: Point, score: float, branch: str) -> None:
        self.running_best = max(self.running_best, score)
        self.trace.append(
            TraceEntry(
                point=tuple(float(v) for v in point),
                score=score,
                branch=branch,
                running_best=self.running_best,
                params=self.args.params,
            )
        )

    def evaluate(self, candidates: Sequence[tuple[Point, str]]) -> list[tuple[float, Point, str]]:
        """Run the candidates that fit in the remaining budget, in order.
        Siblings run concurrently when an executor is available."""
        allowed = list(candidates[: max(0, min(len(candidates), self._remaining()))])
        params = self.args.params
        try:
            if self.executor is not None and len(allowed) > 1:
                futures = [self.executor.submit(self.obj.run, pt, params) for pt, _ in allowed]
                results = [f.result() for f in futures]
            else:
                results = [self.obj.run(pt, params) for pt, _ in allowed]
        except Exception as exc:
            raise SearchError(
                f"objective failed after {len(self.trace)} evaluation(s): {exc}", self.trace
            ) from exc
        out = []
        for (_, branch), (score, pt) in zip(allowed, results, strict=True):
            pt = np.asarray(pt, dtype=np.float64)
            self._record(pt, float(score), branch)
            out.append((float(score), pt, branch))
        return out

    def _scaled(self, pt: Point, factor: float) -> Point:
        return np.clip(factor * pt, self.args.lower, self.args.upper)

    def step(self, best_pt: Point, best_sc: float, depth: int) -> tuple[Point, float]:
        args = self.args
        prev = best_sc
        if depth <= 0:
            return best_pt, best_sc
        depth -= 1

        lpt = opposite_point(best_pt, args.epsilon, self.rng, args.upper, args.lower)
        rpt = neighbor_point(best_pt, args.epsilon, self.rng, args.upper)
        results = self.evaluate([(lpt, "reflect"), (rpt, "neighbor")])
        if not results:
            return best_pt, best_sc

        move = None
        for score, pt, branch in results:
            if score > best_sc:
                best_pt, best_sc, move = pt, score, branch
        if move is not None:
            self.moves.append(move)
        round_best = max(score for score, _, _ in results)
        logger.debug(
            "muse_step",
            params=str(args.params) if args.params else None,
            depth=depth,
            prev=prev,
            round_best=round_best,
            best_sc=best_sc,
        )

        if round_best > prev:
            return self.step(best_pt, best_sc, depth)
        # a tie keeps the locality and tries a mild rescale; a regression a stronger one
        factor, branch = (args.alpha, "alpha") if round_best == prev else (args.beta, "beta")
        scaled = self.evaluate([(self._scaled(best_pt, factor), branch)])
        if scaled and scaled[0][0] > best_sc:
            best_sc, best_pt, _ = scaled[0]
            self.moves.append(branch)
            return self.step(best_pt, best_sc, depth - 1)
        return best_pt, best_sc


def muse(
    best_pt: npt.ArrayLike,
    best_sc: float,
    args: SearchArgs,
    obj: Objective,
    rng: np.random.Generator,
    *,
    executor: Executor | None = None,
) -> SearchOutcome:
    """One MUSE instantiation from ``(best_pt, best_sc)``.

    The returned score is never below ``best_sc``. An objective failure raises
    :class:`SearchError` carrying the trace recorded so far.
    """
    start = np.asarray(best_pt, dtype=np.float64).ravel()
    if start.shape != args.upper.shape:
        raise ConfigError(f"start point has {start.size} coordinates, bounds have {args.dims}")
    if not args.contains(start):
        raise ConfigError("start point lies outside the search box")
    search = _Search(args, obj, rng, executor, best_sc)
    pt, sc = search.step(start, float(best_sc), args.depth)
    return SearchOutcome(
        best_pt=pt,
        best_sc=sc,
        best_params=args.params,
        trace=search.trace,
        moves=tuple(search.moves),
    )


# ── Grid driver ───────────────────────────────────────────────────────


@dataclass(frozen=True)
class GridSpec:
    feat_ans: tuple[tuple[int, int], ...]
    sca_red: tuple[tuple[Scaler, Reducer], ...]
    n_trials: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "feat_ans", tuple(tuple(p) for p in self.feat_ans))
        object.__setattr__(
            self, "sca_red", tuple((Scaler(s), Reducer(r)) for s, r in self.sca_red)
        )
        if not self.feat_ans or not self.sca_red:
            raise ConfigError("grid lists must be non-empty")
        if self.n_trials < 1:
            raise ConfigError(f"n_trials must be >= 1, got {self.n_trials}")

    def combinations(self) -> list[GridParams]:
        """Circuit pairs outer, preprocessing pairs inner."""
        return [
            GridParams(fm, an, sca, red) for fm, an in self.feat_ans for sca, red in self.sca_red
        ]


@dataclass
class _CombinationRun:
    result: CombinationResult
    trace: list[TraceEntry]
    instantiated: bool
    # training durations observed in a worker process, replayed by the parent
    training: list[tuple[str, float]] = field(default_factory=list)


def _failure(
    exc: BaseException, trial: int, params: GridParams, trace: list[TraceEntry], started: float
) -> _CombinationRun:
    reason = classify_failure(exc)
    logger.warning(
        "combination_failed",
        params=params.label,
        trial=trial,
        reason=reason,
        evaluations=len(trace),
        exc_info=True,
    )
    result = CombinationResult(
        trial=trial,
        params=params,
        best_score=-math.inf,
        best_point=None,
        n_evaluations=len(trace),
        error=f"{type(exc).__name__}: {exc}",
        error_reason=reason,
        duration_s=time.monotonic() - started,
    )
    return _CombinationRun(result, trace, instantiated=isinstance(exc, SearchError))


def run_combination(
    obj: Objective, args: SearchArgs, seed: int, trial: int, index: int
) -> _CombinationRun:
    """Draw a start point, score it, run MUSE from it. Top-level so it pickles."""
    params = args.params
    rng = np.random.default_rng([seed, _DRIVER_STREAM, trial, index])
    started = time.monotonic()
    start = rng.uniform(args.lower, args.upper)
    trace: list[TraceEntry] = []
    try:
        score, pt = obj.run(start, params)
        score = float(score)
        trace.append(TraceEntry(tuple(float(v) for v in start), score, "seed", score, params))
        outcome = muse(pt, score, args, obj, rng)
    except Exception as exc:
        trace.extend(getattr(exc, "trace", []))
        return _failure(exc, trial, params, [replace(e, trial=trial) for e in trace], started)

    trace.extend(outcome.trace)
    trace = [replace(e, trial=trial) for e in trace]
    result = CombinationResult(
        trial=trial,
        params=params,
        best_score=outcome.best_sc,
        best_point=tuple(float(v) for v in outcome.best_pt),
        n_evaluations=len(trace),
        moves=outcome.moves,
        duration_s=time.monotonic() - started,
    )
    logger.info(
        "combination_complete",
        params=params.label,
        trial=trial,
        start_score=score,
        best_score=outcome.best_sc,
        evaluations=len(trace),
    )
    return _CombinationRun(result, trace, instantiated=True)


def run_baseline_combination(
    obj: Objective, args: SearchArgs, seed: int, index: int, n_evals: int
) -> _CombinationRun:
    params = args.params
    rng = np.random.default_rng([seed, _BASELINE_STREAM, 0, index])
    started = time.monotonic()
    trace: list[TraceEntry] = []
    best = -math.inf
    best_pt: Point | None = None
    try:
        for _ in range(n_evals):
            score, pt = obj.run(rng.uniform(args.lower, args.upper), params)
            score = float(score)
            if score > best:
                best, best_pt = score, np.asarray(pt, dtype=np.float64)
            trace.append(
                TraceEntry(tuple(float(v) for v in pt), score, "random", best, params, trial=0)
            )
    except Exception as exc:
        return _failure(exc, 0, params, trace, started)
    result = CombinationResult(
        trial=0,
        params=params,
        best_score=best,
        best_point=None if best_pt is None else tuple(float(v) for v in best_pt),
        n_evaluations=len(trace),
        duration_s=time.monotonic() - started,
    )
    return _CombinationRun(result, trace, instantiated=False)


def _meter(run: _CombinationRun) -> None:
    # runs in the parent process so counts from worker processes are not lost
    for e in run.trace:
        OBJECTIVE_EVALUATIONS.labels(branch=e.branch).inc()
    if run.instantiated:
        SEARCH_INSTANTIATIONS.inc()
    if run.result.failed:
        COMBINATION_FAILURES.labels(reason=run.result.error_reason).inc()
    COMBINATION_DURATION.observe(run.result.duration_s)
    replay_training(run.training)


def _fold(runs: Sequence[_CombinationRun]) -> SearchOutcome:
    best_sc = -math.inf
    best_pt: Point | None = None
    best_params: GridParams | None = None
    trace: list[TraceEntry] = []
    failed_trace: list[TraceEntry] = []
    for run in runs:
        _meter(run)
        r = run.result
        if r.failed:
            failed_trace.extend(run.trace)
            continue
        trace.extend(run.trace)
        if r.best_point is not None and r.best_score > best_sc:
            best_sc, best_pt, best_params = r.best_score, np.array(r.best_point), r.params
    combinations = [run.result for run in runs]
    if best_pt is None:
        raise SearchError(f"all {len(runs)} grid combination(s) failed", failed_trace)
    BEST_SCORE.set(best_sc)
    return SearchOutcome(
        best_pt, best_sc, best_params, trace, combinations, failed_trace=failed_trace
    )


def _run_in_worker(fn: Callable[..., _CombinationRun], *job) -> _CombinationRun:
    with capture_training() as samples:
        run = fn(*job)
    run.training = samples
    return run


def _execute(
    fn: Callable[..., _CombinationRun], jobs: list[tuple], workers: int
) -> list[_CombinationRun]:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        futures = [pool.submit(_run_in_worker, fn, *job) for job in jobs]
        # collected in submission order, so the fold is worker-count independent
        return [f.result() for f in futures]


def driver(
    grid: GridSpec,
    template: SearchArgs,
    obj: Objective,
    seed: int,
    *,
    workers: int = 1,
    strict_budget: bool = True,
) -> SearchOutcome:
    """Run MUSE from a fresh random point for every trial x grid combination and
    keep the global best. With ``strict_budget`` each instantiation is capped at
    ``2 * depth`` objective calls on top of the seed evaluation."""
    cap = 2 * template.depth if strict_budget else template.eval_cap
    jobs = [
        (obj, replace(template, params=params, eval_cap=cap), seed, trial, index)
        for trial in range(grid.n_trials)
        for index, params in enumerate(grid.combinations())
    ]
    logger.info(
        "driver_starting",
        combinations=len(jobs),
        depth=template.depth,
        eval_cap=cap,
        workers=workers,
        seed=seed,
    )
    outcome = _fold(_execute(run_combination, jobs, workers))
    logger.info(
        "driver_complete",
        best_score=outcome.best_sc,
        best_params=outcome.best_params.label,
        evaluations=outcome.n_evaluations,
    )
    return outcome


def random_search_baseline(
    grid: GridSpec,
    template: SearchArgs,
    obj: Objective,
    seed: int,
    *,
    evals_per_combo: int | None = None,
    workers: int = 1,
) -> SearchOutcome:
    """Score ``2 * depth`` (default) independent uniform points per combination."""
    n_evals = 2 * template.depth if evals_per_combo is None else evals_per_combo
    if n_evals < 1:
        raise ConfigError(f"baseline needs at least one evaluation per combination, got {n_evals}")
    jobs = [
        (obj, replace(template, params=params), seed, index, n_evals)
        for index, params in enumerate(grid.combinations())
    ]
    outcome = _fold(_execute(run_baseline_combination, jobs, workers))
    logger.info(
        "baseline_complete",
        best_score=outcome.best_sc,
        best_params=outcome.best_params.label,
        evaluations=outcome.n_evaluations,
    )
    return outcome
