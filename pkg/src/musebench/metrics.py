from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar

from prometheus_client import REGISTRY, Counter, Gauge, Histogram, Info, write_to_textfile

from musebench.errors import FAILURE_REASONS

SEARCH_BRANCHES = ("seed", "reflect", "neighbor", "alpha", "beta", "random")
TASKS = ("classify", "regress")

# ── Info ──────────────────────────────────────────────────────────────

RUN_INFO = Info(
    "musebench",
    "musebench run info",
)

# ── Counters ──────────────────────────────────────────────────────────

OBJECTIVE_EVALUATIONS = Counter(
    "musebench_objective_evaluations_total",
    "Objective evaluations issued, by the search branch that proposed the point",
    ["branch"],
)
SEARCH_INSTANTIATIONS = Counter(
    "musebench_search_instantiations_total",
    "Top-level MUSE instantiations (one per grid combination and trial)",
)
COMBINATION_FAILURES = Counter(
    "musebench_combination_failures_total",
    "Grid combinations skipped because their pipeline failed, by failure family",
    ["reason"],
)

# ── Gauges ────────────────────────────────────────────────────────────

BEST_SCORE = Gauge(
    "musebench_best_score",
    "Best score found by the most recent search",
)

# ── Histograms ────────────────────────────────────────────────────────

COMBINATION_DURATION = Histogram(
    "musebench_combination_duration_seconds",
    "Wall time of one grid combination (seed evaluation plus search)",
    buckets=(0.1, 0.5, 1, 5, 10, 30, 60, 300),
)
TRAINING_DURATION = Histogram(
    "musebench_training_duration_seconds",
    "Duration of one model training run",
    ["task"],
    buckets=(0.01, 0.05, 0.1, 0.5, 1, 5, 10, 30),
)


# ── Initialization ───────────────────────────────────────────────────

def init_metrics(version: str = "0.1.0", task: str = "") -> None:
    """Pre-initialize all label combinations so they appear in the export from the start."""
    RUN_INFO.info({"version": version, "task": task})

    for branch in SEARCH_BRANCHES:
        OBJECTIVE_EVALUATIONS.labels(branch=branch)

    for reason in FAILURE_REASONS:
        COMBINATION_FAILURES.labels(reason=reason)

    for t in TASKS:
        TRAINING_DURATION.labels(task=t)


def export_metrics(path: str) -> None:
    """Write the default registry in the text exposition format."""
    write_to_textfile(path, REGISTRY)


# ── Training durations across processes ──────────────────────────────

# samples observed while a capture is open; worker processes ship them back
_training_capture: ContextVar[list[tuple[str, float]] | None] = ContextVar(
    "training_capture", default=None
)


def observe_training(task: str, seconds: float) -> None:
    TRAINING_DURATION.labels(task=task).observe(seconds)
    captured = _training_capture.get()
    if captured is not None:
        captured.append((task, seconds))


@contextmanager
def capture_training() -> Iterator[list[tuple[str, float]]]:
    """Collect every training duration observed inside the block."""
    captured: list[tuple[str, float]] = []
    token = _training_capture.set(captured)
    try:
        yield captured
    finally:
        _training_capture.reset(token)


def replay_training(samples: list[tuple[str, float]]) -> None:
    """Observe durations recorded in another process."""
    for task, seconds in samples:
        TRAINING_DURATION.labels(task=task).observe(seconds)
