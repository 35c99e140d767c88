from __future__ import annotations

from collections.abc import Sequence


class MuseBenchError(Exception):
    """Root of every error raised on purpose by musebench."""


# ── Simulation ────────────────────────────────────────────────────────


class SimulationError(MuseBenchError):
    pass


class InvalidGateError(SimulationError, ValueError):
    pass


class InvalidCircuitError(SimulationError, ValueError):
    pass


class CapacityError(SimulationError):
    """Requested register or matrix is larger than the dense simulator supports."""


# ── Circuit construction ──────────────────────────────────────────────


class EncodingError(MuseBenchError, ValueError):
    pass


class ParameterCountError(MuseBenchError, ValueError):
    pass


# ── Data ──────────────────────────────────────────────────────────────


class PreprocessError(MuseBenchError, ValueError):
    pass


class UndefinedFError(PreprocessError):
    """ANOVA F needs at least two classes."""


class IngestionError(MuseBenchError):
    def __init__(self, message: str, *, line: int | None = None, column: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.column = column


# ── Learning / search / config ────────────────────────────────────────


class ModelError(MuseBenchError, ValueError):
    pass


class SearchError(MuseBenchError):
    """An objective evaluation failed mid-search. ``trace`` holds every entry
    recorded before the failure."""

    def __init__(self, message: str, trace: Sequence[object] = ()):
        super().__init__(message)
        self.trace = list(trace)


class ConfigError(MuseBenchError, ValueError):
    pass


# Metric label for each family; order matters, subclasses are checked first.
_FAILURE_LABELS: tuple[tuple[type[BaseException], str], ...] = (
    (SearchError, "search"),
    (SimulationError, "simulation"),
    (EncodingError, "simulation"),
    (ParameterCountError, "training"),
    (PreprocessError, "preprocess"),
    (ModelError, "training"),
    (FloatingPointError, "training"),
)

FAILURE_REASONS = ("search", "simulation", "preprocess", "training", "unexpected")


def root_cause(exc: BaseException) -> BaseException:
    """Follow ``__cause__`` down to the original exception. SearchError wraps the
    objective's failure, and the label should describe that failure."""
    seen = {id(exc)}
    while exc.__cause__ is not None and id(exc.__cause__) not in seen:
        exc = exc.__cause__
        seen.add(id(exc))
    return exc


def classify_failure(exc: BaseException) -> str:
    """Map a failed grid combination to a stable label for metrics and records."""
    cause = root_cause(exc)
    for family, label in _FAILURE_LABELS:
        if isinstance(cause, family):
            return label
    return "unexpected"
