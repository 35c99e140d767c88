from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from musebench.errors import ModelError
from musebench.learn.model import Task, VariationalModel, predict
from musebench.sim.statevec import ComplexArray


def _pair(pred: npt.ArrayLike, true: npt.ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred).ravel()
    t = np.asarray(true).ravel()
    if p.shape != t.shape:
        raise ModelError(f"{p.size} predictions but {t.size} targets")
    if p.size == 0:
        raise ModelError("cannot score an empty prediction set")
    return p, t


def accuracy(pred: npt.ArrayLike, true: npt.ArrayLike) -> float:
    p, t = _pair(pred, true)
    return float(np.mean(p == t))


def r2(pred: npt.ArrayLike, true: npt.ArrayLike) -> float:
    """Coefficient of determination; 0 when the targets have no spread."""
    p, t = _pair(pred, true)
    p = p.astype(np.float64)
    t = t.astype(np.float64)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        return 0.0
    ss_res = float(np.sum((t - p) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass
class EvalReport:
    metric: str  # accuracy | r2
    score: float
    predictions: np.ndarray = field(repr=False)


def evaluate(
    m: VariationalModel,
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    *,
    encoded: ComplexArray | None = None,
) -> EvalReport:
    preds = predict(m, X, encoded=encoded)
    if m.task is Task.CLASSIFY:
        return EvalReport("accuracy", accuracy(preds, np.asarray(y).astype(np.int64)), preds)
    return EvalReport("r2", r2(preds, y), preds)
