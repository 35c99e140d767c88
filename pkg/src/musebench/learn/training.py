"""Training loops: budgeted COBYLA for classifiers, L-BFGS-B for regressors.

Both return the best weights observed, so the training loss never ends above the
loss of the starting weights.
"""

from __future__ import annotations

import math
import time
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from enum import StrEnum

import numpy as np
import numpy.typing as npt
import structlog
from scipy.optimize import OptimizeResult, minimize

from musebench.errors import ModelError
from musebench.learn.model import (
    Task,
    VariationalModel,
    class_probabilities,
    cross_entropy_from_probs,
    encode_batch,
    fit_output_map,
    loss_gradient,
    regression_outputs,
)
from musebench.metrics import observe_training

logger = structlog.get_logger()

WEIGHT_BOUND = 2.0 * math.pi


class Optimizer(StrEnum):
    COBYLA = "cobyla"
    LBFGSB = "l-bfgs-b"


_DEFAULT_OPTIMIZER = {Task.CLASSIFY: Optimizer.COBYLA, Task.REGRESS: Optimizer.LBFGSB}


@dataclass(frozen=True)
class TrainConfig:
    max_iterations: int
    seed: int = 0
    optimizer: Optimizer | None = None

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ModelError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.optimizer is not None:
            object.__setattr__(self, "optimizer", Optimizer(self.optimizer))

    def optimizer_for(self, task: Task) -> Optimizer:
        return self.optimizer or _DEFAULT_OPTIMIZER[Task(task)]


@dataclass
class TrainResult:
    model: VariationalModel
    initial_loss: float
    final_loss: float
    n_evaluations: int
    n_iterations: int
    # best-so-far loss after each evaluation (COBYLA) or each iteration (L-BFGS-B)
    history: list[float] = field(default_factory=list)


# ── Budgeted derivative-free minimization ─────────────────────────────


class _BudgetExhausted(Exception):
    pass


class _BudgetedObjective:
    def __init__(self, fun: Callable[[np.ndarray], float], budget: int, bound: float):
        self._fun = fun
        self.budget = budget
        self.bound = bound
        self.n_evaluations = 0
        self.first: float | None = None
        self.best_x: np.ndarray | None = None
        self.best_f = math.inf
        self.history: list[float] = []

    def __call__(self, w: np.ndarray) -> float:
        if self.n_evaluations >= self.budget:
            raise _BudgetExhausted
        w = np.clip(np.asarray(w, dtype=np.float64), -self.bound, self.bound)
        f = float(self._fun(w))
        self.n_evaluations += 1
        if self.first is None:
            self.first = f
        if self.best_x is None or (math.isfinite(f) and f < self.best_f):
            self.best_x, self.best_f = w.copy(), f
        self.history.append(self.best_f)
        return f


@dataclass
class BudgetedResult:
    x: np.ndarray
    fun: float
    first: float
    n_evaluations: int
    history: list[float]


def minimize_budgeted(
    fun: Callable[[np.ndarray], float],
    x0: npt.ArrayLike,
    budget: int,
    *,
    bound: float = WEIGHT_BOUND,
    rhobeg: float = 1.0,
    tol: float = 1e-8,
) -> BudgetedResult:
    """COBYLA limited to exactly ``budget`` evaluations of ``fun``.

    The first evaluation is always ``x0``. If COBYLA converges early it is
    restarted from the best point until the budget is spent. Points are clipped
    into ``[-bound, bound]``.
    """
    if budget < 1:
        raise ModelError(f"evaluation budget must be >= 1, got {budget}")
    obj = _BudgetedObjective(fun, budget, bound)
    start = np.clip(np.asarray(x0, dtype=np.float64).ravel(), -bound, bound)
    while obj.n_evaluations < budget:
        before = obj.n_evaluations
        try:
            minimize(
                obj,
                start,
                method="COBYLA",
                tol=tol,
                options={"maxiter": budget - obj.n_evaluations, "rhobeg": rhobeg},
            )
        except _BudgetExhausted:
            break
        if obj.n_evaluations == before:
            break
        start = obj.best_x
    return BudgetedResult(
        x=obj.best_x,
        fun=obj.best_f,
        first=obj.first,
        n_evaluations=obj.n_evaluations,
        history=obj.history,
    )


# ── Task-specific loops ───────────────────────────────────────────────


def _check_batch(X: npt.ArrayLike, y: npt.ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ModelError("training set is empty")
    if y.shape != (X.shape[0],):
        raise ModelError(f"{X.shape[0]} training rows but {y.size} targets")
    return X, y


def train_classifier(
    m: VariationalModel, X: npt.ArrayLike, y: npt.ArrayLike, cfg: TrainConfig
) -> TrainResult:
    if m.task is not Task.CLASSIFY:
        raise ModelError("train_classifier needs a classification model")
    X, y = _check_batch(X, y)
    labels = y.astype(np.intp)
    if labels.min() < 0 or labels.max() >= m.n_classes:
        raise ModelError(f"labels must lie in 0..{m.n_classes - 1}")
    started = time.monotonic()
    encoded = encode_batch(m.fm, X)

    def objective(w: np.ndarray) -> float:
        return cross_entropy_from_probs(class_probabilities(m, encoded, w), labels)

    res = minimize_budgeted(objective, m.weights, cfg.max_iterations)
    elapsed = time.monotonic() - started
    observe_training(Task.CLASSIFY.value, elapsed)
    logger.debug(
        "classifier_trained",
        n_train=X.shape[0],
        n_evaluations=res.n_evaluations,
        initial_loss=res.first,
        final_loss=res.fun,
        seed=cfg.seed,
        duration_s=round(elapsed, 3),
    )
    return TrainResult(
        model=m.with_weights(res.x),
        initial_loss=res.first,
        final_loss=res.fun,
        n_evaluations=res.n_evaluations,
        n_iterations=res.n_evaluations,
        history=res.history,
    )


def train_regressor(
    m: VariationalModel,
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    cfg: TrainConfig,
    *,
    fit_output: bool = True,
) -> TrainResult:
    """Bounded L-BFGS-B on the MSE with parameter-shift gradients, at most
    ``cfg.max_iterations`` iterations. The output map is fitted on the targets
    first (unless ``fit_output`` is off) and then stays fixed."""
    if m.task is not Task.REGRESS:
        raise ModelError("train_regressor needs a regression model")
    X, y = _check_batch(X, y)
    target = y.astype(np.float64)
    if fit_output:
        scale, offset = fit_output_map(target)
        m = replace(m, output_scale=scale, output_offset=offset)
    started = time.monotonic()
    encoded = encode_batch(m.fm, X)

    n_evaluations = 0
    best_w = np.clip(m.weights, -WEIGHT_BOUND, WEIGHT_BOUND)
    best_f = math.inf
    first: float | None = None

    def objective(w: np.ndarray) -> tuple[float, np.ndarray]:
        nonlocal n_evaluations, best_w, best_f, first
        candidate = m.with_weights(w)
        f = float(np.mean((regression_outputs(candidate, encoded) - target) ** 2))
        n_evaluations += 1
        if first is None:
            first = f
        if f < best_f:
            best_w, best_f = candidate.weights.copy(), f
        return f, loss_gradient(candidate, X, target, encoded=encoded)

    history: list[float] = []

    def on_iteration(intermediate_result: OptimizeResult) -> None:
        history.append(float(intermediate_result.fun))

    res = minimize(
        objective,
        best_w,
        jac=True,
        method="L-BFGS-B",
        bounds=[(-WEIGHT_BOUND, WEIGHT_BOUND)] * m.an.n_parameters,
        options={"maxiter": cfg.max_iterations},
        callback=on_iteration,
    )
    elapsed = time.monotonic() - started
    observe_training(Task.REGRESS.value, elapsed)
    logger.debug(
        "regressor_trained",
        n_train=X.shape[0],
        n_iterations=int(res.nit),
        n_evaluations=n_evaluations,
        initial_loss=first,
        final_loss=best_f,
        status=str(res.message),
        seed=cfg.seed,
        duration_s=round(elapsed, 3),
    )
    return TrainResult(
        model=m.with_weights(best_w),
        initial_loss=first,
        final_loss=best_f,
        n_evaluations=n_evaluations,
        n_iterations=int(res.nit),
        history=history,
    )


def train(m: VariationalModel, X: npt.ArrayLike, y: npt.ArrayLike, cfg: TrainConfig) -> TrainResult:
    """Dispatch on the configured (or task-default) optimizer."""
    optimizer = cfg.optimizer_for(m.task)
    if optimizer is Optimizer.COBYLA and m.task is Task.CLASSIFY:
        return train_classifier(m, X, y, cfg)
    if optimizer is Optimizer.LBFGSB and m.task is Task.REGRESS:
        return train_regressor(m, X, y, cfg)
    raise ModelError(f"optimizer {optimizer} is not supported for task {m.task}")
