"""The objective MUSE optimizes: preprocess, build the circuits for a grid
combination, train from the candidate initial point, score on the test split."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import structlog

from musebench.data.preprocess import (
    PreprocessSpec,
    RawDataset,
    encode_labels,
    fit_transform,
    split_train_test,
)
from musebench.errors import ModelError
from musebench.learn.model import Task, VariationalModel, tile_initial_point
from musebench.learn.scoring import evaluate
from musebench.learn.training import TrainConfig, train
from musebench.search.muse import GridParams, Point
from musebench.sim.circuits import AnsatzSpec, FeatureMapSpec

logger = structlog.get_logger()

DEFAULT_ITERATIONS = {Task.CLASSIFY: 100, Task.REGRESS: 10}


@dataclass
class _Prepared:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray


@dataclass
class PipelineObjective:
    """Scores ``(point, params)`` by test accuracy (classification) or test R²
    (regression). The split is fixed by ``seed``; fitted transforms are cached per
    scaler/reducer pair, so repeated calls only retrain."""

    dataset: RawDataset
    task: Task
    dims: int
    train_fraction: float = 0.8
    seed: int = 0
    iterations: int | None = None
    reapply_hadamard: bool = True
    n_classes: int | None = field(default=None, init=False)
    _targets: np.ndarray = field(default=None, init=False, repr=False, compare=False)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.task = Task(self.task)
        if self.iterations is None:
            self.iterations = DEFAULT_ITERATIONS[self.task]
        if self.dims < 1:
            raise ModelError(f"dims must be positive, got {self.dims}")
        if self.task is Task.CLASSIFY:
            codes, names = encode_labels(self.dataset.y)
            self.n_classes = len(names)
            if self.n_classes < 2:
                raise ModelError("classification needs at least 2 classes")
            self._targets = codes
        else:
            self._targets = self.dataset.y.astype(np.float64)

    def __getstate__(self) -> dict:
        # caches stay process-local
        state = self.__dict__.copy()
        state["_cache"] = {}
        return state

    def _split(self) -> tuple[RawDataset, RawDataset]:
        if "split" not in self._cache:
            ds = RawDataset(
                X=self.dataset.X,
                y=self._targets,
                feature_names=self.dataset.feature_names,
                class_names=self.dataset.class_names,
            )
            self._cache["split"] = split_train_test(
                ds, self.train_fraction, self.seed, stratify=self.task is Task.CLASSIFY
            )
        return self._cache["split"]

    def prepare(self, params: GridParams) -> _Prepared:
        key = (params.scaler, params.reducer)
        if key not in self._cache:
            train, test = self._split()
            spec = PreprocessSpec(params.scaler, params.reducer, self.dims)
            fitted = fit_transform(
                spec, train.X, train.y, continuous_target=self.task is Task.REGRESS
            )
            self._cache[key] = _Prepared(
                fitted.apply(train.X), train.y, fitted.apply(test.X), test.y
            )
        return self._cache[key]

    def build_model(self, point: Point, params: GridParams) -> VariationalModel:
        fm = FeatureMapSpec(
            self.dims, params.fm_reps, reapply_hadamard=self.reapply_hadamard
        )
        an = AnsatzSpec(self.dims, params.ansatz_reps)
        return VariationalModel(
            fm=fm,
            an=an,
            weights=tile_initial_point(point, an.n_parameters),
            task=self.task,
            n_classes=self.n_classes,
        )

    def run(self, point: Point, params: GridParams) -> tuple[float, Point]:
        data = self.prepare(params)
        model = self.build_model(point, params)
        result = train(model, data.X_train, data.y_train, TrainConfig(self.iterations, self.seed))
        report = evaluate(result.model, data.X_test, data.y_test)
        if not np.isfinite(report.score):
            raise FloatingPointError(f"non-finite {report.metric} for {params.label}")
        logger.debug(
            "objective_evaluated",
            params=params.label,
            metric=report.metric,
            score=report.score,
            train_loss=result.final_loss,
        )
        return report.score, point
