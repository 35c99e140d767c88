"""Variational classifier and regressor on top of the statevector simulator.

The feature map depends on the sample and the ansatz only on the weights, so a
batch is encoded once (one feature-map state per row) and every weight update
re-runs just the ansatz over that batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import StrEnum

import numpy as np
import numpy.typing as npt

from musebench.errors import ModelError
from musebench.sim.circuits import (
    AnsatzSpec,
    FeatureMapSpec,
    WeightVector,
    build_ansatz,
    build_feature_map,
)
from musebench.sim.statevec import (
    ComplexArray,
    DiagonalObservable,
    expectation,
    output_distribution,
    popcounts,
    run_batch,
    run_circuit,
)

PROB_FLOOR = 1e-12
SHIFT = math.pi / 2


class Task(StrEnum):
    CLASSIFY = "classify"
    REGRESS = "regress"


@dataclass(frozen=True)
class VariationalModel:
    fm: FeatureMapSpec
    an: AnsatzSpec
    weights: WeightVector = field(repr=False)
    task: Task = Task.CLASSIFY
    n_classes: int | None = None
    # regression output: offset + scale * <Z...Z>
    output_scale: float = 1.0
    output_offset: float = 0.0

    def __post_init__(self) -> None:
        if self.fm.n_qubits != self.an.n_qubits:
            raise ModelError(
                f"feature map has {self.fm.n_qubits} qubits but ansatz has {self.an.n_qubits}"
            )
        object.__setattr__(self, "task", Task(self.task))
        w = np.array(self.weights, dtype=np.float64).ravel()
        if w.size != self.an.n_parameters:
            raise ModelError(f"expected {self.an.n_parameters} weights, got {w.size}")
        if not np.all(np.isfinite(w)):
            raise ModelError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.task is Task.CLASSIFY and (self.n_classes is None or self.n_classes < 2):
            raise ModelError(f"classification needs at least 2 classes, got {self.n_classes}")
        if not (math.isfinite(self.output_scale) and math.isfinite(self.output_offset)):
            raise ModelError("output map must be finite")

    @property
    def n_qubits(self) -> int:
        return self.fm.n_qubits

    def with_weights(self, weights: npt.ArrayLike) -> VariationalModel:
        return replace(self, weights=np.asarray(weights, dtype=np.float64))


def tile_initial_point(point: npt.ArrayLike, n_parameters: int) -> WeightVector:
    """Repeat ``point`` cyclically until it fills ``n_parameters`` weights."""
    pt = np.asarray(point, dtype=np.float64).ravel()
    if pt.size == 0:
        raise ModelError("initial point is empty")
    return np.resize(pt, n_parameters)


def _as_batch(X: npt.ArrayLike) -> npt.NDArray[np.float64]:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ModelError(f"expected a non-empty samples x features batch, got shape {arr.shape}")
    return arr


def encode_batch(fm: FeatureMapSpec, X: npt.ArrayLike) -> ComplexArray:
    """Feature-map states, one row per sample."""
    rows = _as_batch(X)
    return np.stack([run_circuit(build_feature_map(fm, x)).amps for x in rows])


def _states(m: VariationalModel, encoded: ComplexArray, weights: WeightVector | None = None):
    w = m.weights if weights is None else weights
    return run_batch(build_ansatz(m.an, w), encoded)


def _class_matrix(n_qubits: int, n_classes: int) -> npt.NDArray[np.float64]:
    # basis index -> class one-hot, by popcount mod k
    onehot = np.zeros((1 << n_qubits, n_classes))
    onehot[np.arange(1 << n_qubits), popcounts(n_qubits) % n_classes] = 1.0
    return onehot


def class_probabilities(
    m: VariationalModel, encoded: ComplexArray, weights: WeightVector | None = None
) -> npt.NDArray[np.float64]:
    if m.task is not Task.CLASSIFY:
        raise ModelError("class probabilities need a classification model")
    probs = output_distribution(_states(m, encoded, weights))
    return probs @ _class_matrix(m.n_qubits, m.n_classes)


def raw_expectations(
    m: VariationalModel, encoded: ComplexArray, weights: WeightVector | None = None
) -> npt.NDArray[np.float64]:
    """Z-parity expectation per sample, in [-1, 1]."""
    obs = DiagonalObservable.z_parity(m.n_qubits)
    return np.atleast_1d(expectation(_states(m, encoded, weights), obs))


def regression_outputs(
    m: VariationalModel, encoded: ComplexArray, weights: WeightVector | None = None
) -> npt.NDArray[np.float64]:
    return m.output_offset + m.output_scale * raw_expectations(m, encoded, weights)


def forward_classify(m: VariationalModel, x: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Class probabilities for one sample."""
    return class_probabilities(m, encode_batch(m.fm, x))[0]


def forward_regress(m: VariationalModel, x: npt.ArrayLike) -> float:
    if m.task is not Task.REGRESS:
        raise ModelError("forward_regress needs a regression model")
    return float(regression_outputs(m, encode_batch(m.fm, x))[0])


# ── Losses ────────────────────────────────────────────────────────────


def _labels(m: VariationalModel, y: npt.ArrayLike, n: int) -> npt.NDArray[np.intp]:
    labels = np.asarray(y).astype(np.intp).ravel()
    if labels.shape != (n,):
        raise ModelError(f"{n} samples but {labels.size} labels")
    if labels.min() < 0 or labels.max() >= m.n_classes:
        raise ModelError(f"labels must lie in 0..{m.n_classes - 1}")
    return labels


def _targets(y: npt.ArrayLike, n: int) -> npt.NDArray[np.float64]:
    t = np.asarray(y, dtype=np.float64).ravel()
    if t.shape != (n,):
        raise ModelError(f"{n} samples but {t.size} targets")
    return t


def cross_entropy_from_probs(probs: npt.NDArray[np.float64], labels: npt.ArrayLike) -> float:
    picked = probs[np.arange(probs.shape[0]), np.asarray(labels, dtype=np.intp)]
    return float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR))))


def cross_entropy_loss(
    m: VariationalModel, X: npt.ArrayLike, y: npt.ArrayLike, *, encoded: ComplexArray | None = None
) -> float:
    enc = encode_batch(m.fm, X) if encoded is None else encoded
    probs = class_probabilities(m, enc)
    return cross_entropy_from_probs(probs, _labels(m, y, probs.shape[0]))


def mse_loss(
    m: VariationalModel, X: npt.ArrayLike, y: npt.ArrayLike, *, encoded: ComplexArray | None = None
) -> float:
    enc = encode_batch(m.fm, X) if encoded is None else encoded
    pred = regression_outputs(m, enc)
    return float(np.mean((pred - _targets(y, pred.shape[0])) ** 2))


def loss(
    m: VariationalModel, X: npt.ArrayLike, y: npt.ArrayLike, *, encoded: ComplexArray | None = None
) -> float:
    if m.task is Task.CLASSIFY:
        return cross_entropy_loss(m, X, y, encoded=encoded)
    return mse_loss(m, X, y, encoded=encoded)


# ── Gradients ─────────────────────────────────────────────────────────


def parameter_shift_gradient(
    m: VariationalModel,
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    index: int,
    *,
    encoded: ComplexArray | None = None,
) -> float:
    """d(loss)/d(weights[index]) via the two-term shift rule, chain-ruled through
    the task's loss. Every weight drives exactly one RY gate, so the rule is exact."""
    if not 0 <= index < m.an.n_parameters:
        raise ModelError(f"weight index {index} out of range")
    enc = encode_batch(m.fm, X) if encoded is None else encoded
    plus = m.weights.copy()
    minus = m.weights.copy()
    plus[index] += SHIFT
    minus[index] -= SHIFT

    if m.task is Task.CLASSIFY:
        probs = class_probabilities(m, enc)
        labels = _labels(m, y, probs.shape[0])
        rows = np.arange(probs.shape[0])
        dp = (
            class_probabilities(m, enc, plus)[rows, labels]
            - class_probabilities(m, enc, minus)[rows, labels]
        ) / 2.0
        picked = probs[rows, labels]
        # the floor is flat, so floored samples contribute nothing
        dloss = np.where(picked > PROB_FLOOR, -dp / np.maximum(picked, PROB_FLOOR), 0.0)
        return float(np.mean(dloss))

    pred = regression_outputs(m, enc)
    target = _targets(y, pred.shape[0])
    dexp = (raw_expectations(m, enc, plus) - raw_expectations(m, enc, minus)) / 2.0
    return float(np.mean(2.0 * (pred - target) * m.output_scale * dexp))


def loss_gradient(
    m: VariationalModel, X: npt.ArrayLike, y: npt.ArrayLike, *, encoded: ComplexArray | None = None
) -> WeightVector:
    enc = encode_batch(m.fm, X) if encoded is None else encoded
    return np.array(
        [parameter_shift_gradient(m, X, y, i, encoded=enc) for i in range(m.an.n_parameters)]
    )


# ── Output map / prediction ───────────────────────────────────────────


def fit_output_map(y_train: npt.ArrayLike) -> tuple[float, float]:
    """``(scale, offset)`` mapping [-1, 1] onto the train target range."""
    t = np.asarray(y_train, dtype=np.float64)
    if t.size == 0:
        raise ModelError("cannot fit an output map on no targets")
    lo, hi = float(t.min()), float(t.max())
    return (hi - lo) / 2.0, (hi + lo) / 2.0


def predict(
    m: VariationalModel, X: npt.ArrayLike, *, encoded: ComplexArray | None = None
) -> npt.NDArray:
    """Class labels (argmax probability) or regression outputs."""
    enc = encode_batch(m.fm, X) if encoded is None else encoded
    if m.task is Task.CLASSIFY:
        return np.argmax(class_probabilities(m, enc), axis=1)
    return regression_outputs(m, enc)
