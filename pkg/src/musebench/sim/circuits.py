"""Feature-map and ansatz builders.

Circuits are rebuilt per sample with the angles bound; there are no symbolic
parameters. Both families use linear entanglement (pairs ``(i, i+1)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt

from musebench.errors import EncodingError, InvalidCircuitError, ParameterCountError
from musebench.sim.statevec import Circuit, GateOp, cx, h, p, ry

WeightVector = npt.NDArray[np.float64]


def linear_pairs(n_qubits: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n_qubits - 1)]


@dataclass(frozen=True)
class FeatureMapSpec:
    """ZZ-style encoding. ``reapply_hadamard=False`` keeps the H layer on the
    first repetition only."""

    n_qubits: int
    reps: int = 1
    entanglement: Literal["linear"] = "linear"
    reapply_hadamard: bool = True

    def __post_init__(self) -> None:
        if self.n_qubits < 1 or self.reps < 1:
            raise EncodingError(f"feature map needs n_qubits>=1 and reps>=1, got {self}")


@dataclass(frozen=True)
class AnsatzSpec:
    """RY layers interleaved with a linear CX chain, closed by a final RY layer."""

    n_qubits: int
    reps: int = 1
    entanglement: Literal["linear"] = "linear"

    def __post_init__(self) -> None:
        if self.n_qubits < 1 or self.reps < 1:
            raise ParameterCountError(f"ansatz needs n_qubits>=1 and reps>=1, got {self}")

    @property
    def n_parameters(self) -> int:
        return self.n_qubits * (self.reps + 1)


def build_feature_map(spec: FeatureMapSpec, x: npt.ArrayLike) -> Circuit:
    xs = np.asarray(x, dtype=np.float64).ravel()
    if xs.shape != (spec.n_qubits,):
        raise EncodingError(f"feature map on {spec.n_qubits} qubits got {xs.size} features")
    if not np.all(np.isfinite(xs)):
        raise EncodingError("features must be finite")

    n = spec.n_qubits
    ops: list[GateOp] = []
    for r in range(spec.reps):
        if r == 0 or spec.reapply_hadamard:
            ops.extend(h(q) for q in range(n))
        ops.extend(p(2.0 * xs[q], q) for q in range(n))
        for i, j in linear_pairs(n):
            ops.append(cx(i, j))
            ops.append(p(2.0 * (math.pi - xs[i]) * (math.pi - xs[j]), j))
            ops.append(cx(i, j))
    return Circuit(n, tuple(ops))


def build_ansatz(spec: AnsatzSpec, w: npt.ArrayLike) -> Circuit:
    weights = np.asarray(w, dtype=np.float64).ravel()
    if weights.size != spec.n_parameters:
        raise ParameterCountError(
            f"ansatz {spec.n_qubits}x{spec.reps} needs {spec.n_parameters} weights, "
            f"got {weights.size}"
        )
    if not np.all(np.isfinite(weights)):
        raise ParameterCountError("weights must be finite")

    n = spec.n_qubits
    ops: list[GateOp] = []
    it = iter(weights)
    for _ in range(spec.reps):
        ops.extend(ry(next(it), q) for q in range(n))
        ops.extend(cx(i, j) for i, j in linear_pairs(n))
    ops.extend(ry(next(it), q) for q in range(n))
    return Circuit(n, tuple(ops))


def compose_model(fm: Circuit, an: Circuit) -> Circuit:
    """Feature map first, then ansatz."""
    if fm.n_qubits != an.n_qubits:
        raise InvalidCircuitError(
            f"feature map has {fm.n_qubits} qubits but ansatz has {an.n_qubits}"
        )
    return fm.then(an)
