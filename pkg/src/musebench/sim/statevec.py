"""Dense statevector simulation for small registers.

Basis indexing is little-endian: qubit ``q`` is bit ``q`` of the basis index, so
``|q1 q0>`` = ``|10>`` is index 2. Gates update amplitude pairs in place on a copy
of the state; nothing builds a full ``2^n x 2^n`` matrix except :func:`unitary_of`.
Global phase is neither tracked nor normalised.

Internally every routine works on arrays shaped ``(..., 2**n)`` so a batch of
states (one row per sample) evolves through the same circuit in one pass.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from enum import StrEnum
from functools import lru_cache

import numpy as np
import numpy.typing as npt

from musebench.errors import CapacityError, InvalidCircuitError, InvalidGateError

MAX_QUBITS = 12
MAX_UNITARY_QUBITS = 10

ComplexArray = npt.NDArray[np.complex128]
RealArray = npt.NDArray[np.float64]


class GateKind(StrEnum):
    H = "h"
    X = "x"
    Y = "y"
    Z = "z"
    P = "p"
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    CX = "cx"
    CZ = "cz"

    @property
    def arity(self) -> int:
        return 2 if self in (GateKind.CX, GateKind.CZ) else 1

    @property
    def parametric(self) -> bool:
        return self in (GateKind.P, GateKind.RX, GateKind.RY, GateKind.RZ)


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    targets: tuple[int, ...]
    theta: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(self.targets) != self.kind.arity:
            raise InvalidGateError(
                f"{self.kind.name} takes {self.kind.arity} target(s), got {len(self.targets)}"
            )
        if len(set(self.targets)) != len(self.targets):
            raise InvalidGateError(f"{self.kind.name} targets must be distinct: {self.targets}")
        if any(t < 0 for t in self.targets):
            raise InvalidGateError(f"negative qubit index in {self.targets}")
        if self.kind.parametric:
            if self.theta is None or not math.isfinite(self.theta):
                raise InvalidGateError(f"{self.kind.name} needs a finite angle, got {self.theta}")
            object.__setattr__(self, "theta", float(self.theta))
        elif self.theta is not None:
            raise InvalidGateError(f"{self.kind.name} takes no angle")

    def check(self, n_qubits: int) -> None:
        bad = [t for t in self.targets if t >= n_qubits]
        if bad:
            raise InvalidGateError(
                f"{self.kind.name} targets {bad} out of range for {n_qubits} qubit(s)"
            )

    def __str__(self) -> str:
        args = ",".join(str(t) for t in self.targets)
        angle = f"({self.theta:.6g})" if self.theta is not None else ""
        return f"{self.kind.name}{angle}[{args}]"


# Shorthand constructors used by the circuit builders and tests.
def h(q: int) -> GateOp:
    return GateOp(GateKind.H, (q,))


def x(q: int) -> GateOp:
    return GateOp(GateKind.X, (q,))


def y(q: int) -> GateOp:
    return GateOp(GateKind.Y, (q,))


def z(q: int) -> GateOp:
    return GateOp(GateKind.Z, (q,))


def p(theta: float, q: int) -> GateOp:
    return GateOp(GateKind.P, (q,), theta)


def rx(theta: float, q: int) -> GateOp:
    return GateOp(GateKind.RX, (q,), theta)


def ry(theta: float, q: int) -> GateOp:
    return GateOp(GateKind.RY, (q,), theta)


def rz(theta: float, q: int) -> GateOp:
    return GateOp(GateKind.RZ, (q,), theta)


def cx(control: int, target: int) -> GateOp:
    return GateOp(GateKind.CX, (control, target))


def cz(a: int, b: int) -> GateOp:
    return GateOp(GateKind.CZ, (a, b))


def _check_register(n_qubits: int) -> None:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"register of {n_qubits} qubits outside 1..{MAX_QUBITS}")


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    ops: tuple[GateOp, ...] = ()

    def __post_init__(self) -> None:
        _check_register(self.n_qubits)
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            op.check(self.n_qubits)

    def __len__(self) -> int:
        return len(self.ops)

    def kinds(self) -> list[GateKind]:
        return [op.kind for op in self.ops]

    def then(self, other: Circuit) -> Circuit:
        if other.n_qubits != self.n_qubits:
            raise InvalidCircuitError(
                f"cannot append a {other.n_qubits}-qubit circuit to a {self.n_qubits}-qubit one"
            )
        return Circuit(self.n_qubits, self.ops + other.ops)


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amps: ComplexArray = field(repr=False)

    def __post_init__(self) -> None:
        _check_register(self.n_qubits)
        amps = np.array(self.amps, dtype=np.complex128)
        if amps.shape != (1 << self.n_qubits,):
            raise InvalidCircuitError(
                f"{self.n_qubits} qubits need {1 << self.n_qubits} amplitudes, got {amps.shape}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> StateVector:
        return cls.basis(n_qubits, 0)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> StateVector:
        _check_register(n_qubits)
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))


@dataclass(frozen=True)
class DiagonalObservable:
    """Observable diagonal in the computational basis, given by its eigenvalues."""

    n_qubits: int
    eigenvalues: RealArray = field(repr=False)

    def __post_init__(self) -> None:
        ev = np.array(self.eigenvalues, dtype=np.float64)
        if ev.shape != (1 << self.n_qubits,):
            raise InvalidCircuitError(
                f"observable on {self.n_qubits} qubits needs {1 << self.n_qubits} eigenvalues"
            )
        if not np.all(np.isfinite(ev)):
            raise InvalidCircuitError("observable eigenvalues must be finite")
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @classmethod
    def from_function(cls, n_qubits: int, fn: Callable[[int], float]) -> DiagonalObservable:
        return cls(n_qubits, np.array([fn(k) for k in range(1 << n_qubits)], dtype=np.float64))

    @classmethod
    def z_parity(cls, n_qubits: int) -> DiagonalObservable:
        """Z on every qubit: +1 on even-popcount basis states, -1 on odd."""
        return cls(n_qubits, 1.0 - 2.0 * (popcounts(n_qubits) % 2))

    @classmethod
    def projector(cls, n_qubits: int, index: int) -> DiagonalObservable:
        ev = np.zeros(1 << n_qubits)
        ev[index] = 1.0
        return cls(n_qubits, ev)


@lru_cache(maxsize=None)
def popcounts(n_qubits: int) -> npt.NDArray[np.int64]:
    idx = np.arange(1 << n_qubits)
    counts = np.zeros_like(idx)
    for q in range(n_qubits):
        counts += (idx >> q) & 1
    counts.setflags(write=False)
    return counts


@lru_cache(maxsize=None)
def _pairs(n_qubits: int, qubit: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices with bit ``qubit`` clear, and their partners with it set."""
    idx = np.arange(1 << n_qubits)
    zero = idx[((idx >> qubit) & 1) == 0]
    return zero, zero | (1 << qubit)


@lru_cache(maxsize=None)
def _controlled_pairs(n_qubits: int, control: int, target: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(1 << n_qubits)
    sel = idx[(((idx >> control) & 1) == 1) & (((idx >> target) & 1) == 0)]
    return sel, sel | (1 << target)


@lru_cache(maxsize=None)
def _both_set(n_qubits: int, a: int, b: int) -> np.ndarray:
    idx = np.arange(1 << n_qubits)
    return idx[(((idx >> a) & 1) == 1) & (((idx >> b) & 1) == 1)]


_SQRT1_2 = 1.0 / math.sqrt(2.0)


def gate_matrix(g: GateOp) -> ComplexArray:
    """2x2 matrix of a single-qubit gate (basis order |0>, |1>)."""
    t = g.theta if g.theta is not None else 0.0
    c, s = math.cos(t / 2), math.sin(t / 2)
    match g.kind:
        case GateKind.H:
            return np.array([[_SQRT1_2, _SQRT1_2], [_SQRT1_2, -_SQRT1_2]], dtype=np.complex128)
        case GateKind.X:
            return np.array([[0, 1], [1, 0]], dtype=np.complex128)
        case GateKind.Y:
            return np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
        case GateKind.Z:
            return np.array([[1, 0], [0, -1]], dtype=np.complex128)
        case GateKind.P:
            return np.array([[1, 0], [0, np.exp(1j * t)]], dtype=np.complex128)
        case GateKind.RX:
            return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
        case GateKind.RY:
            return np.array([[c, -s], [s, c]], dtype=np.complex128)
        case GateKind.RZ:
            return np.array(
                [[np.exp(-0.5j * t), 0], [0, np.exp(0.5j * t)]], dtype=np.complex128
            )
    raise InvalidGateError(f"{g.kind.name} is not a single-qubit gate")


def _apply_inplace(amps: ComplexArray, g: GateOp, n_qubits: int) -> None:
    if g.kind is GateKind.CX:
        sel, flip = _controlled_pairs(n_qubits, *g.targets)
        amps[..., sel], amps[..., flip] = amps[..., flip], amps[..., sel].copy()
        return
    if g.kind is GateKind.CZ:
        amps[..., _both_set(n_qubits, *g.targets)] *= -1.0
        return

    lo, hi = _pairs(n_qubits, g.targets[0])
    m = gate_matrix(g)
    if g.kind in (GateKind.Z, GateKind.P, GateKind.RZ):
        # diagonal: no mixing between the pair
        if m[0, 0] != 1.0:
            amps[..., lo] *= m[0, 0]
        amps[..., hi] *= m[1, 1]
        return
    a0 = amps[..., lo]
    a1 = amps[..., hi]
    amps[..., lo] = m[0, 0] * a0 + m[0, 1] * a1
    amps[..., hi] = m[1, 0] * a0 + m[1, 1] * a1


def evolve(amps: npt.ArrayLike, ops: Iterable[GateOp], n_qubits: int) -> ComplexArray:
    """Apply ``ops`` in order to a state or a batch of states (last axis = basis).

    Returns a new array; the input is not modified.
    """
    out = np.array(amps, dtype=np.complex128, copy=True)
    if out.shape[-1] != 1 << n_qubits:
        raise InvalidCircuitError(
            f"state has {out.shape[-1]} amplitudes, circuit acts on {n_qubits} qubit(s)"
        )
    for g in ops:
        g.check(n_qubits)
        _apply_inplace(out, g, n_qubits)
    return out


def apply_gate(state: StateVector, g: GateOp) -> StateVector:
    g.check(state.n_qubits)
    return StateVector(state.n_qubits, evolve(state.amps, (g,), state.n_qubits))


def run_circuit(c: Circuit, initial: StateVector | None = None) -> StateVector:
    """Left fold of :func:`apply_gate` over ``c.ops``; starts from |0...0> by default."""
    if initial is None:
        initial = StateVector.zero(c.n_qubits)
    if initial.n_qubits != c.n_qubits:
        raise InvalidCircuitError(
            f"circuit on {c.n_qubits} qubit(s) run on a {initial.n_qubits}-qubit state"
        )
    return StateVector(c.n_qubits, evolve(initial.amps, c.ops, c.n_qubits))


def run_batch(c: Circuit, states: npt.ArrayLike) -> ComplexArray:
    """Evolve a ``(n_states, 2**n)`` batch through ``c``."""
    return evolve(states, c.ops, c.n_qubits)


def unitary_of(c: Circuit) -> ComplexArray:
    """Matrix ``M`` with ``M[:, k] == run_circuit(c, basis(k)).amps``."""
    if c.n_qubits > MAX_UNITARY_QUBITS:
        raise CapacityError(
            f"unitary of {c.n_qubits} qubits exceeds the {MAX_UNITARY_QUBITS}-qubit limit"
        )
    dim = 1 << c.n_qubits
    # row k of the batch is basis state k; evolving rows gives the columns of M
    return run_batch(c, np.eye(dim, dtype=np.complex128)).T


def output_distribution(state: StateVector | ComplexArray) -> RealArray:
    amps = state.amps if isinstance(state, StateVector) else np.asarray(state)
    return np.abs(amps) ** 2


def expectation(state: StateVector | ComplexArray, obs: DiagonalObservable) -> float | RealArray:
    """``<psi|O|psi>`` for diagonal ``O``; a batch of states gives one value per row."""
    probs = output_distribution(state)
    result = probs @ obs.eigenvalues
    return float(result) if np.ndim(result) == 0 else result

