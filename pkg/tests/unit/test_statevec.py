from __future__ import annotations

import math
from functools import reduce

import numpy as np
import pytest

from musebench.errors import CapacityError, InvalidCircuitError, InvalidGateError
from musebench.sim.statevec import (
    Circuit,
    DiagonalObservable,
    GateKind,
    GateOp,
    StateVector,
    apply_gate,
    cx,
    cz,
    expectation,
    gate_matrix,
    h,
    output_distribution,
    p,
    run_batch,
    run_circuit,
    rz,
    unitary_of,
    x,
    z,
)

R = 1 / math.sqrt(2)

_P0 = np.array([[1, 0], [0, 0]], dtype=complex)
_P1 = np.array([[0, 0], [0, 1]], dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_I = np.eye(2, dtype=complex)


def _kron_qubits(factors: dict[int, np.ndarray], n: int) -> np.ndarray:
    # little-endian: qubit n-1 is the leftmost Kronecker factor
    return reduce(np.kron, [factors.get(q, _I) for q in reversed(range(n))])


def _oracle_gate(g: GateOp, n: int) -> np.ndarray:
    if g.kind is GateKind.CX:
        c, t = g.targets
        return _kron_qubits({c: _P0}, n) + _kron_qubits({c: _P1, t: _X}, n)
    if g.kind is GateKind.CZ:
        a, b = g.targets
        return np.eye(1 << n) - 2 * _kron_qubits({a: _P1, b: _P1}, n)
    return _kron_qubits({g.targets[0]: gate_matrix(g)}, n)


def _oracle(c: Circuit) -> np.ndarray:
    m = np.eye(1 << c.n_qubits, dtype=complex)
    for g in c.ops:
        m = _oracle_gate(g, c.n_qubits) @ m
    return m


def random_circuit(rng: np.random.Generator, n: int, n_gates: int) -> Circuit:
    kinds = list(GateKind) if n > 1 else [k for k in GateKind if k.arity == 1]
    ops = []
    for _ in range(n_gates):
        kind = kinds[rng.integers(len(kinds))]
        targets = tuple(int(t) for t in rng.choice(n, size=kind.arity, replace=False))
        theta = float(rng.uniform(-2 * math.pi, 2 * math.pi)) if kind.parametric else None
        ops.append(GateOp(kind, targets, theta))
    return Circuit(n, tuple(ops))


class TestGateOp:
    def test_arity_is_checked(self):
        with pytest.raises(InvalidGateError):
            GateOp(GateKind.CX, (0,))
        with pytest.raises(InvalidGateError):
            GateOp(GateKind.H, (0, 1))

    def test_targets_must_be_distinct(self):
        with pytest.raises(InvalidGateError):
            cx(1, 1)

    def test_parametric_needs_finite_angle(self):
        with pytest.raises(InvalidGateError):
            GateOp(GateKind.RY, (0,))
        with pytest.raises(InvalidGateError):
            p(float("nan"), 0)
        with pytest.raises(InvalidGateError):
            GateOp(GateKind.H, (0,), 0.5)

    def test_out_of_range_target_rejected_by_circuit_and_apply(self):
        with pytest.raises(InvalidGateError):
            Circuit(2, (h(2),))
        with pytest.raises(InvalidGateError):
            apply_gate(StateVector.zero(1), cx(0, 1))


class TestApplyGate:
    def test_hadamard_on_zero(self):
        out = apply_gate(StateVector.zero(1), h(0))
        np.testing.assert_allclose(out.amps, [R, R], atol=1e-15)

    def test_cz_on_11(self):
        out = apply_gate(StateVector.basis(2, 3), cz(0, 1))
        np.testing.assert_allclose(out.amps, [0, 0, 0, -1], atol=1e-15)

    def test_phase_pi_on_one(self):
        out = apply_gate(StateVector.basis(1, 1), p(math.pi, 0))
        np.testing.assert_allclose(out.amps, [0, -1], atol=1e-15)

    def test_input_state_is_not_modified(self):
        zero = StateVector.zero(1)
        apply_gate(zero, x(0))
        np.testing.assert_array_equal(zero.amps, [1, 0])

    def test_rz_and_phase_agree_on_one_up_to_global_phase(self):
        a = apply_gate(StateVector.basis(1, 1), rz(0.7, 0))
        b = apply_gate(StateVector.basis(1, 1), p(0.7, 0))
        np.testing.assert_allclose(np.abs(a.amps), np.abs(b.amps), atol=1e-15)

    @pytest.mark.parametrize("gate", [h(0), x(0), z(0)])
    def test_involutions(self, gate):
        m = unitary_of(Circuit(1, (gate, gate)))
        np.testing.assert_allclose(m, np.eye(2), atol=1e-12)


class TestRunCircuit:
    def test_empty_circuit_is_identity(self):
        out = run_circuit(Circuit(2), StateVector.zero(2))
        np.testing.assert_array_equal(out.amps, [1, 0, 0, 0])

    def test_bell_state(self):
        out = run_circuit(Circuit(2, (h(0), cx(0, 1))))
        np.testing.assert_allclose(out.amps, [R, 0, 0, R], atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidCircuitError):
            run_circuit(Circuit(2), StateVector.zero(3))

    def test_register_limit(self):
        with pytest.raises(CapacityError):
            Circuit(13)
        with pytest.raises(CapacityError):
            StateVector.zero(0)

    def test_matches_kronecker_oracle(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 4))
            c = random_circuit(rng, n, int(rng.integers(0, 31)))
            oracle = _oracle(c)
            for k in range(1 << n):
                got = run_circuit(c, StateVector.basis(n, k)).amps
                np.testing.assert_allclose(got, oracle[:, k], rtol=0, atol=1e-9)

    def test_norm_is_preserved(self, rng):
        for _ in range(1000):
            n = int(rng.integers(1, 6))
            c = random_circuit(rng, n, int(rng.integers(0, 51)))
            assert abs(run_circuit(c).norm - 1.0) < 1e-9

    def test_batch_matches_single_runs(self, rng):
        c = random_circuit(rng, 3, 12)
        states = np.eye(8, dtype=complex)[[0, 5, 7]]
        batch = run_batch(c, states)
        for row, k in zip(batch, (0, 5, 7), strict=True):
            np.testing.assert_allclose(row, run_circuit(c, StateVector.basis(3, k)).amps)


class TestUnitary:
    def test_empty_is_identity(self):
        np.testing.assert_array_equal(unitary_of(Circuit(1)), np.eye(2))

    def test_hadamard(self):
        np.testing.assert_allclose(unitary_of(Circuit(1, (h(0),))), R * np.array([[1, 1], [1, -1]]))

    def test_columns_are_basis_evolutions(self, rng):
        c = random_circuit(rng, 3, 15)
        m = unitary_of(c)
        for k in range(8):
            np.testing.assert_allclose(m[:, k], run_circuit(c, StateVector.basis(3, k)).amps)

    def test_unitarity(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 6))
            m = unitary_of(random_circuit(rng, n, int(rng.integers(0, 51))))
            np.testing.assert_allclose(m.conj().T @ m, np.eye(1 << n), atol=1e-9)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            unitary_of(Circuit(11))


class TestMeasurement:
    def test_output_distribution(self):
        np.testing.assert_allclose(output_distribution(StateVector(1, [R, R])), [0.5, 0.5])
        np.testing.assert_allclose(output_distribution(StateVector.basis(1, 1)), [0, 1])
        bell = run_circuit(Circuit(2, (h(0), cx(0, 1))))
        dist = output_distribution(bell)
        np.testing.assert_allclose(dist, [0.5, 0, 0, 0.5], atol=1e-15)
        assert abs(dist.sum() - 1) < 1e-10

    def test_expectation_examples(self):
        plus = StateVector(1, [R, R])
        assert expectation(plus, DiagonalObservable.z_parity(1)) == pytest.approx(0, abs=1e-15)
        assert expectation(StateVector.zero(1), DiagonalObservable.projector(1, 0)) == 1.0
        bell = run_circuit(Circuit(2, (h(0), cx(0, 1))))
        assert expectation(bell, DiagonalObservable.z_parity(2)) == pytest.approx(1.0)

    def test_expectation_within_eigenvalue_range(self, rng):
        obs = DiagonalObservable.z_parity(3)
        for _ in range(50):
            e = expectation(run_circuit(random_circuit(rng, 3, 20)), obs)
            assert -1 - 1e-12 <= e <= 1 + 1e-12

    def test_batch_expectation_is_per_row(self):
        states = np.array([[1, 0], [0, 1]], dtype=complex)
        np.testing.assert_allclose(expectation(states, DiagonalObservable.z_parity(1)), [1, -1])

    def test_observable_validation(self):
        with pytest.raises(InvalidCircuitError):
            DiagonalObservable(1, [1.0, float("inf")])
        with pytest.raises(InvalidCircuitError):
            DiagonalObservable(2, [1.0, 2.0])
        obs = DiagonalObservable.from_function(2, lambda k: float(k))
        np.testing.assert_array_equal(obs.eigenvalues, [0, 1, 2, 3])
