import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from core import statevec
from core.errors import CapacityError, InvalidArgumentError
from core.statevec import (
    Circuit,
    GateKind,
    GateOp,
    StateVector,
    ancilla_expectation,
    apply_circuit,
    apply_gate,
    circuit_unitary,
    gate_census,
    init_basis,
    marginal_probability,
    probabilities,
    sample,
)

SQRT_HALF = 1 / math.sqrt(2)


def plus_state(m=1):
    return StateVector(np.full(2 ** m, 2 ** (-m / 2), dtype=complex))


def bell_state():
    return StateVector([SQRT_HALF, 0, 0, SQRT_HALF])


class TestInitBasis:
    def test_examples(self):
        assert list(init_basis(1, 0).amps) == [1, 0]
        assert list(init_basis(2, 3).amps) == [0, 0, 0, 1]
        assert init_basis(3, 1).amps[1] == 1

    def test_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            init_basis(2, 4)
        with pytest.raises(InvalidArgumentError):
            init_basis(2, -1)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            init_basis(40, 0)

    def test_rejects_unnormalized(self):
        with pytest.raises(InvalidArgumentError):
            StateVector([1, 1])
        with pytest.raises(InvalidArgumentError):
            StateVector([1, 0, 0])


class TestGates:
    def test_ry_pi_flips(self):
        state = apply_gate(init_basis(1, 0), GateOp.ry(0, math.pi))
        np.testing.assert_allclose(state.amps, [0, 1], atol=1e-12)

    def test_hadamard_squared_is_identity(self):
        state = StateVector([0.6, 0.8j])
        before = state.amps.copy()
        apply_gate(state, GateOp.h(0))
        apply_gate(state, GateOp.h(0))
        np.testing.assert_allclose(state.amps, before, atol=1e-12)

    def test_cnot_control_first(self):
        state = apply_gate(init_basis(2, 0b10), GateOp.cnot(0, 1))
        np.testing.assert_allclose(state.amps, [0, 0, 0, 1])
        state = apply_gate(init_basis(2, 0b01), GateOp.cnot(0, 1))
        np.testing.assert_allclose(state.amps, [0, 1, 0, 0])

    def test_cnot_with_control_below_target(self):
        # control on the less significant qubit
        state = apply_gate(init_basis(3, 0b001), GateOp.cnot(2, 0))
        assert state.amps[0b101] == 1

    def test_cry_acts_only_when_control_set(self):
        off = apply_gate(init_basis(2, 0b00), GateOp.cry(0, 1, math.pi))
        np.testing.assert_allclose(off.amps, [1, 0, 0, 0], atol=1e-12)
        on = apply_gate(init_basis(2, 0b10), GateOp.cry(0, 1, math.pi))
        np.testing.assert_allclose(on.amps, [0, 0, 0, 1], atol=1e-12)

    def test_rx_convention(self):
        state = apply_gate(init_basis(1, 0), GateOp.rx(0, math.pi))
        np.testing.assert_allclose(state.amps, [0, -1j], atol=1e-12)

    def test_in_place(self):
        state = init_basis(1, 0)
        returned = apply_gate(state, GateOp.x(0))
        assert returned is state
        assert state.amps[1] == 1

    def test_index_violation(self):
        with pytest.raises(InvalidArgumentError):
            apply_gate(init_basis(2, 0), GateOp.x(2))

    def test_invalid_ops(self):
        with pytest.raises(InvalidArgumentError):
            GateOp.cnot(1, 1)
        with pytest.raises(InvalidArgumentError):
            GateOp(GateKind.RY, (0,))
        with pytest.raises(InvalidArgumentError):
            GateOp(GateKind.CNOT, (0,))
        with pytest.raises(InvalidArgumentError):
            GateOp.diag_phase([0, 1], 0.5, [1.0, 2.0])

    def test_diag_phase_inverse(self):
        table = [0.3, -1.2, 2.0, 0.7]
        state = StateVector(np.array([0.5, 0.5j, -0.5, 0.5]))
        before = state.amps.copy()
        apply_gate(state, GateOp.diag_phase([0, 1], 0.9, table))
        apply_gate(state, GateOp.diag_phase([0, 1], -0.9, table))
        np.testing.assert_allclose(state.amps, before, atol=1e-12)

    def test_diag_phase_target_order(self):
        # table index reads the first listed target as most significant
        op = GateOp.diag_phase([1, 0], 1.0, [0.0, 1.0, 2.0, 3.0])
        u = circuit_unitary(Circuit(2, (op,)))
        expected = np.exp(-1j * np.array([0.0, 2.0, 1.0, 3.0]))
        np.testing.assert_allclose(np.diag(u), expected, atol=1e-12)


class TestCircuits:
    def test_empty_and_double_x(self):
        state = apply_circuit(StateVector([0.6, 0.8]), Circuit(1))
        np.testing.assert_allclose(state.amps, [0.6, 0.8])
        state = apply_circuit(StateVector([0.6, 0.8]), Circuit(1, (GateOp.x(0), GateOp.x(0))))
        np.testing.assert_allclose(state.amps, [0.6, 0.8])

    def test_bell_preparation(self):
        circuit = Circuit(2, (GateOp.h(0), GateOp.cnot(0, 1)))
        state = apply_circuit(init_basis(2, 0), circuit)
        np.testing.assert_allclose(state.amps, [SQRT_HALF, 0, 0, SQRT_HALF], atol=1e-12)

    def test_register_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            apply_circuit(init_basis(2, 0), Circuit(3))

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            Circuit(2, (GateOp.x(2),))
        with pytest.raises(InvalidArgumentError):
            Circuit(2, roles={"ancilla": 0, "cost": 0})

    def test_then_shifts_qubits(self):
        inner = Circuit(1, (GateOp.x(0),))
        outer = Circuit(3).then(inner, offset=2)
        assert outer.ops == (GateOp.x(2),)
        assert outer.m == 3

    def test_json_round_trip(self):
        circuit = Circuit(
            3,
            (GateOp.h(0), GateOp.cry(0, 1, 0.25), GateOp.diag_phase([1, 2], 0.5, [1.0, -1.0, -1.0, 1.0])),
            {"ancilla": 0, "working": [1, 2]},
        )
        assert Circuit.from_json(circuit.to_json()) == circuit

    def test_from_dict_rejects_unknown_gate(self):
        with pytest.raises(InvalidArgumentError):
            Circuit.from_dict({"m": 1, "ops": [{"kind": "SWAP", "targets": [0]}]})

    @pytest.mark.parametrize("data", [
        {"m": "two"},
        {"m": 1, "ops": [5]},
        {"m": 1, "ops": [{"kind": "X", "targets": 0}]},
        {"m": 1, "ops": [{"kind": "X", "targets": ["a"]}]},
        {"m": 1, "ops": [{"kind": "RY", "targets": [0], "theta": "wide"}]},
    ])
    def test_from_dict_rejects_malformed(self, data):
        with pytest.raises(InvalidArgumentError):
            Circuit.from_dict(data)

    def test_norm_drift_is_logged(self, monkeypatch, caplog):
        def leaky(psi, op):
            psi *= 2

        monkeypatch.setattr(statevec, "_apply_op", leaky)
        with caplog.at_level(logging.WARNING, logger="core.statevec"):
            apply_circuit(init_basis(1, 0), Circuit(1, (GateOp.x(0),)))
        assert "norm drifted" in caplog.text


class TestProbabilities:
    def test_marginal_examples(self):
        assert marginal_probability(plus_state(), 0, 0) == pytest.approx(0.5)
        assert marginal_probability(init_basis(2, 2), 0, 1) == 1.0
        assert marginal_probability(init_basis(2, 2), 1, 1) == 0.0
        assert marginal_probability(bell_state(), 1, 1) == pytest.approx(0.5)

    def test_ancilla_expectation(self):
        assert ancilla_expectation(init_basis(1, 0), 0) == 1.0
        assert ancilla_expectation(plus_state(), 0) == pytest.approx(0.0)
        state = StateVector([math.sqrt(0.75), math.sqrt(0.25)])
        assert ancilla_expectation(state, 0) == pytest.approx(0.5)

    def test_probabilities_order(self):
        state = init_basis(3, 0b110)
        assert list(probabilities(state, [0, 2])) == [0, 0, 1, 0]
        assert list(probabilities(state, [1, 0])) == [0, 0, 0, 1]
        assert list(probabilities(state, [2])) == [1, 0]

    def test_probabilities_errors(self):
        with pytest.raises(InvalidArgumentError):
            probabilities(init_basis(2, 0), [])
        with pytest.raises(InvalidArgumentError):
            probabilities(init_basis(2, 0), [0, 0])
        with pytest.raises(InvalidArgumentError):
            probabilities(init_basis(2, 0), [2])


class TestSample:
    def test_basis_state(self):
        assert sample(init_basis(2, 1), [0, 1], 100, seed=1) == {"01": 100}

    def test_plus_state(self):
        counts = sample(plus_state(), [0], 1024, seed=3)
        assert set(counts) == {"0", "1"}
        assert sum(counts.values()) == 1024

    def test_seeded_repeat(self):
        state = plus_state(3)
        assert sample(state, [0, 1, 2], 500, seed=9) == sample(state, [0, 1, 2], 500, seed=9)

    def test_errors(self):
        with pytest.raises(InvalidArgumentError):
            sample(plus_state(), [], 10, seed=0)
        with pytest.raises(InvalidArgumentError):
            sample(plus_state(), [0], 0, seed=0)

    def test_frequencies_converge(self):
        # statistical check, fixed seed
        rng = np.random.default_rng(5)
        amps = rng.normal(size=8) + 1j * rng.normal(size=8)
        state = StateVector(amps / np.linalg.norm(amps))
        shots = 100_000
        counts = sample(state, [0, 1, 2], shots, seed=42)
        exact = probabilities(state)
        for index, p in enumerate(exact):
            assert counts.get(format(index, "03b"), 0) / shots == pytest.approx(p, abs=0.01)


class TestUnitary:
    def test_hadamard_and_z(self):
        np.testing.assert_allclose(
            circuit_unitary(Circuit(1, (GateOp.h(0),))), np.array([[1, 1], [1, -1]]) * SQRT_HALF, atol=1e-12
        )
        np.testing.assert_allclose(circuit_unitary(Circuit(1, (GateOp.z(0),))), np.diag([1, -1]))

    def test_columns_match_apply_circuit(self):
        circuit = Circuit(3, (GateOp.h(0), GateOp.cnot(0, 2), GateOp.ry(1, 0.4), GateOp.cry(2, 1, -1.1)))
        u = circuit_unitary(circuit)
        for j in range(8):
            np.testing.assert_allclose(u[:, j], apply_circuit(init_basis(3, j), circuit).amps, atol=1e-12)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            circuit_unitary(Circuit(13))
        with pytest.raises(CapacityError):
            circuit_unitary(Circuit(3), guard=2)


GATE_KINDS = ["X", "Z", "H", "RY", "RX", "CNOT", "CRY"]


@st.composite
def random_circuits(draw):
    m = draw(st.integers(2, 6))
    ops = []
    for _ in range(draw(st.integers(0, 60))):
        kind = draw(st.sampled_from(GATE_KINDS))
        theta = draw(st.floats(-2 * math.pi, 2 * math.pi))
        a = draw(st.integers(0, m - 1))
        b = draw(st.integers(0, m - 1).filter(lambda q: q != a))
        if kind == "CNOT":
            ops.append(GateOp.cnot(a, b))
        elif kind == "CRY":
            ops.append(GateOp.cry(a, b, theta))
        elif kind in ("RY", "RX"):
            ops.append(GateOp(GateKind(kind), (a,), theta=theta))
        else:
            ops.append(GateOp(GateKind(kind), (a,)))
    return Circuit(m, tuple(ops))


@settings(max_examples=30, deadline=None)
@given(random_circuits())
def test_random_circuits_preserve_norm_and_unitarity(circuit):
    state = apply_circuit(init_basis(circuit.m, 0), circuit)
    assert abs(state.norm_squared() - 1.0) <= 1e-9

    u = circuit_unitary(circuit)
    assert np.max(np.abs(u.conj().T @ u - np.eye(2 ** circuit.m))) <= 1e-9


def test_census_counts_kinds():
    circuit = Circuit(3, (
        GateOp.h(0), GateOp.cnot(0, 1), GateOp.ry(1, 0.1), GateOp.rx(2, 0.2),
        GateOp.cnot(1, 2), GateOp.h(0), GateOp(GateKind.X, (2,), (0, 1)),
    ))
    census = gate_census(circuit)
    assert census.cnot == 2
    assert census.rotations == 2
    assert census.hadamard == 2
    assert census.multi_controlled == 1
    assert census.by_kind["X"] == 1
