"""Dense statevector simulator over a small gate set.

Conventions: RY(t) = exp(-i t Y / 2), RX(t) = exp(-i t X / 2), CNOT lists its control
first, and qubit 0 is the most significant bit of the amplitude index.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from math import cos, sin, sqrt
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from core.config import get_settings
from core.errors import CapacityError, InvalidArgumentError

logger = logging.getLogger(__name__)

NORM_TOL = 1e-9
# Ancilla and cost qubits on top of the working register
EXTRA_QUBITS = 2


class GateKind(str, Enum):
    X = "X"
    Z = "Z"
    H = "H"
    RY = "RY"
    RX = "RX"
    CNOT = "CNOT"
    CRY = "CRY"
    DIAG_PHASE = "DIAG_PHASE"


_FIXED = {
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) / sqrt(2),
    GateKind.CNOT: np.array([[0, 1], [1, 0]], dtype=complex),
}
_PARAM = {
    GateKind.RY: lambda t: np.array([[cos(t / 2), -sin(t / 2)], [sin(t / 2), cos(t / 2)]], dtype=complex),
    GateKind.RX: lambda t: np.array([[cos(t / 2), -1j * sin(t / 2)], [-1j * sin(t / 2), cos(t / 2)]], dtype=complex),
    GateKind.CRY: lambda t: np.array([[cos(t / 2), -sin(t / 2)], [sin(t / 2), cos(t / 2)]], dtype=complex),
}
_CONTROL_COUNT = {GateKind.CNOT: 1, GateKind.CRY: 1}


@dataclass(frozen=True)
class GateOp:
    """One gate. DIAG_PHASE multiplies amplitudes by exp(-i * theta * table[idx]) where idx
    is read off the target qubits, first target most significant."""

    kind: GateKind
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    theta: Optional[float] = None
    table: Optional[tuple[float, ...]] = field(default=None, repr=False)

    def __post_init__(self):
        kind = GateKind(self.kind)
        targets = tuple(int(q) for q in self.targets)
        controls = tuple(int(q) for q in self.controls)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "controls", controls)

        qubits = targets + controls
        if len(set(qubits)) != len(qubits):
            raise InvalidArgumentError(f"{kind.value}: target and control qubits must be distinct, got {qubits}")
        if any(q < 0 for q in qubits):
            raise InvalidArgumentError(f"{kind.value}: negative qubit index in {qubits}")

        if kind is GateKind.DIAG_PHASE:
            if not targets or controls:
                raise InvalidArgumentError("DIAG_PHASE needs at least one target and no controls")
            if self.table is None or len(self.table) != 2 ** len(targets):
                raise InvalidArgumentError(f"DIAG_PHASE on {len(targets)} qubits needs a table of length {2 ** len(targets)}")
            object.__setattr__(self, "table", tuple(float(v) for v in self.table))
        elif len(targets) != 1:
            raise InvalidArgumentError(f"{kind.value} acts on exactly one target, got {targets}")

        if kind in _CONTROL_COUNT and len(controls) != _CONTROL_COUNT[kind]:
            raise InvalidArgumentError(f"{kind.value} needs {_CONTROL_COUNT[kind]} control, got {controls}")
        if kind in _PARAM or kind is GateKind.DIAG_PHASE:
            if self.theta is None:
                raise InvalidArgumentError(f"{kind.value} needs an angle")
            object.__setattr__(self, "theta", float(self.theta))

    # Factories

    @classmethod
    def x(cls, q: int) -> "GateOp":
        return cls(GateKind.X, (q,))

    @classmethod
    def z(cls, q: int) -> "GateOp":
        return cls(GateKind.Z, (q,))

    @classmethod
    def h(cls, q: int) -> "GateOp":
        return cls(GateKind.H, (q,))

    @classmethod
    def ry(cls, q: int, theta: float) -> "GateOp":
        return cls(GateKind.RY, (q,), theta=theta)

    @classmethod
    def rx(cls, q: int, theta: float) -> "GateOp":
        return cls(GateKind.RX, (q,), theta=theta)

    @classmethod
    def cnot(cls, control: int, target: int) -> "GateOp":
        return cls(GateKind.CNOT, (target,), (control,))

    @classmethod
    def cry(cls, control: int, target: int, theta: float) -> "GateOp":
        return cls(GateKind.CRY, (target,), (control,), theta=theta)

    @classmethod
    def diag_phase(cls, qubits: Sequence[int], gamma: float, table: Iterable[float]) -> "GateOp":
        return cls(GateKind.DIAG_PHASE, tuple(qubits), theta=gamma, table=tuple(table))

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.controls + self.targets

    def matrix(self) -> np.ndarray:
        """2x2 action on the target (for controlled kinds, the action when controls are 1)."""
        if self.kind in _FIXED:
            return _FIXED[self.kind]
        if self.kind in _PARAM:
            return _PARAM[self.kind](self.theta)
        raise InvalidArgumentError("DIAG_PHASE has no 2x2 matrix")

    def phases(self) -> np.ndarray:
        return np.exp(-1j * self.theta * np.asarray(self.table))

    def shifted(self, offset: int) -> "GateOp":
        return GateOp(
            self.kind,
            tuple(q + offset for q in self.targets),
            tuple(q + offset for q in self.controls),
            theta=self.theta,
            table=self.table,
        )

    def to_dict(self) -> dict:
        data: dict[str, Any] = {
            "kind": self.kind.value,
            "targets": list(self.targets),
            "controls": list(self.controls),
        }
        if self.theta is not None:
            data["theta"] = self.theta
        if self.table is not None:
            data["table"] = list(self.table)
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "GateOp":
        try:
            kind = GateKind(data["kind"])
        except (KeyError, ValueError) as e:
            raise InvalidArgumentError(f"unknown gate in {data!r}") from e
        try:
            return cls(
                kind,
                tuple(data.get("targets", ())),
                tuple(data.get("controls", ())),
                theta=data.get("theta"),
                table=tuple(data["table"]) if "table" in data else None,
            )
        except InvalidArgumentError:
            raise
        except (TypeError, ValueError) as e:
            raise InvalidArgumentError(f"malformed {kind.value} gate: {e}") from e


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list on m qubits with an optional role map (ancilla, cost, working)."""

    m: int
    ops: tuple[GateOp, ...] = ()
    roles: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 1:
            raise InvalidArgumentError(f"circuit needs at least one qubit, got m={self.m}")
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            if max(op.qubits) >= self.m:
                raise InvalidArgumentError(f"{op.kind.value} on {op.qubits} exceeds register of {self.m} qubits")

        assigned = []
        for value in self.roles.values():
            if value is None:
                continue
            assigned.extend(value if isinstance(value, (list, tuple)) else [value])
        if len(set(assigned)) != len(assigned):
            raise InvalidArgumentError(f"role map assigns a qubit twice: {dict(self.roles)}")
        if any(not 0 <= q < self.m for q in assigned):
            raise InvalidArgumentError(f"role map refers to qubits outside the register: {dict(self.roles)}")

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def with_ops(self, ops: Iterable[GateOp]) -> "Circuit":
        return Circuit(self.m, tuple(ops), dict(self.roles))

    def then(self, other: "Circuit", offset: int = 0) -> "Circuit":
        """Append other's gates, shifted by offset qubits. Roles stay those of self."""
        m = max(self.m, other.m + offset)
        return Circuit(m, self.ops + tuple(op.shifted(offset) for op in other.ops), dict(self.roles))

    def to_dict(self) -> dict:
        return {"m": self.m, "roles": dict(self.roles), "ops": [op.to_dict() for op in self.ops]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Circuit":
        try:
            return cls(int(data["m"]), tuple(GateOp.from_dict(op) for op in data.get("ops", [])), dict(data.get("roles", {})))
        except InvalidArgumentError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidArgumentError(f"malformed circuit: {e}") from e

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise InvalidArgumentError(f"circuit is not valid JSON: {e}") from e


class StateVector:
    """2^m complex amplitudes, mutated in place by apply_gate."""

    def __init__(self, amps: Union[np.ndarray, Sequence[complex]]):
        amps = np.array(amps, dtype=complex).reshape(-1)
        m = amps.size.bit_length() - 1
        if amps.size < 2 or amps.size != 2 ** m:
            raise InvalidArgumentError(f"amplitude count {amps.size} is not a power of two >= 2")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidArgumentError(f"state is not normalized (norm^2 = {norm})")
        self.m = m
        self.amps = amps

    @property
    def tensor(self) -> np.ndarray:
        """View of the amplitudes with one axis per qubit."""
        return self.amps.reshape([2] * self.m)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def copy(self) -> "StateVector":
        return StateVector(self.amps.copy())

    def __repr__(self) -> str:
        return f"StateVector(m={self.m})"


def init_basis(m: int, index: int, guard: Optional[int] = None) -> StateVector:
    limit = get_settings().capacity_guard + EXTRA_QUBITS if guard is None else guard
    if m < 1:
        raise InvalidArgumentError(f"register needs at least one qubit, got m={m}")
    if m > limit:
        raise CapacityError("register", m, limit)
    if not 0 <= index < 2 ** m:
        raise InvalidArgumentError(f"basis index {index} out of range for m={m}")
    amps = np.zeros(2 ** m, dtype=complex)
    amps[index] = 1.0
    return StateVector(amps)


def _phase_tensor(op: GateOp, ndim: int) -> np.ndarray:
    w = len(op.targets)
    table = op.phases().reshape([2] * w + [1] * (ndim - w))
    return np.moveaxis(table, list(range(w)), list(op.targets))


def _apply_op(psi: np.ndarray, op: GateOp):
    """Apply op in place to a tensor whose leading axes are qubits (trailing axes are a batch)."""
    if op.kind is GateKind.DIAG_PHASE:
        psi *= _phase_tensor(op, psi.ndim)
        return

    target = op.targets[0]
    index = [slice(None)] * psi.ndim
    for c in op.controls:
        index[c] = 1
    view = psi[tuple(index)]
    # Fixing controls drops their axes; shift the target accordingly
    axis = target - sum(1 for c in op.controls if c < target)
    view[...] = np.moveaxis(np.tensordot(op.matrix(), view, axes=([1], [axis])), 0, axis)


def _check_op(op: GateOp, m: int):
    if max(op.qubits) >= m:
        raise InvalidArgumentError(f"{op.kind.value} on {op.qubits} exceeds register of {m} qubits")


def apply_gate(state: StateVector, op: GateOp) -> StateVector:
    """Apply op to state in place and return it."""
    _check_op(op, state.m)
    _apply_op(state.tensor, op)
    return state


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if circuit.m != state.m:
        raise InvalidArgumentError(f"circuit on {circuit.m} qubits applied to state on {state.m}")
    psi = state.tensor
    for op in circuit.ops:
        _apply_op(psi, op)
    drift = abs(state.norm_squared() - 1.0)
    if drift > NORM_TOL:
        logger.warning("State norm drifted by %.3e over %d gates", drift, len(circuit.ops))
    return state


def _check_qubit(state: StateVector, qubit: int):
    if not 0 <= qubit < state.m:
        raise InvalidArgumentError(f"qubit {qubit} outside register of {state.m} qubits")


def marginal_probability(state: StateVector, qubit: int, outcome: int) -> float:
    _check_qubit(state, qubit)
    if outcome not in (0, 1):
        raise InvalidArgumentError(f"outcome must be 0 or 1, got {outcome}")
    branch = np.take(state.tensor, outcome, axis=qubit)
    return float(np.sum(np.abs(branch) ** 2))


def probabilities(state: StateVector, qubits: Optional[Sequence[int]] = None) -> np.ndarray:
    """Outcome distribution on the listed qubits (first listed is most significant); all qubits by default."""
    p = np.abs(state.amps) ** 2
    if qubits is None:
        return p
    qubits = list(qubits)
    if not qubits:
        raise InvalidArgumentError("qubit list is empty")
    if len(set(qubits)) != len(qubits):
        raise InvalidArgumentError(f"duplicate qubits in {qubits}")
    for q in qubits:
        _check_qubit(state, q)

    others = tuple(q for q in range(state.m) if q not in qubits)
    marginal = p.reshape([2] * state.m).sum(axis=others)
    ascending = sorted(qubits)
    return np.transpose(marginal, [ascending.index(q) for q in qubits]).reshape(-1)


def ancilla_expectation(state: StateVector, ancilla: int) -> float:
    """p(0) - p(1) on the ancilla, the Hadamard-test estimate of Re<U>."""
    p0 = marginal_probability(state, ancilla, 0)
    return p0 - (1.0 - p0)


def sample(
    state: StateVector,
    qubits: Sequence[int],
    shots: int,
    seed: Union[int, np.random.SeedSequence, None] = None,
) -> dict[str, int]:
    """Multinomial draw of shots outcomes on the listed qubits. Returns {bitstring: count}."""
    if shots < 1:
        raise InvalidArgumentError(f"shots must be >= 1, got {shots}")
    probs = probabilities(state, qubits)
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()  # Normalize to handle numerical drift
    counts = np.random.default_rng(seed).multinomial(shots, probs)
    width = len(qubits)
    return {format(i, f"0{width}b"): int(c) for i, c in enumerate(counts) if c}


def circuit_unitary(circuit: Circuit, guard: Optional[int] = None) -> np.ndarray:
    """Dense 2^m x 2^m matrix; column j is the circuit applied to basis state j."""
    limit = get_settings().unitary_guard if guard is None else guard
    if circuit.m > limit:
        raise CapacityError("unitary register", circuit.m, limit)
    dim = 2 ** circuit.m
    psi = np.eye(dim, dtype=complex).reshape([2] * circuit.m + [dim])
    for op in circuit.ops:
        _apply_op(psi, op)
    return psi.reshape(dim, dim)


@dataclass(frozen=True)
class GateCensus:
    by_kind: dict[str, int]
    cnot: int
    rotations: int
    hadamard: int
    multi_controlled: int

    def to_dict(self) -> dict:
        return {
            "by_kind": dict(self.by_kind),
            "cnot": self.cnot,
            "rotations": self.rotations,
            "hadamard": self.hadamard,
            "multi_controlled": self.multi_controlled,
        }


def gate_census(circuit: Circuit) -> GateCensus:
    by_kind: dict[str, int] = {}
    for op in circuit.ops:
        by_kind[op.kind.value] = by_kind.get(op.kind.value, 0) + 1
    return GateCensus(
        by_kind=by_kind,
        cnot=by_kind.get("CNOT", 0),
        rotations=by_kind.get("RY", 0) + by_kind.get("RX", 0) + by_kind.get("CRY", 0),
        hadamard=by_kind.get("H", 0),
        multi_controlled=sum(1 for op in circuit.ops if len(op.controls) > 1),
    )
