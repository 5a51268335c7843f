"""Circuit builders for the block-encoded cost, its Hadamard-test workflow and the QAOA baseline.

Register layouts:
    block encoding       cost = 0, node i on qubit i
    controlled / workflow  ancilla = 0, cost = 1, node i on qubit i + 1
    ansatz / entangle / qaoa  node i on qubit i - 1
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from core.errors import InvalidArgumentError
from core.problem import IsingInstance, ScaledInstance, hamiltonian_diagonal
from core.statevec import Circuit, GateKind, GateOp

logger = logging.getLogger(__name__)

ANCILLA = 0
COST = 1
WORKING_OFFSET = 2


def _encoding_ops(
    s: ScaledInstance,
    cost: int,
    wire: Callable[[int], int],
    rotate: Callable[[float], list[GateOp]],
    flip: GateOp,
) -> list[GateOp]:
    """Gate list of U(C, K): flip the cost qubit, then one parity sandwich per edge.

    Quadratic edges come first, then unary edges, each in ascending order. The parity
    CNOTs share a target and commute; closing them in opening order means consecutive
    quadratic sandwiches never meet on an identical CNOT.
    """
    ops = [flip]
    for key, weight in s.scaled_edges():
        theta = -2.0 * weight
        if len(key) == 2:
            i, j = key
            parity = [GateOp.cnot(wire(j), cost), GateOp.cnot(wire(i), cost)]
            ops += parity
            ops += rotate(theta)
            ops += parity
        else:
            (i,) = key
            ops.append(GateOp.cnot(wire(i), cost))
            ops += rotate(theta)
            ops.append(GateOp.cnot(wire(i), cost))
    return ops


def build_block_encoding(s: ScaledInstance) -> Circuit:
    """U(C, K) on 1 + n qubits. Its top-left 2^n block is diag(sin(diag(C) / K)), no global phase."""
    ops = _encoding_ops(
        s,
        cost=0,
        wire=lambda node: node,
        rotate=lambda theta: [GateOp.ry(0, theta)],
        flip=GateOp.x(0),
    )
    roles = {"cost": 0, "working": list(range(1, s.n + 1))}
    return Circuit(s.n + 1, tuple(ops), roles)


def _controlled_ry(control: int, target: int, theta: float) -> list[GateOp]:
    # Two CNOTs and two single-qubit rotations, no native controlled rotation
    return [
        GateOp.ry(target, theta / 2),
        GateOp.cnot(control, target),
        GateOp.ry(target, -theta / 2),
        GateOp.cnot(control, target),
    ]


def build_controlled_block_encoding(s: ScaledInstance) -> Circuit:
    """|0><0| (x) I + |1><1| (x) U on ancilla, cost and working qubits. Only single-control gates."""
    ops = _encoding_ops(
        s,
        cost=COST,
        wire=lambda node: node + 1,
        rotate=lambda theta: _controlled_ry(ANCILLA, COST, theta),
        flip=GateOp.cnot(ANCILLA, COST),
    )
    roles = {"ancilla": ANCILLA, "cost": COST, "working": list(range(WORKING_OFFSET, s.n + WORKING_OFFSET))}
    return Circuit(s.n + 2, tuple(ops), roles)


def build_ansatz(thetas: Sequence[float]) -> Circuit:
    """Product of RY(theta_i) on qubit i - 1."""
    thetas = [float(t) for t in thetas]
    if not thetas:
        raise InvalidArgumentError("ansatz needs at least one angle")
    return Circuit(len(thetas), tuple(GateOp.ry(q, t) for q, t in enumerate(thetas)), {"working": list(range(len(thetas)))})


def build_entanglement(n: int) -> Circuit:
    """CNOT fan from node 1 to nodes n..2, H on node 1, then the fan back.

    On a basis input |0 b_2 ... b_n> this yields (|0 b> + |1 ~b>) / sqrt(2), so complementary
    assignments are measured with equal probability.
    """
    if n < 2:
        raise InvalidArgumentError(f"entanglement needs n >= 2, got {n}")
    fan = [GateOp.cnot(0, q) for q in range(n - 1, 0, -1)]
    ops = fan + [GateOp.h(0)] + fan[::-1]
    return Circuit(n, tuple(ops), {"working": list(range(n))})


def build_workflow(
    s: ScaledInstance,
    thetas: Sequence[float],
    entangle: bool = False,
    controlled: Optional[Circuit] = None,
) -> Circuit:
    """Full Hadamard test: ansatz (+ entanglement) on the working register, H, controlled U, H.

    With entangle, node 1 is held at |0> and thetas holds the n - 1 angles of nodes 2..n.
    Pass a prebuilt controlled block encoding to skip rebuilding it.
    """
    n = s.n
    thetas = list(thetas)
    expected = n - 1 if entangle else n
    if len(thetas) != expected:
        raise InvalidArgumentError(f"expected {expected} angles for n={n}{' with entanglement' if entangle else ''}, got {len(thetas)}")
    if controlled is None:
        controlled = build_controlled_block_encoding(s)
    elif controlled.m != n + 2:
        raise InvalidArgumentError(f"controlled circuit has {controlled.m} qubits, expected {n + 2}")

    roles = {"ancilla": ANCILLA, "cost": COST, "working": list(range(WORKING_OFFSET, n + WORKING_OFFSET))}
    circuit = Circuit(n + 2, (), roles)
    if entangle:
        if thetas:
            circuit = circuit.then(build_ansatz(thetas), offset=WORKING_OFFSET + 1)
        circuit = circuit.then(build_entanglement(n), offset=WORKING_OFFSET)
    else:
        circuit = circuit.then(build_ansatz(thetas), offset=WORKING_OFFSET)

    circuit = circuit.with_ops(circuit.ops + (GateOp.h(ANCILLA),))
    circuit = circuit.then(controlled)
    return circuit.with_ops(circuit.ops + (GateOp.h(ANCILLA),))


def build_qaoa(
    inst: IsingInstance,
    gammas: Sequence[float],
    betas: Sequence[float],
    guard: Optional[int] = None,
) -> Circuit:
    """|+>^n followed by p layers of exp(-i gamma_k C) and RX(2 beta_k) on every qubit."""
    if len(gammas) != len(betas):
        raise InvalidArgumentError(f"got {len(gammas)} gammas but {len(betas)} betas")
    if len(gammas) < 1:
        raise InvalidArgumentError("QAOA needs depth p >= 1")
    n = inst.n
    diag = hamiltonian_diagonal(inst, guard=guard)
    qubits = list(range(n))

    ops = [GateOp.h(q) for q in qubits]
    for gamma, beta in zip(gammas, betas):
        ops.append(GateOp.diag_phase(qubits, float(gamma), diag))
        ops += [GateOp.rx(q, 2.0 * float(beta)) for q in qubits]
    return Circuit(n, tuple(ops), {"working": qubits})


@dataclass(frozen=True)
class ResourceReport:
    method: str
    qubits: int
    cnot_count: int
    single_qubit_rotations: int
    hadamard_count: int
    connectivity: str
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "qubits": self.qubits,
            "cnot": self.cnot_count,
            "rotations": self.single_qubit_rotations,
            "hadamard": self.hadamard_count,
            "connectivity": self.connectivity,
            "notes": list(self.notes),
        }


def count_resources(inst: IsingInstance, method: str = "uqising", p: Optional[int] = None) -> ResourceReport:
    """Resource formulas for the block-encoding workflow and for depth-p QAOA.

    |S| is the node count and |E| counts quadratic and unary edges together.
    """
    s_count = inst.n
    e_count = len(inst.pairwise) + len(inst.unary)
    notes = []

    if method in ("uqising", "uqmaxcut"):
        raw = 1 + 6 * e_count - 2 * s_count
        cnot = max(raw, 0)
        if raw < 0:
            notes.append(f"CNOT formula gives {raw}; floored at 0")
        if len(inst.unary) < s_count:
            built = 1 + 6 * len(inst.pairwise) + 4 * len(inst.unary)
            notes.append(
                f"formula assumes a unary edge on every node; the built controlled circuit has {built} CNOTs"
            )
        return ResourceReport(
            method=method,
            qubits=s_count + 2,
            cnot_count=cnot,
            single_qubit_rotations=2 * e_count,
            hadamard_count=2,
            connectivity=f"one-to-all({s_count + 1})",
            notes=tuple(notes),
        )

    if method == "qaoa":
        if p is None or p < 1:
            raise InvalidArgumentError(f"QAOA resources need depth p >= 1, got {p}")
        raw = p * (2 * e_count - 2 * s_count)
        if raw < 0:
            notes.append(f"CNOT formula gives {raw}; floored at 0")
        degrees = [d for _, d in inst.to_graph().degree()]
        return ResourceReport(
            method=f"qaoa(p={p})",
            qubits=s_count,
            cnot_count=max(raw, 0),
            single_qubit_rotations=p * (e_count + s_count),
            hadamard_count=s_count,
            connectivity=f"graph-dependent({max(degrees) if degrees else 0})",
            notes=tuple(notes),
        )

    raise InvalidArgumentError(f"unknown method {method!r}")


def cancel_adjacent_cnots(circuit: Circuit) -> Circuit:
    """Drop pairs of identical CNOTs with no gate touching either qubit in between.

    Removing a pair can expose another; a per-qubit stack of the last touching gate
    handles such nested pairs in one pass.
    """
    out: list[Optional[GateOp]] = []
    stacks: dict[int, list[int]] = defaultdict(list)
    removed = 0
    for op in circuit.ops:
        if op.kind is GateKind.CNOT:
            tops = {stacks[q][-1] if stacks[q] else None for q in op.qubits}
            top = tops.pop() if len(tops) == 1 else None
            if top is not None and out[top] == op:
                out[top] = None
                for q in op.qubits:
                    stacks[q].pop()
                removed += 2
                continue
        out.append(op)
        for q in op.qubits:
            stacks[q].append(len(out) - 1)

    if removed:
        logger.debug("Cancelled %d CNOTs", removed)
    return circuit.with_ops(op for op in out if op is not None)


def block_diagonal(unitary: np.ndarray, n: int) -> np.ndarray:
    """Diagonal of the top-left 2^n block of a block-encoding unitary."""
    return np.diag(unitary[: 2 ** n, : 2 ** n]).copy()
