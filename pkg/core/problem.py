"""Ising and weighted MaxCut instances, the exact spectrum oracle and benchmark metrics.

Bit convention used across the package: an assignment q = q_1 q_2 ... q_n maps to the
diagonal index whose most significant bit is q_1. Spins are s_i = (-1)^{q_i}.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Union

import networkx as nx
import numpy as np

from core.config import DEFAULT_LAMBDA, get_settings
from core.errors import CapacityError, DegenerateInstanceError, InvalidArgumentError

logger = logging.getLogger(__name__)

# Energies closer than this (relative to the weight scale) count as equal
ENERGY_TOL = 1e-9
# Slack for sine round-off when checking order preservation
ORDER_TOL = 1e-12


@dataclass(frozen=True)
class CutAssignment:
    """A bit-string q_1 ... q_n, one bit per node."""

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if not bits or any(b not in (0, 1) for b in bits):
            raise InvalidArgumentError(f"assignment bits must be 0/1, got {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_string(cls, text: str) -> "CutAssignment":
        if not text or set(text) - {"0", "1"}:
            raise InvalidArgumentError(f"not a bit-string: {text!r}")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def from_index(cls, index: int, n: int) -> "CutAssignment":
        if not 0 <= index < 2 ** n:
            raise InvalidArgumentError(f"index {index} out of range for n={n}")
        return cls(tuple((index >> (n - 1 - i)) & 1 for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        value = 0
        for bit in self.bits:
            value = (value << 1) | bit
        return value

    def spins(self) -> np.ndarray:
        return 1 - 2 * np.asarray(self.bits, dtype=float)

    def complement(self) -> "CutAssignment":
        return CutAssignment(tuple(1 - b for b in self.bits))

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


AssignmentLike = Union[CutAssignment, str, Iterable[int]]


def as_assignment(q: AssignmentLike) -> CutAssignment:
    """Coerce a bit-string or bit sequence into a CutAssignment."""
    if isinstance(q, CutAssignment):
        return q
    if isinstance(q, str):
        return CutAssignment.from_string(q)
    return CutAssignment(tuple(q))


@dataclass(frozen=True)
class IsingInstance:
    """Graph with unary weights C_ii and pairwise weights C_ij (i < j), nodes 1..n.

    Zero weights are dropped on construction; absent entries mean weight 0.
    """

    n: int
    unary: Mapping[int, float] = field(default_factory=dict)
    pairwise: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidArgumentError(f"node count must be a positive integer, got {self.n!r}")
        n = int(self.n)

        unary = {}
        for node, weight in dict(self.unary).items():
            node = int(node)
            if not 1 <= node <= n:
                raise InvalidArgumentError(f"unary node {node} outside [1, {n}]")
            if float(weight) != 0.0:
                unary[node] = float(weight)

        pairwise = {}
        for key, weight in dict(self.pairwise).items():
            i, j = (int(k) for k in key)
            if i == j:
                raise InvalidArgumentError(f"self-pair ({i}, {j}) not allowed; use a unary weight")
            if i > j:
                raise InvalidArgumentError(f"pair key ({i}, {j}) must satisfy i < j")
            if not (1 <= i <= n and 1 <= j <= n):
                raise InvalidArgumentError(f"pair ({i}, {j}) outside [1, {n}]")
            if float(weight) != 0.0:
                pairwise[(i, j)] = float(weight)

        object.__setattr__(self, "n", n)
        object.__setattr__(self, "unary", MappingProxyType(dict(sorted(unary.items()))))
        object.__setattr__(self, "pairwise", MappingProxyType(dict(sorted(pairwise.items()))))

    @property
    def is_maxcut(self) -> bool:
        return not self.unary

    @property
    def weight_bound(self) -> float:
        """Upper bound on |energy|: sum of absolute weights."""
        return sum(abs(w) for w in self.unary.values()) + sum(abs(w) for w in self.pairwise.values())

    @property
    def edges(self) -> list[tuple[tuple[int, ...], float]]:
        """Quadratic edges then unary edges, each ascending."""
        quadratic = [((i, j), w) for (i, j), w in self.pairwise.items()]
        linear = [((i,), w) for i, w in self.unary.items()]
        return quadratic + linear

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "unary": [[i, w] for i, w in self.unary.items()],
            "pairwise": [[i, j, w] for (i, j), w in self.pairwise.items()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IsingInstance":
        """Parse the instance JSON schema; rejects duplicates and self-pairs."""
        try:
            n = data["n"]
            unary_rows = data.get("unary", [])
            pair_rows = data.get("pairwise", [])
        except (TypeError, KeyError) as e:
            raise InvalidArgumentError(f"malformed instance: {e}") from e

        unary = {}
        pairwise = {}
        try:
            for row in unary_rows:
                if len(row) != 2:
                    raise InvalidArgumentError(f"unary entry must be [i, w], got {row!r}")
                node = int(row[0])
                if node in unary:
                    raise InvalidArgumentError(f"duplicate unary entry for node {node}")
                unary[node] = float(row[1])

            for row in pair_rows:
                if len(row) != 3:
                    raise InvalidArgumentError(f"pairwise entry must be [i, j, w], got {row!r}")
                i, j = int(row[0]), int(row[1])
                if i == j:
                    raise InvalidArgumentError(f"self-pair ({i}, {j}) in pairwise entries")
                key = (min(i, j), max(i, j))
                if key in pairwise:
                    raise InvalidArgumentError(f"duplicate pairwise entry for {key}")
                pairwise[key] = float(row[2])

            return cls(n=n, unary=unary, pairwise=pairwise)
        except InvalidArgumentError:
            raise
        except (TypeError, ValueError) as e:
            raise InvalidArgumentError(f"malformed instance: {e}") from e

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "IsingInstance":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InvalidArgumentError(f"instance is not valid JSON: {e}") from e
        return cls.from_dict(data)

    def save(self, path: Union[str, Path]):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "IsingInstance":
        return cls.from_json(Path(path).read_text())

    @classmethod
    def from_graph(cls, graph: nx.Graph) -> "IsingInstance":
        """Build an instance from a weighted networkx graph.

        Nodes are relabelled 1..n in sorted order. Edge attribute ``weight`` gives C_ij,
        node attribute ``weight`` and self-loops give C_ii.
        """
        labels = {node: idx + 1 for idx, node in enumerate(sorted(graph.nodes))}
        unary: dict[int, float] = {}
        pairwise: dict[tuple[int, int], float] = {}
        for node, attrs in graph.nodes(data=True):
            if "weight" in attrs:
                unary[labels[node]] = unary.get(labels[node], 0.0) + float(attrs["weight"])
        for u, v, attrs in graph.edges(data=True):
            weight = float(attrs.get("weight", 1.0))
            i, j = sorted((labels[u], labels[v]))
            if i == j:
                unary[i] = unary.get(i, 0.0) + weight
            else:
                pairwise[(i, j)] = pairwise.get((i, j), 0.0) + weight
        return cls(n=len(labels), unary=unary, pairwise=pairwise)

    def to_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(1, self.n + 1))
        for node, weight in self.unary.items():
            graph.nodes[node]["weight"] = weight
        for (i, j), weight in self.pairwise.items():
            graph.add_edge(i, j, weight=weight)
        return graph


@dataclass(frozen=True)
class ScaledInstance:
    """An instance together with its rescaling constant K = lam * weight_bound."""

    base: IsingInstance
    k_const: float
    lam: float

    def __post_init__(self):
        if not self.k_const > 0:
            raise InvalidArgumentError(f"K must be positive, got {self.k_const}")

    @property
    def n(self) -> int:
        return self.base.n

    def scaled_edges(self) -> list[tuple[tuple[int, ...], float]]:
        """Edges of the base instance with weights divided by K."""
        return [(key, w / self.k_const) for key, w in self.base.edges]

    def scaled_diagonal(self, guard: Optional[int] = None) -> np.ndarray:
        return hamiltonian_diagonal(self.base, guard=guard) / self.k_const


@dataclass(frozen=True)
class SpectrumReport:
    """Exact extremes of the diagonal and every minimizing assignment."""

    c_min: float
    c_max: float
    argmins: tuple[CutAssignment, ...]
    diagonal: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "c_min": self.c_min,
            "c_max": self.c_max,
            "argmins": [str(q) for q in self.argmins],
        }


def _check_capacity(n: int, guard: Optional[int]):
    limit = get_settings().capacity_guard if guard is None else guard
    if n > limit:
        raise CapacityError("enumeration over 2^n states, n", n, limit)


def _energy_tolerance(inst: IsingInstance) -> float:
    return ENERGY_TOL * max(1.0, inst.weight_bound)


def cut_cost(inst: IsingInstance, q: AssignmentLike) -> float:
    """Energy of assignment q: sum_i s_i C_ii + sum_{i<j} s_i s_j C_ij."""
    q = as_assignment(q)
    if len(q) != inst.n:
        raise InvalidArgumentError(f"assignment has {len(q)} bits, instance has {inst.n} nodes")
    spins = q.spins()
    total = 0.0
    for i, w in inst.unary.items():
        total += w * spins[i - 1]
    for (i, j), w in inst.pairwise.items():
        total += w * spins[i - 1] * spins[j - 1]
    return float(total)


def hamiltonian_diagonal(inst: IsingInstance, guard: Optional[int] = None) -> np.ndarray:
    """The 2^n diagonal of C; entry at index(q) equals cut_cost(inst, q)."""
    _check_capacity(inst.n, guard)
    n = inst.n
    z = np.array([1.0, -1.0])

    def along(node: int) -> np.ndarray:
        shape = [1] * n
        shape[node - 1] = 2
        return z.reshape(shape)

    diag = np.zeros((2,) * n)
    for node, w in inst.unary.items():
        diag += w * along(node)
    for (i, j), w in inst.pairwise.items():
        diag += w * (along(i) * along(j))
    return diag.reshape(-1)


def rescale_k(inst: IsingInstance, lam: float = DEFAULT_LAMBDA) -> ScaledInstance:
    """Scale by K = lam * (sum |C_ii| + sum |C_ij|); lam = 2/pi keeps diag(C)/K in [-pi/2, pi/2]."""
    if not lam > 0:
        raise InvalidArgumentError(f"lambda must be positive, got {lam}")
    bound = inst.weight_bound
    if bound == 0:
        raise DegenerateInstanceError("instance has no nonzero weight; K is undefined")
    return ScaledInstance(base=inst, k_const=lam * bound, lam=lam)


def with_k(inst: IsingInstance, k_const: float) -> ScaledInstance:
    """Scale by an explicit K; lam is derived from the weight bound."""
    bound = inst.weight_bound
    if bound == 0:
        raise DegenerateInstanceError("instance has no nonzero weight; K is undefined")
    return ScaledInstance(base=inst, k_const=k_const, lam=k_const / bound)


def brute_force(
    inst: IsingInstance,
    guard: Optional[int] = None,
    keep_diagonal: bool = False,
) -> SpectrumReport:
    """Enumerate all 2^n assignments."""
    diag = hamiltonian_diagonal(inst, guard=guard)
    c_min = float(diag.min())
    c_max = float(diag.max())
    tol = _energy_tolerance(inst)
    argmins = tuple(
        CutAssignment.from_index(int(idx), inst.n)
        for idx in np.flatnonzero(diag <= c_min + tol)
    )
    logger.debug("Brute force n=%d: c_min=%g c_max=%g (%d minimizers)", inst.n, c_min, c_max, len(argmins))
    return SpectrumReport(
        c_min=c_min,
        c_max=c_max,
        argmins=argmins,
        diagonal=diag if keep_diagonal else None,
    )


def random_instance(
    n: int,
    weight_low: float = 1.0,
    weight_high: float = 10.0,
    signed: bool = False,
    maxcut_only: bool = True,
    seed: int = 0,
) -> IsingInstance:
    """Fully connected instance with i.i.d. uniform weights in [weight_low, weight_high].

    Draw order is fixed (pairwise ascending, unary ascending, then signs) so a seed
    always reproduces the same instance.
    """
    if n < 2:
        raise InvalidArgumentError(f"random instances need n >= 2, got {n}")
    if not weight_low < weight_high:
        raise InvalidArgumentError(f"invalid weight range [{weight_low}, {weight_high}]")

    rng = np.random.default_rng(seed)
    graph = nx.complete_graph(range(1, n + 1))
    edges = sorted(tuple(sorted(e)) for e in graph.edges())
    nodes = sorted(graph.nodes)

    edge_weights = rng.uniform(weight_low, weight_high, size=len(edges))
    node_weights = np.zeros(len(nodes)) if maxcut_only else rng.uniform(weight_low, weight_high, size=len(nodes))
    if signed:
        edge_weights = edge_weights * rng.choice([-1.0, 1.0], size=len(edges))
        if not maxcut_only:
            node_weights = node_weights * rng.choice([-1.0, 1.0], size=len(nodes))

    for (i, j), w in zip(edges, edge_weights):
        graph.edges[i, j]["weight"] = float(w)
    if not maxcut_only:
        for node, w in zip(nodes, node_weights):
            graph.nodes[node]["weight"] = float(w)

    return IsingInstance.from_graph(graph)


def order_agreement(inst: IsingInstance, lam: float, guard: Optional[int] = None) -> float:
    """Fraction of adjacent pairs of the sorted true diagonal whose order survives sin(diag/K).

    Pairs that tie in the true diagonal count as preserved.
    """
    if not lam > 0:
        raise InvalidArgumentError(f"lambda must be positive, got {lam}")
    diag = hamiltonian_diagonal(inst, guard=guard)
    bound = inst.weight_bound
    if bound == 0 or diag.size < 2:
        return 1.0

    order = np.argsort(diag, kind="stable")
    true_sorted = diag[order]
    transformed = np.sin(true_sorted / (lam * bound))

    ties = np.diff(true_sorted) <= _energy_tolerance(inst)
    kept = np.diff(transformed) >= -ORDER_TOL
    return float(np.mean(ties | kept))


def _unit_range(values: np.ndarray) -> np.ndarray:
    span = values.max() - values.min()
    if span == 0:
        return np.zeros_like(values)
    return (values - values.min()) / span


def transformed_profile(
    inst: IsingInstance,
    lam: float,
    guard: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sorted true costs and the transformed costs in the same order, both mapped to [0, 1]."""
    if not lam > 0:
        raise InvalidArgumentError(f"lambda must be positive, got {lam}")
    diag = hamiltonian_diagonal(inst, guard=guard)
    order = np.argsort(diag, kind="stable")
    true_sorted = diag[order]
    bound = inst.weight_bound
    transformed = np.sin(true_sorted / (lam * bound)) if bound else np.zeros_like(true_sorted)
    return _unit_range(true_sorted), _unit_range(transformed)


def approximation_ratio(
    inst: IsingInstance,
    energy: float,
    spectrum: Optional[SpectrumReport] = None,
    guard: Optional[int] = None,
) -> float:
    """r = (energy - C_max) / (C_min - C_max); 1 at the ground state, 0 at the worst state."""
    spectrum = spectrum or brute_force(inst, guard=guard)
    if spectrum.c_max - spectrum.c_min <= _energy_tolerance(inst):
        raise DegenerateInstanceError("flat spectrum: c_min equals c_max")
    return (energy - spectrum.c_max) / (spectrum.c_min - spectrum.c_max)


def clamp_ratio(r: float) -> tuple[float, bool]:
    """Clamp r into [0, 1]; the flag reports whether clamping happened."""
    clamped = min(max(r, 0.0), 1.0)
    return clamped, clamped != r


def approximation_index(
    inst: IsingInstance,
    most_likely: AssignmentLike,
    symmetric_pair: bool = False,
    spectrum: Optional[SpectrumReport] = None,
    guard: Optional[int] = None,
) -> int:
    """1 iff the most likely assignment (or, with symmetric_pair, its complement) is a ground state."""
    q = as_assignment(most_likely)
    spectrum = spectrum or brute_force(inst, guard=guard)
    tol = _energy_tolerance(inst)
    if abs(cut_cost(inst, q) - spectrum.c_min) <= tol:
        return 1
    if symmetric_pair and abs(cut_cost(inst, q.complement()) - spectrum.c_min) <= tol:
        return 1
    return 0


# Test
if __name__ == "__main__":
    triangle = IsingInstance(n=3, pairwise={(1, 2): 1.0, (1, 3): 2.0, (2, 3): 3.0})
    report = brute_force(triangle)
    print(f"Triangle spectrum: [{report.c_min}, {report.c_max}]")
    print(f"Ground states: {[str(q) for q in report.argmins]}")
    print(f"K at 2/pi: {rescale_k(triangle).k_const:.6f}")
