"""Hadamard-test loss, parameter-shift gradients, normalized gradient descent and the QAOA baseline."""

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, TextIO, Union

import numpy as np
from scipy.optimize import minimize

from core.circuits import (
    ANCILLA,
    WORKING_OFFSET,
    build_ansatz,
    build_controlled_block_encoding,
    build_entanglement,
    build_qaoa,
    build_workflow,
)
from core.config import DEFAULT_LAMBDA, get_settings
from core.errors import CapacityError, InvalidArgumentError, ZeroGradientError
from core.problem import CutAssignment, IsingInstance, ScaledInstance, cut_cost, hamiltonian_diagonal, rescale_k
from core.statevec import (
    EXTRA_QUBITS,
    Circuit,
    StateVector,
    ancilla_expectation,
    apply_circuit,
    init_basis,
    probabilities,
    sample,
)

logger = logging.getLogger(__name__)

SHIFT = math.pi / 2
ZERO_GRAD_TOL = 1e-12
TIE_TOL = 1e-12

MODES = ("exact", "shots")
INIT_CHOICES = ("auto", "zeros", "half_pi")
BACKENDS = ("circuit", "diagonal")
NGD_DIMS = ("angles", "nodes")
METHODS = ("uqmaxcut", "uqising", "qaoa_ngd", "qaoa_simplex")

SeedLike = Union[int, np.random.SeedSequence, None]


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs for one solve.

    mode "exact" reads probabilities from amplitudes; "shots" estimates every loss from
    `shots` seeded samples. init_angles is "auto" (zeros for MaxCut, pi/2 otherwise),
    "zeros", "half_pi" or an explicit angle vector.
    """

    k_max: int = 100
    mode: str = "exact"
    shots: int = 1024
    seed: int = 0
    init_angles: Union[str, tuple[float, ...]] = "auto"
    entangle: bool = False
    readout_shots: int = 1024
    lam: float = DEFAULT_LAMBDA
    init_jitter: float = 0.05
    backend: str = "circuit"
    ngd_dim: str = "angles"
    simplex_edge: float = 0.1
    guard: Optional[int] = None

    def __post_init__(self):
        if self.k_max < 1:
            raise InvalidArgumentError(f"k_max must be >= 1, got {self.k_max}")
        if self.mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.shots < 1 or self.readout_shots < 1:
            raise InvalidArgumentError("shot counts must be >= 1")
        if self.seed < 0:
            raise InvalidArgumentError(f"seed must be non-negative, got {self.seed}")
        if self.backend not in BACKENDS:
            raise InvalidArgumentError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.backend == "diagonal" and self.mode != "exact":
            raise InvalidArgumentError("the diagonal backend only supports exact mode")
        if self.ngd_dim not in NGD_DIMS:
            raise InvalidArgumentError(f"ngd_dim must be one of {NGD_DIMS}, got {self.ngd_dim!r}")
        if self.init_jitter < 0:
            raise InvalidArgumentError("init_jitter must be non-negative")
        if isinstance(self.init_angles, str):
            if self.init_angles not in INIT_CHOICES:
                raise InvalidArgumentError(f"init_angles must be one of {INIT_CHOICES} or a vector")
        else:
            object.__setattr__(self, "init_angles", tuple(float(t) for t in self.init_angles))

    @property
    def exact(self) -> bool:
        return self.mode == "exact"

    def to_dict(self) -> dict:
        return {
            "k_max": self.k_max,
            "mode": self.mode,
            "shots": self.shots,
            "seed": self.seed,
            "init_angles": self.init_angles if isinstance(self.init_angles, str) else list(self.init_angles),
            "entangle": self.entangle,
            "readout_shots": self.readout_shots,
            "lam": self.lam,
            "init_jitter": self.init_jitter,
            "backend": self.backend,
            "ngd_dim": self.ngd_dim,
            "simplex_edge": self.simplex_edge,
        }


def shot_seed(seed: int, k: int, component: int = 0, sign: int = 0) -> np.random.SeedSequence:
    """Sampling seed of one loss evaluation. sign: 0 unshifted, 1 for +pi/2, 2 for -pi/2."""
    return np.random.SeedSequence([seed, k, component, sign])


@dataclass(frozen=True)
class TrainRecord:
    k: int
    loss: float
    grad_norm: Optional[float]
    step_size: float
    skipped: bool = False


@dataclass
class TrainTrace:
    records: list[TrainRecord] = field(default_factory=list)
    thetas_star: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return len(self.records)

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    @property
    def skipped(self) -> int:
        return sum(1 for r in self.records if r.skipped)

    def iterations_to_best(self) -> int:
        """Iteration index of the first record reaching the lowest loss."""
        if not self.records:
            return 0
        return self.records[int(np.argmin(self.losses))].k

    def write_csv(self, stream: TextIO):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["k", "loss", "grad_norm", "step_size"])
        for r in self.records:
            writer.writerow([r.k, repr(r.loss), "" if r.grad_norm is None else repr(r.grad_norm), repr(r.step_size)])

    def to_csv(self, path: Optional[Union[str, Path]] = None) -> str:
        buffer = io.StringIO()
        self.write_csv(buffer)
        text = buffer.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


@dataclass
class Solution:
    method: str
    thetas_star: np.ndarray
    most_likely: CutAssignment
    energy: float
    readout_distribution: dict[str, int]
    trace: TrainTrace
    probabilities: Optional[np.ndarray] = None

    def to_dict(self, ratio: Optional[float] = None, index: Optional[int] = None) -> dict:
        return {
            "method": self.method,
            "thetas": [float(t) for t in self.thetas_star],
            "bits": str(self.most_likely),
            "energy": self.energy,
            "ratio": ratio,
            "index": index,
            "counts": dict(self.readout_distribution),
        }


def _check_capacity(n: int, guard: Optional[int]) -> int:
    limit = get_settings().capacity_guard if guard is None else guard
    if n > limit:
        raise CapacityError("simulated working register", n, limit)
    return limit


class WorkflowLoss:
    """L(thetas) = p(0) - p(1) of the Hadamard-test ancilla. Counts its evaluations."""

    def __init__(self, s: ScaledInstance, cfg: OptimizerConfig):
        self.s = s
        self.cfg = cfg
        self.evaluations = 0
        self._limit = _check_capacity(s.n, cfg.guard)
        if cfg.entangle and s.n < 2:
            raise InvalidArgumentError("entangled mode needs n >= 2")
        self._controlled: Optional[Circuit] = None
        self._sin_diag: Optional[np.ndarray] = None
        if cfg.backend == "circuit":
            self._controlled = build_controlled_block_encoding(s)
        else:
            self._sin_diag = np.sin(s.scaled_diagonal(guard=self._limit))

    @property
    def arity(self) -> int:
        return self.s.n - 1 if self.cfg.entangle else self.s.n

    def _check_arity(self, thetas: Sequence[float]):
        if len(thetas) != self.arity:
            raise InvalidArgumentError(f"expected {self.arity} angles, got {len(thetas)}")

    def working_state(self, thetas: Sequence[float]) -> StateVector:
        """|psi(thetas)> on the n working qubits alone."""
        self._check_arity(thetas)
        n = self.s.n
        circuit = Circuit(n, (), {"working": list(range(n))})
        if self.cfg.entangle:
            circuit = circuit.then(build_ansatz(thetas), offset=1).then(build_entanglement(n))
        else:
            circuit = circuit.then(build_ansatz(thetas))
        return apply_circuit(init_basis(n, 0, guard=self._limit), circuit)

    def final_state(self, thetas: Sequence[float]) -> tuple[StateVector, list[int]]:
        """State used for readout together with the qubits holding the working register."""
        if self.cfg.backend == "diagonal":
            return self.working_state(thetas), list(range(self.s.n))
        self._check_arity(thetas)
        circuit = build_workflow(self.s, list(thetas), entangle=self.cfg.entangle, controlled=self._controlled)
        state = apply_circuit(init_basis(circuit.m, 0, guard=self._limit + EXTRA_QUBITS), circuit)
        return state, list(range(WORKING_OFFSET, WORKING_OFFSET + self.s.n))

    def __call__(self, thetas: Sequence[float], seed: SeedLike = None) -> float:
        self._check_arity(thetas)
        self.evaluations += 1
        if self._sin_diag is not None:
            return float(probabilities(self.working_state(thetas)) @ self._sin_diag)

        circuit = build_workflow(self.s, list(thetas), entangle=self.cfg.entangle, controlled=self._controlled)
        state = apply_circuit(init_basis(circuit.m, 0, guard=self._limit + EXTRA_QUBITS), circuit)
        if self.cfg.exact:
            return ancilla_expectation(state, ANCILLA)
        counts = sample(state, [ANCILLA], self.cfg.shots, seed)
        return (counts.get("0", 0) - counts.get("1", 0)) / self.cfg.shots


class QaoaLoss:
    """<gamma, beta| C |gamma, beta> with x = (gamma_1..gamma_p, beta_1..beta_p)."""

    def __init__(self, inst: IsingInstance, p: int, cfg: OptimizerConfig):
        if p < 1:
            raise InvalidArgumentError(f"QAOA depth must be >= 1, got {p}")
        self.inst = inst
        self.p = p
        self.cfg = cfg
        self.evaluations = 0
        self._limit = _check_capacity(inst.n, cfg.guard)
        self.diag = hamiltonian_diagonal(inst, guard=self._limit)

    @property
    def arity(self) -> int:
        return 2 * self.p

    def final_state(self, x: Sequence[float]) -> tuple[StateVector, list[int]]:
        if len(x) != self.arity:
            raise InvalidArgumentError(f"expected {self.arity} QAOA parameters, got {len(x)}")
        circuit = build_qaoa(self.inst, x[: self.p], x[self.p :], guard=self._limit)
        return apply_circuit(init_basis(self.inst.n, 0, guard=self._limit), circuit), list(range(self.inst.n))

    def __call__(self, x: Sequence[float], seed: SeedLike = None) -> float:
        state, qubits = self.final_state(x)
        self.evaluations += 1
        if self.cfg.exact:
            return float(probabilities(state) @ self.diag)
        counts = sample(state, qubits, self.cfg.shots, seed)
        return sum(self.diag[int(bits, 2)] * c for bits, c in counts.items()) / self.cfg.shots


def loss(s: ScaledInstance, thetas: Sequence[float], cfg: Optional[OptimizerConfig] = None, seed: SeedLike = None) -> float:
    cfg = cfg or OptimizerConfig()
    if seed is None and not cfg.exact:
        seed = shot_seed(cfg.seed, 0)
    return WorkflowLoss(s, cfg)(thetas, seed)


def parameter_shift(
    objective: Callable[[np.ndarray, SeedLike], float],
    thetas: Sequence[float],
    seeds: Optional[Callable[[int, int], SeedLike]] = None,
) -> np.ndarray:
    """Component i = (f(theta + pi/2 e_i) - f(theta - pi/2 e_i)) / 2; 2 * dim evaluations."""
    thetas = np.asarray(thetas, dtype=float)
    grad = np.zeros_like(thetas)
    for i in range(thetas.size):
        plus, minus = thetas.copy(), thetas.copy()
        plus[i] += SHIFT
        minus[i] -= SHIFT
        f_plus = objective(plus, seeds(i, 1) if seeds else None)
        f_minus = objective(minus, seeds(i, 2) if seeds else None)
        grad[i] = 0.5 * (f_plus - f_minus)
    return grad


def parameter_shift_grad(
    s: ScaledInstance,
    thetas: Sequence[float],
    cfg: Optional[OptimizerConfig] = None,
    k: int = 0,
) -> np.ndarray:
    cfg = cfg or OptimizerConfig()
    objective = WorkflowLoss(s, cfg)
    return parameter_shift(objective, thetas, seeds=lambda i, sign: shot_seed(cfg.seed, k, i, sign))


def ngd_step_size(k: int, k_max: int, dim: int) -> float:
    """(pi * dim / 2)^(1/2) * exp(-4 k^2 / k_max^2)."""
    return math.sqrt(math.pi * dim / 2) * math.exp(-4.0 * k * k / (k_max * k_max))


def ngd_step(thetas: Sequence[float], grad: Sequence[float], k: int, k_max: int, dim: int) -> np.ndarray:
    """One normalized gradient descent update. Raises ZeroGradientError when |grad| <= 1e-12."""
    grad = np.asarray(grad, dtype=float)
    norm = float(np.linalg.norm(grad))
    if norm <= ZERO_GRAD_TOL:
        raise ZeroGradientError(norm)
    return np.asarray(thetas, dtype=float) - ngd_step_size(k, k_max, dim) * grad / norm


def _run_ngd(objective, x0: np.ndarray, cfg: OptimizerConfig, dim: int) -> TrainTrace:
    """Exactly k_max NGD iterations plus a final record; zero gradients skip the update."""
    x = np.array(x0, dtype=float)
    trace = TrainTrace()
    for k in range(cfg.k_max):
        value = objective(x, shot_seed(cfg.seed, k))
        grad = parameter_shift(objective, x, seeds=lambda i, sign, k=k: shot_seed(cfg.seed, k, i, sign))
        norm = float(np.linalg.norm(grad))
        try:
            x = ngd_step(x, grad, k, cfg.k_max, dim)
            trace.records.append(TrainRecord(k, value, norm, ngd_step_size(k, cfg.k_max, dim)))
        except ZeroGradientError:
            logger.debug("Zero gradient at k=%d, keeping angles", k)
            trace.records.append(TrainRecord(k, value, norm, 0.0, skipped=True))
        if k % 10 == 0:
            logger.debug("k=%d loss=%.6f |grad|=%.3e", k, value, norm)

    trace.records.append(TrainRecord(cfg.k_max, objective(x, shot_seed(cfg.seed, cfg.k_max)), None, 0.0))
    trace.thetas_star = x
    return trace


def _most_likely(probs: np.ndarray, counts: dict[str, int], n: int, exact: bool) -> CutAssignment:
    if exact:
        best = probs.max()
        # lowest index among near-ties is the lexicographically smallest bit-string
        return CutAssignment.from_index(int(np.flatnonzero(probs >= best - TIE_TOL)[0]), n)
    bits, _ = min(counts.items(), key=lambda item: (-item[1], item[0]))
    return CutAssignment.from_string(bits)


def _readout(objective, x: np.ndarray, cfg: OptimizerConfig, n: int):
    state, qubits = objective.final_state(x)
    probs = probabilities(state, qubits)
    counts = sample(state, qubits, cfg.readout_shots, np.random.SeedSequence([cfg.seed, cfg.k_max + 1]))
    return _most_likely(probs, counts, n, cfg.exact), counts, probs


def initial_angles(inst: IsingInstance, cfg: OptimizerConfig, arity: int) -> np.ndarray:
    """Starting angles; presets get a seeded jitter in [-init_jitter, init_jitter]."""
    if not isinstance(cfg.init_angles, str):
        if len(cfg.init_angles) != arity:
            raise InvalidArgumentError(f"expected {arity} initial angles, got {len(cfg.init_angles)}")
        return np.array(cfg.init_angles, dtype=float)

    choice = cfg.init_angles
    if choice == "auto":
        choice = "zeros" if inst.is_maxcut else "half_pi"
    thetas = np.zeros(arity) if choice == "zeros" else np.full(arity, math.pi / 2)
    if cfg.init_jitter > 0:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, cfg.k_max + 2]))
        thetas += rng.uniform(-cfg.init_jitter, cfg.init_jitter, size=arity)
    return thetas


def solve_uq(inst: IsingInstance, cfg: Optional[OptimizerConfig] = None) -> Solution:
    """Rescale, train the RY ansatz for exactly k_max NGD iterations, then read out the working register."""
    cfg = cfg or OptimizerConfig()
    method = "uqmaxcut" if inst.is_maxcut else "uqising"
    logger.info("Solving n=%d instance with %s (%s)", inst.n, method, cfg.mode)

    s = rescale_k(inst, cfg.lam)
    objective = WorkflowLoss(s, cfg)
    x0 = initial_angles(inst, cfg, objective.arity)
    dim = objective.arity if cfg.ngd_dim == "angles" else inst.n

    trace = _run_ngd(objective, x0, cfg, dim)
    most_likely, counts, probs = _readout(objective, trace.thetas_star, cfg, inst.n)
    if trace.skipped:
        logger.info("%d of %d iterations hit a zero gradient", trace.skipped, cfg.k_max)
    logger.debug("%s used %d loss evaluations", method, objective.evaluations)

    return Solution(
        method=method,
        thetas_star=trace.thetas_star,
        most_likely=most_likely,
        energy=cut_cost(inst, most_likely),
        readout_distribution=counts,
        trace=trace,
        probabilities=probs,
    )


def qaoa_energy(
    inst: IsingInstance,
    gammas: Sequence[float],
    betas: Sequence[float],
    cfg: Optional[OptimizerConfig] = None,
    seed: SeedLike = None,
) -> float:
    cfg = cfg or OptimizerConfig()
    if len(gammas) != len(betas):
        raise InvalidArgumentError(f"got {len(gammas)} gammas but {len(betas)} betas")
    if seed is None and not cfg.exact:
        seed = shot_seed(cfg.seed, 0)
    return QaoaLoss(inst, len(gammas), cfg)(list(gammas) + list(betas), seed)


def default_depth(n: int) -> int:
    return math.ceil(n / 2)


def _run_simplex(objective: QaoaLoss, x0: np.ndarray, cfg: OptimizerConfig) -> TrainTrace:
    """Nelder-Mead from x0 with an axis-aligned initial simplex and 200 * dim evaluations.

    scipy's default coefficients are used: reflection 1, expansion 2, contraction 0.5, shrink 0.5.
    """
    dim = x0.size
    simplex = np.vstack([x0, x0 + cfg.simplex_edge * np.eye(dim)])
    trace = TrainTrace()

    def fun(x):
        return objective(x, shot_seed(cfg.seed, objective.evaluations))

    def record(intermediate_result):
        trace.records.append(TrainRecord(len(trace.records), float(intermediate_result.fun), None, 0.0))

    result = minimize(
        fun,
        x0,
        method="Nelder-Mead",
        callback=record,
        options={"initial_simplex": simplex, "maxfev": 200 * dim},
    )
    trace.records.append(TrainRecord(len(trace.records), float(result.fun), None, 0.0))
    trace.thetas_star = np.asarray(result.x, dtype=float)
    logger.debug("Nelder-Mead stopped after %d evaluations: %s", result.nfev, result.message)
    return trace


def solve_qaoa(
    inst: IsingInstance,
    p: Optional[int] = None,
    method: str = "ngd_shift",
    cfg: Optional[OptimizerConfig] = None,
) -> Solution:
    """Optimize 2p QAOA angles from zero, by NGD with shift gradients or by Nelder-Mead.

    The +-pi/2 shift rule is exact for single-qubit rotations only; for the QAOA layers it
    gives a descent direction estimate, which is all NGD uses.
    """
    cfg = cfg or OptimizerConfig()
    p = default_depth(inst.n) if p is None else p
    label = {"ngd_shift": "qaoa_ngd", "simplex": "qaoa_simplex"}.get(method)
    if label is None:
        raise InvalidArgumentError(f"unknown QAOA optimizer {method!r}")
    logger.info("Solving n=%d instance with %s (p=%d, %s)", inst.n, label, p, cfg.mode)

    objective = QaoaLoss(inst, p, cfg)
    x0 = np.zeros(objective.arity)
    if method == "ngd_shift":
        # The shift gradient vanishes identically at the origin
        if cfg.init_jitter > 0:
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, cfg.k_max + 2]))
            x0 += rng.uniform(-cfg.init_jitter, cfg.init_jitter, size=x0.size)
        trace = _run_ngd(objective, x0, cfg, objective.arity)
    else:
        trace = _run_simplex(objective, x0, cfg)

    most_likely, counts, probs = _readout(objective, trace.thetas_star, cfg, inst.n)
    return Solution(
        method=label,
        thetas_star=trace.thetas_star,
        most_likely=most_likely,
        energy=cut_cost(inst, most_likely),
        readout_distribution=counts,
        trace=trace,
        probabilities=probs,
    )


def solve(inst: IsingInstance, method: str, cfg: Optional[OptimizerConfig] = None, p: Optional[int] = None) -> Solution:
    """Dispatch by benchmark method name."""
    if method in ("uqmaxcut", "uqising"):
        return solve_uq(inst, cfg)
    if method == "qaoa_ngd":
        return solve_qaoa(inst, p, "ngd_shift", cfg)
    if method == "qaoa_simplex":
        return solve_qaoa(inst, p, "simplex", cfg)
    raise InvalidArgumentError(f"unknown method {method!r}; expected one of {METHODS}")
