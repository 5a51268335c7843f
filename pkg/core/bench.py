"""Seeded benchmark campaigns, the lambda sweep and result aggregation."""

import csv
import io
import json
import logging
import math
import sqlite3
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from core.config import DEFAULT_LAMBDA
from core.database import ResultStore
from core.errors import InvalidArgumentError, PersistenceError
from core.optimize import METHODS, OptimizerConfig, TrainTrace, solve
from core.problem import (
    IsingInstance,
    SpectrumReport,
    approximation_index,
    approximation_ratio,
    brute_force,
    clamp_ratio,
    order_agreement,
    random_instance,
    transformed_profile,
)

logger = logging.getLogger(__name__)

PROBLEMS = ("maxcut", "ising")
REFERENCE_TOL = 1e-12


def derive_seed(master: int, n: int, index: int, role: str) -> int:
    """Seed for one (size, instance, role) cell; roles are "instance" or a method name."""
    sequence = np.random.SeedSequence([master, n, index, zlib.crc32(role.encode())])
    return int(sequence.generate_state(1)[0])


@dataclass(frozen=True)
class BenchSpec:
    sizes: tuple[int, ...] = (3, 5, 8)
    instances_per_size: int = 20
    weight_low: float = 1.0
    weight_high: float = 10.0
    signed: bool = False
    problem: str = "maxcut"
    methods: tuple[str, ...] = ("uqmaxcut", "qaoa_ngd", "qaoa_simplex")
    config: OptimizerConfig = field(default_factory=OptimizerConfig)
    method_configs: Mapping[str, OptimizerConfig] = field(default_factory=dict)
    qaoa_p: Optional[int] = None
    master_seed: int = 0
    record_timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.sizes or min(self.sizes) < 2:
            raise InvalidArgumentError(f"sizes must be >= 2, got {self.sizes}")
        if self.instances_per_size < 1:
            raise InvalidArgumentError(f"instances_per_size must be >= 1, got {self.instances_per_size}")
        if not self.weight_low < self.weight_high:
            raise InvalidArgumentError(f"invalid weight range [{self.weight_low}, {self.weight_high}]")
        if self.problem not in PROBLEMS:
            raise InvalidArgumentError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if not self.methods:
            raise InvalidArgumentError("at least one method is required")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise InvalidArgumentError(f"unknown methods {sorted(unknown)}; expected a subset of {METHODS}")
        if "uqmaxcut" in self.methods and self.problem != "maxcut":
            raise InvalidArgumentError("uqmaxcut runs on maxcut campaigns only")
        if "uqising" in self.methods and self.problem != "ising":
            raise InvalidArgumentError("uqising runs on ising campaigns only")
        if self.master_seed < 0:
            raise InvalidArgumentError("master seed must be non-negative")

    def config_for(self, method: str) -> OptimizerConfig:
        return self.method_configs.get(method, self.config)

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "instances_per_size": self.instances_per_size,
            "weight_range": [self.weight_low, self.weight_high],
            "signed": self.signed,
            "problem": self.problem,
            "methods": list(self.methods),
            "configs": {m: self.config_for(m).to_dict() for m in self.methods},
            "qaoa_p": self.qaoa_p,
            "master_seed": self.master_seed,
            "record_timing": self.record_timing,
        }


@dataclass(frozen=True)
class BenchRecord:
    n: int
    instance: int
    seed: int
    method: str
    ratio: float
    ratio_clamped: bool
    index: int
    iterations: int
    wall_ms: float
    trace_ref: str
    bits: str
    energy: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SummaryRow:
    n: int
    method: str
    count: int
    mean_r: float
    std_r: float
    index_rate: float
    mean_wall_ms: float


@dataclass(frozen=True)
class _Instance:
    n: int
    index: int
    seed: int
    text: str
    spectrum: SpectrumReport


def _generate_instances(spec: BenchSpec) -> list[_Instance]:
    instances = []
    for n in spec.sizes:
        for index in range(spec.instances_per_size):
            seed = derive_seed(spec.master_seed, n, index, "instance")
            inst = random_instance(
                n,
                spec.weight_low,
                spec.weight_high,
                signed=spec.signed,
                maxcut_only=spec.problem == "maxcut",
                seed=seed,
            )
            instances.append(_Instance(n, index, seed, inst.to_json(), brute_force(inst)))
    return instances


def _run_item(spec: BenchSpec, item: _Instance, method: str) -> tuple[BenchRecord, TrainTrace]:
    # Every method parses the same serialized instance
    inst = IsingInstance.from_json(item.text)
    cfg = replace(spec.config_for(method), seed=derive_seed(spec.master_seed, item.n, item.index, method))

    started = time.perf_counter()
    solution = solve(inst, method, cfg, p=spec.qaoa_p)
    wall_ms = (time.perf_counter() - started) * 1000.0

    ratio, clamped = clamp_ratio(approximation_ratio(inst, solution.energy, spectrum=item.spectrum))
    if clamped:
        logger.warning("Clamped ratio for n=%d #%d %s", item.n, item.index, method)
    index = approximation_index(inst, solution.most_likely, symmetric_pair=cfg.entangle, spectrum=item.spectrum)

    record = BenchRecord(
        n=item.n,
        instance=item.index,
        seed=item.seed,
        method=method,
        ratio=ratio,
        ratio_clamped=clamped,
        index=index,
        iterations=solution.trace.iterations_to_best(),
        wall_ms=wall_ms,
        trace_ref=f"n{item.n}-{item.index}-{method}",
        bits=str(solution.most_likely),
        energy=solution.energy,
    )
    return record, solution.trace


def run_campaign(
    spec: BenchSpec,
    out_dir: Optional[Union[str, Path]] = None,
    store: Optional[ResultStore] = None,
    jobs: int = 1,
) -> list[BenchRecord]:
    """Solve every (size, instance, method) cell and persist the results.

    Records come back in (n, index, method) order whatever the worker count.
    """
    if jobs < 1:
        raise InvalidArgumentError(f"jobs must be >= 1, got {jobs}")
    instances = _generate_instances(spec)
    cells = [(item, method) for item in instances for method in spec.methods]
    logger.info("Running campaign: %d instances x %d methods (%d jobs)", len(instances), len(spec.methods), jobs)

    if jobs == 1:
        results = [_run_item(spec, item, method) for item, method in cells]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(lambda cell: _run_item(spec, *cell), cells))

    records = [record for record, _ in results]
    traces = {record.trace_ref: trace for record, trace in results}

    try:
        if out_dir is not None:
            write_campaign(out_dir, spec, instances, records, traces)
        if store is not None:
            _store_campaign(store, spec, records, traces)
    except (OSError, sqlite3.Error) as e:
        raise PersistenceError(f"Could not persist campaign results: {e}", records) from e
    return records


def results_csv(records: Sequence[BenchRecord], timing: bool = False) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    header = ["n", "seed", "method", "r", "i", "iterations"]
    writer.writerow(header + (["wall_ms"] if timing else []))
    for r in records:
        row = [r.n, r.seed, r.method, repr(r.ratio), r.index, r.iterations]
        writer.writerow(row + ([f"{r.wall_ms:.3f}"] if timing else []))
    return buffer.getvalue()


def summary_csv(rows: Sequence[SummaryRow], timing: bool = False) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    header = ["n", "method", "count", "mean_r", "std_r", "index_rate"]
    writer.writerow(header + (["mean_wall_ms"] if timing else []))
    for s in rows:
        row = [s.n, s.method, s.count, repr(s.mean_r), repr(s.std_r), repr(s.index_rate)]
        writer.writerow(row + ([f"{s.mean_wall_ms:.3f}"] if timing else []))
    return buffer.getvalue()


def write_campaign(
    out_dir: Union[str, Path],
    spec: BenchSpec,
    instances: Iterable[_Instance],
    records: Sequence[BenchRecord],
    traces: Mapping[str, TrainTrace],
):
    out = Path(out_dir)
    (out / "instances").mkdir(parents=True, exist_ok=True)
    (out / "traces").mkdir(exist_ok=True)

    names = []
    for item in instances:
        name = f"n{item.n}-{item.index}.json"
        (out / "instances" / name).write_text(item.text)
        names.append(name)

    manifest = spec.to_dict()
    manifest["instances"] = names
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (out / "results.csv").write_text(results_csv(records, spec.record_timing))
    (out / "summary.csv").write_text(summary_csv(summarize(records), spec.record_timing))
    for ref, trace in traces.items():
        trace.to_csv(out / "traces" / f"{ref}.csv")
    logger.info("Wrote campaign results to %s", out)


def _store_campaign(store: ResultStore, spec: BenchSpec, records: Sequence[BenchRecord], traces: Mapping[str, TrainTrace]):
    campaign_id = store.add_campaign(spec.master_seed, spec.to_dict())
    store.add_records(campaign_id, [r.to_dict() for r in records])
    for ref, trace in traces.items():
        store.add_trace(ref, [(r.k, r.loss, r.grad_norm, r.step_size) for r in trace.records])
    store.set_setting("last_campaign", str(campaign_id))
    logger.info("Stored campaign %d in %s", campaign_id, store.db_path)


def summarize(records: Iterable[BenchRecord]) -> list[SummaryRow]:
    """Per (n, method): mean and population std of r, fraction with i = 1, mean wall time."""
    groups: dict[tuple[int, str], list[BenchRecord]] = {}
    for r in records:
        groups.setdefault((r.n, r.method), []).append(r)
    if not groups:
        raise InvalidArgumentError("no records to summarize")

    rows = []
    for (n, method), group in sorted(groups.items()):
        count = len(group)
        # fsum keeps the aggregates independent of record order
        mean_r = math.fsum(r.ratio for r in group) / count
        std_r = math.sqrt(math.fsum((r.ratio - mean_r) ** 2 for r in group) / count)
        rows.append(SummaryRow(
            n=n,
            method=method,
            count=count,
            mean_r=mean_r,
            std_r=std_r,
            index_rate=sum(r.index for r in group) / count,
            mean_wall_ms=math.fsum(r.wall_ms for r in group) / count,
        ))
    return rows


def default_lambdas() -> list[float]:
    """0.1, 0.2, ..., 1.0 plus the 2/pi reference."""
    return sorted([*(round(x, 10) for x in np.linspace(0.1, 1.0, 10)), DEFAULT_LAMBDA])


def is_reference(lam: float) -> bool:
    return abs(lam - DEFAULT_LAMBDA) < REFERENCE_TOL


@dataclass(frozen=True)
class SweepRow:
    lam: float
    instance_seed: int
    agreement: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    # lambda -> mean sorted (true, transformed) curves over the ensemble
    curves: dict[float, tuple[np.ndarray, np.ndarray]]

    def mean_agreement(self) -> dict[float, float]:
        by_lambda: dict[float, list[float]] = {}
        for row in self.rows:
            by_lambda.setdefault(row.lam, []).append(row.agreement)
        return {lam: math.fsum(values) / len(values) for lam, values in sorted(by_lambda.items())}

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["lambda", "instance_seed", "agreement", "reference"])
        for row in self.rows:
            writer.writerow([repr(row.lam), row.instance_seed, repr(row.agreement), int(is_reference(row.lam))])
        return buffer.getvalue()

    def curves_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["lambda", "rank", "true_cost", "transformed_cost"])
        for lam, (true_curve, transformed) in sorted(self.curves.items()):
            for rank, (t, s) in enumerate(zip(true_curve, transformed)):
                writer.writerow([repr(lam), rank, repr(float(t)), repr(float(s))])
        return buffer.getvalue()


def lambda_sweep(
    n: int = 10,
    instances: int = 10,
    lambdas: Optional[Sequence[float]] = None,
    signed: bool = True,
    seed: int = 0,
    maxcut_only: bool = False,
    weight_low: float = 1.0,
    weight_high: float = 10.0,
) -> SweepResult:
    """Order agreement of sin(diag/K) with the true cost order across lambda values."""
    lambdas = default_lambdas() if lambdas is None else [float(lam) for lam in lambdas]
    if not lambdas or min(lambdas) <= 0:
        raise InvalidArgumentError(f"lambda values must be positive, got {lambdas}")
    if instances < 1:
        raise InvalidArgumentError(f"instances must be >= 1, got {instances}")

    ensemble = []
    for index in range(instances):
        instance_seed = derive_seed(seed, n, index, "instance")
        inst = random_instance(n, weight_low, weight_high, signed=signed, maxcut_only=maxcut_only, seed=instance_seed)
        ensemble.append((instance_seed, inst))

    rows = []
    curves = {}
    for lam in lambdas:
        true_sum = transformed_sum = None
        for instance_seed, inst in ensemble:
            rows.append(SweepRow(lam, instance_seed, order_agreement(inst, lam)))
            true_curve, transformed = transformed_profile(inst, lam)
            true_sum = true_curve if true_sum is None else true_sum + true_curve
            transformed_sum = transformed if transformed_sum is None else transformed_sum + transformed
        curves[lam] = (true_sum / instances, transformed_sum / instances)
        logger.debug("lambda=%.4f done", lam)
    return SweepResult(rows=rows, curves=curves)
