"""argparse front end: gen, oracle, solve, qaoa, bench, ksweep, resources, export-circuit.

stdout carries only JSON or CSV; progress and errors go to stderr.
"""

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from core import __version__
from core.bench import BenchSpec, lambda_sweep, run_campaign, summarize, summary_csv
from core.circuits import (
    build_block_encoding,
    build_controlled_block_encoding,
    build_entanglement,
    build_qaoa,
    build_workflow,
    count_resources,
)
from core.config import get_settings
from core.database import ResultStore
from core.errors import EXIT_OK, CapacityError, InvalidArgumentError, UQError, exit_code_for
from core.optimize import OptimizerConfig, default_depth, solve_qaoa, solve_uq
from core.problem import (
    IsingInstance,
    approximation_index,
    approximation_ratio,
    brute_force,
    clamp_ratio,
    random_instance,
    rescale_k,
)

logger = logging.getLogger(__name__)

CIRCUITS = ("block", "controlled", "workflow", "entangle", "qaoa")


def build_hash() -> str:
    """First 12 hex digits of sha256 over the core sources."""
    digest = hashlib.sha256()
    for path in sorted((Path(__file__).resolve().parent.parent / "core").glob("*.py")):
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()[:12]


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(part) for part in text.split(":"))
    except ValueError as e:
        raise InvalidArgumentError(f"--range expects lo:hi, got {text!r}") from e
    if not lo < hi:
        raise InvalidArgumentError(f"--range needs lo < hi, got {text!r}")
    return lo, hi


def _parse_floats(text: Optional[str]) -> Optional[list[float]]:
    if text is None:
        return None
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise InvalidArgumentError(f"expected comma-separated numbers, got {text!r}") from e


def _emit(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text)
        logger.info("Wrote %s", out)
    else:
        sys.stdout.write(text)


def _dump(data: dict) -> str:
    return json.dumps(data, indent=2) + "\n"


def _config_from(args) -> OptimizerConfig:
    return OptimizerConfig(
        k_max=args.kmax,
        mode="exact" if args.shots is None else "shots",
        shots=1024 if args.shots is None else args.shots,
        seed=args.seed,
        entangle=getattr(args, "entangle", False),
        readout_shots=args.readout_shots,
        lam=args.lam,
        init_jitter=args.jitter,
        backend=getattr(args, "backend", "circuit"),
        ngd_dim=getattr(args, "ngd_dim", "angles"),
    )


# Subcommands

def cmd_gen(args) -> int:
    lo, hi = _parse_range(args.range)
    inst = random_instance(args.n, lo, hi, signed=args.signed, maxcut_only=args.maxcut, seed=args.seed)
    _emit(inst.to_json(), args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = IsingInstance.load(args.input)
    report = brute_force(inst)
    _emit(_dump(report.to_dict()), args.out)
    return EXIT_OK


def _solve_and_report(args, inst: IsingInstance, method: str) -> int:
    cfg = _config_from(args)
    if method == "uq":
        solution = solve_uq(inst, cfg)
    else:
        solution = solve_qaoa(inst, args.p, "simplex" if args.optimizer == "simplex" else "ngd_shift", cfg)

    ratio = index = None
    guard = get_settings().capacity_guard
    if args.exact_metrics and inst.n > guard:
        raise CapacityError("oracle enumeration, n", inst.n, guard)
    if inst.n <= guard:
        spectrum = brute_force(inst)
        ratio, clamped = clamp_ratio(approximation_ratio(inst, solution.energy, spectrum=spectrum))
        if clamped:
            logger.warning("Approximation ratio clamped into [0, 1]")
        index = approximation_index(inst, solution.most_likely, symmetric_pair=cfg.entangle, spectrum=spectrum)

    logger.info("Most likely %s, energy %g, r=%s", solution.most_likely, solution.energy, ratio)
    if args.trace:
        solution.trace.to_csv(args.trace)
    _emit(_dump(solution.to_dict(ratio=ratio, index=index)), args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = IsingInstance.load(args.input)
    if args.method == "qaoa" and args.p is None:
        args.p = default_depth(inst.n)
    return _solve_and_report(args, inst, args.method)


def cmd_qaoa(args) -> int:
    inst = IsingInstance.load(args.input)
    if args.p is None:
        args.p = default_depth(inst.n)
    return _solve_and_report(args, inst, "qaoa")


def cmd_bench(args) -> int:
    lo, hi = _parse_range(args.range)
    sizes = [int(n) for n in (_parse_floats(args.sizes) or [])]
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    spec = BenchSpec(
        sizes=tuple(sizes),
        instances_per_size=args.instances,
        weight_low=lo,
        weight_high=hi,
        signed=args.signed,
        problem=args.problem,
        methods=tuple(methods),
        config=_config_from(args),
        qaoa_p=args.p,
        master_seed=args.seed,
        record_timing=args.timing,
    )
    store = ResultStore(args.db) if args.db else None
    records = run_campaign(spec, out_dir=args.out, store=store, jobs=args.jobs)
    sys.stdout.write(summary_csv(summarize(records), spec.record_timing))
    return EXIT_OK


def cmd_ksweep(args) -> int:
    result = lambda_sweep(
        n=args.n,
        instances=args.instances,
        lambdas=_parse_floats(args.lambdas),
        signed=args.signed,
        seed=args.seed,
        maxcut_only=args.maxcut,
    )
    for lam, agreement in result.mean_agreement().items():
        logger.info("lambda=%.4f mean agreement %.4f", lam, agreement)
    if args.curves:
        Path(args.curves).write_text(result.curves_csv())
    _emit(result.to_csv(), args.out)
    return EXIT_OK


def cmd_resources(args) -> int:
    inst = IsingInstance.load(args.input)
    p = args.p
    if args.method == "qaoa" and p is None:
        p = default_depth(inst.n)
    report = count_resources(inst, args.method, p=p)
    for note in report.notes:
        logger.warning(note)
    _emit(_dump(report.to_dict()), args.out)
    return EXIT_OK


def cmd_export_circuit(args) -> int:
    inst = IsingInstance.load(args.input)
    which = args.which
    if which == "entangle":
        circuit = build_entanglement(inst.n)
    elif which == "qaoa":
        p = args.p or default_depth(inst.n)
        gammas = _parse_floats(args.gammas) or [0.0] * p
        betas = _parse_floats(args.betas) or [0.0] * p
        circuit = build_qaoa(inst, gammas, betas)
    else:
        s = rescale_k(inst, args.lam)
        if which == "block":
            circuit = build_block_encoding(s)
        elif which == "controlled":
            circuit = build_controlled_block_encoding(s)
        else:
            arity = inst.n - 1 if args.entangle else inst.n
            thetas = _parse_floats(args.thetas) or [0.0] * arity
            circuit = build_workflow(s, thetas, entangle=args.entangle)
    _emit(circuit.to_json(), args.out)
    return EXIT_OK


def _add_solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--in", dest="input", required=True, help="instance JSON file")
    p.add_argument("--exact", action="store_true", help="exact probabilities (default)")
    p.add_argument("--shots", type=int, default=None, help="estimate every loss from N shots")
    p.add_argument("--kmax", type=int, default=get_settings().k_max)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=int, default=None, help="QAOA depth (default ceil(n/2))")
    p.add_argument("--readout-shots", dest="readout_shots", type=int, default=get_settings().readout_shots)
    p.add_argument("--lam", type=float, default=get_settings().lam)
    p.add_argument("--jitter", type=float, default=0.05, help="initial angle jitter in radians")
    p.add_argument("--exact-metrics", dest="exact_metrics", action="store_true",
                   help="fail unless r and i can be computed")
    p.add_argument("--trace", default=None, help="write the training trace CSV here")
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uqising", description="Block-encoded Ising and MaxCut solver")
    parser.add_argument("--version", action="version", version=f"uqising {__version__} ({build_hash()})")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random fully connected instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--range", default="1:10", help="weight range lo:hi")
    p.add_argument("--signed", action="store_true")
    p.add_argument("--maxcut", action="store_true", help="pairwise weights only")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("oracle", help="exact spectrum by enumeration")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("solve", help="solve an instance")
    _add_solver_flags(p)
    p.add_argument("--method", choices=["uq", "qaoa"], default="uq")
    p.add_argument("--optimizer", choices=["ngd", "simplex"], default="ngd")
    p.add_argument("--entangle", action="store_true")
    p.add_argument("--backend", choices=["circuit", "diagonal"], default="circuit")
    p.add_argument("--ngd-dim", dest="ngd_dim", choices=["angles", "nodes"], default="angles")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("qaoa", help="solve with the QAOA baseline")
    _add_solver_flags(p)
    p.add_argument("--optimizer", choices=["ngd", "simplex"], default="ngd")
    p.set_defaults(func=cmd_qaoa)

    p = sub.add_parser("bench", help="run a seeded benchmark campaign")
    p.add_argument("--sizes", default="3,5,8")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--methods", default="uqmaxcut,qaoa_ngd,qaoa_simplex")
    p.add_argument("--problem", choices=["maxcut", "ising"], default="maxcut")
    p.add_argument("--range", default="1:10")
    p.add_argument("--signed", action="store_true")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--kmax", type=int, default=get_settings().k_max)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--readout-shots", dest="readout_shots", type=int, default=get_settings().readout_shots)
    p.add_argument("--lam", type=float, default=get_settings().lam)
    p.add_argument("--jitter", type=float, default=0.05)
    p.add_argument("--entangle", action="store_true")
    p.add_argument("--backend", choices=["circuit", "diagonal"], default="circuit")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--db", default=None, help="also store results in this sqlite file")
    p.add_argument("--timing", action="store_true", help="include wall_ms columns")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ksweep", help="order agreement across lambda values")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--lambdas", default=None, help="comma-separated; default 0.1..1.0 plus 2/pi")
    p.add_argument("--signed", action="store_true")
    p.add_argument("--maxcut", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--curves", default=None, help="write mean sorted cost curves CSV here")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ksweep)

    p = sub.add_parser("resources", help="gate and qubit counts")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--method", choices=["uqising", "uqmaxcut", "qaoa"], default="uqising")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_resources)

    p = sub.add_parser("export-circuit", help="write a circuit as JSON")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--which", choices=CIRCUITS, default="controlled")
    p.add_argument("--lam", type=float, default=get_settings().lam)
    p.add_argument("--thetas", default=None)
    p.add_argument("--entangle", action="store_true")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--gammas", default=None)
    p.add_argument("--betas", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export_circuit)

    return parser


def _configure_logging(verbose: bool, quiet: bool):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    if getattr(args, "exact", False) and getattr(args, "shots", None) is not None:
        parser.error("--exact and --shots are mutually exclusive")
    try:
        return args.func(args)
    except (UQError, OSError) as e:
        logger.error("%s", e)
        return exit_code_for(e)
