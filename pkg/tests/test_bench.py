import json
import math

import numpy as np
import pytest

from core.bench import (
    BenchRecord,
    BenchSpec,
    default_lambdas,
    derive_seed,
    lambda_sweep,
    results_csv,
    run_campaign,
    summarize,
)
from core.database import ResultStore
from core.errors import InvalidArgumentError, PersistenceError
from core.optimize import OptimizerConfig, qaoa_energy, solve_qaoa
from core.problem import approximation_ratio, brute_force, random_instance

FAST = OptimizerConfig(k_max=20, backend="diagonal", readout_shots=128)


def small_spec(**overrides):
    values = dict(
        sizes=(3,),
        instances_per_size=3,
        methods=("uqmaxcut", "qaoa_simplex"),
        config=FAST,
        qaoa_p=1,
        master_seed=5,
    )
    values.update(overrides)
    return BenchSpec(**values)


def make_record(n=3, method="uqmaxcut", ratio=1.0, index=1, wall_ms=1.0):
    return BenchRecord(n=n, instance=0, seed=1, method=method, ratio=ratio, ratio_clamped=False, index=index,
                       iterations=0, wall_ms=wall_ms, trace_ref="ref", bits="01", energy=-1.0)


class TestSeeds:
    def test_deterministic_and_role_dependent(self):
        assert derive_seed(1, 3, 0, "instance") == derive_seed(1, 3, 0, "instance")
        assert derive_seed(1, 3, 0, "instance") != derive_seed(1, 3, 0, "uqmaxcut")
        assert derive_seed(1, 3, 0, "instance") != derive_seed(1, 3, 1, "instance")
        assert derive_seed(1, 3, 0, "instance") != derive_seed(2, 3, 0, "instance")


class TestSpec:
    @pytest.mark.parametrize("overrides", [
        {"sizes": ()},
        {"sizes": (1,)},
        {"instances_per_size": 0},
        {"methods": ("annealing",)},
        {"methods": ()},
        {"problem": "ising"},
        {"problem": "qubo"},
        {"weight_low": 5.0, "weight_high": 1.0},
    ])
    def test_invalid(self, overrides):
        with pytest.raises(InvalidArgumentError):
            small_spec(**overrides)

    def test_uqising_needs_ising(self):
        with pytest.raises(InvalidArgumentError):
            small_spec(methods=("uqising",))
        assert small_spec(methods=("uqising",), problem="ising").problem == "ising"

    def test_manifest_captures_configs(self):
        data = small_spec().to_dict()
        assert data["configs"]["uqmaxcut"]["k_max"] == 20
        assert data["master_seed"] == 5


class TestCampaign:
    def test_records_and_order(self):
        records = run_campaign(small_spec())
        assert len(records) == 6
        assert [(r.instance, r.method) for r in records] == [
            (i, m) for i in range(3) for m in ("uqmaxcut", "qaoa_simplex")
        ]
        for r in records:
            assert 0.0 <= r.ratio <= 1.0
            assert r.index in (0, 1)

    def test_methods_share_instances(self, tmp_path):
        records = run_campaign(small_spec(), out_dir=tmp_path)
        for i in range(3):
            cell = [r for r in records if r.instance == i]
            assert len({r.seed for r in cell}) == 1
        text = (tmp_path / "instances" / "n3-0.json").read_text()
        assert json.loads(text)["n"] == 3

    def test_rerun_is_byte_identical(self, tmp_path):
        run_campaign(small_spec(), out_dir=tmp_path / "a")
        run_campaign(small_spec(), out_dir=tmp_path / "b", jobs=3)
        for name in ("results.csv", "summary.csv", "manifest.json", "traces/n3-1-uqmaxcut.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_timing_column_is_opt_in(self, tmp_path):
        run_campaign(small_spec(methods=("uqmaxcut",)), out_dir=tmp_path / "plain")
        run_campaign(small_spec(methods=("uqmaxcut",), record_timing=True), out_dir=tmp_path / "timed")
        assert (tmp_path / "plain" / "results.csv").read_text().splitlines()[0] == "n,seed,method,r,i,iterations"
        assert (tmp_path / "timed" / "results.csv").read_text().splitlines()[0].endswith(",wall_ms")

    def test_store(self, tmp_path):
        store = ResultStore(tmp_path / "bench.db")
        records = run_campaign(small_spec(), store=store)
        campaign_id = int(store.get_setting("last_campaign"))
        assert len(store.get_records(campaign_id)) == len(records)
        assert len(store.get_trace("n3-0-uqmaxcut")) == FAST.k_max + 1

    def test_persistence_failure_keeps_records(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("not a directory")
        with pytest.raises(PersistenceError) as info:
            run_campaign(small_spec(methods=("uqmaxcut",)), out_dir=blocker)
        assert len(info.value.records) == 3

    def test_invalid_jobs(self):
        with pytest.raises(InvalidArgumentError):
            run_campaign(small_spec(), jobs=0)


class TestSummarize:
    def test_single_record(self):
        (row,) = summarize([make_record(ratio=0.75)])
        assert row.mean_r == 0.75
        assert row.std_r == 0.0
        assert row.count == 1

    def test_index_rate(self):
        (row,) = summarize([make_record(index=1), make_record(index=1)])
        assert row.index_rate == 1.0

    def test_order_invariant(self):
        records = [make_record(ratio=r, wall_ms=w) for r, w in [(0.1, 3.0), (0.7, 1.5), (0.33, 2.25), (0.9, 0.1)]]
        assert summarize(records) == summarize(records[::-1])

    def test_groups_sorted(self):
        rows = summarize([make_record(n=5), make_record(n=3, method="qaoa_ngd"), make_record(n=3)])
        assert [(r.n, r.method) for r in rows] == [(3, "qaoa_ngd"), (3, "uqmaxcut"), (5, "uqmaxcut")]

    def test_population_std(self):
        (row,) = summarize([make_record(ratio=0.0), make_record(ratio=1.0)])
        assert row.std_r == pytest.approx(0.5)

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            summarize([])

    def test_results_csv_rows(self):
        text = results_csv([make_record(ratio=0.5)])
        assert text.splitlines()[1] == "3,1,uqmaxcut,0.5,1,0"


class TestLambdaSweep:
    def test_default_grid_has_reference(self):
        grid = default_lambdas()
        assert len(grid) == 11
        assert any(abs(lam - 2 / math.pi) < 1e-15 for lam in grid)
        assert grid == sorted(grid)

    def test_reference_row_and_trend(self):
        result = lambda_sweep(n=10, instances=10, signed=True, seed=0)
        reference = [row for row in result.rows if abs(row.lam - 2 / math.pi) < 1e-12]
        assert len(reference) == 10
        assert all(row.agreement == 1.0 for row in reference)

        means = result.mean_agreement()
        assert means[0.1] < means[1.0]
        assert all(value == 1.0 for lam, value in means.items() if lam >= 2 / math.pi)

    def test_csv_outputs(self):
        result = lambda_sweep(n=4, instances=2, lambdas=[0.5, 2 / math.pi], seed=3)
        lines = result.to_csv().splitlines()
        assert lines[0] == "lambda,instance_seed,agreement,reference"
        assert len(lines) == 1 + 4
        assert [line.split(",")[-1] for line in lines[1:]] == ["0", "0", "1", "1"]
        curves = result.curves_csv().splitlines()
        assert curves[0] == "lambda,rank,true_cost,transformed_cost"
        assert len(curves) == 1 + 2 * 16

    def test_invalid_lambdas(self):
        with pytest.raises(InvalidArgumentError):
            lambda_sweep(n=3, instances=1, lambdas=[0.5, -1.0])
        with pytest.raises(InvalidArgumentError):
            lambda_sweep(n=3, instances=0)


@pytest.mark.slow
class TestDeskScale:
    def test_uqmaxcut_campaign(self):
        spec = BenchSpec(
            sizes=(3, 5),
            instances_per_size=20,
            methods=("uqmaxcut",),
            config=OptimizerConfig(k_max=100, backend="diagonal"),
            master_seed=2024,
        )
        # Pilot with this seed set: n=3 mean r 0.9995, index 0.95; n=5 mean r 0.9906
        rows = {row.n: row for row in summarize(run_campaign(spec))}
        assert rows[3].mean_r >= 0.95
        assert rows[3].index_rate >= 0.7
        assert rows[5].mean_r >= 0.90

    def test_qaoa_simplex_beats_initial_point(self):
        improvements = []
        for index in range(20):
            inst = random_instance(3, 1.0, 10.0, maxcut_only=True, seed=derive_seed(2024, 3, index, "instance"))
            spectrum = brute_force(inst)
            solution = solve_qaoa(inst, method="simplex", cfg=OptimizerConfig(readout_shots=256))
            p = solution.thetas_star.size // 2
            start = qaoa_energy(inst, [0.0] * p, [0.0] * p)
            trained = qaoa_energy(inst, solution.thetas_star[:p], solution.thetas_star[p:])
            assert trained <= start + 1e-12
            assert spectrum.c_min - 1e-9 <= trained <= spectrum.c_max + 1e-9
            assert spectrum.c_min <= solution.energy <= spectrum.c_max
            improvements.append(
                approximation_ratio(inst, trained, spectrum) - approximation_ratio(inst, start, spectrum)
            )
        assert np.mean(improvements) > 0
