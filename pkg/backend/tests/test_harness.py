"""Tests for the experiment runner, across-seed statistics, CSV / SVG output and ablation suites."""

import math

import numpy as np
import pytest
from lxml import etree

from backend.app.models.experiment import CurvePoint, IterationRecord, RunLog
from backend.app.repositories.run_log_repository import (
    CURVE_HEADER,
    RunLogRepository,
    emit_csv,
    read_curve,
    read_run_logs,
)
from backend.app.services import experiment_runner
from backend.app.services.ablation_suite import (
    SUITES,
    plan_suite,
    run_ablation_suite,
    suite_configs,
    suite_seeds,
)
from backend.app.services.experiment_runner import run_experiment, run_seeds, run_seeds_async
from backend.app.services.plot_generator import SVG_NS, build_svg, emit_svg_plot
from backend.app.services.statistics import aggregate_ci, final_window_stats, z_score
from backend.app.utils.errors import RunFailure


class TestAggregateCI:
    """Test across-seed confidence bands."""

    def test_two_seed_half_width(self, make_run_log):
        curve = aggregate_ci([make_run_log(0, [0.0]), make_run_log(1, [2.0])])
        assert curve[0].mean == 1.0
        assert curve[0].ci_upper - curve[0].mean == pytest.approx(1.960)
        assert curve[0].mean - curve[0].ci_lower == pytest.approx(1.960)

    def test_identical_runs_have_zero_width(self, make_run_log):
        curve = aggregate_ci([make_run_log(s, [5.0, 7.0]) for s in range(4)])
        for point in curve:
            assert point.ci_lower == point.mean == point.ci_upper

    def test_width_shrinks_with_more_runs(self, make_run_log):
        def half_width(n: int) -> float:
            logs = [make_run_log(s, [float(s % 2) * 2.0]) for s in range(n)]
            point = aggregate_ci(logs)[0]
            return point.ci_upper - point.mean

        for n in (2, 8, 32):
            spread = np.std([float(s % 2) * 2.0 for s in range(n)], ddof=1)
            assert half_width(n) == pytest.approx(1.960 * spread / math.sqrt(n))
        assert half_width(32) < half_width(8) < half_width(2)

    def test_other_levels(self, make_run_log):
        curve = aggregate_ci([make_run_log(0, [0.0]), make_run_log(1, [2.0])], level=0.99)
        assert curve[0].ci_upper - curve[0].mean == pytest.approx(2.576)
        assert z_score(0.8) == pytest.approx(1.2816, abs=1e-4)

    def test_missing_iterations_are_ignored(self, make_run_log):
        curve = aggregate_ci([make_run_log(0, [math.nan, 1.0]), make_run_log(1, [3.0, 3.0]), make_run_log(2, [5.0, 5.0])])
        assert curve[0].mean == 4.0
        assert curve[1].mean == 3.0

    def test_needs_two_logs(self, make_run_log):
        with pytest.raises(ValueError, match="at least two"):
            aggregate_ci([make_run_log(0, [1.0])])

    def test_misaligned_logs(self, make_run_log):
        with pytest.raises(ValueError, match="different iteration counts"):
            aggregate_ci([make_run_log(0, [1.0]), make_run_log(1, [1.0, 2.0])])

    def test_invalid_level(self):
        with pytest.raises(ValueError):
            z_score(1.0)

    def test_final_window_stats(self, make_run_log):
        mean, stderr = final_window_stats([make_run_log(0, [0.0, 1.0, 3.0]), make_run_log(1, [0.0, 3.0, 5.0])], window=2)
        assert mean == 3.0
        assert stderr == pytest.approx(1.0)


class TestRunLogModel:
    """Test run-log validation."""

    def test_iterations_must_be_contiguous(self):
        with pytest.raises(ValueError, match="contiguous"):
            RunLog(seed=0, records=[IterationRecord(iteration=2)])

    def test_final_window_mean(self, make_run_log):
        assert make_run_log(0, [1.0, math.nan, 4.0, 6.0]).final_window_mean(3) == 5.0


class TestCsv:
    """Test CSV persistence."""

    def test_run_logs_round_trip(self, results_dir, make_run_log):
        logs = [make_run_log(0, [1.0 / 3.0, -200.0]), make_run_log(1, [math.pi, math.nan])]
        path = emit_csv(logs, results_dir / "dqn.csv")
        back = read_run_logs(path)
        assert [log.seed for log in back] == [0, 1]
        assert back[0].mean_returns == logs[0].mean_returns
        assert back[1].mean_returns[0] == math.pi
        assert math.isnan(back[1].mean_returns[1])
        assert back[0].label == "dqn"

    def test_curve_round_trip(self, results_dir):
        curve = [CurvePoint(iteration=1, mean=0.1, ci_lower=-0.2, ci_upper=0.4)]
        assert read_curve(emit_csv(curve, results_dir / "c.csv")) == curve

    def test_empty_curve_writes_header(self, results_dir):
        path = emit_csv([], results_dir / "empty.csv")
        assert path.read_text(encoding="utf-8") == ",".join(CURVE_HEADER) + "\n"
        assert read_curve(path) == []

    def test_rejects_wrong_header(self, results_dir):
        path = emit_csv([], results_dir / "curve.csv")
        with pytest.raises(ValueError, match="not a run-log CSV"):
            read_run_logs(path)

    def test_repository_layout(self, results_dir, make_run_log):
        repo = RunLogRepository(results_dir)
        path = repo.save_run_logs("cartpole", "dqn+double", [make_run_log(0, [1.0])])
        assert path == results_dir / "cartpole" / "dqn+double.csv"
        assert repo.load_run_logs("cartpole", "dqn+double")[0].mean_returns == [1.0]
        assert repo.curve_path("cartpole", "a b").name == "a_b.curve.csv"


class TestPlots:
    """Test SVG rendering."""

    curves = {
        "dqn": [CurvePoint(iteration=i, mean=float(i), ci_lower=i - 1.0, ci_upper=i + 1.0) for i in (1, 2, 3)],
        "rainbow": [CurvePoint(iteration=i, mean=2.0 * i, ci_lower=2.0 * i, ci_upper=2.0 * i) for i in (1, 2, 3)],
    }

    def test_parses_as_svg(self):
        root = etree.fromstring(build_svg(self.curves, "CartPole"))
        assert root.tag == f"{{{SVG_NS}}}svg"
        assert len(root.findall(f"{{{SVG_NS}}}polyline")) == 2
        texts = [node.text for node in root.iter(f"{{{SVG_NS}}}text")]
        assert "CartPole" in texts
        assert "dqn" in texts and "rainbow" in texts

    def test_deterministic(self):
        assert build_svg(self.curves, "t") == build_svg(self.curves, "t")

    def test_flat_curve(self):
        flat = {"x": [CurvePoint(iteration=1, mean=3.0, ci_lower=3.0, ci_upper=3.0)]}
        assert etree.fromstring(build_svg(flat, "flat")) is not None

    def test_nan_band_is_skipped(self):
        curve = {"x": [CurvePoint(iteration=1, mean=1.0, ci_lower=math.nan, ci_upper=math.nan)]}
        root = etree.fromstring(build_svg(curve, "t"))
        assert root.findall(f"{{{SVG_NS}}}polygon") == []

    def test_empty(self):
        with pytest.raises(ValueError, match="nothing to plot"):
            build_svg({}, "t")

    def test_writes_file(self, results_dir):
        path = emit_svg_plot(self.curves, results_dir / "plots" / "a.svg", "t")
        assert path.read_bytes().startswith(b"<?xml")


class TestSuites:
    """Test suite planning."""

    @pytest.mark.parametrize(
        "base,count",
        [
            ("dqn_add_one", 7),
            ("rainbow_remove_one", 7),
            ("qr_add_one", 6),
            ("iqn_add_one", 6),
            ("mdqn_add_one", 5),
            ("miqn_add_one", 5),
            ("flavours", 6),
            ("loss_optimizer", 4),
            ("network_sweep", 18),
            ("batch_sweep", 10),
            ("lr_sweep", 5),
        ],
    )
    def test_variant_counts(self, base, count):
        assert len(plan_suite(base).variants) == count

    def test_munchausen_skips(self):
        assert set(plan_suite("mdqn_add_one").skipped) == {"m_dqn+c51", "m_dqn+double"}
        assert set(plan_suite("miqn_add_one").skipped) == {"m_iqn+double"}

    def test_unknown_suite(self):
        with pytest.raises(ValueError, match="Unknown suite"):
            plan_suite("everything")

    @pytest.mark.parametrize("base", sorted(SUITES))
    def test_every_variant_validates(self, base):
        configs = suite_configs(base, "cartpole")
        assert len(configs) == len(plan_suite(base).variants)

    def test_add_one_changes_one_component(self):
        configs = suite_configs("dqn_add_one", "cartpole")
        assert configs["dqn"].agent.components == []
        assert configs["dqn+multi_step"].agent.components == ["multi_step"]
        assert configs["dqn+c51"].agent.head == "c51"

    def test_remove_one(self):
        configs = suite_configs("rainbow_remove_one", "cartpole")
        assert "noisy" not in configs["rainbow-noisy"].agent.components
        assert configs["rainbow-c51"].agent.head == "scalar"

    def test_seeds(self):
        assert suite_seeds(3, master_seed=10) == [10, 11, 12]
        with pytest.raises(ValueError):
            suite_seeds(0)

    def test_run_suite_calls_back(self):
        seen = []
        results = run_ablation_suite(
            "loss_optimizer",
            "cartpole",
            seeds=[0, 1],
            run_overrides={"num_iterations": 1, "steps_per_iteration": 0},
            on_variant=lambda label, cfg, logs: seen.append((label, len(logs))),
        )
        assert list(results) == [label for label, _ in seen]
        assert all(count == 2 for _, count in seen)


class TestRunner:
    """Test single runs and seed batches."""

    def test_zero_steps_logs_nan(self, tiny_experiment):
        log = run_experiment(tiny_experiment(run={"steps_per_iteration": 0}), seed=0)
        assert len(log.records) == 2
        assert all(record.episodes == 0 and math.isnan(record.mean_return) for record in log.records)

    def test_records_training_returns(self, tiny_experiment):
        log = run_experiment(tiny_experiment(run={"num_iterations": 2, "steps_per_iteration": 200}), seed=0)
        assert [r.iteration for r in log.records] == [1, 2]
        assert log.records[0].episodes > 0
        assert 1.0 <= log.records[0].mean_return <= 200.0
        assert log.label == "dqn"

    def test_same_seed_same_log(self, tiny_experiment):
        cfg = tiny_experiment()
        first, second = run_experiment(cfg, 3), run_experiment(cfg, 3)
        np.testing.assert_array_equal(first.mean_returns, second.mean_returns)
        assert first.config_hash == second.config_hash == cfg.config_hash()

    def test_grid_environment(self, tiny_experiment):
        cfg = tiny_experiment(env="min_breakout", use_conv=True, run={"num_iterations": 1, "steps_per_iteration": 30})
        assert len(run_experiment(cfg, 0).records) == 1

    def test_failures_are_isolated(self, tiny_experiment, monkeypatch):
        real = experiment_runner.run_experiment

        def flaky(cfg, seed):
            if seed == 1:
                raise RunFailure("non-finite value at iteration 1, step 0")
            return real(cfg, seed)

        monkeypatch.setattr(experiment_runner, "run_experiment", flaky)
        batch = run_seeds(tiny_experiment(run={"steps_per_iteration": 0}), [0, 1, 2])
        assert [log.seed for log in batch.logs] == [0, 2]
        assert "iteration 1" in batch.failures[1]
        assert not batch.ok

    def test_parallel_matches_sequential(self, tiny_experiment):
        cfg = tiny_experiment()
        sequential = run_seeds(cfg, [0, 1], workers=1)
        parallel = run_seeds(cfg, [0, 1], workers=2)
        assert parallel.ok
        for a, b in zip(sequential.logs, parallel.logs):
            assert a.seed == b.seed
            np.testing.assert_array_equal(a.mean_returns, b.mean_returns)

    async def test_async_batch_matches_sequential_runs(self, tiny_experiment):
        cfg = tiny_experiment()
        batch = await run_seeds_async(cfg, [0, 1], 2)
        assert batch.ok
        assert [log.seed for log in batch.logs] == [0, 1]
        for log in batch.logs:
            expected = run_experiment(cfg, log.seed)
            np.testing.assert_array_equal(log.mean_returns, expected.mean_returns)
            assert log.config_hash == expected.config_hash
