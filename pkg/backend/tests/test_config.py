"""Test configuration loading, experiment merging and the command line."""

import json
from pathlib import Path

import pytest

from backend.app.repositories.run_log_repository import emit_csv
from backend.app.services.experiment_config import (
    build_experiment,
    check_keys,
    effective_config_lines,
    experiment_from_preset,
    load_experiment,
    parse_override_value,
)
from backend.app.services.experiment_runner import SeedBatch
from backend.app.utils.errors import ConfigError
from backend.batch import lab
from config.config import EXPERIMENTS_DIR, config, get_domain_for_env, get_preset_defaults

CARTPOLE_DQN = EXPERIMENTS_DIR / "cartpole_dqn.toml"


def _write_toml(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "experiment.toml"
    path.write_text(text, encoding="utf-8")
    return path


class TestDefaults:
    """Test the default tables."""

    def test_config_loads(self):
        assert config.hyperparameters
        assert set(config.known_presets) == {"dqn", "rainbow", "qr_dqn", "iqn", "m_dqn", "m_iqn"}

    def test_domains(self):
        assert get_domain_for_env("cartpole") == "classic_control"
        assert get_domain_for_env("min_breakout") == "minatar"
        with pytest.raises(ValueError, match="Unknown environment"):
            get_domain_for_env("pong")

    def test_minatar_table_swaps_in(self):
        classic = get_preset_defaults("cartpole", "dqn")
        grid = get_preset_defaults("min_breakout", "dqn")
        assert not classic["use_conv"] and grid["use_conv"]
        assert classic["units"] == 512
        assert grid["units"] == 128
        assert grid["target_update_period"] == 1000

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="Unknown agent preset"):
            get_preset_defaults("cartpole", "ddpg")

    def test_munchausen_temperature_per_domain(self):
        assert experiment_from_preset("cartpole", "m_dqn").agent.munchausen_tau == 100.0
        assert experiment_from_preset("cartpole", "m_iqn").agent.munchausen_tau == 0.03


class TestExperimentFiles:
    """Test TOML loading and override merging."""

    def test_load_shipped_file(self):
        cfg = load_experiment(CARTPOLE_DQN)
        assert cfg.env.name == "cartpole"
        assert cfg.agent.loss == "mse"
        assert cfg.agent.gamma == 0.99
        assert cfg.run.num_iterations == 30

    @pytest.mark.parametrize("name", sorted(p.name for p in EXPERIMENTS_DIR.glob("*.toml")))
    def test_every_shipped_file_validates(self, name):
        assert load_experiment(EXPERIMENTS_DIR / name).label

    def test_override_with_same_value_is_a_no_op(self):
        plain = load_experiment(CARTPOLE_DQN)
        overridden = load_experiment(CARTPOLE_DQN, {"agent.gamma": "0.99"})
        assert overridden == plain
        assert overridden.config_hash() == plain.config_hash()

    def test_override_wins_over_file(self):
        cfg = load_experiment(CARTPOLE_DQN, {"agent.optimizer": "rmsprop", "run.seeds": "[3, 4]"})
        assert cfg.agent.optimizer == "rmsprop"
        assert cfg.run.seeds == [3, 4]

    def test_unknown_key_suggests_close_match(self):
        with pytest.raises(ConfigError, match="did you mean gamma"):
            load_experiment(CARTPOLE_DQN, {"agent.gama": "0.9"})

    def test_unknown_key_in_file(self, tmp_path):
        path = _write_toml(tmp_path, '[env]\nname = "cartpole"\n[agent]\nbatchsize = 4\n')
        with pytest.raises(ConfigError, match="did you mean batch_size"):
            load_experiment(path)

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            check_keys("agnet", ["gamma"])

    def test_invalid_value(self):
        with pytest.raises(ConfigError, match="gamma"):
            load_experiment(CARTPOLE_DQN, {"agent.gamma": "1.5"})

    def test_missing_env(self):
        with pytest.raises(ConfigError, match="env.name"):
            build_experiment({"agent": {"preset": "dqn"}})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_experiment(tmp_path / "nope.toml")

    def test_bad_toml(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot parse"):
            load_experiment(_write_toml(tmp_path, "[env\n"))

    def test_forbidden_combination(self):
        with pytest.raises(ConfigError, match="munchausen"):
            experiment_from_preset("cartpole", "m_dqn", {"double": True})

    def test_override_values(self):
        assert parse_override_value("0.5") == 0.5
        assert parse_override_value("3") == 3
        assert parse_override_value("true") is True
        assert parse_override_value("[1, 2]") == [1, 2]
        assert parse_override_value("adam") == "adam"


class TestConfigHash:
    """Test the canonical experiment hash."""

    def test_stable(self):
        assert load_experiment(CARTPOLE_DQN).config_hash() == load_experiment(CARTPOLE_DQN).config_hash()

    def test_ignores_seeds_and_workers(self):
        base = load_experiment(CARTPOLE_DQN)
        other = load_experiment(CARTPOLE_DQN, {"run.seeds": "[7]", "run.workers": "4"})
        assert other.config_hash() == base.config_hash()

    def test_changes_with_hyperparameters(self):
        base = load_experiment(CARTPOLE_DQN)
        assert load_experiment(CARTPOLE_DQN, {"agent.gamma": "0.9"}).config_hash() != base.config_hash()

    def test_effective_lines_are_sorted(self):
        lines = effective_config_lines(load_experiment(CARTPOLE_DQN))
        assert lines == sorted(lines)
        assert "agent.gamma=0.99" in lines
        assert "env.name=cartpole" in lines


class TestCommandLine:
    """Test the rainbow-lab entry point."""

    def test_no_arguments(self, capsys):
        assert lab.main([]) == lab.EXIT_CONFIG
        assert "usage" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        assert lab.main(["evaluate"]) == lab.EXIT_CONFIG

    def test_unknown_override(self, capsys):
        code = lab.main(["train", "--config", str(CARTPOLE_DQN), "--agent.gama", "0.9"])
        assert code == lab.EXIT_CONFIG
        assert "did you mean gamma" in capsys.readouterr().err

    def test_override_parsing(self):
        invocation = lab.parse_and_validate(
            ["train", "--config", "x.toml", "--agent.gamma", "0.9", "--run.seeds=[1]"]
        )
        assert invocation.overrides == {"agent.gamma": "0.9", "run.seeds": "[1]"}

    def test_override_needs_value(self):
        with pytest.raises(ConfigError, match="needs a value"):
            lab.parse_and_validate(["train", "--config", "x.toml", "--agent.gamma"])

    def test_train_writes_csv_and_summary(self, tmp_path, capsys):
        code = lab.main(
            [
                "train",
                "--config",
                str(CARTPOLE_DQN),
                "--run.num_iterations",
                "1",
                "--run.steps_per_iteration",
                "0",
                "--run.output_dir",
                str(tmp_path),
            ]
        )
        assert code == lab.EXIT_OK
        out = capsys.readouterr().out.strip().splitlines()
        assert "agent.loss=mse" in out
        summary = json.loads(out[-1])
        assert summary["env"] == "cartpole"
        assert summary["agent"] == "dqn"
        assert summary["final_mean_return"] is None
        assert Path(summary["csv"]) == tmp_path / "cartpole" / "dqn.csv"
        assert Path(summary["csv"]).exists()

    def test_suite_rejects_agent_overrides(self):
        code = lab.main(["suite", "--base", "dqn_add_one", "--env", "cartpole", "--agent.gamma", "0.9"])
        assert code == lab.EXIT_CONFIG

    def test_suite_writes_variants(self, results_dir, monkeypatch, capsys):
        monkeypatch.setattr(config, "results_dir", results_dir)
        code = lab.main(
            [
                "suite",
                "--base",
                "lr_sweep",
                "--env",
                "cartpole",
                "--seeds",
                "2",
                "--run.num_iterations",
                "1",
                "--run.steps_per_iteration",
                "0",
            ]
        )
        assert code == lab.EXIT_OK
        assert len(list((results_dir / "cartpole").glob("*.curve.csv"))) == 5
        assert len(capsys.readouterr().out.strip().splitlines()) == 10

    def test_plot(self, results_dir, make_run_log):
        inputs = [
            emit_csv([make_run_log(0, [1.0, 2.0]), make_run_log(1, [3.0, 4.0])], results_dir / "dqn.csv"),
            emit_csv([make_run_log(0, [2.0, 2.0])], results_dir / "rainbow.csv"),
        ]
        out = results_dir / "plot.svg"
        code = lab.main(["plot", "--in", *map(str, inputs), "--out", str(out), "--title", "CartPole"])
        assert code == lab.EXIT_OK
        assert b"CartPole" in out.read_bytes()
        assert not out.with_suffix(".csv").exists()

    def test_single_input_plot_writes_curve(self, results_dir, make_run_log):
        source = emit_csv([make_run_log(0, [1.0]), make_run_log(1, [3.0])], results_dir / "dqn.csv")
        out = results_dir / "one.svg"
        assert lab.main(["plot", "--in", str(source), "--out", str(out)]) == lab.EXIT_OK
        assert out.with_suffix(".csv").read_text(encoding="utf-8").startswith("iteration,mean,ci_lower,ci_upper\n")

    def test_plot_missing_input(self, results_dir):
        code = lab.main(["plot", "--in", str(results_dir / "nope.csv"), "--out", str(results_dir / "x.svg")])
        assert code == lab.EXIT_CONFIG

    def test_trace_env(self, capsys):
        assert lab.main(["trace-env", "--env", "mountaincar", "--seed", "2", "--steps", "3"]) == lab.EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "step,s0,s1,action,reward,done"
        assert len(lines) == 4
        assert lines[1].startswith("0,")

    def test_trace_env_is_reproducible(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (first, second):
            lab.main(["trace-env", "--env", "cartpole", "--steps", "50", "--out", str(path)])
        assert first.read_bytes() == second.read_bytes()

    def test_run_failure_exit_code(self, tmp_path, monkeypatch):
        monkeypatch.setattr(lab, "run_seeds", lambda cfg, seeds, workers: SeedBatch(failures={0: "boom"}))
        code = lab.main(["train", "--config", str(CARTPOLE_DQN), "--run.output_dir", str(tmp_path)])
        assert code == lab.EXIT_RUN

    def test_train_is_bitwise_reproducible(self, tmp_path):
        outputs = []
        for name in ("first", "second"):
            out_dir = tmp_path / name
            code = lab.main(
                [
                    "train",
                    "--config",
                    str(CARTPOLE_DQN),
                    "--run.num_iterations",
                    "2",
                    "--run.steps_per_iteration",
                    "400",
                    "--run.output_dir",
                    str(out_dir),
                ]
            )
            assert code == lab.EXIT_OK
            outputs.append((out_dir / "cartpole" / "dqn.csv").read_bytes())
        assert outputs[0] == outputs[1]
