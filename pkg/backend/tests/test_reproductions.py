"""Desk-scale learning checks. Each trains several agents to completion; run with ``pytest -m slow``."""

import math

import pytest

from backend.app.models.experiment import RunLog
from backend.app.services.experiment_config import experiment_from_preset, load_experiment
from backend.app.services.experiment_runner import run_seeds
from backend.app.services.statistics import final_window_stats
from config.config import EXPERIMENTS_DIR, config

pytestmark = pytest.mark.slow

SEEDS = list(range(10))
FINAL_WINDOW = 3
MAX_SECONDS_PER_RUN = 30 * 60


def _train(env: str, preset: str, **agent) -> list[RunLog]:
    cfg = experiment_from_preset(env, preset, agent)
    batch = run_seeds(cfg, SEEDS, workers=config.max_workers)
    assert batch.ok, batch.failures
    return batch.logs


def _pooled_stderr(a: float, b: float) -> float:
    return math.sqrt(a**2 + b**2)


class TestCartPoleDqn:
    """DQN with Adam + MSE solves CartPole within the time budget."""

    def test_final_return(self):
        cfg = load_experiment(EXPERIMENTS_DIR / "cartpole_dqn.toml")
        batch = run_seeds(cfg, SEEDS, workers=config.max_workers)
        assert batch.ok, batch.failures
        mean, _ = final_window_stats(batch.logs, FINAL_WINDOW)
        assert mean >= 170.0
        assert max(log.wall_clock_seconds for log in batch.logs) <= MAX_SECONDS_PER_RUN


class TestTrends:
    """Component comparisons at ten seeds."""

    @pytest.mark.parametrize("env", ["cartpole", "acrobot"])
    def test_rainbow_beats_dqn(self, env):
        rainbow_mean, rainbow_se = final_window_stats(_train(env, "rainbow"), FINAL_WINDOW)
        dqn_mean, dqn_se = final_window_stats(_train(env, "dqn"), FINAL_WINDOW)
        assert rainbow_mean - dqn_mean >= _pooled_stderr(rainbow_se, dqn_se)

    @pytest.mark.parametrize("env", ["cartpole", "acrobot"])
    def test_adam_mse_beats_rmsprop_huber(self, env):
        adam_mean, _ = final_window_stats(_train(env, "dqn", optimizer="adam", loss="mse"), FINAL_WINDOW)
        rmsprop_mean, _ = final_window_stats(
            _train(env, "dqn", optimizer="rmsprop", loss="huber", learning_rate=0.00025, eps=1e-5),
            FINAL_WINDOW,
        )
        assert adam_mean > rmsprop_mean

    def test_noisy_helps_on_mountaincar(self):
        noisy_mean, _ = final_window_stats(_train("mountaincar", "dqn", noisy=True), FINAL_WINDOW)
        plain_mean, _ = final_window_stats(_train("mountaincar", "dqn"), FINAL_WINDOW)
        assert noisy_mean > plain_mean
