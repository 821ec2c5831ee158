"""Test configuration and fixtures for pytest."""

from typing import Any, Callable

import numpy as np
import pytest

from backend.app.models.experiment import (
    AgentConfig,
    EnvSection,
    ExperimentConfig,
    IterationRecord,
    RunLog,
    RunSection,
)
from backend.app.models.replay import Transition

# Small enough that a gradient step takes milliseconds.
TINY_AGENT = {
    "hidden_layers": 1,
    "units": 16,
    "batch_size": 8,
    "min_replay_history": 16,
    "replay_capacity": 256,
    "update_period": 1,
    "target_update_period": 20,
    "epsilon_decay_period": 50,
    "num_atoms": 11,
    "vmax": 10.0,
    "num_tau_samples": 4,
    "num_tau_prime_samples": 5,
    "num_quantile_samples": 4,
    "quantile_embedding_dim": 8,
}


@pytest.fixture
def rng():
    """Fresh seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_agent_config() -> Callable[..., AgentConfig]:
    """Factory for small agent configs; keyword arguments override fields."""

    def make(**overrides: Any) -> AgentConfig:
        return AgentConfig(**{**TINY_AGENT, **overrides})

    return make


@pytest.fixture
def tiny_experiment(tiny_agent_config) -> Callable[..., ExperimentConfig]:
    """Factory for a short CartPole experiment."""

    def make(env: str = "cartpole", run: dict | None = None, **agent: Any) -> ExperimentConfig:
        run_values = {"num_iterations": 2, "steps_per_iteration": 60, "seeds": [0, 1]}
        run_values.update(run or {})
        return ExperimentConfig(
            env=EnvSection(name=env),
            agent=tiny_agent_config(**agent),
            run=RunSection(**run_values),
        )

    return make


@pytest.fixture
def make_transition() -> Callable[..., Transition]:
    """Factory for single-step transitions over a 2-dimensional observation."""

    def make(r: float = 0.0, done: bool = False, a: int = 0, tag: float = 0.0) -> Transition:
        return Transition(
            s=np.array([tag, 0.0]),
            a=a,
            r=r,
            s_next=np.array([tag + 1.0, 0.0]),
            done=done,
        )

    return make


@pytest.fixture
def results_dir(tmp_path):
    """Temporary results directory."""
    path = tmp_path / "results"
    path.mkdir()
    return path


@pytest.fixture
def make_run_log() -> Callable[..., RunLog]:
    """Factory for run logs whose iterations each saw one episode with the given return."""

    def make(seed: int, means: list[float], label: str = "dqn") -> RunLog:
        return RunLog(
            seed=seed,
            label=label,
            records=[
                IterationRecord(iteration=i, episodes=1, mean_return=m, min_return=m, max_return=m)
                for i, m in enumerate(means, start=1)
            ],
        )

    return make
