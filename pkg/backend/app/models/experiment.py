"""Experiment configuration and run-log models."""

import hashlib
import json
import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from backend.app.models.network import HeadKind

LossName = Literal["huber", "mse"]
OptimizerName = Literal["adam", "rmsprop"]
EnvName = Literal["cartpole", "acrobot", "mountaincar", "min_breakout"]


class AgentConfig(BaseModel):
    """Component flags and hyperparameters of one agent (the ``[agent]`` section)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    preset: str = Field("dqn", description="Default-table column the values came from")

    # Components
    double: bool = Field(False, description="Double Q-learning target")
    prioritized: bool = Field(False, description="Proportional prioritized replay")
    dueling: bool = Field(False, description="Value/advantage head")
    update_horizon: int = Field(1, ge=1, description="n of the n-step return")
    head: HeadKind = Field("scalar", description="scalar, c51, qr or iqn")
    noisy: bool = Field(False, description="Noisy layers instead of epsilon-greedy")
    munchausen: bool = Field(False, description="Munchausen target")

    # Learning
    gamma: float = Field(0.99, ge=0.0, lt=1.0, description="Discount factor")
    loss: LossName = Field("huber", description="TD loss for scalar heads")
    optimizer: OptimizerName = Field("adam", description="Optimizer")
    learning_rate: float = Field(0.001, gt=0.0, description="Optimizer step size")
    eps: float = Field(3.125e-4, gt=0.0, description="Optimizer epsilon")
    huber_delta: float = Field(1.0, gt=0.0, description="Huber threshold")
    batch_size: int = Field(128, ge=1, description="Transitions per gradient step")
    update_period: int = Field(4, ge=1, description="Environment steps per gradient step")
    target_update_period: int = Field(100, ge=1, description="Steps between target syncs")
    min_replay_history: int = Field(500, ge=1, description="Replay size before training")
    replay_capacity: int = Field(50000, ge=1, description="Replay buffer capacity")

    # Exploration
    epsilon_train: float = Field(0.01, ge=0.0, le=1.0, description="Final epsilon")
    epsilon_decay_period: int = Field(5000, ge=1, description="Steps of linear decay")

    # Prioritized replay
    priority_exponent: float = Field(0.5, ge=0.0, description="omega")
    importance_beta: float = Field(0.5, ge=0.0, description="Importance-sampling exponent")
    priority_epsilon: float = Field(0.01, gt=0.0, description="Added to |TD| before omega")
    is_correction: bool = Field(True, description="Weight losses by importance weights")

    # Network
    normalize_obs: bool = Field(True, description="Scale observations into [-1, 1]")
    use_conv: bool = Field(False, description="Conv trunk for grid observations")
    hidden_layers: int = Field(2, ge=1, description="Fully connected hidden layers")
    units: int = Field(512, ge=1, description="Units per hidden layer")

    # Distributional heads
    num_atoms: int = Field(51, ge=2, description="C51 atoms / QR quantiles")
    vmax: float = Field(200.0, gt=0.0, description="Support is [-vmax, vmax]")
    kappa: float = Field(1.0, gt=0.0, description="Quantile Huber threshold")
    num_tau_samples: int = Field(32, ge=1, description="IQN fractions for the online net")
    num_tau_prime_samples: int = Field(32, ge=1, description="IQN fractions for the target")
    num_quantile_samples: int = Field(32, ge=1, description="IQN fractions for Q estimates")
    quantile_embedding_dim: int = Field(64, ge=1, description="IQN cosine basis size")

    # Munchausen
    munchausen_tau: float = Field(0.03, gt=0.0, description="Softmax temperature")
    munchausen_alpha: float = Field(0.9, ge=0.0, le=1.0, description="Log-policy scale")
    clip_value_min: float = Field(-1.0, lt=0.0, description="Lower clip of the log-policy term")

    @model_validator(mode="after")
    def _check_components(self) -> "AgentConfig":
        if self.munchausen and self.head == "c51":
            raise ValueError("munchausen cannot be combined with a c51 head")
        if self.munchausen and self.double:
            raise ValueError("munchausen cannot be combined with double")
        return self

    @property
    def components(self) -> list[str]:
        """Enabled Rainbow components, in canonical order."""
        names = []
        if self.double:
            names.append("double")
        if self.prioritized:
            names.append("prioritized")
        if self.dueling:
            names.append("dueling")
        if self.update_horizon > 1:
            names.append("multi_step")
        if self.head != "scalar":
            names.append(self.head)
        if self.noisy:
            names.append("noisy")
        if self.munchausen:
            names.append("munchausen")
        return names


class EnvSection(BaseModel):
    """The ``[env]`` section."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: EnvName = Field(..., description="Environment name")


class RunSection(BaseModel):
    """The ``[run]`` section."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    num_iterations: int = Field(30, ge=1, description="Logged iterations per run")
    steps_per_iteration: int = Field(1000, ge=0, description="Environment steps per iteration")
    seeds: list[int] = Field(default_factory=lambda: [0], description="Run seeds")
    workers: int = Field(1, ge=1, description="Concurrent runs")
    output_dir: Optional[str] = Field(None, description="Where CSVs are written")
    label: Optional[str] = Field(None, description="Agent label used in outputs")

    @field_validator("seeds")
    @classmethod
    def _distinct_seeds(cls, seeds: list[int]) -> list[int]:
        if not seeds:
            raise ValueError("seeds must not be empty")
        if len(set(seeds)) != len(seeds):
            raise ValueError(f"seeds must be distinct, got {seeds}")
        return seeds


class ExperimentConfig(BaseModel):
    """A complete, validated experiment."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    env: EnvSection
    agent: AgentConfig = Field(default_factory=AgentConfig)
    run: RunSection = Field(default_factory=RunSection)

    @property
    def label(self) -> str:
        return self.run.label or self.agent.preset

    def flat_items(self) -> list[tuple[str, object]]:
        """Sorted ``section.key`` / value pairs."""
        items: list[tuple[str, object]] = []
        for section, values in self.model_dump().items():
            for key, value in values.items():
                items.append((f"{section}.{key}", value))
        return sorted(items)

    def config_hash(self) -> str:
        """sha256 of the canonical JSON, independent of field order.

        Seeds and worker count do not change what a single run computes and
        are left out.
        """
        payload = self.model_dump()
        payload["run"] = {
            k: v for k, v in payload["run"].items() if k not in ("seeds", "workers", "output_dir")
        }
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class IterationRecord(BaseModel):
    """Episode statistics for one iteration; returns are NaN when no episode ended."""

    iteration: int = Field(..., ge=1)
    episodes: int = Field(0, ge=0)
    mean_return: float = Field(math.nan)
    min_return: float = Field(math.nan)
    max_return: float = Field(math.nan)


class RunLog(BaseModel):
    """Per-iteration history of one seeded run."""

    seed: int
    config_hash: str = ""
    label: str = ""
    wall_clock_seconds: float = Field(0.0, ge=0.0)
    records: list[IterationRecord] = Field(default_factory=list)

    @field_validator("records")
    @classmethod
    def _contiguous(cls, records: list[IterationRecord]) -> list[IterationRecord]:
        for expected, record in enumerate(records, start=1):
            if record.iteration != expected:
                raise ValueError(
                    f"iterations must be contiguous from 1, found {record.iteration} at position {expected}"
                )
        return records

    @property
    def mean_returns(self) -> list[float]:
        return [record.mean_return for record in self.records]

    def final_window_mean(self, window: int) -> float:
        """Mean of the per-iteration mean returns over the last ``window`` iterations, ignoring NaN."""
        tail = [r for r in self.mean_returns[-window:] if not math.isnan(r)]
        return sum(tail) / len(tail) if tail else math.nan


class CliInvocation(BaseModel):
    """Parsed command line."""

    subcommand: Literal["train", "suite", "plot", "trace-env"]
    config_path: Optional[str] = None
    overrides: dict[str, str] = Field(default_factory=dict)
    seed: Optional[int] = None
    base: Optional[str] = None
    env: Optional[str] = None
    num_seeds: Optional[int] = None
    workers: Optional[int] = None
    inputs: list[str] = Field(default_factory=list)
    out: Optional[str] = None
    ci: float = 0.95
    title: Optional[str] = None
    steps: Optional[int] = None


class CurvePoint(BaseModel):
    """Across-seed mean return and confidence band at one iteration."""

    iteration: int = Field(..., ge=1)
    mean: float
    ci_lower: float
    ci_upper: float
