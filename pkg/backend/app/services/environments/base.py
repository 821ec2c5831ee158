"""Common environment interface and observation normalization."""

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from backend.app.models.environment import EnvSpec, StepResult


def normalize_obs(obs: np.ndarray, spec: EnvSpec) -> np.ndarray:
    """Divide each dimension by its bound and clip into [-1, 1]; grids pass through."""
    obs = np.asarray(obs, dtype=np.float64)
    if spec.obs_bounds is None:
        return obs
    return np.clip(obs / np.asarray(spec.obs_bounds), -1.0, 1.0)


class Environment(ABC):
    """Seedable episodic environment with a discrete action set."""

    spec: EnvSpec

    def __init__(self) -> None:
        self.rng = np.random.default_rng(0)
        self.steps = 0
        self.done = True

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        """Start a fresh episode.

        Args:
            seed: Reseed the environment; None continues the current stream

        Returns:
            Initial observation
        """
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.steps = 0
        self.done = False
        self._reset_state()
        return self.observation()

    def step(self, action: int) -> StepResult:
        """Advance one step; the time limit ends the episode with done = True.

        Raises:
            ValueError: If the action is outside the action set
            RuntimeError: If the episode is already over
        """
        if self.done:
            raise RuntimeError(f"{self.spec.name}: step called on a finished episode, call reset")
        if not 0 <= int(action) < self.spec.num_actions:
            raise ValueError(
                f"{self.spec.name}: action {action} outside [0, {self.spec.num_actions})"
            )
        reward, terminal = self._transition(int(action))
        self.steps += 1
        self.done = terminal or self.steps >= self.spec.max_episode_steps
        return StepResult(self.observation(), float(reward), self.done)

    @abstractmethod
    def _reset_state(self) -> None:
        """Draw the initial state from ``self.rng``."""

    @abstractmethod
    def _transition(self, action: int) -> tuple[float, bool]:
        """Apply the dynamics; return (reward, terminal)."""

    @abstractmethod
    def observation(self) -> np.ndarray:
        """Raw observation of the current state."""

    @abstractmethod
    def state_vector(self) -> np.ndarray:
        """Flat internal state, used for traces."""
