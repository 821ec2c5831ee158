"""Transition records stored in and sampled from replay."""

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    """One (possibly n-step accumulated) experience tuple.

    ``s_next`` is the observation ``horizon`` steps after ``s`` and ``r`` the
    discounted reward sum over those steps.
    """

    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool
    horizon: int = 1

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not np.isfinite(self.r):
            raise ValueError(f"reward must be finite, got {self.r}")


@dataclass
class TransitionBatch:
    """Column-stacked transitions plus their buffer indices and importance weights."""

    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray
    horizons: np.ndarray
    indices: np.ndarray
    is_weights: np.ndarray

    def __len__(self) -> int:
        return int(self.actions.shape[0])

    def transition(self, row: int) -> Transition:
        return Transition(
            s=self.obs[row],
            a=int(self.actions[row]),
            r=float(self.rewards[row]),
            s_next=self.next_obs[row],
            done=bool(self.dones[row]),
            horizon=int(self.horizons[row]),
        )
