"""Under-powered car in a valley."""

import math

import numpy as np

from backend.app.models.environment import EnvSpec
from backend.app.services.environments.base import Environment

MIN_POSITION = -1.2
MAX_POSITION = 0.6
MAX_SPEED = 0.07
GOAL_POSITION = 0.5
FORCE = 0.001
GRAVITY = 0.0025


class MountainCar(Environment):
    """Push left (0), nothing (1) or right (2); -1 per step until x >= 0.5."""

    spec = EnvSpec(
        name="mountaincar",
        observation_shape=(2,),
        num_actions=3,
        max_episode_steps=200,
        obs_bounds=(1.2, MAX_SPEED),
    )

    def _reset_state(self) -> None:
        self.state = np.array([self.rng.uniform(-0.6, -0.4), 0.0])

    def set_state(self, position: float, velocity: float) -> None:
        self.state = np.array([position, velocity])

    def _transition(self, action: int) -> tuple[float, bool]:
        position, velocity = float(self.state[0]), float(self.state[1])
        velocity += (action - 1) * FORCE + math.cos(3 * position) * (-GRAVITY)
        velocity = min(max(velocity, -MAX_SPEED), MAX_SPEED)
        position += velocity
        position = min(max(position, MIN_POSITION), MAX_POSITION)
        if position == MIN_POSITION and velocity < 0:
            velocity = 0.0
        self.state = np.array([position, velocity])
        return -1.0, bool(position >= GOAL_POSITION)

    def observation(self) -> np.ndarray:
        return self.state.copy()

    def state_vector(self) -> np.ndarray:
        return self.state.copy()
