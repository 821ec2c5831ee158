"""Cart-pole balancing with Euler integration."""

import math

import numpy as np

from backend.app.models.environment import EnvSpec
from backend.app.services.environments.base import Environment

GRAVITY = 9.8
MASS_CART = 1.0
MASS_POLE = 0.1
TOTAL_MASS = MASS_CART + MASS_POLE
HALF_LENGTH = 0.5
POLE_MASS_LENGTH = MASS_POLE * HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02
THETA_THRESHOLD = 12 * 2 * math.pi / 360
X_THRESHOLD = 2.4


class CartPole(Environment):
    """Push left (0) or right (1); +1 per step until the pole falls or the cart leaves the track."""

    spec = EnvSpec(
        name="cartpole",
        observation_shape=(4,),
        num_actions=2,
        max_episode_steps=200,
        obs_bounds=(X_THRESHOLD, 4.0, THETA_THRESHOLD, 5.0),
    )

    def _reset_state(self) -> None:
        self.state = self.rng.uniform(-0.05, 0.05, size=4)

    def _transition(self, action: int) -> tuple[float, bool]:
        x, x_dot, theta, theta_dot = (float(v) for v in self.state)
        force = FORCE_MAG if action == 1 else -FORCE_MAG
        cos_theta = math.cos(theta)
        sin_theta = math.sin(theta)
        temp = (force + POLE_MASS_LENGTH * theta_dot**2 * sin_theta) / TOTAL_MASS
        theta_acc = (GRAVITY * sin_theta - cos_theta * temp) / (
            HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_theta**2 / TOTAL_MASS)
        )
        x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_theta / TOTAL_MASS

        x = x + TAU * x_dot
        x_dot = x_dot + TAU * x_acc
        theta = theta + TAU * theta_dot
        theta_dot = theta_dot + TAU * theta_acc
        self.state = np.array([x, x_dot, theta, theta_dot])

        terminal = (
            x < -X_THRESHOLD
            or x > X_THRESHOLD
            or theta < -THETA_THRESHOLD
            or theta > THETA_THRESHOLD
        )
        return 1.0, terminal

    def observation(self) -> np.ndarray:
        return self.state.copy()

    def state_vector(self) -> np.ndarray:
        return self.state.copy()
