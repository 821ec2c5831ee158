"""Two-link acrobot swing-up with RK4-integrated dynamics."""

import math

import numpy as np

from backend.app.models.environment import EnvSpec
from backend.app.services.environments.base import Environment

DT = 0.2
LINK_LENGTH_1 = 1.0
LINK_MASS_1 = 1.0
LINK_MASS_2 = 1.0
LINK_COM_POS_1 = 0.5
LINK_COM_POS_2 = 0.5
LINK_MOI = 1.0
MAX_VEL_1 = 4 * math.pi
MAX_VEL_2 = 9 * math.pi
AVAIL_TORQUE = (-1.0, 0.0, 1.0)
GRAVITY = 9.8


def wrap(x: float, low: float, high: float) -> float:
    diff = high - low
    while x > high:
        x -= diff
    while x < low:
        x += diff
    return x


def _dsdt(s_augmented: np.ndarray) -> np.ndarray:
    m1, m2 = LINK_MASS_1, LINK_MASS_2
    l1 = LINK_LENGTH_1
    lc1, lc2 = LINK_COM_POS_1, LINK_COM_POS_2
    i1 = i2 = LINK_MOI
    a = s_augmented[-1]
    theta1, theta2, dtheta1, dtheta2 = s_augmented[:-1]
    d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * math.cos(theta2)) + i1 + i2
    d2 = m2 * (lc2**2 + l1 * lc2 * math.cos(theta2)) + i2
    phi2 = m2 * lc2 * GRAVITY * math.cos(theta1 + theta2 - math.pi / 2.0)
    phi1 = (
        -m2 * l1 * lc2 * dtheta2**2 * math.sin(theta2)
        - 2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * math.sin(theta2)
        + (m1 * lc1 + m2 * l1) * GRAVITY * math.cos(theta1 - math.pi / 2)
        + phi2
    )
    ddtheta2 = (
        a + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1**2 * math.sin(theta2) - phi2
    ) / (m2 * lc2**2 + i2 - d2**2 / d1)
    ddtheta1 = -(d2 * ddtheta2 + phi1) / d1
    return np.array([dtheta1, dtheta2, ddtheta1, ddtheta2, 0.0])


def rk4_step(y0: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of the augmented state."""
    half = dt / 2.0
    k1 = _dsdt(y0)
    k2 = _dsdt(y0 + half * k1)
    k3 = _dsdt(y0 + half * k2)
    k4 = _dsdt(y0 + dt * k3)
    return y0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


class Acrobot(Environment):
    """Torque -1 / 0 / +1 on the second joint; -1 per step until the tip clears the bar."""

    spec = EnvSpec(
        name="acrobot",
        observation_shape=(6,),
        num_actions=3,
        max_episode_steps=500,
        obs_bounds=(1.0, 1.0, 1.0, 1.0, MAX_VEL_1, MAX_VEL_2),
    )

    def _reset_state(self) -> None:
        self.state = self.rng.uniform(-0.1, 0.1, size=4)

    def _transition(self, action: int) -> tuple[float, bool]:
        augmented = np.append(self.state, AVAIL_TORQUE[action])
        ns = rk4_step(augmented, DT)[:4]
        ns[0] = wrap(ns[0], -math.pi, math.pi)
        ns[1] = wrap(ns[1], -math.pi, math.pi)
        ns[2] = min(max(ns[2], -MAX_VEL_1), MAX_VEL_1)
        ns[3] = min(max(ns[3], -MAX_VEL_2), MAX_VEL_2)
        self.state = ns
        return -1.0, self.tip_above_bar()

    def tip_above_bar(self) -> bool:
        theta1, theta2 = self.state[0], self.state[1]
        return bool(-math.cos(theta1) - math.cos(theta2 + theta1) > 1.0)

    def observation(self) -> np.ndarray:
        theta1, theta2, dtheta1, dtheta2 = self.state
        return np.array(
            [math.cos(theta1), math.sin(theta1), math.cos(theta2), math.sin(theta2), dtheta1, dtheta2]
        )

    def state_vector(self) -> np.ndarray:
        return self.state.copy()
