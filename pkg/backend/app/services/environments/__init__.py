"""Environment registry."""

from typing import Optional

import numpy as np

from backend.app.services.environments.acrobot import Acrobot
from backend.app.services.environments.base import Environment, normalize_obs
from backend.app.services.environments.cartpole import CartPole
from backend.app.services.environments.min_breakout import MinBreakout
from backend.app.services.environments.mountain_car import MountainCar

ENVIRONMENTS: dict[str, type[Environment]] = {
    "cartpole": CartPole,
    "acrobot": Acrobot,
    "mountaincar": MountainCar,
    "min_breakout": MinBreakout,
}


def make_env(name: str) -> Environment:
    """Instantiate an environment by name.

    Raises:
        ValueError: If the name is unknown
    """
    try:
        return ENVIRONMENTS[name]()
    except KeyError:
        raise ValueError(
            f"Unknown environment '{name}'. Expected one of: {', '.join(sorted(ENVIRONMENTS))}"
        ) from None


def trace_environment(
    name: str, seed: int, steps: int, policy_seed: Optional[int] = None
) -> list[tuple[int, np.ndarray, int, float, bool]]:
    """Seeded random-policy trajectory of (step, state, action, reward, done) rows.

    The environment is reset with ``seed`` and re-reset (continuing its own
    stream) whenever an episode ends.
    """
    env = make_env(name)
    policy = np.random.default_rng(seed if policy_seed is None else policy_seed)
    env.reset(seed)
    rows = []
    for step in range(steps):
        if env.done:
            env.reset()
        state = env.state_vector()
        action = int(policy.integers(env.spec.num_actions))
        result = env.step(action)
        rows.append((step, state, action, result.reward, result.done))
    return rows


__all__ = [
    "ENVIRONMENTS",
    "Environment",
    "make_env",
    "normalize_obs",
    "trace_environment",
]
