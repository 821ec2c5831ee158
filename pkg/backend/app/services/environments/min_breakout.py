"""Breakout on a 10 x 10 grid with paddle, ball, trail and brick channels."""

import numpy as np

from backend.app.models.environment import EnvSpec
from backend.app.services.environments.base import Environment

GRID = 10
PADDLE, BALL, TRAIL, BRICK = range(4)
NOOP, LEFT, RIGHT = range(3)

# Ball directions: 0 up-left, 1 up-right, 2 down-right, 3 down-left
_DELTAS = {0: (-1, -1), 1: (1, -1), 2: (1, 1), 3: (-1, 1)}
_FLIP_X = [1, 0, 3, 2]
_FLIP_Y = [3, 2, 1, 0]
_PADDLE_EDGE = [2, 3, 0, 1]


class MinBreakout(Environment):
    """Deterministic rules, no sticky actions, no difficulty ramping."""

    spec = EnvSpec(
        name="min_breakout",
        observation_shape=(GRID, GRID, 4),
        num_actions=3,
        max_episode_steps=10000,
    )

    def _reset_state(self) -> None:
        self.ball_y = 3
        self.ball_x, self.ball_dir = [(0, 2), (9, 3)][int(self.rng.integers(2))]
        self.pos = 4
        self.bricks = np.zeros((GRID, GRID), dtype=bool)
        self.bricks[1:4, :] = True
        self.strike = False
        self.last_x = self.ball_x
        self.last_y = self.ball_y

    def _transition(self, action: int) -> tuple[float, bool]:
        return min_breakout_step(self, action)

    def brick_count(self) -> int:
        return int(self.bricks.sum())

    def observation(self) -> np.ndarray:
        grid = np.zeros((GRID, GRID, 4))
        grid[self.ball_y, self.ball_x, BALL] = 1.0
        grid[GRID - 1, self.pos, PADDLE] = 1.0
        grid[self.last_y, self.last_x, TRAIL] = 1.0
        grid[:, :, BRICK] = self.bricks
        return grid

    def state_vector(self) -> np.ndarray:
        head = [self.pos, self.ball_x, self.ball_y, self.ball_dir, self.last_x, self.last_y, int(self.strike)]
        return np.concatenate([np.array(head, dtype=np.float64), self.bricks.reshape(-1).astype(np.float64)])


def min_breakout_step(env: MinBreakout, action: int) -> tuple[float, bool]:
    """Move the paddle, then the ball; returns (reward, terminal).

    Raises:
        ValueError: If the action is not noop / left / right
    """
    if action not in (NOOP, LEFT, RIGHT):
        raise ValueError(f"invalid breakout action {action}")
    reward = 0.0
    if action == LEFT:
        env.pos = max(0, env.pos - 1)
    elif action == RIGHT:
        env.pos = min(GRID - 1, env.pos + 1)

    env.last_x, env.last_y = env.ball_x, env.ball_y
    dx, dy = _DELTAS[env.ball_dir]
    new_x, new_y = env.ball_x + dx, env.ball_y + dy

    strike_toggle = False
    terminal = False
    if new_x < 0 or new_x > GRID - 1:
        new_x = min(max(new_x, 0), GRID - 1)
        env.ball_dir = _FLIP_X[env.ball_dir]
    if new_y < 0:
        new_y = 0
        env.ball_dir = _FLIP_Y[env.ball_dir]
    elif env.bricks[new_y, new_x]:
        strike_toggle = True
        if not env.strike:
            reward += 1.0
            env.strike = True
            env.bricks[new_y, new_x] = False
            new_y = env.last_y
            env.ball_dir = _FLIP_Y[env.ball_dir]
    elif new_y == GRID - 1:
        if not env.bricks.any():
            env.bricks[1:4, :] = True
        if env.ball_x == env.pos:
            env.ball_dir = _FLIP_Y[env.ball_dir]
            new_y = env.last_y
        elif new_x == env.pos:
            env.ball_dir = _PADDLE_EDGE[env.ball_dir]
            new_y = env.last_y
        else:
            terminal = True

    if not strike_toggle:
        env.strike = False
    env.ball_x, env.ball_y = new_x, new_y
    return reward, terminal
