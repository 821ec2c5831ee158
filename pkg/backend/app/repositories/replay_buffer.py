"""Experience replay: uniform ring buffer, prioritized buffer and n-step accumulation."""

from collections import deque
from typing import Optional

import numpy as np

from backend.app.models.replay import Transition, TransitionBatch
from backend.app.utils.logger import get_logger
from backend.app.utils.sum_tree import SumTree

logger = get_logger(__name__)


def accumulate_nstep(
    pending: deque, gamma: float, n: int, flush: bool = False
) -> Optional[Transition]:
    """Pop the head of ``pending`` as an n-step transition once enough steps are queued.

    Args:
        pending: Time-ordered single-step transitions
        gamma: Discount factor
        n: Update horizon
        flush: Emit even when fewer than ``n`` steps are queued

    Returns:
        The accumulated transition, or None if the head is not ready yet
    """
    if n < 1:
        raise ValueError(f"update horizon must be >= 1, got {n}")
    if not pending:
        return None
    window_end = min(n, len(pending))
    for k in range(window_end):
        if pending[k].done:
            window_end = k + 1
            break
    else:
        if len(pending) < n and not flush:
            return None

    reward = 0.0
    for k in range(window_end):
        reward += gamma**k * pending[k].r
    head = pending.popleft()
    last = pending[window_end - 2] if window_end > 1 else head
    return Transition(
        s=head.s,
        a=head.a,
        r=reward,
        s_next=last.s_next,
        done=last.done,
        horizon=window_end,
    )


class NStepAccumulator:
    """Turns a stream of single steps into n-step transitions."""

    def __init__(self, gamma: float, n: int) -> None:
        self.gamma = gamma
        self.n = n
        self.pending: deque = deque()

    def push(self, step: Transition) -> list[Transition]:
        """Queue one raw step and return every transition that became ready.

        An episode end drains the queue, so nothing straddles episodes.
        """
        self.pending.append(step)
        ready: list[Transition] = []
        while self.pending:
            item = accumulate_nstep(self.pending, self.gamma, self.n, flush=step.done)
            if item is None:
                break
            ready.append(item)
        return ready

    def reset(self) -> None:
        self.pending.clear()


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling."""

    def __init__(self, capacity: int, min_replay_history: int = 1) -> None:
        """Initialize replay buffer.

        Args:
            capacity: Maximum stored transitions; the oldest is overwritten
            min_replay_history: Size required before sampling is allowed
        """
        if capacity < 1:
            raise ValueError(f"replay capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.min_replay_history = min_replay_history
        self.size = 0
        self.cursor = 0
        self._obs: Optional[np.ndarray] = None
        self._next_obs: Optional[np.ndarray] = None
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._dones = np.zeros(capacity, dtype=bool)
        self._horizons = np.ones(capacity, dtype=np.int64)

    def __len__(self) -> int:
        return self.size

    def _allocate(self, obs_shape: tuple[int, ...]) -> None:
        self._obs = np.zeros((self.capacity,) + obs_shape)
        self._next_obs = np.zeros((self.capacity,) + obs_shape)

    def append(self, t: Transition) -> int:
        """Store a transition, overwriting the oldest when full.

        Returns:
            The slot written
        """
        s = np.asarray(t.s, dtype=np.float64)
        if self._obs is None:
            self._allocate(s.shape)
        assert self._obs is not None and self._next_obs is not None
        index = self.cursor
        self._obs[index] = s
        self._next_obs[index] = t.s_next
        self._actions[index] = t.a
        self._rewards[index] = t.r
        self._dones[index] = t.done
        self._horizons[index] = t.horizon
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return index

    def get(self, index: int) -> Transition:
        if not 0 <= index < self.size:
            raise ValueError(f"index {index} out of range for {self.size} stored transitions")
        assert self._obs is not None and self._next_obs is not None
        return Transition(
            s=self._obs[index].copy(),
            a=int(self._actions[index]),
            r=float(self._rewards[index]),
            s_next=self._next_obs[index].copy(),
            done=bool(self._dones[index]),
            horizon=int(self._horizons[index]),
        )

    def contents(self) -> list[Transition]:
        """Stored transitions from oldest to newest."""
        start = self.cursor if self.size == self.capacity else 0
        return [self.get((start + k) % self.capacity) for k in range(self.size)]

    def can_sample(self) -> bool:
        return self.size > 0 and self.size >= self.min_replay_history

    def _check_ready(self, batch_size: int) -> None:
        if batch_size < 1:
            raise ValueError(f"batch size must be positive, got {batch_size}")
        if not self.can_sample():
            raise ValueError(
                f"replay holds {self.size} transitions, "
                f"need {max(self.min_replay_history, 1)} before sampling"
            )

    def _gather(self, indices: np.ndarray, weights: np.ndarray) -> TransitionBatch:
        assert self._obs is not None and self._next_obs is not None
        return TransitionBatch(
            obs=self._obs[indices],
            actions=self._actions[indices],
            rewards=self._rewards[indices],
            next_obs=self._next_obs[indices],
            dones=self._dones[indices],
            horizons=self._horizons[indices],
            indices=indices,
            is_weights=weights,
        )

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        """I.i.d. uniform sample with replacement; importance weights are all one.

        Raises:
            ValueError: If fewer than min_replay_history transitions are stored
        """
        self._check_ready(batch_size)
        indices = rng.integers(0, self.size, size=batch_size)
        return self._gather(indices, np.ones(batch_size))


class PrioritizedReplayBuffer(ReplayBuffer):
    """Proportional prioritized replay backed by a :class:`SumTree`."""

    def __init__(
        self,
        capacity: int,
        min_replay_history: int = 1,
        priority_exponent: float = 0.5,
        importance_beta: float = 0.5,
        priority_epsilon: float = 0.01,
    ) -> None:
        """Initialize prioritized buffer.

        Args:
            capacity: Maximum stored transitions
            min_replay_history: Size required before sampling is allowed
            priority_exponent: omega applied to |TD| + epsilon on update
            importance_beta: Exponent of the importance-sampling correction
            priority_epsilon: Added to |TD| so no item reaches zero priority
        """
        super().__init__(capacity, min_replay_history)
        self.tree = SumTree(capacity)
        self.priority_exponent = priority_exponent
        self.importance_beta = importance_beta
        self.priority_epsilon = priority_epsilon

    def append(self, t: Transition, initial_priority: Optional[float] = None) -> int:
        """Store ``t`` at the current max leaf priority (1 for an empty tree)."""
        if initial_priority is None:
            initial_priority = self.tree.max_priority if self.size > 0 else 1.0
            if initial_priority <= 0.0:
                initial_priority = 1.0
        index = super().append(t)
        self.tree.set(np.array([index]), np.array([initial_priority]))
        return index

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        """Sample indices with probability proportional to their stored priority.

        Raises:
            ValueError: If replay is too small or the tree is empty
        """
        self._check_ready(batch_size)
        total = self.tree.total
        if total <= 0.0:
            raise ValueError("cannot sample from a tree with zero total priority")
        masses = rng.uniform(0.0, total, size=batch_size)
        masses = np.minimum(masses, np.nextafter(total, 0.0))
        indices = self.tree.prefix_find(masses)
        probs = self.tree.get(indices) / total
        weights = (1.0 / (probs * self.size)) ** self.importance_beta
        weights = weights / weights.max()
        return self._gather(indices, weights)

    def update_priorities(self, indices: np.ndarray, td_errors: np.ndarray) -> None:
        """leaf_i <- (|td_error_i| + epsilon) ** omega.

        Raises:
            ValueError: On an index outside the stored range
        """
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.size):
            raise ValueError(f"priority update for index outside [0, {self.size})")
        priorities = (np.abs(np.asarray(td_errors, dtype=np.float64)) + self.priority_epsilon) ** (
            self.priority_exponent
        )
        self.tree.set(idx, priorities)
        logger.debug(f"Updated {idx.size} priorities, total now {self.tree.total:.6g}")
