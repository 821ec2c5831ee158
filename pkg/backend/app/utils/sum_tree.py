"""Binary sum tree for proportional sampling.

Heap layout: node 1 is the root, node i has children 2i and 2i + 1, and the
leaves occupy nodes ``capacity .. 2 * capacity - 1``. A parallel max tree
tracks the largest leaf so new items can enter at the current maximum.
"""

import numpy as np


def _next_power_of_two(n: int) -> int:
    size = 1
    while size < n:
        size *= 2
    return size


class SumTree:
    """Leaf priorities with internal partial sums."""

    def __init__(self, min_capacity: int) -> None:
        """Initialize sum tree.

        Args:
            min_capacity: Number of leaves needed; rounded up to a power of two
        """
        if min_capacity < 1:
            raise ValueError(f"capacity must be positive, got {min_capacity}")
        self.capacity = _next_power_of_two(min_capacity)
        self.depth = int(np.log2(self.capacity))
        self._sums = np.zeros(2 * self.capacity)
        self._maxes = np.zeros(2 * self.capacity)

    @property
    def total(self) -> float:
        return float(self._sums[1])

    @property
    def max_priority(self) -> float:
        return float(self._maxes[1])

    def leaves(self) -> np.ndarray:
        return self._sums[self.capacity :].copy()

    def get(self, indices: np.ndarray) -> np.ndarray:
        indices = self._check_indices(indices)
        return self._sums[indices + self.capacity]

    def _check_indices(self, indices: np.ndarray) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        if idx.size and (idx.min() < 0 or idx.max() >= self.capacity):
            raise ValueError(
                f"leaf index out of range [0, {self.capacity}): {idx.min()}..{idx.max()}"
            )
        return idx

    def set(self, indices: np.ndarray, priorities: np.ndarray) -> None:
        """Overwrite leaf priorities and recompute every affected ancestor.

        Raises:
            ValueError: On an index out of range or a negative / non-finite priority
        """
        idx = self._check_indices(indices)
        values = np.broadcast_to(np.asarray(priorities, dtype=np.float64), idx.shape)
        if values.size and (not np.isfinite(values).all() or values.min() < 0.0):
            raise ValueError("priorities must be finite and non-negative")
        nodes = idx + self.capacity
        self._sums[nodes] = values
        self._maxes[nodes] = values
        nodes = np.unique(nodes // 2)
        while nodes.size and nodes[0] >= 1:
            left, right = 2 * nodes, 2 * nodes + 1
            self._sums[nodes] = self._sums[left] + self._sums[right]
            self._maxes[nodes] = np.maximum(self._maxes[left], self._maxes[right])
            if nodes[0] == 1:
                break
            nodes = np.unique(nodes // 2)

    def prefix_find(self, masses: np.ndarray) -> np.ndarray:
        """Leaves whose cumulative-priority interval contains each mass.

        Args:
            masses: Values in [0, total)

        Returns:
            Leaf indices, one per mass

        Raises:
            ValueError: If the tree is empty or a mass is out of range
        """
        total = self.total
        mass = np.atleast_1d(np.asarray(masses, dtype=np.float64)).copy()
        if total <= 0.0:
            raise ValueError("cannot search an empty sum tree")
        if mass.size and (mass.min() < 0.0 or mass.max() >= total):
            raise ValueError(f"mass out of range [0, {total})")
        node = np.ones(mass.shape, dtype=np.int64)
        for _ in range(self.depth):
            left = self._sums[2 * node]
            go_right = (mass >= left) & (self._sums[2 * node + 1] > 0.0)
            mass = np.where(go_right, mass - left, mass)
            node = 2 * node + go_right.astype(np.int64)
        return node - self.capacity
