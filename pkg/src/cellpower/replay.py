"""Fixed-capacity experience replay with uniform sampling."""

import numpy as np


class ReplayBuffer:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._storage = []
        self._cursor = 0

    def __len__(self):
        return len(self._storage)

    def push(self, transition) -> None:
        """Append; once full, overwrite the oldest entry."""
        if len(self._storage) < self.capacity:
            self._storage.append(transition)
        else:
            self._storage[self._cursor] = transition
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list:
        """batch_size transitions drawn uniformly with replacement."""
        if batch_size > len(self._storage):
            raise ValueError(
                f"buffer holds {len(self._storage)} < batch size {batch_size}")
        idx = rng.integers(0, len(self._storage), size=batch_size)
        return [self._storage[i] for i in idx]

    def snapshot(self) -> list:
        """Current contents, oldest first."""
        if len(self._storage) < self.capacity:
            return list(self._storage)
        return self._storage[self._cursor:] + self._storage[:self._cursor]
