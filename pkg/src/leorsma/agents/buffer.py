"""Bounded uniform replay memory."""
from __future__ import annotations

import numpy as np

from ..errors import PreconditionError


class ReplayBuffer:
    def __init__(self, obs_dim: int, act_dim: int, capacity: int):
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim))
        self.act = np.zeros((self.capacity, act_dim))
        self.rew = np.zeros(self.capacity)
        self.next_obs = np.zeros((self.capacity, obs_dim))
        self.terminal = np.zeros(self.capacity)
        self.size = 0
        self._pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, act, rew, next_obs, terminal: bool = False) -> None:
        i = self._pos
        self.obs[i], self.act[i], self.rew[i] = obs, act, rew
        self.next_obs[i], self.terminal[i] = next_obs, float(terminal)
        self._pos = (self._pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        if self.size < batch_size:
            raise PreconditionError(f"buffer holds {self.size} items, batch needs {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return {"obs": self.obs[idx], "act": self.act[idx], "rew": self.rew[idx],
                "next_obs": self.next_obs[idx], "terminal": self.terminal[idx]}
