"""One-dimensional concave bandit used to sanity-check the learners."""
from __future__ import annotations

import numpy as np

from .env import Transition
from .errors import LifecycleError

TOY_OPTIMUM = 0.3


class ToyConcaveEnv:
    """Constant observation, reward ``-(a - 0.3)^2`` for the clipped action."""

    obs_dim = 1
    act_dim = 1

    def __init__(self, horizon: int = 50):
        self.horizon = horizon
        self.t = 0
        self.done = True
        self._obs = np.ones(1)

    def reset(self, seed: int = 0) -> np.ndarray:
        self.t = 0
        self.done = False
        return self._obs.copy()

    def step(self, raw_action) -> Transition:
        if self.done:
            raise LifecycleError("episode finished; call reset()")
        a = float(np.clip(np.asarray(raw_action, dtype=float).ravel()[0], -1.0, 1.0))
        self.t += 1
        self.done = self.t >= self.horizon
        return Transition(obs=self._obs.copy(), raw_action=np.array([a]),
                          reward=-(a - TOY_OPTIMUM) ** 2, next_obs=self._obs.copy(),
                          done=self.done, info={})
