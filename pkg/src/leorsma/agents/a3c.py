"""Advantage actor-critic with concurrent workers and a shared parameter store.

Workers own private environments and network copies. After every rollout of
at most ``K`` steps a worker hands its accumulated gradients to the
:class:`SharedStore`, which applies them atomically under a lock. With one
worker the learner runs in the calling thread and is exactly reproducible.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from ..nn import AdamState, GaussianPolicy, Mlp, adam_step


@dataclass
class A3cConfig:
    gamma: float = 0.99
    rollout: int = 20
    entropy_beta: float = 0.01
    workers: int = 4
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    hidden: int = 64
    log_std_init: float = -0.5


def nstep_returns(rewards, bootstrap: float, gamma: float) -> np.ndarray:
    """``R_t = sum_i gamma^i r_{t+i} + gamma^(K-t) V(s_K)`` for every step of a rollout."""
    rewards = np.asarray(rewards, dtype=float)
    out = np.empty_like(rewards)
    acc = float(bootstrap)
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def accumulate_gradients(policy: GaussianPolicy, critic: Mlp, obs, actions, rewards,
                         bootstrap: float, gamma: float, beta: float):
    """Summed rollout gradients.

    Returns ``(d_actor, d_critic, stats)``: ``d_actor`` is the ascent
    direction of ``sum_t log pi(a_t|s_t) A_t + beta H``, ``d_critic`` the
    gradient of ``sum_t (R_t - V(s_t))^2``.
    """
    obs = np.atleast_2d(obs)
    ret = nstep_returns(rewards, bootstrap, gamma)
    v, acts = critic.forward(obs, keep=True)
    adv = ret - v[:, 0]
    d_actor = policy.grad_logprob(obs, actions, adv)
    if beta:
        d_actor = d_actor + beta * len(obs) * policy.grad_entropy()
    d_critic, _ = critic.backward(obs, (-2.0 * adv)[:, None], acts)
    stats = {"value_loss": float(np.sum(adv ** 2)), "mean_advantage": float(np.mean(adv))}
    return d_actor, d_critic, stats


class SharedStore:
    """Global actor/critic parameters with atomic snapshot and gradient application."""

    def __init__(self, policy: GaussianPolicy, critic: Mlp, cfg: A3cConfig):
        self.policy, self.critic = policy, critic
        self.opt_actor = AdamState.like(policy.get_flat(), cfg.lr_actor)
        self.opt_critic = AdamState.like(critic.theta, cfg.lr_critic)
        self.lock = threading.Lock()
        self.updates = 0

    def snapshot(self):
        with self.lock:
            return self.policy.get_flat(), self.critic.get_flat()

    def apply(self, d_actor: np.ndarray, d_critic: np.ndarray) -> int:
        with self.lock:
            # optimizer descends, so the actor's ascent direction is negated
            self.policy.set_flat(adam_step(self.opt_actor, self.policy.get_flat(), -d_actor))
            self.critic.set_flat(adam_step(self.opt_critic, self.critic.theta, d_critic))
            self.updates += 1
            return self.updates


EpisodeCallback = Callable[[int, int, List], None]


class A3cLearner:
    def __init__(self, obs_dim: int, act_dim: int, cfg: A3cConfig | None = None,
                 rng: np.random.Generator | None = None):
        self.cfg = cfg or A3cConfig()
        rng = rng if rng is not None else np.random.default_rng(0)
        h = self.cfg.hidden
        self.policy = GaussianPolicy([obs_dim, h, h, act_dim], rng, log_std=self.cfg.log_std_init)
        self.critic = Mlp([obs_dim, h, h, 1], rng)
        self.store = SharedStore(self.policy, self.critic, self.cfg)
        self.diagnostics: List[dict] = []
        self._episode_lock = threading.Lock()
        self._next_episode = 0

    def networks(self) -> dict:
        return {"policy": self.policy, "critic": self.critic}

    def _claim_episode(self, budget: int) -> Optional[int]:
        with self._episode_lock:
            if self._next_episode >= budget:
                return None
            k = self._next_episode
            self._next_episode += 1
            return k

    def rollout_and_accumulate(self, env, obs, local_pi: GaussianPolicy, local_v: Mlp,
                               rng: np.random.Generator, transitions: list):
        """Run up to ``K`` steps from ``obs`` and push the gradients to the store.

        Returns the observation to continue from (``None`` when the episode ended).
        """
        pi_flat, v_flat = self.store.snapshot()
        local_pi.set_flat(pi_flat)
        local_v.set_flat(v_flat)
        states, actions, rewards = [], [], []
        for _ in range(self.cfg.rollout):
            a = local_pi.sample(obs, rng)
            tr = env.step(a)
            states.append(obs)
            actions.append(a)
            rewards.append(tr.reward)
            transitions.append(tr)
            obs = tr.next_obs
            if tr.done:
                break
        # episodes end on a time limit, so the tail is always bootstrapped
        bootstrap = float(local_v.forward(obs)[0])
        d_actor, d_critic, stats = accumulate_gradients(
            local_pi, local_v, np.array(states), np.array(actions), rewards,
            bootstrap, self.cfg.gamma, self.cfg.entropy_beta)
        idx = self.store.apply(d_actor, d_critic)
        stats.update(update=idx, actor_grad_norm=float(np.linalg.norm(d_actor)),
                     critic_grad_norm=float(np.linalg.norm(d_critic)), steps=len(rewards))
        with self._episode_lock:
            self.diagnostics.append(stats)
        return None if tr.done else obs

    def _worker(self, wid: int, env, rng: np.random.Generator, episodes: int,
                episode_seed: Callable[[int], int], callback: Optional[EpisodeCallback]):
        local_pi = self.policy.copy()
        local_v = self.critic.copy()
        while True:
            k = self._claim_episode(episodes)
            if k is None:
                return
            obs = env.reset(episode_seed(k))
            transitions: list = []
            while obs is not None:
                obs = self.rollout_and_accumulate(env, obs, local_pi, local_v, rng, transitions)
            if callback is not None:
                callback(wid, k, transitions)

    def train(self, env_factory: Callable[[], object], episodes: int,
              episode_seed: Callable[[int], int], worker_seeds: np.random.SeedSequence,
              callback: Optional[EpisodeCallback] = None) -> None:
        """Train for ``episodes`` episodes shared among the workers."""
        n = self.cfg.workers
        rngs = [np.random.default_rng(s) for s in worker_seeds.spawn(n)]
        if n == 1:
            self._worker(0, env_factory(), rngs[0], episodes, episode_seed, callback)
            return
        errors: list = []

        def run(wid):
            try:
                self._worker(wid, env_factory(), rngs[wid], episodes, episode_seed, callback)
            except BaseException as exc:  # surfaced in the caller
                errors.append(exc)

        threads = [threading.Thread(target=run, args=(w,), daemon=True) for w in range(n)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]
