"""Twin delayed deep deterministic policy gradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import AdamState, Mlp, adam_step
from .buffer import ReplayBuffer


@dataclass
class Td3Config:
    gamma: float = 0.99
    tau: float = 0.005
    sigma_explore: float = 0.1
    sigma_target: float = 0.2
    noise_clip: float = 0.5
    policy_delay: int = 2
    batch_size: int = 256
    buffer_size: int = 100_000
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    hidden: int = 64
    # uniform random actions before the actor takes over
    warmup_steps: int = 1000


def polyak(target: Mlp, online: Mlp, tau: float) -> None:
    target.theta *= 1.0 - tau
    target.theta += tau * online.theta


class Td3Agent:
    """Deterministic tanh actor, twin critics ``q(s, a)`` and their target copies."""

    def __init__(self, obs_dim: int, act_dim: int, cfg: Td3Config | None = None,
                 rng: np.random.Generator | None = None):
        self.cfg = cfg or Td3Config()
        rng = rng if rng is not None else np.random.default_rng(0)
        h = self.cfg.hidden
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.actor = Mlp([obs_dim, h, h, act_dim], rng, out_scale=0.01, squash=True)
        self.critic1 = Mlp([obs_dim + act_dim, h, h, 1], rng)
        self.critic2 = Mlp([obs_dim + act_dim, h, h, 1], rng)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.opt_actor = AdamState.like(self.actor.theta, self.cfg.lr_actor)
        self.opt_c1 = AdamState.like(self.critic1.theta, self.cfg.lr_critic)
        self.opt_c2 = AdamState.like(self.critic2.theta, self.cfg.lr_critic)
        self.updates = 0
        self.actor_updates = 0

    def networks(self) -> dict:
        return {"actor": self.actor, "critic1": self.critic1, "critic2": self.critic2,
                "actor_target": self.actor_target, "critic1_target": self.critic1_target,
                "critic2_target": self.critic2_target}

    def select_action(self, obs, explore: bool = False, rng: np.random.Generator | None = None,
                      sigma: float | None = None) -> np.ndarray:
        mu = self.actor.forward(obs)
        if explore:
            sigma = self.cfg.sigma_explore if sigma is None else sigma
            if sigma > 0:
                c = self.cfg.noise_clip
                mu = mu + np.clip(sigma * rng.standard_normal(mu.shape), -c, c)
        return np.clip(mu, -1.0, 1.0)

    def compute_target(self, batch: dict, rng: np.random.Generator) -> np.ndarray:
        """``y = r + gamma * min(q1', q2')`` at the smoothed target action.

        Only target copies are read here.
        """
        c = self.cfg.noise_clip
        s2 = batch["next_obs"]
        a2 = self.actor_target.forward(s2)
        noise = np.clip(self.cfg.sigma_target * rng.standard_normal(a2.shape), -c, c)
        a2 = np.clip(a2 + noise, -1.0, 1.0)
        x2 = np.concatenate([s2, a2], axis=1)
        q1 = self.critic1_target.forward(x2)[:, 0]
        q2 = self.critic2_target.forward(x2)[:, 0]
        return batch["rew"] + self.cfg.gamma * (1.0 - batch["terminal"]) * np.minimum(q1, q2)

    def update(self, buffer: ReplayBuffer, rng: np.random.Generator,
               batch_size: int | None = None) -> dict:
        batch = buffer.sample(batch_size or self.cfg.batch_size, rng)
        return self.update_on_batch(batch, rng)

    def update_on_batch(self, batch: dict, rng: np.random.Generator) -> dict:
        y = self.compute_target(batch, rng)
        x = np.concatenate([batch["obs"], batch["act"]], axis=1)
        n = len(y)
        diag = {"update": self.updates}
        for k, (net, opt) in enumerate(((self.critic1, self.opt_c1), (self.critic2, self.opt_c2)), 1):
            q, acts = net.forward(x, keep=True)
            err = q[:, 0] - y
            grad, _ = net.backward(x, (2.0 / n) * err[:, None], acts)
            net.set_flat(adam_step(opt, net.theta, grad))
            diag[f"critic{k}_loss"] = float(np.mean(err ** 2))
            diag[f"critic{k}_grad_norm"] = float(np.linalg.norm(grad))
        self.updates += 1
        diag["actor_updated"] = False
        if self.updates % self.cfg.policy_delay == 0:
            s = batch["obs"]
            mu, a_acts = self.actor.forward(s, keep=True)
            xs = np.concatenate([s, mu], axis=1)
            q, c_acts = self.critic1.forward(xs, keep=True)
            _, dx = self.critic1.backward(xs, np.full((n, 1), -1.0 / n), c_acts)
            g_actor, _ = self.actor.backward(s, dx[:, self.obs_dim:], a_acts)
            self.actor.set_flat(adam_step(self.opt_actor, self.actor.theta, g_actor))
            tau = self.cfg.tau
            polyak(self.actor_target, self.actor, tau)
            polyak(self.critic1_target, self.critic1, tau)
            polyak(self.critic2_target, self.critic2, tau)
            self.actor_updates += 1
            diag.update(actor_updated=True, actor_loss=float(-np.mean(q)),
                        actor_grad_norm=float(np.linalg.norm(g_actor)))
        return diag
