"""Trust region policy optimization with generalized advantage estimates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from ..nn import AdamState, GaussianPolicy, Mlp, adam_step, gaussian_kl

ADV_STD_FLOOR = 1e-8


@dataclass
class TrpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    delta_kl: float = 0.01
    cg_iters: int = 10
    damping: float = 0.1
    backtrack: float = 0.8
    max_backtracks: int = 10
    vf_lr: float = 1e-3
    vf_epochs: int = 5
    vf_minibatch: int = 64
    episodes_per_update: int = 1
    hidden: int = 64
    log_std_init: float = -0.5


@dataclass
class Trajectory:
    obs: np.ndarray       # T x obs_dim
    actions: np.ndarray   # T x act_dim, unclipped samples
    rewards: np.ndarray   # T
    last_obs: np.ndarray  # observation after the final step
    terminal: bool = False


def estimate_advantages(trajectories: Sequence[Trajectory], value_net: Mlp, gamma: float,
                        lam: float, normalize: bool = True):
    """GAE advantages and returns ``R = A + V(s)`` over a batch.

    Returns are built from the raw advantages; the normalization (zero mean,
    unit variance, std floored) only affects the advantages returned.
    """
    advs, rets = [], []
    for tr in trajectories:
        v = value_net.forward(np.atleast_2d(tr.obs))[:, 0]
        v_last = 0.0 if tr.terminal else float(value_net.forward(tr.last_obs)[0])
        v_next = np.append(v[1:], v_last)
        delta = np.asarray(tr.rewards, dtype=float) + gamma * v_next - v
        adv = np.empty_like(delta)
        acc = 0.0
        for t in range(len(delta) - 1, -1, -1):
            acc = delta[t] + gamma * lam * acc
            adv[t] = acc
        advs.append(adv)
        rets.append(adv + v)
    adv = np.concatenate(advs)
    ret = np.concatenate(rets)
    if normalize:
        adv = adv - adv.mean()
        std = adv.std()
        if std > ADV_STD_FLOOR:
            adv = adv / std
    return adv, ret


def conjugate_gradient(matvec: Callable[[np.ndarray], np.ndarray], b: np.ndarray,
                       iters: int = 10, tol: float = 1e-12) -> np.ndarray:
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    for _ in range(iters):
        if rr <= tol:
            break
        ap = matvec(p)
        alpha = rr / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


class TrpoAgent:
    def __init__(self, obs_dim: int, act_dim: int, cfg: TrpoConfig | None = None,
                 rng: np.random.Generator | None = None):
        self.cfg = cfg or TrpoConfig()
        rng = rng if rng is not None else np.random.default_rng(0)
        h = self.cfg.hidden
        self.policy = GaussianPolicy([obs_dim, h, h, act_dim], rng, log_std=self.cfg.log_std_init)
        self.value = Mlp([obs_dim, h, h, 1], rng)
        self.opt_value = AdamState.like(self.value.theta, self.cfg.vf_lr)
        self.updates = 0

    def networks(self) -> dict:
        return {"policy": self.policy, "value": self.value}

    def act(self, obs, rng: np.random.Generator) -> np.ndarray:
        return self.policy.sample(obs, rng)

    def update(self, trajectories: List[Trajectory], rng: np.random.Generator) -> dict:
        adv, ret = estimate_advantages(trajectories, self.value, self.cfg.gamma, self.cfg.gae_lambda)
        obs = np.concatenate([np.atleast_2d(t.obs) for t in trajectories])
        act = np.concatenate([np.atleast_2d(t.actions) for t in trajectories])
        before = self.policy.get_flat()
        diag = self.policy_step(obs, act, adv)
        # largest policy-parameter change; exactly 0 for every non-accepted step
        diag["param_delta"] = float(np.max(np.abs(self.policy.get_flat() - before)))
        if diag["status"] != "nonfinite":
            diag["value_loss"] = self.value_step(obs, ret, rng)
        diag["update"] = self.updates
        self.updates += 1
        return diag

    def policy_step(self, obs, act, adv) -> dict:
        """Natural-gradient step on the importance-ratio surrogate inside the KL ball."""
        cfg = self.cfg
        pi = self.policy
        diag = {"accepted": False, "kl": 0.0, "improvement": 0.0, "step_frac": 0.0, "grad_norm": 0.0}
        if not np.all(np.isfinite(adv)):
            diag["status"] = "nonfinite"
            return diag
        n = len(obs)
        old_flat = pi.get_flat()
        old_mean = np.atleast_2d(pi.mean(obs))
        old_ls = pi.clamped_log_std()
        logp_old = pi.logprob(obs, act)
        g = pi.grad_logprob(obs, act, adv) / n
        gnorm = float(np.linalg.norm(g))
        diag["grad_norm"] = gnorm
        if gnorm == 0.0 or not np.isfinite(gnorm):
            diag["status"] = "zero_gradient"
            return diag
        fvp = lambda v: pi.fisher_vector_product(obs, v, cfg.damping)
        step = conjugate_gradient(fvp, g, cfg.cg_iters)
        shs = float(step @ fvp(step))
        if not shs > 0:
            diag["status"] = "degenerate_curvature"
            return diag
        full = np.sqrt(2.0 * cfg.delta_kl / shs) * step
        base = float(np.mean(adv))
        for k in range(cfg.max_backtracks):
            frac = cfg.backtrack ** k
            pi.set_flat(old_flat + frac * full)
            ratio = np.exp(pi.logprob(obs, act) - logp_old)
            improvement = float(np.mean(ratio * adv)) - base
            kl = float(np.mean(gaussian_kl(old_mean, old_ls, np.atleast_2d(pi.mean(obs)),
                                           pi.clamped_log_std())))
            if improvement > 0 and kl <= cfg.delta_kl:
                diag.update(accepted=True, kl=kl, improvement=improvement, step_frac=frac,
                            status="accepted")
                return diag
        pi.set_flat(old_flat)
        diag["status"] = "rejected"
        return diag

    def value_step(self, obs, ret, rng: np.random.Generator) -> float:
        """Minibatch Adam epochs on ``1/2 sum (V - R)^2`` (averaged per minibatch)."""
        n = len(obs)
        mb = min(self.cfg.vf_minibatch, n)
        for _ in range(self.cfg.vf_epochs):
            order = rng.permutation(n)
            for start in range(0, n, mb):
                idx = order[start:start + mb]
                v, acts = self.value.forward(obs[idx], keep=True)
                err = v[:, 0] - ret[idx]
                grad, _ = self.value.backward(obs[idx], err[:, None] / len(idx), acts)
                self.value.set_flat(adam_step(self.opt_value, self.value.theta, grad))
        v = self.value.forward(obs)[:, 0]
        return float(0.5 * np.mean((v - ret) ** 2))
