from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from leorsma.agents.a3c import A3cConfig, A3cLearner, accumulate_gradients, nstep_returns
from leorsma.agents.buffer import ReplayBuffer
from leorsma.agents.td3 import Td3Agent, Td3Config, polyak
from leorsma.agents.trpo import (Trajectory, TrpoAgent, TrpoConfig, conjugate_gradient,
                                 estimate_advantages)
from leorsma.errors import PreconditionError
from leorsma.nn import GaussianPolicy, Mlp, gaussian_kl
from leorsma.toy import TOY_OPTIMUM, ToyConcaveEnv
from leorsma.training import greedy_policy, hyper_config, make_agent, train


# ---------------------------------------------------------------- replay buffer

def test_buffer_capacity_and_sampling():
    buf = ReplayBuffer(2, 1, capacity=5)
    for k in range(12):
        buf.add(np.full(2, k), np.full(1, k), float(k), np.full(2, k + 1))
    assert len(buf) == 5
    batch = buf.sample(5, np.random.default_rng(0))
    assert set(batch["rew"]) <= {7.0, 8.0, 9.0, 10.0, 11.0}
    with pytest.raises(PreconditionError):
        ReplayBuffer(2, 1, 5).sample(1, np.random.default_rng(0))


# ---------------------------------------------------------------- TD3

def constant_net(widths, value):
    net = Mlp(widths)
    net.biases[-1][...] = value
    return net


def frozen_target_agent(gamma):
    agent = Td3Agent(3, 2, Td3Config(gamma=gamma), np.random.default_rng(0))
    agent.critic1_target = constant_net(agent.critic1.widths, 2.0)
    agent.critic2_target = constant_net(agent.critic2.widths, 3.0)
    return agent


def batch_of(n=4, obs=3, act=2, rew=1.0, seed=0):
    rng = np.random.default_rng(seed)
    return {"obs": rng.standard_normal((n, obs)), "act": rng.uniform(-1, 1, (n, act)),
            "rew": np.full(n, rew), "next_obs": rng.standard_normal((n, obs)), "terminal": np.zeros(n)}


def test_td3_handcrafted_target():
    agent = frozen_target_agent(0.9)
    batch = batch_of()
    y = agent.compute_target(batch, np.random.default_rng(1))
    assert np.all(y == 1.0 + 0.9 * 2.0)
    # both critics regress onto that y
    x = np.concatenate([batch["obs"], batch["act"]], axis=1)
    l1 = float(np.mean((agent.critic1.forward(x)[:, 0] - y) ** 2))
    l2 = float(np.mean((agent.critic2.forward(x)[:, 0] - y) ** 2))
    diag = agent.update_on_batch(batch, np.random.default_rng(1))
    assert diag["critic1_loss"] == l1 and diag["critic2_loss"] == l2


def test_td3_zero_discount():
    agent = frozen_target_agent(0.0)
    batch = batch_of(rew=0.37)
    assert np.all(agent.compute_target(batch, np.random.default_rng(0)) == 0.37)


def test_td3_target_ignores_online_critics():
    agent = Td3Agent(3, 2, Td3Config(), np.random.default_rng(0))
    batch = batch_of()
    y0 = agent.compute_target(batch, np.random.default_rng(5))
    agent.critic1.theta[...] = np.nan
    agent.critic2.theta[...] = np.nan
    agent.actor.theta[...] = np.nan
    assert np.array_equal(agent.compute_target(batch, np.random.default_rng(5)), y0)


def test_td3_actor_delay():
    agent = Td3Agent(3, 2, Td3Config(policy_delay=3), np.random.default_rng(0))
    rng = np.random.default_rng(1)
    flags = []
    for k in range(12):
        before = agent.actor.get_flat()
        diag = agent.update_on_batch(batch_of(seed=k), rng)
        changed = not np.array_equal(before, agent.actor.get_flat())
        assert changed == diag["actor_updated"]
        flags.append(diag["actor_updated"])
    assert flags == [False, False, True] * 4 and agent.actor_updates == 4


def test_polyak_convergence():
    rng = np.random.default_rng(0)
    online = Mlp([3, 4, 1], rng)
    target = Mlp([3, 4, 1], rng)
    for _ in range(10_000):
        polyak(target, online, 0.05)
    assert np.linalg.norm(target.theta - online.theta) < 1e-6


def test_td3_select_action():
    agent = Td3Agent(3, 4, Td3Config(), np.random.default_rng(0))
    agent.actor.biases[-1][...] = [3.0, -3.0, 0.0, 0.9]
    obs = np.ones(3)
    det = agent.select_action(obs)
    assert np.array_equal(det, agent.select_action(obs))
    assert np.array_equal(agent.select_action(obs, explore=True, rng=np.random.default_rng(0), sigma=0.0), det)
    rng = np.random.default_rng(1)
    draws = np.array([agent.select_action(obs, explore=True, rng=rng, sigma=2.0) for _ in range(10_000)])
    assert np.all(np.abs(draws) <= 1.0)


# ---------------------------------------------------------------- A3C

def test_nstep_return_example():
    assert nstep_returns([1.0, 1.0], 4.0, 0.5)[0] == pytest.approx(2.5)


def test_a3c_zero_advantage_zero_actor_gradient():
    rng = np.random.default_rng(0)
    pol = GaussianPolicy([2, 3, 1], rng)
    critic = constant_net([2, 3, 1], 4.0)
    gamma = 0.5
    # r + gamma * V = V at every step, so every advantage vanishes
    rewards = np.full(5, 4.0 * (1 - gamma))
    obs = rng.standard_normal((5, 2))
    acts = rng.standard_normal((5, 1))
    d_actor, _, _ = accumulate_gradients(pol, critic, obs, acts, rewards, 4.0, gamma, beta=0.0)
    assert np.allclose(d_actor, 0.0, atol=1e-14)


def test_a3c_gradient_matches_analytic_bandit_gradient():
    """Two-state bandit with reward -(a - 0.3)^2 and a linear Gaussian policy.

    Feeding one-step episodes at Gauss-Hermite nodes with quadrature-weighted
    rewards turns the accumulated score-function gradient into the exact
    expectation, which must equal the analytic gradient of E[r]."""
    pol = GaussianPolicy([2, 1], out_scale=1.0)
    pol.net.weights[0][...] = [[0.1, -0.4]]
    pol.net.biases[0][...] = [0.05]
    pol.log_std[...] = np.log(0.5)
    critic = Mlp([2, 1])  # V = 0
    nodes, weights = np.polynomial.hermite_e.hermegauss(12)
    weights = weights / weights.sum()
    states = np.eye(2)
    total = np.zeros(pol.n_params)
    analytic = np.zeros(pol.n_params)
    sigma = 0.5
    for s in states:
        mu = float(pol.mean(s)[0])
        for z, wq in zip(nodes, weights):
            a = mu + sigma * z
            r = -(a - 0.3) ** 2 * wq
            g, _, _ = accumulate_gradients(pol, critic, s[None, :], np.array([[a]]), [r], 0.0, 0.99, 0.0)
            total += g
        # d/dmu E[r] = -2 (mu - 0.3); d/dlog_std E[r] = -2 sigma^2
        dmu = -2 * (mu - 0.3)
        analytic += np.concatenate([dmu * s, [dmu], [-2 * sigma ** 2]])
    assert np.max(np.abs(total - analytic)) < 1e-6


def _a3c_run(workers, episodes=6):
    cfg = A3cConfig(workers=workers, rollout=7)
    learner = A3cLearner(1, 1, cfg, np.random.default_rng(0))
    seen = []
    learner.train(lambda: ToyConcaveEnv(20), episodes, lambda k: k, np.random.SeedSequence(3),
                  lambda w, k, trs: seen.append((k, len(trs))))
    return learner, seen


def test_a3c_single_worker_bit_identical():
    a, _ = _a3c_run(1)
    b, _ = _a3c_run(1)
    assert np.array_equal(a.policy.get_flat(), b.policy.get_flat())
    assert np.array_equal(a.critic.get_flat(), b.critic.get_flat())


def test_a3c_threaded_workers_cover_all_episodes():
    learner, seen = _a3c_run(4, episodes=10)
    assert sorted(k for k, _ in seen) == list(range(10))
    assert all(n == 20 for _, n in seen)
    # ceil(20 / 7) rollouts per episode, each applied once
    assert learner.store.updates == 10 * 3


# ---------------------------------------------------------------- TRPO

def test_conjugate_gradient_identity():
    g = np.random.default_rng(0).standard_normal(20)
    assert np.allclose(conjugate_gradient(lambda v: v, g, 10), g, atol=1e-8)


def test_conjugate_gradient_spd():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((6, 6))
    a = a @ a.T + 6 * np.eye(6)
    b = rng.standard_normal(6)
    assert np.allclose(conjugate_gradient(lambda v: a @ v, b, 20), np.linalg.solve(a, b), atol=1e-8)


def value_const(obs_dim, c):
    return constant_net([obs_dim, 3, 1], c)


def test_gae_monte_carlo_and_td():
    rng = np.random.default_rng(0)
    value = Mlp([2, 4, 1], rng)
    obs = rng.standard_normal((5, 2))
    rew = rng.standard_normal(5)
    last = rng.standard_normal(2)
    tr = Trajectory(obs, np.zeros((5, 1)), rew, last, terminal=True)
    v = value.forward(obs)[:, 0]
    g = 0.9
    adv, ret = estimate_advantages([tr], value, g, 1.0, normalize=False)
    mc = np.array([sum(g ** k * rew[t + k] for k in range(5 - t)) for t in range(5)])
    assert np.allclose(adv, mc - v) and np.allclose(ret, mc)
    adv0, _ = estimate_advantages([tr], value, g, 0.0, normalize=False)
    v_next = np.append(v[1:], 0.0)
    assert np.allclose(adv0, rew + g * v_next - v)


def test_gae_constant_rewards_perfect_value():
    g = 0.9
    value = value_const(2, 1.0 / (1 - g))
    tr = Trajectory(np.ones((8, 2)), np.zeros((8, 1)), np.ones(8), np.ones(2))
    adv, ret = estimate_advantages([tr], value, g, 0.95)
    assert np.allclose(adv, 0.0, atol=1e-9) and np.allclose(ret, 10.0)


def test_gae_normalization():
    rng = np.random.default_rng(2)
    value = Mlp([2, 3, 1], rng)
    trs = [Trajectory(rng.standard_normal((6, 2)), np.zeros((6, 1)), rng.standard_normal(6),
                      rng.standard_normal(2)) for _ in range(3)]
    adv, _ = estimate_advantages(trs, value, 0.99, 0.95)
    assert abs(adv.mean()) < 1e-12 and adv.std() == pytest.approx(1.0)


def _trpo_batch(agent, seed=0, n=64):
    rng = np.random.default_rng(seed)
    obs = rng.standard_normal((n, agent.policy.net.in_dim))
    act = agent.policy.sample(obs, rng)
    return obs, act, rng.standard_normal(n)


def test_trpo_zero_advantage_noop():
    agent = TrpoAgent(3, 2, TrpoConfig(), np.random.default_rng(0))
    obs, act, _ = _trpo_batch(agent)
    before = agent.policy.get_flat()
    diag = agent.policy_step(obs, act, np.zeros(len(obs)))
    assert not diag["accepted"] and np.array_equal(before, agent.policy.get_flat())


def test_trpo_nonfinite_rejected():
    agent = TrpoAgent(3, 2, TrpoConfig(), np.random.default_rng(0))
    obs, act, adv = _trpo_batch(agent)
    adv[3] = np.nan
    before = agent.policy.get_flat()
    assert agent.policy_step(obs, act, adv)["status"] == "nonfinite"
    assert np.array_equal(before, agent.policy.get_flat())


def test_trpo_rejection_restores_bits():
    agent = TrpoAgent(3, 2, TrpoConfig(max_backtracks=0), np.random.default_rng(0))
    obs, act, adv = _trpo_batch(agent)
    before = agent.policy.get_flat()
    diag = agent.policy_step(obs, act, adv)
    assert diag["status"] == "rejected" and np.array_equal(before, agent.policy.get_flat())


@given(st.integers(0, 500), st.sampled_from([0.001, 0.01, 0.1]))
def test_trpo_accepted_steps_respect_trust_region(seed, delta):
    agent = TrpoAgent(3, 2, TrpoConfig(delta_kl=delta), np.random.default_rng(seed))
    obs, act, adv = _trpo_batch(agent, seed)
    old = agent.policy.copy()
    diag = agent.policy_step(obs, act, adv)
    kl = float(np.mean(gaussian_kl(old.mean(obs), old.clamped_log_std(),
                                   agent.policy.mean(obs), agent.policy.clamped_log_std())))
    if diag["accepted"]:
        assert kl <= 1.5 * delta and diag["improvement"] > 0
    else:
        assert np.array_equal(old.get_flat(), agent.policy.get_flat())


# ---------------------------------------------------------------- toy convergence

TOY_SETTINGS = {
    "td3": {"warmup_steps": 200, "batch_size": 64},
    "a3c": {"workers": 1, "log_std_init": -1.5},
    "trpo": {},
}


@pytest.mark.parametrize("agent_name", ["td3", "a3c", "trpo"])
def test_toy_concave_reward_convergence(agent_name):
    hits = 0
    for seed in range(5):
        hyper = hyper_config(agent_name, TOY_SETTINGS[agent_name])
        agent = make_agent(agent_name, 1, 1, hyper, seed)
        # 100 episodes x 50 steps = 5000 environment steps
        train(agent_name, agent, lambda: ToyConcaveEnv(50), 100, seed)
        mean_action = greedy_policy(agent.networks())(np.ones(1))[0]
        hits += abs(mean_action - TOY_OPTIMUM) <= 0.05
    assert hits >= 4
