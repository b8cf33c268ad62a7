"""Agent construction, seeding and per-agent episode loops.

Seeding: a master seed ``s`` fans out through ``SeedSequence(s, spawn_key=k)``
with ``k = (0,)`` network initialization, ``(1,)`` exploration and update
noise, ``(2,)`` worker streams, ``(3, e)`` the environment seed of training
episode ``e`` and ``(4, e)`` that of evaluation episode ``e``.
"""
from __future__ import annotations

from dataclasses import asdict, fields
from typing import Callable, Optional

import numpy as np

from .agents.a3c import A3cConfig, A3cLearner
from .agents.buffer import ReplayBuffer
from .agents.td3 import Td3Agent, Td3Config
from .agents.trpo import Trajectory, TrpoAgent, TrpoConfig
from .errors import SchemaError

AGENTS = ("td3", "a3c", "trpo")
HYPER_CLASSES = {"td3": Td3Config, "a3c": A3cConfig, "trpo": TrpoConfig}

EpisodeCallback = Callable[[int, int, list], None]
UpdateCallback = Callable[[dict], None]


def substream(master: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=tuple(key))


def stream_rng(master: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(substream(master, *key))


def episode_seed(master: int, episode: int, evaluation: bool = False) -> int:
    return int(substream(master, 4 if evaluation else 3, episode).generate_state(1)[0])


def hyper_config(agent: str, overrides: Optional[dict] = None):
    if agent not in HYPER_CLASSES:
        raise SchemaError(f"unknown agent {agent!r}; expected one of {AGENTS}")
    cls = HYPER_CLASSES[agent]
    overrides = dict(overrides or {})
    known = {f.name for f in fields(cls)}
    bad = sorted(set(overrides) - known)
    if bad:
        raise SchemaError(f"unknown {agent} hyperparameters: {bad}")
    return cls(**overrides)


def make_agent(agent: str, obs_dim: int, act_dim: int, hyper, master_seed: int):
    rng = stream_rng(master_seed, 0)
    if agent == "td3":
        return Td3Agent(obs_dim, act_dim, hyper, rng)
    if agent == "a3c":
        return A3cLearner(obs_dim, act_dim, hyper, rng)
    if agent == "trpo":
        return TrpoAgent(obs_dim, act_dim, hyper, rng)
    raise SchemaError(f"unknown agent {agent!r}; expected one of {AGENTS}")


def greedy_policy(networks: dict) -> Callable[[np.ndarray], np.ndarray]:
    """Deterministic action map from a network dict (TD3 actor or Gaussian mean)."""
    if "actor" in networks:
        actor = networks["actor"]
        return lambda obs: np.clip(actor.forward(obs), -1.0, 1.0)
    policy = networks["policy"]
    return lambda obs: np.clip(policy.mean(obs), -1.0, 1.0)


def train_td3(agent: Td3Agent, env, episodes: int, master_seed: int,
              on_episode: Optional[EpisodeCallback] = None,
              on_update: Optional[UpdateCallback] = None) -> None:
    cfg = agent.cfg
    rng = stream_rng(master_seed, 1)
    buffer = ReplayBuffer(env.obs_dim, env.act_dim, cfg.buffer_size)
    start = max(cfg.batch_size, cfg.warmup_steps)
    steps = 0
    for k in range(episodes):
        obs = env.reset(episode_seed(master_seed, k))
        transitions = []
        done = False
        while not done:
            if steps < cfg.warmup_steps:
                a = rng.uniform(-1.0, 1.0, env.act_dim)
            else:
                a = agent.select_action(obs, explore=True, rng=rng)
            tr = env.step(a)
            # time-limit ends are truncations, never terminal states
            buffer.add(obs, tr.raw_action, tr.reward, tr.next_obs, False)
            transitions.append(tr)
            steps += 1
            obs, done = tr.next_obs, tr.done
            if len(buffer) >= start:
                diag = agent.update(buffer, rng)
                if on_update is not None:
                    on_update(diag)
        if on_episode is not None:
            on_episode(0, k, transitions)


def train_trpo(agent: TrpoAgent, env, episodes: int, master_seed: int,
               on_episode: Optional[EpisodeCallback] = None,
               on_update: Optional[UpdateCallback] = None) -> None:
    rng = stream_rng(master_seed, 1)
    batch = []
    for k in range(episodes):
        obs = env.reset(episode_seed(master_seed, k))
        transitions, states, actions = [], [], []
        done = False
        while not done:
            a = agent.act(obs, rng)
            tr = env.step(a)
            states.append(obs)
            actions.append(a)
            transitions.append(tr)
            obs, done = tr.next_obs, tr.done
        batch.append(Trajectory(np.array(states), np.array(actions),
                                np.array([t.reward for t in transitions]), obs))
        if on_episode is not None:
            on_episode(0, k, transitions)
        if len(batch) >= agent.cfg.episodes_per_update or k == episodes - 1:
            diag = agent.update(batch, rng)
            batch = []
            if on_update is not None:
                on_update(diag)


def train_a3c(agent: A3cLearner, env_factory: Callable[[], object], episodes: int, master_seed: int,
              on_episode: Optional[EpisodeCallback] = None,
              on_update: Optional[UpdateCallback] = None) -> None:
    agent.train(env_factory, episodes, lambda k: episode_seed(master_seed, k),
                substream(master_seed, 2), on_episode)
    if on_update is not None:
        for diag in agent.diagnostics:
            on_update(diag)


def train(agent_name: str, agent, env_factory: Callable[[], object], episodes: int, master_seed: int,
          on_episode: Optional[EpisodeCallback] = None,
          on_update: Optional[UpdateCallback] = None) -> None:
    if agent_name == "a3c":
        train_a3c(agent, env_factory, episodes, master_seed, on_episode, on_update)
    elif agent_name == "td3":
        train_td3(agent, env_factory(), episodes, master_seed, on_episode, on_update)
    elif agent_name == "trpo":
        train_trpo(agent, env_factory(), episodes, master_seed, on_episode, on_update)
    else:
        raise SchemaError(f"unknown agent {agent_name!r}")


def hyper_dict(hyper) -> dict:
    return asdict(hyper)
