"""Dependency-free smoke checks used when the test suite is not shipped."""
from __future__ import annotations

import math

import numpy as np


def _checks():
    from .agents.td3 import Td3Agent, Td3Config
    from .bdris import project_block
    from .channel import satellite_gain
    from .nn import Mlp

    th3 = math.radians(1.0)
    yield "half-power gain", abs(satellite_gain(th3, th3, 1.0) - 0.5) < 5e-3
    yield "boresight gain", abs(satellite_gain(1e-9, th3, 1.0) - 1.0) < 1e-6
    rng = np.random.default_rng(0)
    raw = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    raw = 3 * (raw + raw.T)
    p = project_block(raw, 1.0)
    yield "projection idempotent", np.abs(project_block(p, 1.0) - p).max() < 1e-10
    net = Mlp([3, 5, 2], rng)
    x = rng.standard_normal(3)
    dy = rng.standard_normal(2)
    g, _ = net.backward(x, dy)
    th, k, eps = net.get_flat(), 4, 1e-6
    e = np.zeros_like(th)
    e[k] = eps
    net.set_flat(th + e)
    up = dy @ net.forward(x)
    net.set_flat(th - e)
    dn = dy @ net.forward(x)
    net.set_flat(th)
    yield "backward matches finite difference", abs((up - dn) / (2 * eps) - g[k]) < 1e-6
    agent = Td3Agent(2, 1, Td3Config(gamma=0.0), rng)
    batch = {"next_obs": np.zeros((1, 2)), "rew": np.array([1.5]), "terminal": np.zeros(1)}
    yield "td3 target with zero discount", agent.compute_target(batch, rng)[0] == 1.5


def run() -> int:
    failed = 0
    for name, ok in _checks():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        failed += not ok
    return 1 if failed else 0
