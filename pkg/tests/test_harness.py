from __future__ import annotations

import json

import numpy as np
import pytest

from leorsma.config import desk_scenario
from leorsma.env import RsmaEnv
from leorsma.errors import SchemaError
from leorsma.harness import (METRIC_COLUMNS, ExperimentConfig, aggregate_cells, evaluate,
                             evaluate_policy, load_config, read_csv, run_sweep, run_training)


def small(agent="td3", **kw):
    hyper = {"workers": 1} if agent == "a3c" else {}
    base = dict(agent=agent, hyperparameters=hyper, episodes=2, horizon=5, seeds=(0, 1), eval_episodes=1)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize("agent", ["td3", "a3c", "trpo"])
def test_metrics_rows_and_reproducibility(tmp_path, agent):
    cfg = small(agent)
    a = run_training(cfg, tmp_path / "a")
    b = run_training(cfg, tmp_path / "b")
    rows_a, rows_b = read_csv(a.metrics_path), read_csv(b.metrics_path)
    assert len(rows_a) == 2 * len(cfg.seeds)
    assert list(rows_a[0]) == list(METRIC_COLUMNS)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_clock"} for r in rows]
    assert strip(rows_a) == strip(rows_b)
    assert (tmp_path / "a" / "seed0" / "checkpoint.bin").read_bytes() == \
        (tmp_path / "b" / "seed0" / "checkpoint.bin").read_bytes()
    snap = json.loads((tmp_path / "a" / "config.json").read_text())
    assert snap["config_hash"] == cfg.config_hash() == rows_a[0]["config_hash"]


def test_config_hash_ignores_output_dir():
    assert small(output_dir="x").config_hash() == small(output_dir="y").config_hash()
    assert small().config_hash() != small(episodes=3).config_hash()


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(SchemaError, match="bogus"):
        ExperimentConfig.from_dict({"agent": "td3", "bogus": 1})
    with pytest.raises(SchemaError, match="typo_field"):
        ExperimentConfig.from_dict({"scenario": {"preset": "desk", "typo_field": 3}})
    with pytest.raises(SchemaError, match="not_a_hyper"):
        ExperimentConfig.from_dict({"agent": "trpo", "hyperparameters": {"not_a_hyper": 1}})
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        load_config(p)


def test_unknown_sweep_variable(tmp_path):
    with pytest.raises(SchemaError):
        run_sweep(small(), "warp_factor", [1, 2], out_dir=tmp_path)
    with pytest.raises(SchemaError):
        run_sweep(small(), "num_users", [2, 3], mode="frozen", out_dir=tmp_path)


def test_aggregate_cells_order_independent():
    rng = np.random.default_rng(0)
    cells = [{"value": v, "seed": s, "mean_reward": rng.normal(), "ee": rng.normal(),
              "sum_rate": rng.normal(), "reliability": rng.uniform()}
             for v in (40.0, 46.0, 51.0) for s in range(5)]
    ref = aggregate_cells(cells, "p_sat_max", "h")
    for k in range(5):
        shuffled = [cells[i] for i in np.random.default_rng(k).permutation(len(cells))]
        assert aggregate_cells(shuffled, "p_sat_max", "h") == ref
    assert [r["value"] for r in ref] == [40.0, 46.0, 51.0]


def test_frozen_sweep_writes_cells(tmp_path):
    path = run_sweep(small(seeds=(0,)), "p_sat_max", [40.0, 46.0], mode="frozen", out_dir=tmp_path)
    rows = read_csv(path)
    assert [float(r["value"]) for r in rows] == [40.0, 46.0]
    assert len(read_csv(tmp_path / "sweep_cells.csv")) == 2


def test_evaluate_deterministic(tmp_path):
    res = run_training(small(seeds=(0,)), tmp_path)
    nets = res.seeds[0].networks
    a = evaluate(nets, desk_scenario().replace(horizon=5), 2, seed=3)
    b = evaluate(nets, desk_scenario().replace(horizon=5), 2, seed=3)
    assert a == b


def test_zero_penalty_reward_is_scaled_ee():
    scen = desk_scenario().replace(penalty_lambda=0.0, horizon=4)
    env = RsmaEnv(scen)
    env.reset(0)
    rng = np.random.default_rng(0)
    for _ in range(4):
        tr = env.step(rng.uniform(-1, 1, env.act_dim))
        assert tr.reward == pytest.approx(tr.info["report"].ee * scen.reward_scale, rel=1e-12)


def test_evaluate_policy_uses_common_random_numbers():
    scen = desk_scenario().replace(horizon=3)
    env = RsmaEnv(scen)
    zero = lambda obs: np.zeros(env.act_dim)
    a = evaluate_policy(zero, scen, 2, seed=1)
    b = evaluate_policy(zero, scen.replace(p_sat_max_dbm=scen.p_sat_max_dbm + 3), 2, seed=1)
    assert a["steps"] == b["steps"] == 6
    assert a["ee"] != b["ee"]


def test_shipped_configs_load():
    from pathlib import Path
    paths = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.json"))
    assert paths
    for p in paths:
        load_config(p)
