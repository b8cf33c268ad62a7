"""Experiment configuration, training runs, sweeps and evaluation.

Outputs of :func:`run_training` in ``output_dir``:

* ``metrics.csv``: one row per (seed, episode) with columns ``config_hash,
  seed, episode, mean_reward, ee, ee_scaled, sum_rate, reliability``, the
  per-constraint mean violations ``psi_*`` and ``wall_clock`` (seconds since
  the seed's training started; the only non-reproducible column).
* ``config.json``: the resolved experiment config and its hash.
* ``seed<S>/checkpoint.bin`` (+ ``.json`` metadata) and
  ``seed<S>/diagnostics.csv`` with one row per learner update.
* ``seed<S>/transitions.jsonl`` when ``dump_transitions`` is set.
"""
from __future__ import annotations

import csv
import hashlib
import json
import threading
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RIS_MODES, ScenarioConfig, desk_scenario
from .env import RsmaEnv
from .errors import CheckpointError, SchemaError
from .training import (AGENTS, episode_seed, greedy_policy, hyper_config, hyper_dict, make_agent,
                       train)

PRESETS = {"table2": ScenarioConfig, "desk": desk_scenario}
PSI_COLUMNS = ("common_sinr", "private_sinr", "sat_power", "ris_power", "simplex", "coeff_range",
               "symmetry", "spectral", "uav_x", "uav_y")
METRIC_COLUMNS = (["config_hash", "seed", "episode", "mean_reward", "ee", "ee_scaled", "sum_rate",
                   "reliability"] + [f"psi_{c}" for c in PSI_COLUMNS] + ["wall_clock"])
SUMMARY_METRICS = ("mean_reward", "ee", "sum_rate", "reliability")

# sweep variable -> (scenario field, value parser, keeps network dimensions)
SWEEP_VARIABLES = {
    "p_sat_max": ("p_sat_max_dbm", float, True),
    "p_ris_max": ("p_ris_max_dbm", float, True),
    "uav_altitude": ("uav_altitude", float, True),
    "csi_error_variance": ("csi_error_variance", float, True),
    "ris_mode": ("ris_mode", str, True),
    "num_users": ("num_users", int, False),
    "num_ris_elements": ("num_ris_elements", int, False),
    "num_sat_antennas": ("num_sat_antennas", int, False),
}


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=desk_scenario)
    agent: str = "td3"
    hyperparameters: dict = field(default_factory=dict)
    episodes: int = 300
    # overrides the scenario horizon when set
    horizon: Optional[int] = None
    seeds: tuple = (0, 1, 2, 3, 4)
    sweep: Optional[dict] = None
    output_dir: str = "runs/default"
    eval_episodes: int = 3
    dump_transitions: bool = False

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise SchemaError("invalid experiment config: " + "; ".join(errors))
        if self.horizon is not None and self.horizon != self.scenario.horizon:
            self.scenario = self.scenario.replace(horizon=int(self.horizon))
        self.seeds = tuple(int(s) for s in self.seeds)

    def validate(self) -> List[str]:
        errs = []
        if self.agent not in AGENTS:
            errs.append(f"agent: expected one of {AGENTS}, got {self.agent!r}")
        else:
            try:
                hyper_config(self.agent, self.hyperparameters)
            except SchemaError as exc:
                errs.append(f"hyperparameters: {exc}")
        if not self.seeds:
            errs.append("seeds: must be non-empty")
        if not isinstance(self.episodes, int) or self.episodes < 1:
            errs.append(f"episodes: must be a positive integer, got {self.episodes!r}")
        if self.horizon is not None and (not isinstance(self.horizon, int) or self.horizon < 1):
            errs.append(f"horizon: must be a positive integer, got {self.horizon!r}")
        if not isinstance(self.eval_episodes, int) or self.eval_episodes < 1:
            errs.append("eval_episodes: must be a positive integer")
        if self.sweep is not None:
            var = self.sweep.get("variable")
            if var not in SWEEP_VARIABLES:
                errs.append(f"sweep.variable: unknown variable {var!r}; expected one of {sorted(SWEEP_VARIABLES)}")
            if not self.sweep.get("values"):
                errs.append("sweep.values: must be a non-empty list")
            if self.sweep.get("mode", "train") not in ("train", "frozen"):
                errs.append("sweep.mode: must be 'train' or 'frozen'")
        return errs

    @property
    def hyper(self):
        return hyper_config(self.agent, self.hyperparameters)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "agent": self.agent,
            "hyperparameters": hyper_dict(self.hyper),
            "episodes": self.episodes,
            "horizon": self.scenario.horizon,
            "seeds": list(self.seeds),
            "sweep": self.sweep,
            "output_dir": self.output_dir,
            "eval_episodes": self.eval_episodes,
            "dump_transitions": self.dump_transitions,
        }

    def config_hash(self) -> str:
        """Hash of everything that determines results (the output directory excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("dump_transitions")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise SchemaError("experiment config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SchemaError(f"unknown experiment keys: {unknown}")
        data = dict(data)
        data["scenario"] = scenario_from_dict(data.get("scenario", {"preset": "desk"}))
        if "seeds" in data:
            data["seeds"] = tuple(data["seeds"])
        return cls(**data)

    def replace(self, **changes) -> "ExperimentConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return ExperimentConfig(**d)


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Scenario from a preset name (``table2`` or ``desk``) plus explicit overrides."""
    if not isinstance(data, dict):
        raise SchemaError("scenario must be a JSON object")
    data = dict(data)
    preset = data.pop("preset", "table2")
    if preset not in PRESETS:
        raise SchemaError(f"scenario.preset: expected one of {sorted(PRESETS)}, got {preset!r}")
    base = PRESETS[preset]().to_dict()
    known = set(base)
    unknown = sorted(set(data) - known)
    if unknown:
        raise SchemaError(f"unknown scenario keys: {unknown}")
    base.update(data)
    return ScenarioConfig.from_dict(base)


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def config_schema() -> dict:
    """JSON schema of the experiment config file."""
    type_map = {int: "integer", float: "number", str: "string", bool: "boolean", dict: "object",
                tuple: "array"}
    scen_props = {}
    for f in fields(ScenarioConfig):
        default = getattr(ScenarioConfig(), f.name)
        t = type_map.get(type(default))
        scen_props[f.name] = {"type": t} if t else {}
    scen_props["preset"] = {"enum": sorted(PRESETS)}
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "scenario": {"type": "object", "additionalProperties": False, "properties": scen_props},
            "agent": {"enum": list(AGENTS)},
            "hyperparameters": {"type": "object"},
            "episodes": {"type": "integer", "minimum": 1},
            "horizon": {"type": ["integer", "null"], "minimum": 1},
            "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
            "sweep": {"type": ["object", "null"], "properties": {
                "variable": {"enum": sorted(SWEEP_VARIABLES)},
                "values": {"type": "array", "minItems": 1},
                "mode": {"enum": ["train", "frozen"]}}},
            "output_dir": {"type": "string"},
            "eval_episodes": {"type": "integer", "minimum": 1},
            "dump_transitions": {"type": "boolean"},
        },
    }


# ---------------------------------------------------------------- metrics

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def step_record(tr) -> dict:
    """Per-step scalars from an environment transition."""
    report, psi = tr.info["report"], tr.info["psi"]
    rec = {"reward": tr.reward, "ee": report.ee, "ee_scaled": report.ee_scaled,
           "sum_rate": report.sum_rate, "satisfied": float(psi.satisfied())}
    for c in PSI_COLUMNS:
        v = getattr(psi, c)
        rec[f"psi_{c}"] = float(np.mean(v))
    return rec


def aggregate_steps(records: Sequence[dict]) -> dict:
    out = {"mean_reward": float(np.mean([r["reward"] for r in records])),
           "ee": float(np.mean([r["ee"] for r in records])),
           "ee_scaled": float(np.mean([r["ee_scaled"] for r in records])),
           "sum_rate": float(np.mean([r["sum_rate"] for r in records])),
           "reliability": float(np.mean([r["satisfied"] for r in records]))}
    for c in PSI_COLUMNS:
        out[f"psi_{c}"] = float(np.mean([r[f"psi_{c}"] for r in records]))
    return out


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c, "")) for c in columns])


def read_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _transition_json(seed: int, episode: int, t: int, tr) -> str:
    rec = {"seed": seed, "episode": episode, "t": t, "obs": tr.obs.tolist(),
           "raw_action": tr.raw_action.tolist(), "reward": tr.reward,
           "next_obs": tr.next_obs.tolist(), "done": tr.done}
    if "report" in tr.info:
        rec["report"] = tr.info["report"].as_dict()
        rec["psi"] = tr.info["psi"].as_dict()
        rec["power"] = tr.info["power"].as_dict()
    return json.dumps(rec)


# ---------------------------------------------------------------- training

@dataclass
class SeedResult:
    seed: int
    rows: List[dict]
    diagnostics: List[dict]
    networks: dict
    checkpoint: Optional[Path] = None


@dataclass
class TrainingResult:
    output_dir: Path
    metrics_path: Path
    config_hash: str
    seeds: Dict[int, SeedResult]


def train_seed(cfg: ExperimentConfig, seed: int, out_dir: Optional[Path] = None,
               config_hash: Optional[str] = None) -> SeedResult:
    """Train the configured agent for one master seed; optionally persist artifacts."""
    scenario = cfg.scenario
    probe = RsmaEnv(scenario)
    agent = make_agent(cfg.agent, probe.obs_dim, probe.act_dim, cfg.hyper, seed)
    config_hash = config_hash or cfg.config_hash()
    rows, diags = [], []
    lock = threading.Lock()
    t0 = time.perf_counter()
    dump = None
    if out_dir is not None and cfg.dump_transitions:
        (out_dir / f"seed{seed}").mkdir(parents=True, exist_ok=True)
        dump = open(out_dir / f"seed{seed}" / "transitions.jsonl", "w")

    def on_episode(worker: int, episode: int, transitions: list) -> None:
        row = {"config_hash": config_hash, "seed": seed, "episode": episode}
        row.update(aggregate_steps([step_record(tr) for tr in transitions]))
        row["wall_clock"] = round(time.perf_counter() - t0, 3)
        with lock:
            rows.append(row)
            if dump is not None:
                for t, tr in enumerate(transitions):
                    dump.write(_transition_json(seed, episode, t, tr) + "\n")

    def on_update(diag: dict) -> None:
        diags.append(dict(diag))

    try:
        train(cfg.agent, agent, lambda: RsmaEnv(scenario), cfg.episodes, seed, on_episode, on_update)
    finally:
        if dump is not None:
            dump.close()
    rows.sort(key=lambda r: r["episode"])
    result = SeedResult(seed, rows, diags, agent.networks())
    if out_dir is not None:
        sdir = out_dir / f"seed{seed}"
        sdir.mkdir(parents=True, exist_ok=True)
        meta = {"agent": cfg.agent, "seed": seed, "obs_dim": probe.obs_dim, "act_dim": probe.act_dim,
                "config_hash": config_hash, "scenario": scenario.to_dict(),
                "hyperparameters": hyper_dict(cfg.hyper)}
        result.checkpoint = save_checkpoint(sdir / "checkpoint.bin", agent.networks(), meta)
        cols = sorted({k for d in diags for k in d} - {"update"})
        _write_csv(sdir / "diagnostics.csv", ["config_hash", "update"] + cols,
                   [dict(d, config_hash=config_hash) for d in diags])
    return result


def run_training(cfg: ExperimentConfig, out_dir=None) -> TrainingResult:
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.config_hash()
    snapshot = dict(cfg.to_dict(), config_hash=h)
    (out / "config.json").write_text(json.dumps(snapshot, indent=2, sort_keys=True))
    seeds = {}
    all_rows = []
    for s in cfg.seeds:
        res = train_seed(cfg, s, out, h)
        seeds[s] = res
        all_rows.extend(res.rows)
    metrics = out / "metrics.csv"
    _write_csv(metrics, METRIC_COLUMNS, all_rows)
    return TrainingResult(out, metrics, h, seeds)


# ---------------------------------------------------------------- evaluation

def evaluate_policy(policy: Callable[[np.ndarray], np.ndarray], scenario: ScenarioConfig,
                    episodes: int, seed: int = 0) -> dict:
    """Greedy roll-outs without learning; aggregates over all evaluation steps."""
    env = RsmaEnv(scenario)
    records = []
    for k in range(episodes):
        obs = env.reset(episode_seed(seed, k, evaluation=True))
        done = False
        while not done:
            tr = env.step(policy(obs))
            records.append(step_record(tr))
            obs, done = tr.next_obs, tr.done
    out = aggregate_steps(records)
    out["steps"] = len(records)
    return out


def _check_dims(networks: dict, scenario: ScenarioConfig) -> None:
    env = RsmaEnv(scenario)
    net = networks.get("actor") or networks.get("policy")
    if net is None:
        raise CheckpointError("checkpoint holds neither an 'actor' nor a 'policy' network")
    widths = net.widths if hasattr(net, "widths") else net.net.widths
    if widths[0] != env.obs_dim or widths[-1] != env.act_dim:
        raise CheckpointError(f"checkpoint maps {widths[0]} -> {widths[-1]} but the scenario needs "
                              f"{env.obs_dim} -> {env.act_dim}")


def evaluate(checkpoint, scenario: ScenarioConfig, episodes: int, seed: int = 0) -> dict:
    """Evaluate a checkpoint path or an in-memory network dict."""
    networks = checkpoint if isinstance(checkpoint, dict) else load_checkpoint(checkpoint)[0]
    _check_dims(networks, scenario)
    return evaluate_policy(greedy_policy(networks), scenario, episodes, seed)


# ---------------------------------------------------------------- sweeps

def sweep_scenario(scenario: ScenarioConfig, variable: str, value) -> ScenarioConfig:
    if variable not in SWEEP_VARIABLES:
        raise SchemaError(f"unknown sweep variable {variable!r}; expected one of {sorted(SWEEP_VARIABLES)}")
    name, parse, _ = SWEEP_VARIABLES[variable]
    v = parse(value)
    changes = {name: v}
    if variable == "ris_mode" and v not in RIS_MODES:
        raise SchemaError(f"ris_mode must be one of {RIS_MODES}, got {v!r}")
    if variable == "num_users" and scenario.user_positions is not None \
            and len(scenario.user_positions) != v:
        changes["user_positions"] = None
    return scenario.replace(**changes)


def _sort_key(v):
    return (0, float(v), "") if isinstance(v, (int, float)) else (1, 0.0, str(v))


def aggregate_cells(cells: Sequence[dict], variable: str, config_hash: str) -> List[dict]:
    """Median and inter-quartile range per value; independent of cell order."""
    by_value: Dict = {}
    for c in cells:
        by_value.setdefault(c["value"], []).append(c)
    rows = []
    for value in sorted(by_value, key=_sort_key):
        group = sorted(by_value[value], key=lambda c: c["seed"])
        row = {"config_hash": config_hash, "variable": variable, "value": value, "n_seeds": len(group)}
        for m in SUMMARY_METRICS:
            xs = np.array([c[m] for c in group], dtype=float)
            q25, med, q75 = np.percentile(xs, [25, 50, 75])
            row[f"{m}_median"], row[f"{m}_q25"], row[f"{m}_q75"] = med, q25, q75
        rows.append(row)
    return rows


SWEEP_COLUMNS = (["config_hash", "variable", "value", "n_seeds"]
                 + [f"{m}_{s}" for m in SUMMARY_METRICS for s in ("median", "q25", "q75")])


def run_sweep(cfg: ExperimentConfig, variable: str, values: Sequence, mode: str = "train",
              out_dir=None, checkpoints: Optional[Dict[int, object]] = None) -> Path:
    """Train (``mode='train'``) or evaluate frozen per-seed policies (``'frozen'``)
    at every value; writes ``sweep.csv`` (aggregated) and ``sweep_cells.csv``."""
    if variable not in SWEEP_VARIABLES:
        raise SchemaError(f"unknown sweep variable {variable!r}; expected one of {sorted(SWEEP_VARIABLES)}")
    if mode not in ("train", "frozen"):
        raise SchemaError(f"sweep mode must be 'train' or 'frozen', got {mode!r}")
    if mode == "frozen" and not SWEEP_VARIABLES[variable][2]:
        raise SchemaError(f"{variable} changes network dimensions; frozen sweeps cannot evaluate it")
    values = list(values)
    scenarios = {v: sweep_scenario(cfg.scenario, variable, v) for v in values}
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.replace(sweep={"variable": variable, "values": values, "mode": mode}).config_hash()
    cells = []
    for s in cfg.seeds:
        frozen = None
        if mode == "frozen":
            if checkpoints and s in checkpoints:
                frozen = checkpoints[s]
            else:
                frozen = train_seed(cfg, s, out / "base", h).networks
        for v in values:
            if mode == "train":
                cell_cfg = cfg.replace(scenario=scenarios[v])
                nets = train_seed(cell_cfg, s, out / f"{variable}={v}", h).networks
            else:
                nets = frozen
            res = evaluate(nets, scenarios[v], cfg.eval_episodes, seed=s)
            cells.append(dict(res, seed=s, value=v))
    rows = aggregate_cells(cells, variable, h)
    path = out / "sweep.csv"
    _write_csv(path, SWEEP_COLUMNS, rows)
    _write_csv(out / "sweep_cells.csv", ["config_hash", "variable", "value", "seed"] + list(SUMMARY_METRICS),
               [dict(c, config_hash=h, variable=variable) for c in sorted(cells, key=lambda c: (_sort_key(c["value"]), c["seed"]))])
    return path
