"""Command-line entry point: ``train``, ``sweep``, ``eval``, ``schema``, ``selftest``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import (CheckpointError, DomainError, LifecycleError, PreconditionError, SchemaError,
                     StructuralError)

HANDLED = (SchemaError, LifecycleError, CheckpointError, DomainError, StructuralError, PreconditionError)


def _parse_values(text: str) -> list:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(int(tok))
        except ValueError:
            try:
                out.append(float(tok))
            except ValueError:
                out.append(tok)
    return out


def _cmd_train(args) -> int:
    from .harness import load_config, run_training
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seeds"] = (args.seed,)
    if args.out:
        changes["output_dir"] = args.out
    if args.dump_transitions:
        changes["dump_transitions"] = True
    if changes:
        cfg = cfg.replace(**changes)
    res = run_training(cfg)
    print(f"metrics: {res.metrics_path} (config hash {res.config_hash})")
    for s, r in res.seeds.items():
        print(f"seed {s}: checkpoint {r.checkpoint}")
    return 0


def _cmd_sweep(args) -> int:
    from .harness import load_config, run_sweep
    cfg = load_config(args.config)
    if args.seeds:
        cfg = cfg.replace(seeds=tuple(int(s) for s in args.seeds.split(",")))
    var = args.var or (cfg.sweep or {}).get("variable")
    values = _parse_values(args.values) if args.values else (cfg.sweep or {}).get("values")
    mode = args.mode or (cfg.sweep or {}).get("mode", "train")
    if not var or not values:
        raise SchemaError("sweep needs --var and --values (or a 'sweep' block in the config)")
    path = run_sweep(cfg, var, values, mode=mode, out_dir=args.out)
    print(f"sweep: {path}")
    return 0


def _cmd_eval(args) -> int:
    from .harness import evaluate, load_config
    cfg = load_config(args.config)
    res = evaluate(args.checkpoint, cfg.scenario, args.episodes or cfg.eval_episodes, seed=args.seed)
    print(json.dumps(res, indent=2, sort_keys=True))
    return 0


def _cmd_schema(args) -> int:
    from .harness import config_schema
    print(json.dumps(config_schema(), indent=2))
    return 0


def _cmd_selftest(args) -> int:
    tests = Path(__file__).resolve().parents[2] / "tests"
    if tests.is_dir():
        import pytest
        return int(pytest.main([str(tests), "-q", "--ignore", str(tests / "test_acceptance.py")]))
    from .selftest import run
    return run()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leorsma", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train", help="train an agent for every configured seed")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--out")
    t.add_argument("--dump-transitions", action="store_true")
    t.set_defaults(func=_cmd_train)
    s = sub.add_parser("sweep", help="sweep one scenario variable")
    s.add_argument("--config", required=True)
    s.add_argument("--var")
    s.add_argument("--values", help="comma-separated values")
    s.add_argument("--mode", choices=("train", "frozen"))
    s.add_argument("--seeds", help="comma-separated master seeds")
    s.add_argument("--out")
    s.set_defaults(func=_cmd_sweep)
    e = sub.add_parser("eval", help="evaluate a checkpoint greedily")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--config", required=True)
    e.add_argument("--episodes", type=int)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=_cmd_eval)
    sc = sub.add_parser("schema", help="print the config JSON schema")
    sc.set_defaults(func=_cmd_schema)
    st = sub.add_parser("selftest", help="run the oracle and property suite")
    st.set_defaults(func=_cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HANDLED as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
