from __future__ import annotations

import json

from leorsma.cli import main


def write(tmp_path, data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return str(p)


def test_bad_config_exits_nonzero(tmp_path, capsys):
    assert main(["train", "--config", write(tmp_path, {"agent": "td3", "nope": 1})]) != 0
    assert "nope" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "missing.json")]) != 0


def test_train_and_eval_exit_zero(tmp_path, capsys):
    cfg = write(tmp_path, {"agent": "trpo", "episodes": 1, "horizon": 3, "seeds": [0],
                           "scenario": {"preset": "desk"}, "output_dir": str(tmp_path / "run")})
    assert main(["train", "--config", cfg]) == 0
    ck = tmp_path / "run" / "seed0" / "checkpoint.bin"
    assert ck.exists()
    assert main(["eval", "--checkpoint", str(ck), "--config", cfg, "--episodes", "1"]) == 0
    out = capsys.readouterr().out
    assert '"ee"' in out


def test_eval_dimension_mismatch_exits_nonzero(tmp_path):
    cfg = write(tmp_path, {"agent": "trpo", "episodes": 1, "horizon": 3, "seeds": [0],
                           "scenario": {"preset": "desk"}, "output_dir": str(tmp_path / "run")})
    assert main(["train", "--config", cfg]) == 0
    other = write(tmp_path, {"agent": "trpo", "scenario": {"preset": "desk", "num_users": 3,
                                                          "user_positions": None}})
    assert main(["eval", "--checkpoint", str(tmp_path / "run" / "seed0" / "checkpoint.bin"),
                 "--config", other]) != 0


def test_schema_and_sweep(tmp_path, capsys):
    assert main(["schema"]) == 0
    assert "properties" in capsys.readouterr().out
    cfg = write(tmp_path, {"agent": "td3", "episodes": 1, "horizon": 3, "seeds": [0], "eval_episodes": 1,
                           "scenario": {"preset": "desk"}})
    assert main(["sweep", "--config", cfg, "--var", "p_sat_max", "--values", "40,46",
                 "--mode", "frozen", "--out", str(tmp_path / "sw")]) == 0
    assert (tmp_path / "sw" / "sweep.csv").exists()
    assert main(["sweep", "--config", cfg, "--var", "bogus", "--values", "1"]) != 0
