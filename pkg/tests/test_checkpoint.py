from __future__ import annotations

import numpy as np
import pytest

from leorsma.checkpoint import load_checkpoint, save_checkpoint
from leorsma.config import desk_scenario
from leorsma.errors import CheckpointError
from leorsma.harness import evaluate
from leorsma.nn import GaussianPolicy, Mlp


def nets():
    rng = np.random.default_rng(0)
    return {"actor": Mlp([3, 5, 2], rng, squash=True), "critic": Mlp([5, 4, 1], rng),
            "policy": GaussianPolicy([3, 4, 2], rng)}


def test_round_trip_bit_identical(tmp_path):
    src = nets()
    path = save_checkpoint(tmp_path / "c.bin", src, {"agent": "td3", "seed": 7})
    loaded, meta = load_checkpoint(path)
    assert meta["agent"] == "td3" and meta["seed"] == 7
    assert set(loaded) == set(src)
    for name, net in src.items():
        assert type(loaded[name]) is type(net)
        assert np.array_equal(loaded[name].get_flat(), net.get_flat())
    x = np.random.default_rng(1).standard_normal((4, 3))
    assert np.array_equal(loaded["actor"].forward(x), src["actor"].forward(x))


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"NOTACKPT" + bytes(20))
    with pytest.raises(CheckpointError):
        load_checkpoint(p)


def test_truncated_and_trailing(tmp_path):
    path = save_checkpoint(tmp_path / "c.bin", nets(), {})
    data = path.read_bytes()
    (tmp_path / "t.bin").write_bytes(data[:-5])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "t.bin")
    (tmp_path / "x.bin").write_bytes(data + b"\0")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "x.bin")


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "nope.bin")


def test_dimension_mismatch_rejected(tmp_path):
    path = save_checkpoint(tmp_path / "c.bin", {"actor": Mlp([3, 4, 2], squash=True)}, {})
    with pytest.raises(CheckpointError):
        evaluate(path, desk_scenario(), episodes=1)
