"""Binary parameter checkpoints with a JSON metadata sidecar.

Layout (little-endian)::

    8 bytes   magic b"LRSMCKP1"
    uint32    number of networks
    per network:
      uint32  name length, then UTF-8 name
      uint8   kind (0 = Mlp, 1 = tanh-squashed Mlp, 2 = Gaussian policy)
      uint32  number of layer widths L, then L x uint32 widths
      uint64  number of float64 values P, then P x float64
              (per layer: weights row-major as (out, in), then biases;
               Gaussian policies append the per-dimension log-std)

The sidecar ``<file>.json`` records the agent, dimensions and config hash.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from .errors import CheckpointError
from .nn import GaussianPolicy, Mlp

MAGIC = b"LRSMCKP1"
KIND_MLP, KIND_SQUASHED, KIND_GAUSSIAN = 0, 1, 2

Network = Union[Mlp, GaussianPolicy]


def _kind(net: Network) -> int:
    if isinstance(net, GaussianPolicy):
        return KIND_GAUSSIAN
    return KIND_SQUASHED if net.squash else KIND_MLP


def _widths(net: Network):
    return net.net.widths if isinstance(net, GaussianPolicy) else net.widths


def save_checkpoint(path, networks: Dict[str, Network], metadata: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = bytearray(MAGIC)
    out += struct.pack("<I", len(networks))
    for name in sorted(networks):
        net = networks[name]
        raw = name.encode("utf-8")
        widths = _widths(net)
        flat = np.ascontiguousarray(net.get_flat(), dtype="<f8")
        out += struct.pack("<I", len(raw)) + raw
        out += struct.pack("<B", _kind(net))
        out += struct.pack("<I", len(widths)) + struct.pack(f"<{len(widths)}I", *widths)
        out += struct.pack("<Q", flat.size) + flat.tobytes()
    path.write_bytes(bytes(out))
    meta = dict(metadata)
    meta["networks"] = {n: {"kind": _kind(networks[n]), "widths": list(_widths(networks[n]))}
                        for n in sorted(networks)}
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def load_checkpoint(path) -> Tuple[Dict[str, Network], dict]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic bytes)")
    pos = 8
    try:
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        nets: Dict[str, Network] = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (kind,) = struct.unpack_from("<B", data, pos)
            pos += 1
            (nw,) = struct.unpack_from("<I", data, pos)
            pos += 4
            widths = list(struct.unpack_from(f"<{nw}I", data, pos))
            pos += 4 * nw
            (n,) = struct.unpack_from("<Q", data, pos)
            pos += 8
            if pos + 8 * n > len(data):
                raise CheckpointError(f"{path} is truncated")
            flat = np.frombuffer(data, dtype="<f8", count=n, offset=pos).astype(float)
            pos += 8 * n
            if kind == KIND_GAUSSIAN:
                net: Network = GaussianPolicy(widths)
            elif kind in (KIND_MLP, KIND_SQUASHED):
                net = Mlp(widths, squash=kind == KIND_SQUASHED)
            else:
                raise CheckpointError(f"unknown network kind {kind}")
            if flat.size != net.n_params:
                raise CheckpointError(f"network {name!r}: {flat.size} values for widths {widths}")
            net.set_flat(flat)
            nets[name] = net
    except struct.error as exc:
        raise CheckpointError(f"{path} is truncated or corrupt") from exc
    if pos != len(data):
        raise CheckpointError(f"{path} has {len(data) - pos} trailing bytes")
    meta_path = Path(str(path) + ".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return nets, meta
