"""Parameter checkpoints: JSON manifest line, then little-endian float32 tensors in declaration order."""
from __future__ import annotations

import json

import numpy as np

from .model import NetConfig, NetParams

MAGIC = "EEGNET1"


def save_checkpoint(p: NetParams, path) -> None:
    manifest = {
        "magic": MAGIC,
        "config": p.config.to_dict(),
        "seed": p.config.seed,
        "tensors": [[name, list(arr.shape)] for name, arr in p.tensors.items()],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest, separators=(",", ":")).encode("utf-8") + b"\n")
        for arr in p.tensors.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path) -> NetParams:
    with open(path, "rb") as fh:
        header = fh.readline()
        payload = fh.read()
    try:
        meta = json.loads(header.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError("malformed checkpoint manifest: %s" % exc) from None
    if not isinstance(meta, dict) or meta.get("magic") != MAGIC:
        raise ValueError("not a network checkpoint")
    cfg = NetConfig.from_dict(meta["config"])
    dtype = np.dtype(cfg.dtype)
    tensors, off = {}, 0
    for name, shape in meta["tensors"]:
        n = int(np.prod(shape, dtype=np.int64))
        if off + 4 * n > len(payload):
            raise ValueError("truncated checkpoint payload")
        tensors[name] = np.frombuffer(payload, dtype="<f4", count=n, offset=off).reshape(shape).astype(dtype)
        off += 4 * n
    if off != len(payload):
        raise ValueError("trailing bytes in checkpoint payload")
    return NetParams(cfg, tensors)
