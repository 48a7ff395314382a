"""Versioned binary checkpoints.

Layout: magic ``A2MF``, format version (u32 LE), a JSON metadata blob
(u64 LE length prefix) carrying the config snapshot, attribute schema,
modality names, schedule position and random-stream states, then a
self-describing parameter table. Each table entry is
``name (u16 length + UTF-8), ndim (u8), dims (u32 each), raw little-endian
float32 data``. Saves are atomic (write to a temp file, then rename) and
byte-stable: save -> load -> save reproduces the file exactly.
"""

from __future__ import annotations

import base64
import json
import os
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from .config import TrainConfig
from .errors import CheckpointError

MAGIC = b"A2MF"
VERSION = 1


def _entries_from_module(prefix: str, module: torch.nn.Module):
    for name, tensor in module.state_dict().items():
        yield f"{prefix}/{name}", tensor.detach().cpu()


def _entries_from_optimizer(prefix: str, module: torch.nn.Module, opt: torch.optim.Optimizer):
    for name, param in module.named_parameters():
        state = opt.state.get(param)
        if not state:
            continue
        for key in ("step", "exp_avg", "exp_avg_sq"):
            yield f"{prefix}/{name}/{key}", torch.as_tensor(state[key]).detach().cpu()


def _write_entry(fh, name: str, tensor: torch.Tensor):
    arr = tensor.numpy().astype("<f4", copy=False)
    nb = name.encode("utf-8")
    fh.write(struct.pack("<H", len(nb)))
    fh.write(nb)
    fh.write(struct.pack("<B", arr.ndim))
    for dim in arr.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(arr.tobytes())


def _read_exact(fh, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise CheckpointError("truncated checkpoint file")
    return buf


def _read_entry(fh):
    (name_len,) = struct.unpack("<H", _read_exact(fh, 2))
    name = _read_exact(fh, name_len).decode("utf-8")
    (ndim,) = struct.unpack("<B", _read_exact(fh, 1))
    shape = tuple(struct.unpack("<I", _read_exact(fh, 4))[0] for _ in range(ndim))
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    data = np.frombuffer(_read_exact(fh, count * 4), dtype="<f4").reshape(shape)
    return name, data


def write_checkpoint_file(path, meta: dict, entries) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(meta_bytes)))
        fh.write(meta_bytes)
        entries = list(entries)
        fh.write(struct.pack("<I", len(entries)))
        for name, tensor in entries:
            _write_entry(fh, name, tensor)
    os.replace(tmp, path)


def read_checkpoint_file(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != VERSION:
            raise CheckpointError(
                f"{path}: unsupported format version {version} (expected {VERSION})"
            )
        (meta_len,) = struct.unpack("<Q", _read_exact(fh, 8))
        try:
            meta = json.loads(_read_exact(fh, meta_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{path}: corrupt metadata ({e})") from None
        (n_entries,) = struct.unpack("<I", _read_exact(fh, 4))
        table = {}
        for _ in range(n_entries):
            name, data = _read_entry(fh)
            table[name] = data
    return meta, table


def build_meta(
    cfg: TrainConfig,
    schema_names,
    modality_names,
    stage_index: int,
    step_in_stage: int,
    rng: np.random.Generator,
    init_rng: torch.Generator,
) -> dict:
    snapshot = asdict(cfg)
    # filesystem locations are run environment, not model state; dropping them
    # keeps checkpoints byte-identical across output directories
    snapshot["out_dir"] = ""
    snapshot["data_manifest"] = ""
    return {
        "config": snapshot,
        "schema": list(schema_names),
        "modalities": list(modality_names),
        "stage_index": int(stage_index),
        "step_in_stage": int(step_in_stage),
        "rng_state": rng.bit_generator.state,
        "torch_init_rng": base64.b64encode(init_rng.get_state().numpy().tobytes()).decode(),
    }


def collect_entries(gen, disc, opt_g, opt_d):
    yield from _entries_from_module("gen", gen)
    yield from _entries_from_module("disc", disc)
    yield from _entries_from_optimizer("optg", gen, opt_g)
    yield from _entries_from_optimizer("optd", disc, opt_d)


def restore_module(prefix: str, module: torch.nn.Module, table: dict[str, np.ndarray]):
    state = module.state_dict()
    for name, tensor in state.items():
        key = f"{prefix}/{name}"
        if key not in table:
            raise CheckpointError(f"checkpoint missing tensor {key}")
        src = table[key]
        if tuple(src.shape) != tuple(tensor.shape):
            raise CheckpointError(
                f"shape mismatch for {key}: file {src.shape} vs model {tuple(tensor.shape)}"
            )
        with torch.no_grad():
            tensor.copy_(torch.from_numpy(src.copy()).to(tensor.dtype))


def restore_optimizer(prefix: str, module: torch.nn.Module, opt: torch.optim.Optimizer, table):
    for name, param in module.named_parameters():
        step_key = f"{prefix}/{name}/step"
        if step_key not in table:
            continue
        opt.state[param] = {
            "step": torch.tensor(float(table[step_key])),
            "exp_avg": torch.from_numpy(table[f"{prefix}/{name}/exp_avg"].copy()),
            "exp_avg_sq": torch.from_numpy(table[f"{prefix}/{name}/exp_avg_sq"].copy()),
        }


def restore_rng(meta: dict) -> np.random.Generator:
    rng = np.random.default_rng(0)
    rng.bit_generator.state = meta["rng_state"]
    return rng


def restore_init_rng(meta: dict) -> torch.Generator:
    g = torch.Generator()
    raw = base64.b64decode(meta["torch_init_rng"])
    g.set_state(torch.from_numpy(np.frombuffer(raw, dtype=np.uint8).copy()))
    return g
