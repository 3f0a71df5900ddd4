"""LAVC checkpoint archives: every parameter, optimizer state and the
fully-resolved config in one bitwise-reproducible file.

Layout:
    magic   b"LAVC"
    count   u32 little-endian number of entries
    entry   u16 LE name length, UTF-8 name, LTF blob

Entry names: `param.<hierarchical name>`, `adam.m.<name>`, `adam.v.<name>`,
`state.counters` (float64 [step, epochs_done, adam_t]) and `config` (the
JSON document as a uint8 byte tensor). Names must be unique; readers reject
bad magic, duplicates and truncation.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ltf
from .encoders import EncoderStack
from .errors import FormatError
from .optim import Adam

MAGIC = b"LAVC"


def _write_archive(path, entries: list[tuple[str, np.ndarray]]) -> None:
    names = [name for name, _ in entries]
    if len(set(names)) != len(names):
        raise FormatError("duplicate entry names in checkpoint")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(entries)))
        for name, arr in entries:
            raw = name.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            ltf.write_stream(f, arr)


def _read_archive(path) -> dict[str, np.ndarray]:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        header = f.read(4)
        if len(header) != 4:
            raise FormatError(f"{path}: truncated header")
        (count,) = struct.unpack("<I", header)
        entries: dict[str, np.ndarray] = {}
        for _ in range(count):
            raw_len = f.read(2)
            if len(raw_len) != 2:
                raise FormatError(f"{path}: truncated entry header")
            (name_len,) = struct.unpack("<H", raw_len)
            raw = f.read(name_len)
            if len(raw) != name_len:
                raise FormatError(f"{path}: truncated entry name")
            name = raw.decode("utf-8")
            if name in entries:
                raise FormatError(f"{path}: duplicate entry {name!r}")
            entries[name] = ltf.read_stream(f, f"{path}:{name}")
        if f.read(1):
            raise FormatError(f"{path}: trailing bytes after last entry")
    return entries


@dataclass
class Checkpoint:
    stack: EncoderStack
    adam: Adam
    config: dict
    epochs_done: int
    step: int


def save_checkpoint(path, stack: EncoderStack, adam: Adam, config: dict,
                    epochs_done: int, step: int) -> None:
    blob = json.dumps({"config": config, "stack_dims": stack.dims},
                      sort_keys=True).encode("utf-8")
    entries: list[tuple[str, np.ndarray]] = []
    for name, p in stack.parameters():
        entries.append((f"param.{name}", p.data))
    for name, _ in stack.parameters():
        entries.append((f"adam.m.{name}", adam.m[name]))
    for name, _ in stack.parameters():
        entries.append((f"adam.v.{name}", adam.v[name]))
    entries.append(("state.counters", np.array([step, epochs_done, adam.t], dtype=np.float64)))
    entries.append(("config", np.frombuffer(blob, dtype=np.uint8)))
    _write_archive(path, entries)


def load_checkpoint(path) -> Checkpoint:
    entries = _read_archive(path)
    for required in ("config", "state.counters"):
        if required not in entries:
            raise FormatError(f"{path}: missing entry {required!r}")
    blob = json.loads(entries["config"].tobytes().decode("utf-8"))
    config = blob["config"]
    stack = EncoderStack(seed=0, **blob["stack_dims"])
    optim_cfg = config.get("optim", {})
    adam = Adam(stack.parameters(),
                beta1=optim_cfg.get("beta1", 0.9),
                beta2=optim_cfg.get("beta2", 0.999),
                eps=optim_cfg.get("eps", 1e-8),
                grad_clip=optim_cfg.get("grad_clip", 0.0))
    for name, p in stack.parameters():
        for prefix, target in (("param.", None), ("adam.m.", adam.m), ("adam.v.", adam.v)):
            key = prefix + name
            if key not in entries:
                raise FormatError(f"{path}: missing entry {key!r}")
            arr = entries[key]
            if arr.shape != p.data.shape:
                raise FormatError(f"{path}: shape mismatch for {key!r} "
                                  f"({arr.shape} vs {p.data.shape})")
            if target is None:
                p.data[...] = arr
            else:
                target[name][...] = arr
    step, epochs_done, adam_t = entries["state.counters"]
    adam.t = int(adam_t)
    return Checkpoint(stack=stack, adam=adam, config=config,
                      epochs_done=int(epochs_done), step=int(step))
