"""Trainer contract, shared state container and the checkpoint blob format.

Checkpoint layout (all integers little-endian)::

    b"MFT1" | u16 version | u32 header length | header (UTF-8 JSON)
            | array payload bytes | u32 CRC-32 of everything before it

The header lists every array as ``[name, dtype, shape, nbytes]`` in payload order.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from ..search_space import Config

MAGIC = b"MFT1"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")
_CRC = struct.Struct("<I")


class RestoreError(ValueError):
    """A checkpoint blob is truncated, corrupt, or belongs to another trainer."""


class ConfigMismatchError(ValueError):
    """A configuration lacks a dimension the trainer needs."""


@dataclass
class TrainerState:
    config: Config
    seed: int
    epochs_trained: int
    steps_per_epoch: int
    last_lr: float = 0.0
    scalars: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)

    def copy(self):
        return replace(
            self,
            scalars=dict(self.scalars),
            arrays={k: v.copy() for k, v in self.arrays.items()},
        )


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    val_metric: float
    final_step_lr: float


def encode_state(kind, state):
    arrays = []
    payload = bytearray()
    for name in sorted(state.arrays):
        arr = np.ascontiguousarray(state.arrays[name])
        raw = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        arrays.append([name, arr.dtype.str.lstrip("<>|="), list(arr.shape), len(raw)])
        payload += raw
    header = {
        "trainer": kind,
        "config": state.config.to_json(),
        "tag": state.config.tag,
        "seed": state.seed,
        "epochs_trained": state.epochs_trained,
        "steps_per_epoch": state.steps_per_epoch,
        "last_lr": state.last_lr.hex(),
        "scalars": {k: _encode_scalar(v) for k, v in sorted(state.scalars.items())},
        "arrays": arrays,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = _PREFIX.pack(MAGIC, VERSION, len(head)) + head + bytes(payload)
    return body + _CRC.pack(zlib.crc32(body))


def decode_state(kind, blob):
    blob = bytes(blob)
    if len(blob) < _PREFIX.size + _CRC.size:
        raise RestoreError(f"checkpoint too short ({len(blob)} bytes)")
    magic, version, head_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise RestoreError(f"bad magic {magic!r}")
    if version != VERSION:
        raise RestoreError(f"unsupported checkpoint version {version}")
    body, (crc,) = blob[:-_CRC.size], _CRC.unpack(blob[-_CRC.size:])
    if zlib.crc32(body) != crc:
        raise RestoreError("checkpoint CRC mismatch")
    start = _PREFIX.size
    if start + head_len > len(body):
        raise RestoreError("checkpoint header truncated")
    try:
        header = json.loads(body[start:start + head_len])
    except ValueError as exc:
        raise RestoreError(f"unreadable checkpoint header: {exc}") from None
    if header.get("trainer") != kind:
        raise RestoreError(f"checkpoint written by {header.get('trainer')!r}, expected {kind!r}")
    offset = start + head_len
    arrays = {}
    for name, dtype, shape, nbytes in header["arrays"]:
        chunk = body[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise RestoreError(f"array {name!r} truncated")
        arrays[name] = np.frombuffer(chunk, dtype=np.dtype(dtype).newbyteorder("<")).reshape(shape).astype(dtype)
        offset += nbytes
    if offset != len(body):
        raise RestoreError("trailing bytes after checkpoint payload")
    return TrainerState(
        config=Config.from_json(header["config"], header["tag"]),
        seed=header["seed"],
        epochs_trained=header["epochs_trained"],
        steps_per_epoch=header["steps_per_epoch"],
        last_lr=float.fromhex(header["last_lr"]),
        scalars={k: _decode_scalar(v) for k, v in header["scalars"].items()},
        arrays=arrays,
    )


def _encode_scalar(value):
    if isinstance(value, bool):
        return {"b": value}
    if isinstance(value, (int, np.integer)):
        return {"i": int(value)}
    return {"f": float(value).hex()}


def _decode_scalar(entry):
    if "b" in entry:
        return entry["b"]
    if "i" in entry:
        return entry["i"]
    return float.fromhex(entry["f"])


class Trainer:
    """Interface the schedulers drive. Subclasses implement the four hooks below.

    States are never mutated in place: :meth:`train_epoch` returns a new one.
    """

    kind = "trainer"
    required = ()

    def steps_per_epoch(self, config):
        raise NotImplementedError

    def init(self, config, seed):
        missing = [name for name in self.required if name not in config]
        if missing:
            raise ConfigMismatchError(f"{self.kind} trainer needs {missing}")
        state = TrainerState(config, int(seed), 0, self.steps_per_epoch(config))
        self._init_state(state)
        return state

    def _init_state(self, state):
        pass

    def train_epoch(self, state, lr_for_step):
        state = state.copy()
        lrs = []
        for i in range(state.steps_per_epoch):
            lr = float(lr_for_step(i))
            if not math.isfinite(lr) or lr < 0:
                raise ValueError(f"learning rate must be finite and >= 0, got {lr}")
            lrs.append(lr)
        self._train_steps(state, lrs)
        state.epochs_trained += 1
        state.last_lr = lrs[-1]
        return state, EpochReport(state.epochs_trained, self.evaluate(state), state.last_lr)

    def _train_steps(self, state, lrs):
        raise NotImplementedError

    def evaluate(self, state):
        raise NotImplementedError

    def checkpoint(self, state):
        return encode_state(self.kind, state)

    def restore(self, blob):
        return decode_state(self.kind, blob)

    def to_spec(self):
        raise NotImplementedError
