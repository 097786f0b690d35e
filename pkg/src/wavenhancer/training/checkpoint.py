"""Binary checkpoint format.

Little-endian layout::

    b"WVEN"  u32 version=1  u32 step
    u32 config_len  config_len bytes of UTF-8 ``key = value`` text
    u32 tensor_count
    per tensor: u16 name_len, UTF-8 name, u8 ndim, ndim x u32 dims, float32 data

Model parameters are stored as ``param/<name>``; Adam moments as
``adam_m/<name>`` and ``adam_v/<name>``.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..nn import Params
from ..tensorad import AdamState, Tensor
from .config import ModelConfig

MAGIC = b"WVEN"
VERSION = 1


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ConfigMismatchError(CheckpointError):
    def __init__(self, fields: list[str]):
        self.fields = fields
        super().__init__(f"checkpoint config differs in: {', '.join(fields)}")


@dataclass
class Checkpoint:
    step: int
    config_text: str
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    version: int = VERSION

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig.from_text(self.config_text)

    @classmethod
    def from_training(cls, step: int, cfg: ModelConfig, params: Params, adam: AdamState | None = None) -> "Checkpoint":
        tensors = {f"param/{k}": p.data for k, p in params.items()}
        if adam is not None:
            tensors.update({f"adam_m/{k}": adam.m[k] for k in params if k in adam.m})
            tensors.update({f"adam_v/{k}": adam.v[k] for k in params if k in adam.v})
        return cls(step, cfg.to_text(), tensors)

    def params(self, expected: ModelConfig | None = None, dtype=np.float32) -> Params:
        if expected is not None:
            diff = self.model_config.diff(expected)
            if diff:
                raise ConfigMismatchError(diff)
        return {k[len("param/"):]: Tensor(v.astype(dtype), requires_grad=True, dtype=dtype)
                for k, v in self.tensors.items() if k.startswith("param/")}

    def adam_state(self) -> AdamState:
        m = {k[len("adam_m/"):]: v.copy() for k, v in self.tensors.items() if k.startswith("adam_m/")}
        v = {k[len("adam_v/"):]: a.copy() for k, a in self.tensors.items() if k.startswith("adam_v/")}
        return AdamState(m, v, self.step)


def encode(ckpt: Checkpoint) -> bytes:
    config = ckpt.config_text.encode("utf-8")
    parts = [MAGIC, struct.pack("<III", ckpt.version, ckpt.step, len(config)), config,
             struct.pack("<I", len(ckpt.tensors))]
    for name, arr in ckpt.tensors.items():
        raw_name = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<H", len(raw_name)) + raw_name)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedCheckpointError(f"checkpoint truncated at byte {len(self.buf)} (needed {self.pos + n})")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode(buf: bytes) -> Checkpoint:
    r = _Reader(buf)
    if len(buf) < 4:
        raise TruncatedCheckpointError("checkpoint shorter than its magic number")
    magic = r.take(4)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise UnsupportedVersionError(f"checkpoint version {version} is not supported (expected {VERSION})")
    step, config_len = r.unpack("<II")
    config = r.take(config_len).decode("utf-8")
    (count,) = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("<B")
        dims = r.unpack(f"<{ndim}I") if ndim else ()
        n = int(np.prod(dims)) if ndim else 1
        tensors[name] = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(dims).astype(np.float32)
    if r.pos != len(buf):
        raise CheckpointError(f"{len(buf) - r.pos} trailing bytes after the last tensor")
    return Checkpoint(step, config, tensors, version)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(encode(ckpt))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> Checkpoint:
    return decode(Path(path).read_bytes())
