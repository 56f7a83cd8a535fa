"""Binary checkpoint format.

Layout::

    WPAD1\\n
    <key> = <value>\\n            model.*, train.* and meta.* settings
    tensor <name> <d0> <d1> ...\\n one line per array, in payload order
    end\\n
    <little-endian float64 payload>

Arrays are always stored as float64; ``meta.dtype`` records the precision
the model ran in so loading restores it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigFileError, format_config, parse_kv, split_settings
from .model import Model, ModelConfig, build
from .train import TrainConfig

MAGIC = b"WPAD"
VERSION = 1
_END = b"end\n"


class CheckpointError(Exception):
    pass


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class HeaderError(CheckpointError):
    pass


class TruncatedPayloadError(CheckpointError):
    pass


class ByteCountMismatchError(CheckpointError):
    """Payload is longer than the tensor descriptors account for."""


class ShapeMismatchError(CheckpointError):
    """A stored tensor does not fit the architecture its config describes."""


@dataclass
class Checkpoint:
    model_config: ModelConfig
    train_config: TrainConfig
    arrays: list[tuple[str, np.ndarray]]
    best_val_accuracy: float = float("nan")
    class_names: list[str] = field(default_factory=lambda: ["real", "fake"])
    dtype: str = "float64"

    @classmethod
    def from_model(cls, model: Model, train_config: TrainConfig | None = None,
                   best_val_accuracy: float = float("nan"),
                   class_names=None) -> "Checkpoint":
        return cls(model.config, train_config or TrainConfig(),
                   [(name, arr.copy()) for name, arr in model.named_arrays()],
                   best_val_accuracy,
                   list(class_names) if class_names is not None else ["real", "fake"],
                   str(model.dtype))

    def to_model(self) -> Model:
        model = build(self.model_config, seed=0, dtype=np.float64)
        expected = model.named_arrays()
        if [n for n, _ in expected] != [n for n, _ in self.arrays]:
            raise ShapeMismatchError("stored tensor names do not match the configured architecture")
        for (name, target), (_, stored) in zip(expected, self.arrays):
            if target.shape != stored.shape:
                raise ShapeMismatchError(f"{name}: stored {stored.shape}, architecture needs {target.shape}")
            target[...] = stored
        return model.astype(np.dtype(self.dtype))


def _header_lines(ckpt: Checkpoint) -> list[str]:
    lines = [f"version = {VERSION}"]
    lines += format_config(ckpt.model_config, ckpt.train_config, prefix=True)
    lines.append(f"meta.best_val_accuracy = {ckpt.best_val_accuracy!r}")
    lines.append(f"meta.class_names = {','.join(ckpt.class_names)}")
    lines.append(f"meta.dtype = {ckpt.dtype}")
    for name, arr in ckpt.arrays:
        lines.append(" ".join(["tensor", name, *map(str, arr.shape)]))
    return lines


def dumps(ckpt: Checkpoint) -> bytes:
    head = (MAGIC + f"{VERSION}\n".encode("ascii")
            + "".join(line + "\n" for line in _header_lines(ckpt)).encode("ascii") + _END)
    payload = b"".join(np.ascontiguousarray(arr, dtype="<f8").tobytes() for _, arr in ckpt.arrays)
    return head + payload


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    Path(path).write_bytes(dumps(ckpt))


def loads(buf: bytes) -> Checkpoint:
    first, sep, rest = buf.partition(b"\n")
    if not first.startswith(MAGIC) or not sep:
        raise BadMagicError("not a checkpoint (bad magic)")
    version = first[len(MAGIC):]
    if version != str(VERSION).encode():
        raise UnsupportedVersionError(f"unsupported checkpoint version {version!r}")
    end = rest.find(b"\n" + _END)
    if end < 0:
        raise HeaderError("header is not terminated by an 'end' line")
    header = rest[:end].decode("ascii", errors="replace")
    payload = rest[end + 1 + len(_END):]

    settings: list[str] = []
    tensors: list[tuple[str, tuple[int, ...]]] = []
    for line in header.splitlines():
        if line.startswith("tensor "):
            parts = line.split()
            try:
                tensors.append((parts[1], tuple(int(d) for d in parts[2:])))
            except (IndexError, ValueError):
                raise HeaderError(f"bad tensor descriptor {line!r}") from None
        else:
            settings.append(line)
    try:
        kv = parse_kv("\n".join(settings), "checkpoint")
    except ConfigFileError as exc:
        raise HeaderError(str(exc)) from None
    if kv.pop("version", None) != str(VERSION):
        raise UnsupportedVersionError("header version does not match magic")

    try:
        meta = {k[5:]: kv.pop(k) for k in list(kv) if k.startswith("meta.")}
        model_raw = {k[6:]: kv.pop(k) for k in list(kv) if k.startswith("model.")}
        train_raw = {k[6:]: kv.pop(k) for k in list(kv) if k.startswith("train.")}
        if kv:
            raise HeaderError(f"unexpected header keys {sorted(kv)}")
        model_kw, _ = split_settings(model_raw, "checkpoint")
        _, train_kw = split_settings(train_raw, "checkpoint")
        if set(model_raw) - set(model_kw) or set(train_raw) - set(train_kw):
            raise HeaderError("model/train settings stored under the wrong prefix")
        model_config = ModelConfig(**model_kw).validate()
        train_config = TrainConfig(**train_kw)
        best_val = float(meta["best_val_accuracy"])
        class_names = meta["class_names"].split(",")
        dtype = meta["dtype"]
    except (ConfigFileError, KeyError, TypeError, ValueError) as exc:
        raise HeaderError(f"bad checkpoint header: {exc}") from None

    need = sum(8 * int(np.prod(shape)) for _, shape in tensors)
    if len(payload) < need:
        raise TruncatedPayloadError(f"payload has {len(payload)} bytes, descriptors need {need}")
    if len(payload) > need:
        raise ByteCountMismatchError(f"payload has {len(payload)} bytes, descriptors account for {need}")
    arrays, offset = [], 0
    for name, shape in tensors:
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).astype(np.float64)
        arrays.append((name, arr.reshape(shape)))
        offset += 8 * count
    ckpt = Checkpoint(model_config, train_config, arrays, best_val, class_names, dtype)
    ckpt.to_model()  # shape check against the architecture
    return ckpt


def load_checkpoint(path) -> Checkpoint:
    return loads(Path(path).read_bytes())
