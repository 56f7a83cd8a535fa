"""``key = value`` config files for model and training settings.

Model keys and training keys share one flat namespace::

    # desk-scale run
    block_convs = 6,6,6,6,6
    channels = 16,16,32,32,32
    skip_mode = single
    epochs = 30
    image_size = 64x64

Unknown keys are an error so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .data import parse_size
from .model import ModelConfig, SkipMode
from .train import TrainConfig
from .wavelet import FeatureMode


class ConfigFileError(ValueError):
    pass


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text.strip().lower() in ("", "none") else float(text)


MODEL_KEYS = {
    "input_shape": _ints,
    "num_classes": int,
    "block_convs": _ints,
    "channels": _ints,
    "skip_mode": SkipMode,
    "stem": _bool,
    "maxpool_after": _ints,
    "reference_arch": _bool,
}

TRAIN_KEYS = {
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "momentum": float,
    "weight_decay": float,
    "seed": int,
    "feature_mode": FeatureMode,
    "wavelet": str.strip,
    "eval_every": int,
    "dtype": str.strip,
    "image_size": parse_size,
    "early_stop_accuracy": _opt_float,
    "split": _floats,
}


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigFileError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigFileError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigFileError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _convert(table, items, source):
    kwargs = {}
    for key, value in items.items():
        try:
            kwargs[key] = table[key](value)
        except (ValueError, TypeError) as exc:
            raise ConfigFileError(f"{source}: bad value for {key}: {exc}") from None
    return kwargs


def split_settings(settings: dict[str, str], source: str = "<config>") -> tuple[dict, dict]:
    """Typed ``(model_kwargs, train_kwargs)`` from raw key/value strings."""
    unknown = sorted(set(settings) - set(MODEL_KEYS) - set(TRAIN_KEYS))
    if unknown:
        raise ConfigFileError(f"{source}: unknown key(s) {', '.join(unknown)}")
    model = _convert(MODEL_KEYS, {k: v for k, v in settings.items() if k in MODEL_KEYS}, source)
    train = _convert(TRAIN_KEYS, {k: v for k, v in settings.items() if k in TRAIN_KEYS}, source)
    return model, train


def load_config(path) -> tuple[dict, TrainConfig]:
    """Model keyword overrides plus a validated :class:`TrainConfig`.

    Model settings come back as a dict because ``input_shape`` and
    ``num_classes`` usually depend on the data being trained on.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc}") from None
    model_kw, train_kw = split_settings(parse_kv(text, str(path)), str(path))
    try:
        return model_kw, TrainConfig(**train_kw)
    except ValueError as exc:
        raise ConfigFileError(f"{path}: {exc}") from None


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if hasattr(value, "value"):  # enums
        return str(value.value)
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return "none"
    return str(value)


def format_config(model: ModelConfig | None = None, train: TrainConfig | None = None,
                  prefix: bool = False) -> list[str]:
    """Canonical ``key = value`` lines; ``prefix`` adds ``model.``/``train.``."""
    lines = []
    for tag, obj in (("model", model), ("train", train)):
        if obj is None:
            continue
        for f in dataclasses.fields(obj):
            value = getattr(obj, f.name)
            if tag == "train" and f.name == "image_size":
                text = f"{value[0]}x{value[1]}"
            else:
                text = _format_value(value)
            key = f"{tag}.{f.name}" if prefix else f.name
            lines.append(f"{key} = {text}")
    return lines


def model_config_from(kwargs: dict) -> ModelConfig:
    try:
        return ModelConfig(**kwargs).validate()
    except (TypeError, ValueError) as exc:
        raise ConfigFileError(str(exc)) from None
