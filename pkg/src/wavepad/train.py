"""Mini-batch SGD with momentum, best-validation snapshotting and CSV logs."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .data import DataError, Dataset, split_dataset
from .model import Model
from .wavelet import FeatureMode, extract_batch

log = logging.getLogger(__name__)


class NumericalError(ArithmeticError):
    """Training produced a non-finite loss or parameter."""


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 8
    learning_rate: float = 0.002
    momentum: float = 0.9
    weight_decay: float = 1e-4
    seed: int = 0
    feature_mode: FeatureMode = FeatureMode.STACKED
    wavelet: str = "haar"
    eval_every: int = 1
    dtype: str = "float32"
    image_size: tuple[int, int] = (64, 64)
    split: tuple[float, float, float] = (0.7, 0.15, 0.15)
    # stop once a validation pass sees both accuracies at or above this
    early_stop_accuracy: float | None = None

    def __post_init__(self):
        self.feature_mode = FeatureMode(self.feature_mode)
        self.image_size = tuple(int(v) for v in self.image_size)
        self.split = tuple(float(v) for v in self.split)
        self.validate()

    def validate(self) -> "TrainConfig":
        if self.epochs < 1 or self.eval_every < 1:
            raise ValueError("epochs and eval_every must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2 (batch norm needs batch statistics)")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if self.momentum < 0 or self.weight_decay < 0:
            raise ValueError("momentum and weight_decay must be non-negative")
        if len(self.split) != 3 or min(self.split) < 0 or sum(self.split) <= 0:
            raise ValueError(f"split must be three non-negative ratios, got {self.split}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feature_mode"] = self.feature_mode.value
        return d


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float
    wall_time_s: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float = float("nan")

    @property
    def losses(self) -> list[float]:
        return [r.train_loss for r in self.records]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "train_acc", "val_acc", "wall_time_s"])
            for r in self.records:
                w.writerow([r.epoch, repr(r.train_loss), repr(r.train_acc),
                            repr(r.val_acc), f"{r.wall_time_s:.6f}"])


def featurize(images: np.ndarray, cfg: TrainConfig, dtype=None) -> np.ndarray:
    feats = extract_batch(images, cfg.wavelet, cfg.feature_mode)
    return feats.astype(dtype or cfg.dtype)


def predict(model: Model, x: np.ndarray, batch_size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Inference-mode class probabilities and argmax labels (ties -> lower index)."""
    x = np.asarray(x)
    probs = []
    for start in range(0, len(x), batch_size):
        logits = model.forward(x[start:start + batch_size], training=False)
        probs.append(nn.softmax(logits.astype(np.float64)))
    p = np.concatenate(probs) if probs else np.zeros((0, model.config.num_classes))
    return p, p.argmax(axis=1)


def accuracy(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    _, pred = predict(model, x)
    return float(np.mean(pred == y)) if len(y) else float("nan")


def _batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    chunks = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        chunks[-2] = np.concatenate(chunks[-2:])
        chunks.pop()
    return chunks


def sgd_step(model: Model, grads: dict[int, nn.LayerGrads], velocity: dict,
             cfg: TrainConfig) -> None:
    """In-place update ``v = mu*v + (g + wd*w); w -= lr*v`` for every parameter."""
    lr, mu, wd = cfg.learning_rate, cfg.momentum, cfg.weight_decay
    for i, g in grads.items():
        p = model.layers[i]
        for name, grad in g.as_dict().items():
            w = getattr(p, name)
            step = grad + wd * w if wd else grad.copy()
            key = (i, name)
            if mu:
                v = velocity.get(key)
                if v is None:
                    v = velocity[key] = np.zeros_like(w)
                v *= mu
                v += step
                step = v
            w -= (lr * step).astype(w.dtype, copy=False)


def _check_finite(model: Model, epoch: int) -> None:
    for name, arr in model.named_arrays():
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"non-finite values in {name} after epoch {epoch}")


def train_arrays(model: Model, x_train, y_train, x_val, y_val,
                 cfg: TrainConfig) -> tuple[Model, TrainLog]:
    """Train on pre-computed feature tensors; returns the best-validation copy.

    Ties in validation accuracy go to the later epoch. With an empty
    validation set the final model is returned.
    """
    cfg.validate()
    x_train = np.asarray(x_train, dtype=model.dtype)
    y_train = np.asarray(y_train, dtype=np.int64)
    x_val = np.asarray(x_val, dtype=model.dtype)
    y_val = np.asarray(y_val, dtype=np.int64)
    if len(y_train) < 2:
        raise DataError("training split needs at least 2 samples")
    rng = np.random.default_rng(cfg.seed)
    velocity: dict = {}
    tlog = TrainLog()
    best = model.copy()
    best_acc = -1.0
    val_acc = float("nan")
    t0 = time.perf_counter()

    for epoch in range(1, cfg.epochs + 1):
        loss_sum, correct = 0.0, 0
        for b, idx in enumerate(_batches(len(y_train), cfg.batch_size, rng)):
            logits = model.forward(x_train[idx], training=True)
            loss, grad = nn.softmax_ce(logits.astype(np.float64), y_train[idx])
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite loss {loss} at epoch {epoch}, batch {b}")
            _, grads = model.backward(grad.astype(model.dtype))
            sgd_step(model, grads, velocity, cfg)
            loss_sum += loss * len(idx)
            correct += int(np.sum(logits.argmax(axis=1) == y_train[idx]))
        _check_finite(model, epoch)
        train_loss = loss_sum / len(y_train)
        train_acc = correct / len(y_train)

        evaluated = epoch % cfg.eval_every == 0 or epoch == cfg.epochs
        if evaluated and len(y_val):
            val_acc = accuracy(model, x_val, y_val)
            if val_acc >= best_acc:
                best_acc = val_acc
                best = model.copy()
                tlog.best_epoch = epoch
        tlog.records.append(EpochRecord(epoch, train_loss, train_acc, val_acc,
                                        time.perf_counter() - t0))
        log.info("epoch %d loss %.4f train_acc %.3f val_acc %.3f",
                 epoch, train_loss, train_acc, val_acc)

        target = cfg.early_stop_accuracy
        if target is not None and evaluated:
            fit_acc = accuracy(model, x_train, y_train)
            if fit_acc >= target and (not len(y_val) or val_acc >= target):
                break

    if not len(y_val):
        best = model.copy()
        tlog.best_epoch = tlog.records[-1].epoch
    else:
        tlog.best_val_acc = best_acc
    return best, tlog


def train(model: Model, dataset: Dataset, cfg: TrainConfig) -> tuple[Model, TrainLog]:
    """Featurize ``dataset`` per ``cfg`` and train on its train/val splits.

    A dataset without splits is split by ``cfg.split`` (stratified) with
    ``cfg.seed``.
    """
    if not dataset.splits:
        split_dataset(dataset, cfg.split, seed=cfg.seed)
    xs, ys = dataset.subset("train")
    xv, yv = dataset.subset("val")
    if not len(ys):
        raise DataError("training split is empty")
    dtype = model.dtype
    return train_arrays(model, featurize(xs, cfg, dtype), ys, featurize(xv, cfg, dtype) if len(yv)
                        else np.zeros((0,) + model.config.input_shape, dtype=dtype), yv, cfg)


def write_log(tlog: TrainLog, path) -> Path:
    path = Path(path)
    tlog.to_csv(path)
    return path
