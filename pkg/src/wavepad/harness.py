"""End-to-end helpers shared by the CLI: fit on a dataset, score a split, and
compare model variants side by side (accuracy and wall time)."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import DataError, Dataset, split_dataset
from .metrics import EvalReport, evaluate
from .model import Model, ModelConfig, build
from .train import TrainConfig, TrainLog, featurize, predict, train
from .wavelet import FeatureMode, feature_shape


def model_config_for(dataset: Dataset, cfg: TrainConfig, **overrides) -> ModelConfig:
    """Model config whose input matches ``dataset`` featurized per ``cfg``."""
    shape = feature_shape(dataset.images.shape[1:], cfg.feature_mode)
    kwargs = {"input_shape": shape, "num_classes": len(dataset.class_names)}
    kwargs.update(overrides)
    return ModelConfig(**kwargs).validate()


def fit(dataset: Dataset, cfg: TrainConfig, **model_overrides) -> tuple[Model, TrainLog]:
    if not dataset.splits:
        split_dataset(dataset, cfg.split, seed=cfg.seed)
    mcfg = model_config_for(dataset, cfg, **model_overrides)
    model = build(mcfg, seed=cfg.seed, dtype=np.dtype(cfg.dtype))
    return train(model, dataset, cfg)


def evaluate_split(model: Model, dataset: Dataset, cfg: TrainConfig, split: str = "test") -> EvalReport:
    """Score one split; attack score is the probability of class 1."""
    x, y = dataset.subset(split)
    if not len(y):
        raise DataError(f"{split} split is empty")
    if model.config.num_classes != 2:
        raise DataError("split evaluation reports binary ROC metrics and needs a 2-class model")
    probs, _ = predict(model, featurize(x, cfg, model.dtype))
    return evaluate(probs[:, 1], y, score_matrix=probs)


def write_report(report: EvalReport, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"roc": out / "roc.csv", "cmc": out / "cmc.csv", "summary": out / "summary.csv"}
    with open(paths["roc"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for fpr, tpr in report.roc or []:
            w.writerow([repr(fpr), repr(tpr)])
    with open(paths["cmc"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "rate"])
        for rank, rate in report.cmc:
            w.writerow([rank, repr(rate)])
    s = report.summary()
    with open(paths["summary"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["accuracy", "auc", "error_rate"])
        w.writerow([repr(s["accuracy"]), repr(s["auc"]), repr(s["error_rate"])])
    return paths


@dataclass
class VariantResult:
    name: str
    feature_mode: FeatureMode
    test_accuracy: float
    train_time_s: float
    epochs_run: int


DEFAULT_VARIANTS = (
    ("dwt+resnet", FeatureMode.STACKED),
    ("dwt-approx+resnet", FeatureMode.APPROX),
    ("resnet", FeatureMode.RAW),
)


def compare_variants(dataset: Dataset, cfg: TrainConfig, variants=DEFAULT_VARIANTS,
                     **model_overrides) -> list[VariantResult]:
    """Train each feature variant on the same split and report test accuracy
    and training wall time."""
    if not dataset.splits:
        split_dataset(dataset, cfg.split, seed=cfg.seed)
    results = []
    for name, mode in variants:
        vcfg = replace(cfg, feature_mode=FeatureMode(mode))
        t0 = time.perf_counter()
        model, tlog = fit(dataset, vcfg, **model_overrides)
        elapsed = time.perf_counter() - t0
        acc = evaluate_split(model, dataset, vcfg, "test").accuracy
        results.append(VariantResult(name, FeatureMode(mode), acc, elapsed, len(tlog.records)))
    return results


def write_comparison(results: list[VariantResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "feature_mode", "test_accuracy", "train_time_s", "epochs"])
        for r in results:
            w.writerow([r.name, r.feature_mode.value, repr(r.test_accuracy),
                        f"{r.train_time_s:.3f}", r.epochs_run])


def format_comparison(results: list[VariantResult]) -> str:
    rows = [f"{'variant':<20} {'test acc %':>10} {'train time s':>13}"]
    for r in results:
        rows.append(f"{r.name:<20} {100 * r.test_accuracy:>10.2f} {r.train_time_s:>13.1f}")
    return "\n".join(rows)
