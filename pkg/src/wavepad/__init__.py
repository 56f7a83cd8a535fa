"""Wavelet features and a residual CNN for presentation-attack detection."""

from .checkpoint import load_checkpoint, save_checkpoint
from .data import Dataset, load_dataset, synth_dataset
from .estimators import DWTFeatures, ResidualPADClassifier, make_pad_pipeline
from .metrics import EvalReport, cmc_curve, evaluate, roc_auc, roc_curve
from .model import Model, ModelConfig, SkipMode, build, count_layers
from .train import TrainConfig, TrainLog, predict, train
from .wavelet import BIOR22, HAAR, FeatureMode, FilterPair, Subbands, dwt1d, dwt2d, extract_features, idwt1d, idwt2d

__version__ = "0.1.0"

__all__ = [
    "DWTFeatures", "ResidualPADClassifier", "make_pad_pipeline",
    "Dataset", "load_dataset", "synth_dataset", "load_checkpoint", "save_checkpoint",
    "EvalReport", "cmc_curve", "evaluate", "roc_auc", "roc_curve",
    "Model", "ModelConfig", "SkipMode", "build", "count_layers",
    "TrainConfig", "TrainLog", "predict", "train",
    "BIOR22", "HAAR", "FeatureMode", "FilterPair", "Subbands",
    "dwt1d", "dwt2d", "extract_features", "idwt1d", "idwt2d",
]
