"""scikit-learn compatible wrappers.

``DWTFeatures`` maps ``(n, H, W)`` grayscale images to ``(n, C, H', W')``
wavelet feature tensors and ``ResidualPADClassifier`` trains the residual
network on them, so the whole detector is an ordinary
:class:`~sklearn.pipeline.Pipeline`::

    pipe = make_pad_pipeline(epochs=30)
    pipe.fit(images, labels)
    pipe.predict_proba(images)
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.model_selection import train_test_split
from sklearn.pipeline import Pipeline
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted

from .model import ModelConfig, build
from .train import TrainConfig, predict, train_arrays
from .wavelet import FeatureMode, extract_batch, get_filter


def _check_images(X, ndims, name):
    X = check_array(X, allow_nd=True, ensure_2d=False, dtype=np.float64)
    if X.ndim not in ndims:
        raise ValueError(f"{name} expects arrays of rank {sorted(ndims)}, got shape {X.shape}")
    return X


class DWTFeatures(TransformerMixin, BaseEstimator):
    """Level-1 wavelet features per image.

    Parameters
    ----------
    wavelet : {"haar", "bior2.2"}
    mode : {"stacked", "approx", "raw"}
        ``stacked`` gives [LL, LH, HL, HH] channels, ``approx`` LL only and
        ``raw`` passes the image through as a single channel.
    """

    def __init__(self, wavelet="haar", mode="stacked"):
        self.wavelet = wavelet
        self.mode = mode

    def fit(self, X, y=None):
        X = _check_images(X, {3}, type(self).__name__)
        get_filter(self.wavelet)
        FeatureMode(self.mode)
        self.image_shape_ = X.shape[1:]
        return self

    def transform(self, X):
        check_is_fitted(self, "image_shape_")
        X = _check_images(X, {3}, type(self).__name__)
        if X.shape[1:] != self.image_shape_:
            raise ValueError(f"fitted on {self.image_shape_} images, got {X.shape[1:]}")
        return extract_batch(X, self.wavelet, self.mode)


class ResidualPADClassifier(ClassifierMixin, BaseEstimator):
    """Residual CNN classifier over ``(n, C, H, W)`` (or ``(n, H, W)``) inputs.

    Architecture parameters mirror :class:`wavepad.model.ModelConfig`;
    training parameters mirror :class:`wavepad.train.TrainConfig`. A
    stratified ``validation_fraction`` of the training data drives
    best-epoch selection.
    """

    def __init__(self, block_convs=(6, 6, 6, 6, 6), channels=(16, 16, 32, 32, 32),
                 skip_mode="single", stem=True, maxpool_after=(2, 4), reference_arch=True,
                 epochs=30, batch_size=8, learning_rate=0.002, momentum=0.9,
                 weight_decay=1e-4, validation_fraction=0.15, dtype="float32",
                 early_stop_accuracy=None, random_state=0):
        self.block_convs = block_convs
        self.channels = channels
        self.skip_mode = skip_mode
        self.stem = stem
        self.maxpool_after = maxpool_after
        self.reference_arch = reference_arch
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.validation_fraction = validation_fraction
        self.dtype = dtype
        self.early_stop_accuracy = early_stop_accuracy
        self.random_state = random_state

    def _inputs(self, X):
        X = _check_images(X, {3, 4}, type(self).__name__)
        return X[:, None] if X.ndim == 3 else X

    def _train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                           learning_rate=self.learning_rate, momentum=self.momentum,
                           weight_decay=self.weight_decay, seed=int(self.random_state or 0),
                           dtype=self.dtype, early_stop_accuracy=self.early_stop_accuracy)

    def fit(self, X, y):
        X = self._inputs(X)
        y = np.asarray(y)
        if len(y) != len(X):
            raise ValueError(f"X has {len(X)} samples but y has {len(y)}")
        check_classification_targets(y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need samples from at least two classes")
        cfg = self._train_config()
        if self.validation_fraction:
            x_tr, x_val, y_tr, y_val = train_test_split(
                X, y_idx, test_size=self.validation_fraction, stratify=y_idx,
                random_state=cfg.seed)
        else:
            x_tr, y_tr = X, y_idx
            x_val, y_val = X[:0], y_idx[:0]
        config = ModelConfig(input_shape=X.shape[1:], num_classes=len(self.classes_),
                             block_convs=tuple(self.block_convs), channels=tuple(self.channels),
                             skip_mode=self.skip_mode, stem=self.stem,
                             maxpool_after=tuple(self.maxpool_after),
                             reference_arch=self.reference_arch)
        model = build(config, seed=cfg.seed, dtype=np.dtype(cfg.dtype))
        self.model_, self.train_log_ = train_arrays(model, x_tr, y_tr, x_val, y_val, cfg)
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = self._inputs(X)
        probs, _ = predict(self.model_, X.astype(self.model_.dtype))
        return probs

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.classes_[self.predict_proba(X).argmax(axis=1)]


def make_pad_pipeline(wavelet="haar", mode="stacked", **classifier_params) -> Pipeline:
    """DWT feature extraction followed by the residual classifier."""
    return Pipeline([
        ("dwt", DWTFeatures(wavelet=wavelet, mode=mode)),
        ("resnet", ResidualPADClassifier(**classifier_params)),
    ])
