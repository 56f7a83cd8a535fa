"""Single-level separable 2D discrete wavelet transform.

Filtering uses periodic extension, so analysis followed by synthesis is an
exact identity for any even length and any filter length. Odd image
dimensions are padded by one mirrored row/column and cropped back on the
inverse.

Conventions for the analysis sums::

    approx[k] = sum_j lo[j] * x[(2k + j) mod N]
    detail[k] = sum_j hi[j] * x[(2k + j) mod N]

and synthesis scatters each coefficient back through the synthesis taps::

    x[(2k + j) mod N] += approx[k] * lo_syn[j] + detail[k] * hi_syn[j]
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class FeatureMode(str, enum.Enum):
    """What the classifier consumes from an image."""

    STACKED = "stacked"  # [LL, LH, HL, HH] as four channels
    APPROX = "approx"  # LL only
    RAW = "raw"  # no transform; the DWT-off baseline

    @property
    def channels(self) -> int:
        return {"stacked": 4, "approx": 1, "raw": 1}[self.value]


@dataclass(frozen=True)
class FilterPair:
    name: str
    analysis_low: tuple[float, ...]
    analysis_high: tuple[float, ...]
    synthesis_low: tuple[float, ...]
    synthesis_high: tuple[float, ...]

    def __post_init__(self):
        lengths = {len(self.analysis_low), len(self.analysis_high),
                   len(self.synthesis_low), len(self.synthesis_high)}
        if len(lengths) != 1:
            raise ValueError(f"filter {self.name!r}: all tap lists must share one length")


_R2 = math.sqrt(2.0)

HAAR = FilterPair(
    name="haar",
    analysis_low=(1 / _R2, 1 / _R2),
    analysis_high=(1 / _R2, -1 / _R2),
    synthesis_low=(1 / _R2, 1 / _R2),
    synthesis_high=(1 / _R2, -1 / _R2),
)

# CDF 5/3 ("bior2.2"); analysis taps are stored in correlation order and
# aligned with the synthesis taps so that the periodic filter bank is PR.
BIOR22 = FilterPair(
    name="bior2.2",
    analysis_low=tuple(_R2 * t for t in (-1 / 8, 2 / 8, 6 / 8, 2 / 8, -1 / 8, 0.0)),
    analysis_high=tuple(_R2 * t for t in (0.0, 0.0, 1 / 4, -1 / 2, 1 / 4, 0.0)),
    synthesis_low=tuple(_R2 * t for t in (0.0, 1 / 4, 1 / 2, 1 / 4, 0.0, 0.0)),
    synthesis_high=tuple(_R2 * t for t in (0.0, 1 / 8, 2 / 8, -6 / 8, 2 / 8, 1 / 8)),
)

FILTERS = {HAAR.name: HAAR, BIOR22.name: BIOR22}


def get_filter(name: str | FilterPair) -> FilterPair:
    if isinstance(name, FilterPair):
        return name
    try:
        return FILTERS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown wavelet {name!r}; choose from {sorted(FILTERS)}") from None


@dataclass
class Subbands:
    """Level-1 coefficients plus the shape of the image they came from."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray
    source_shape: tuple[int, int]

    def __post_init__(self):
        shapes = {self.ll.shape, self.lh.shape, self.hl.shape, self.hh.shape}
        if len(shapes) != 1:
            raise ValueError(f"subbands must share one shape, got {sorted(shapes)}")

    def as_tuple(self):
        return self.ll, self.lh, self.hl, self.hh


def _analyze(x: np.ndarray, taps, axis: int) -> np.ndarray:
    x = np.moveaxis(x, axis, -1)
    out = np.zeros(x.shape[:-1] + (x.shape[-1] // 2,), dtype=np.result_type(x, np.float64))
    for j, t in enumerate(taps):
        if t != 0.0:
            out += t * np.roll(x, -j, axis=-1)[..., ::2]
    return np.moveaxis(out, -1, axis)


def _synthesize(a: np.ndarray, d: np.ndarray, lo, hi, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, -1)
    d = np.moveaxis(d, axis, -1)
    n = 2 * a.shape[-1]
    up_a = np.zeros(a.shape[:-1] + (n,), dtype=np.result_type(a, np.float64))
    up_d = np.zeros_like(up_a)
    up_a[..., ::2] = a
    up_d[..., ::2] = d
    out = np.zeros_like(up_a)
    for j, (gl, gh) in enumerate(zip(lo, hi)):
        out += np.roll(gl * up_a + gh * up_d, j, axis=-1)
    return np.moveaxis(out, -1, axis)


def dwt1d(signal, filters: str | FilterPair = "haar") -> tuple[np.ndarray, np.ndarray]:
    """Split an even-length 1D signal into approximation and detail halves."""
    fp = get_filter(filters)
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"dwt1d expects a 1D signal, got shape {x.shape}")
    if x.size < 2 or x.size % 2:
        raise ValueError(f"dwt1d needs an even length >= 2, got {x.size}")
    return _analyze(x, fp.analysis_low, 0), _analyze(x, fp.analysis_high, 0)


def idwt1d(approx, detail, filters: str | FilterPair = "haar") -> np.ndarray:
    fp = get_filter(filters)
    a = np.asarray(approx, dtype=np.float64)
    d = np.asarray(detail, dtype=np.float64)
    if a.ndim != 1 or a.shape != d.shape:
        raise ValueError(f"approx/detail must be 1D of equal length, got {a.shape} and {d.shape}")
    if a.size == 0:
        raise ValueError("cannot invert empty coefficients")
    return _synthesize(a, d, fp.synthesis_low, fp.synthesis_high, 0)


def dwt2d(image, filters: str | FilterPair = "haar") -> Subbands:
    """Rows first, then columns of both row outputs.

    ``lh`` is low-pass along rows and high-pass down columns (horizontal
    edges); ``hl`` is the transpose role (vertical edges).
    """
    fp = get_filter(filters)
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"dwt2d expects a 2D image, got shape {img.shape}")
    h, w = img.shape
    if h < 2 or w < 2:
        raise ValueError(f"image must be at least 2x2, got {h}x{w}")
    pad = ((0, h % 2), (0, w % 2))
    if h % 2 or w % 2:
        img = np.pad(img, pad, mode="symmetric")

    lo = _analyze(img, fp.analysis_low, axis=1)
    hi = _analyze(img, fp.analysis_high, axis=1)
    return Subbands(
        ll=_analyze(lo, fp.analysis_low, axis=0),
        lh=_analyze(lo, fp.analysis_high, axis=0),
        hl=_analyze(hi, fp.analysis_low, axis=0),
        hh=_analyze(hi, fp.analysis_high, axis=0),
        source_shape=(h, w),
    )


def idwt2d(sub: Subbands, filters: str | FilterPair = "haar") -> np.ndarray:
    fp = get_filter(filters)
    lo = _synthesize(sub.ll, sub.lh, fp.synthesis_low, fp.synthesis_high, axis=0)
    hi = _synthesize(sub.hl, sub.hh, fp.synthesis_low, fp.synthesis_high, axis=0)
    img = _synthesize(lo, hi, fp.synthesis_low, fp.synthesis_high, axis=1)
    h, w = sub.source_shape
    if img.shape[0] < h or img.shape[1] < w:
        raise ValueError(f"subbands {sub.ll.shape} too small for source shape {sub.source_shape}")
    return img[:h, :w]


def extract_features(image, filters: str | FilterPair = "haar",
                     mode: FeatureMode | str = FeatureMode.STACKED) -> np.ndarray:
    """Turn one grayscale image into a ``(C, H', W')`` network input."""
    mode = FeatureMode(mode)
    if mode is FeatureMode.RAW:
        img = np.asarray(image, dtype=np.float64)
        if img.ndim != 2:
            raise ValueError(f"expected a 2D image, got shape {img.shape}")
        return img[None].copy()
    sub = dwt2d(image, filters)
    if mode is FeatureMode.APPROX:
        return sub.ll[None]
    return np.stack(sub.as_tuple())


def feature_shape(image_shape: tuple[int, int], mode: FeatureMode | str) -> tuple[int, int, int]:
    mode = FeatureMode(mode)
    h, w = image_shape
    if mode is FeatureMode.RAW:
        return (1, h, w)
    return (mode.channels, (h + 1) // 2, (w + 1) // 2)


def extract_batch(images, filters: str | FilterPair = "haar",
                  mode: FeatureMode | str = FeatureMode.STACKED) -> np.ndarray:
    """Stack :func:`extract_features` over an ``(N, H, W)`` batch."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3:
        raise ValueError(f"expected (N, H, W) images, got shape {images.shape}")
    return np.stack([extract_features(img, filters, mode) for img in images])
