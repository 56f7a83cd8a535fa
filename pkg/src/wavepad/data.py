"""Image I/O, dataset ingestion and the synthetic real/fake generator."""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".pgm", ".pnm", ".png"}
BINARY_CLASSES = ("real", "fake")


class DataError(Exception):
    """Input data is missing, malformed or inconsistent."""


# -- PGM ----------------------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    tokens, pos = [], 0
    for _ in range(count):
        m = _TOKEN.match(buf, pos)
        if not m:
            raise DataError("truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens, pos


def read_pgm(path) -> np.ndarray:
    """Decode a P5 (binary) or P2 (ASCII) graymap to floats in [0, 1]."""
    buf = Path(path).read_bytes()
    tokens, pos = _header_tokens(buf, 4)
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise DataError(f"{path}: malformed PGM header") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise DataError(f"{path}: bad PGM dimensions {width}x{height} maxval {maxval}")
    count = width * height
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raster = buf[pos + 1:pos + 1 + count * dtype.itemsize]
        if len(raster) < count * dtype.itemsize:
            raise DataError(f"{path}: truncated PGM raster")
        pixels = np.frombuffer(raster, dtype=dtype)
    elif magic == b"P2":
        try:
            pixels = np.array(buf[pos:].split()[:count], dtype=np.int64)
        except ValueError:
            raise DataError(f"{path}: malformed ASCII PGM raster") from None
        if pixels.size < count:
            raise DataError(f"{path}: truncated PGM raster")
    else:
        raise DataError(f"{path}: not a PGM file (magic {magic!r})")
    return pixels.reshape(height, width).astype(np.float64) / maxval


def write_pgm(path, image: np.ndarray, maxval: int = 255) -> None:
    """Write a [0, 1] image as binary P5, clipping out-of-range values."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"write_pgm expects a 2D image, got shape {img.shape}")
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(q.astype(dtype).tobytes())


def read_image(path) -> np.ndarray:
    """Grayscale float image in [0, 1]; colour inputs are channel-averaged."""
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".pnm"):
        return read_pgm(path)
    try:
        from PIL import Image
    except ImportError:
        raise DataError(f"{path}: reading {path.suffix} files needs Pillow") from None
    with Image.open(path) as im:
        arr = np.asarray(im)
        maxval = 65535.0 if arr.dtype == np.uint16 else 255.0
        if im.mode in ("I", "I;16", "I;16B"):
            maxval = 65535.0
    arr = arr.astype(np.float64) / maxval
    if arr.ndim == 3:
        arr = arr[..., :3].mean(axis=2)
    return arr


# -- resize ---------------------------------------------------------------------

def resize_bilinear(image: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear resample with corner alignment (linear ramps stay exact)."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    oh, ow = size
    if oh < 1 or ow < 1:
        raise ValueError(f"target size must be positive, got {size}")
    if (oh, ow) == (h, w):
        return img.copy()

    def coords(n_in, n_out):
        if n_out == 1 or n_in == 1:
            pos = np.zeros(n_out)
        else:
            pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
        lo = np.minimum(np.floor(pos).astype(int), n_in - 1)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = coords(h, oh)
    x0, x1, fx = coords(w, ow)
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bottom = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy)[:, None] + bottom * fy[:, None]


# -- datasets -------------------------------------------------------------------

@dataclass
class Dataset:
    images: np.ndarray  # (N, H, W) floats in [0, 1]
    labels: np.ndarray  # (N,) int
    class_names: list[str]
    paths: list[str | None] = field(default_factory=list)
    splits: dict[str, np.ndarray] = field(default_factory=dict)
    skipped: int = 0

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 3 or len(self.images) != len(self.labels):
            raise DataError(f"images {self.images.shape} and labels {self.labels.shape} disagree")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise DataError("labels out of range for class_names")
        if not self.paths:
            self.paths = [None] * len(self.labels)

    def __len__(self):
        return len(self.labels)

    def subset(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        if split == "all":
            return self.images, self.labels
        try:
            idx = self.splits[split]
        except KeyError:
            raise DataError(f"dataset has no {split!r} split; call split_dataset first") from None
        return self.images[idx], self.labels[idx]


def split_dataset(ds: Dataset, ratios=(0.7, 0.15, 0.15), seed: int = 0) -> Dataset:
    """Stratified train/val/test index split, deterministic in ``seed``."""
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.shape != (3,) or (ratios < 0).any() or ratios.sum() <= 0:
        raise ValueError(f"need three non-negative split ratios, got {ratios}")
    ratios = ratios / ratios.sum()
    rng = np.random.default_rng(seed)
    parts: dict[str, list[int]] = {"train": [], "val": [], "test": []}
    for label in range(len(ds.class_names)):
        idx = np.flatnonzero(ds.labels == label)
        idx = idx[rng.permutation(len(idx))]
        n_val = int(round(ratios[1] * len(idx)))
        n_test = int(round(ratios[2] * len(idx)))
        n_train = len(idx) - n_val - n_test
        parts["train"] += idx[:n_train].tolist()
        parts["val"] += idx[n_train:n_train + n_val].tolist()
        parts["test"] += idx[n_train + n_val:].tolist()
    ds.splits = {k: np.array(sorted(v), dtype=np.int64) for k, v in parts.items()}
    return ds


def _class_order(names: list[str]) -> list[str]:
    # real/fake first so that label 1 is the attack class in the binary task
    head = [c for c in BINARY_CLASSES if c in names]
    return head + sorted(c for c in names if c not in head)


def load_dataset(root, resize_to: tuple[int, int] | None = None, grayscale: bool = True) -> Dataset:
    """Read a class-per-subdirectory image tree.

    Samples are ordered by class, then by sorted path. Files that fail to
    decode are skipped with a warning and counted in ``Dataset.skipped``.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root} is not a directory")
    class_dirs = [d.name for d in root.iterdir() if d.is_dir() and not d.name.startswith(".")]
    if not class_dirs:
        raise DataError(f"{root} has no class subdirectories")
    classes = _class_order(class_dirs)

    images, labels, paths, skipped = [], [], [], 0
    for label, name in enumerate(classes):
        files = sorted(p for p in (root / name).iterdir()
                       if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
        loaded = 0
        for path in files:
            try:
                img = read_image(path)
            except (DataError, OSError, ValueError) as exc:
                log.warning("skipping %s: %s", path, exc)
                skipped += 1
                continue
            if resize_to is not None:
                img = resize_bilinear(img, resize_to)
            images.append(img)
            labels.append(label)
            paths.append(os.fspath(path))
            loaded += 1
        if not loaded:
            raise DataError(f"class directory {root / name} holds no readable images")

    shapes = {im.shape for im in images}
    if len(shapes) > 1:
        raise DataError(f"images differ in size {sorted(shapes)}; pass resize_to")
    return Dataset(np.stack(images), np.array(labels), classes, paths, skipped=skipped)


# -- synthetic spoof data -------------------------------------------------------

def _blobs(rng, h, w):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.zeros((h, w))
    for _ in range(3):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        sy, sx = rng.uniform(0.12, 0.35) * h, rng.uniform(0.12, 0.35) * w
        amp = rng.uniform(0.3, 0.7)
        img += amp * np.exp(-0.5 * (((yy - cy) / sy) ** 2 + ((xx - cx) / sx) ** 2))
    return img


def _grid(rng, h, w):
    """Print/moire stand-in: thin periodic lines in both directions."""
    yy, xx = np.mgrid[0:h, 0:w]
    period = int(rng.integers(2, 4))
    py, px = rng.integers(0, period, size=2)
    lines = ((yy % period) == py) | ((xx % period) == px)
    return rng.uniform(0.12, 0.2) * np.where(lines, 1.0, -1.0)


def synth_dataset(n_per_class: int, size: tuple[int, int] = (64, 64), seed: int = 0) -> Dataset:
    """Deterministic two-class set: smooth blobs (real) vs blobs + grid (fake)."""
    h, w = size
    if n_per_class < 1:
        raise ValueError("n_per_class must be at least 1")
    if h < 16 or w < 16 or h % 4 or w % 4:
        raise ValueError(f"size must be at least 16x16 and divisible by 4, got {h}x{w}")
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for label in (0, 1):
        for _ in range(n_per_class):
            img = 0.15 + _blobs(rng, h, w) + rng.normal(0.0, 0.02, size=(h, w))
            if label == 1:
                img = img + _grid(rng, h, w)
            images.append(np.clip(img, 0.0, 1.0))
            labels.append(label)
    return Dataset(np.stack(images), np.array(labels), list(BINARY_CLASSES))


def save_dataset(ds: Dataset, root) -> list[Path]:
    """Write a dataset as ``root/<class>/<class>_NNN.pgm`` 8-bit graymaps."""
    root = Path(root)
    written = []
    counters: dict[int, int] = {}
    for img, label in zip(ds.images, ds.labels):
        name = ds.class_names[label]
        (root / name).mkdir(parents=True, exist_ok=True)
        i = counters.get(label, 0)
        counters[label] = i + 1
        path = root / name / f"{name}_{i:04d}.pgm"
        write_pgm(path, img)
        written.append(path)
    return written


def parse_size(text: str) -> tuple[int, int]:
    """``"64x48"`` -> ``(64, 48)`` as (height, width)."""
    m = re.fullmatch(r"\s*(\d+)\s*[xX,]\s*(\d+)\s*", text)
    if not m:
        raise ValueError(f"expected HxW, got {text!r}")
    return int(m.group(1)), int(m.group(2))
