"""Layer zoo with explicit forward/backward pairs.

Each ``*_forward`` takes the layer input and its :class:`LayerParams`; each
``*_backward`` takes the same input plus the upstream gradient and returns
``(grad_input, LayerGrads)``. Forward functions accept an optional ``cache``
dict; passing the same dict to the matching backward call skips recomputing
intermediates (im2col buffers, batch statistics, argmax masks).

Convolution is cross-correlation (no kernel flip). Arrays are ``(N, C, H, W)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class LayerKind(str, enum.Enum):
    CONV2D = "conv2d"
    BATCHNORM = "batchnorm"
    RELU = "relu"
    MAXPOOL2D = "maxpool2d"
    FC = "fc"
    SOFTMAX_CE = "softmax_ce"


class ConfigError(ValueError):
    """Layer hyperparameters are inconsistent with the input they receive."""


@dataclass
class LayerParams:
    kind: LayerKind
    weight: np.ndarray | None = None  # conv (Co,Ci,k,k) | fc (Do,Di) | bn gamma (C,)
    bias: np.ndarray | None = None  # conv (Co,) | fc (Do,) | bn beta (C,)
    running_mean: np.ndarray | None = None
    running_var: np.ndarray | None = None
    kernel: int = 0
    stride: int = 1
    padding: int = 0
    eps: float = 1e-5
    momentum: float = 0.1

    def trainable(self) -> dict[str, np.ndarray]:
        out = {}
        if self.weight is not None:
            out["weight"] = self.weight
        if self.bias is not None:
            out["bias"] = self.bias
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        out = {}
        if self.running_mean is not None:
            out["running_mean"] = self.running_mean
        if self.running_var is not None:
            out["running_var"] = self.running_var
        return out


@dataclass
class LayerGrads:
    weight: np.ndarray | None = None
    bias: np.ndarray | None = None

    def as_dict(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in (("weight", self.weight), ("bias", self.bias)) if v is not None}


# -- constructors -----------------------------------------------------------

def conv2d(weight, bias=None, stride: int = 1, padding: int = 0) -> LayerParams:
    weight = np.asarray(weight)
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ConfigError(f"conv weight must be (C_out, C_in, k, k), got {weight.shape}")
    if bias is None:
        bias = np.zeros(weight.shape[0], dtype=weight.dtype)
    bias = np.asarray(bias, dtype=weight.dtype)
    if bias.shape != (weight.shape[0],):
        raise ConfigError(f"conv bias must be ({weight.shape[0]},), got {bias.shape}")
    if stride < 1 or padding < 0:
        raise ConfigError(f"need stride >= 1 and padding >= 0, got {stride}, {padding}")
    return LayerParams(LayerKind.CONV2D, weight=weight, bias=bias,
                       kernel=weight.shape[2], stride=stride, padding=padding)


def batchnorm(channels: int, eps: float = 1e-5, momentum: float = 0.1,
              dtype=np.float64) -> LayerParams:
    return LayerParams(LayerKind.BATCHNORM,
                       weight=np.ones(channels, dtype=dtype),
                       bias=np.zeros(channels, dtype=dtype),
                       running_mean=np.zeros(channels, dtype=dtype),
                       running_var=np.ones(channels, dtype=dtype),
                       eps=eps, momentum=momentum)


def relu() -> LayerParams:
    return LayerParams(LayerKind.RELU)


def maxpool2d(window: int = 2, stride: int | None = None) -> LayerParams:
    stride = window if stride is None else stride
    if stride != window:
        raise ConfigError("only non-overlapping pooling (stride == window) is supported")
    return LayerParams(LayerKind.MAXPOOL2D, kernel=window, stride=stride)


def fully_connected(weight, bias=None) -> LayerParams:
    weight = np.asarray(weight)
    if weight.ndim != 2:
        raise ConfigError(f"fc weight must be (D_out, D_in), got {weight.shape}")
    if bias is None:
        bias = np.zeros(weight.shape[0], dtype=weight.dtype)
    return LayerParams(LayerKind.FC, weight=weight, bias=np.asarray(bias, dtype=weight.dtype))


# -- conv2d -----------------------------------------------------------------

def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    span = size + 2 * padding - kernel
    if span < 0 or span % stride:
        raise ConfigError(
            f"size {size} with kernel {kernel}, stride {stride}, padding {padding} "
            "does not tile exactly")
    return span // stride + 1


def _im2col(x: np.ndarray, p: LayerParams):
    """Patch matrix with rows (n, ho, wo) and columns (ki, kj, c).

    Built from k*k block copies of a channels-last padded buffer. Outputs
    computed from it come back as channels-last memory viewed as NCHW, so
    chained layers avoid transposing copies.
    """
    n, c, h, w = x.shape
    k, s, pad = p.kernel, p.stride, p.padding
    ho = conv_output_size(h, k, s, pad)
    wo = conv_output_size(w, k, s, pad)
    xt = x.transpose(0, 2, 3, 1)
    if pad:
        xp = np.zeros((n, h + 2 * pad, w + 2 * pad, c), dtype=x.dtype)
        xp[:, pad:pad + h, pad:pad + w, :] = xt
    else:
        xp = xt
    cols = np.empty((n, ho, wo, k, k, c), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, :, i, j, :] = xp[:, i:i + s * ho:s, j:j + s * wo:s, :]
    return cols.reshape(n * ho * wo, k * k * c), ho, wo


def _weight_matrix(p: LayerParams) -> np.ndarray:
    co = p.weight.shape[0]
    return p.weight.transpose(0, 2, 3, 1).reshape(co, -1)


def _check_conv_input(x: np.ndarray, p: LayerParams) -> None:
    if x.ndim != 4:
        raise ValueError(f"conv2d expects (N, C, H, W), got shape {x.shape}")
    if x.shape[1] != p.weight.shape[1]:
        raise ValueError(f"conv2d: input has {x.shape[1]} channels, weight expects {p.weight.shape[1]}")


def _padded_flat(x: np.ndarray, pad: int) -> tuple[np.ndarray, int, int]:
    n, c, h, w = x.shape
    xp = np.zeros((n, h + 2 * pad, w + 2 * pad, c), dtype=x.dtype)
    xp[:, pad:pad + h, pad:pad + w, :] = x.transpose(0, 2, 3, 1)
    return xp.reshape(-1, c), h + 2 * pad, w + 2 * pad


# Stride-1 path: in a flattened channels-last padded buffer, the input seen
# by kernel tap (i, j) is the contiguous row range starting at i*Wp + j, so
# the convolution is k*k plain matmuls. Rows that straddle a padded border
# produce junk outputs that are never read back.

def _conv_s1_forward(x, p, cache):
    n = x.shape[0]
    co, c, k, _ = p.weight.shape
    xf, hp, wp = _padded_flat(x, p.padding)
    ho, wo = hp - k + 1, wp - k + 1
    span = xf.shape[0] - (k - 1) * (wp + 1)
    taps = np.ascontiguousarray(p.weight.transpose(2, 3, 1, 0))
    full = np.zeros((xf.shape[0], co), dtype=np.result_type(x, p.weight))
    tmp = np.empty((span, co), dtype=full.dtype)
    for i in range(k):
        for j in range(k):
            o = i * wp + j
            np.matmul(xf[o:o + span], taps[i, j], out=tmp)
            full[:span] += tmp
    full += p.bias
    if cache is not None:
        cache["xf"] = (xf, hp, wp)
    return full.reshape(n, hp, wp, co)[:, :ho, :wo, :].transpose(0, 3, 1, 2)


def _conv_s1_backward(x, p, grad_out, cache):
    n, c, h, w = x.shape
    co, _, k, _ = p.weight.shape
    pad = p.padding
    if cache is not None and "xf" in cache:
        xf, hp, wp = cache["xf"]
    else:
        xf, hp, wp = _padded_flat(x, pad)
    ho, wo = hp - k + 1, wp - k + 1
    if grad_out.shape != (n, co, ho, wo):
        raise ValueError(f"conv2d_backward: grad_out shape {grad_out.shape}, expected {(n, co, ho, wo)}")
    span = xf.shape[0] - (k - 1) * (wp + 1)
    dtype = np.result_type(grad_out, p.weight)
    gfull = np.zeros((n, hp, wp, co), dtype=dtype)
    gfull[:, :ho, :wo, :] = grad_out.transpose(0, 2, 3, 1)
    g = gfull.reshape(-1, co)[:span]
    taps_t = np.ascontiguousarray(p.weight.transpose(2, 3, 0, 1))
    grad_w = np.empty((k, k, co, c), dtype=dtype)
    gx = np.zeros(xf.shape, dtype=dtype)
    tmp = np.empty((span, c), dtype=dtype)
    for i in range(k):
        for j in range(k):
            o = i * wp + j
            np.matmul(g.T, xf[o:o + span], out=grad_w[i, j])
            np.matmul(g, taps_t[i, j], out=tmp)
            gx[o:o + span] += tmp
    gx = gx.reshape(n, hp, wp, c)[:, pad:pad + h, pad:pad + w, :].transpose(0, 3, 1, 2)
    grad_b = grad_out.sum(axis=(0, 2, 3))
    return gx, LayerGrads(np.ascontiguousarray(grad_w.transpose(2, 3, 0, 1)), grad_b)


def conv2d_forward(x: np.ndarray, p: LayerParams, cache: dict | None = None) -> np.ndarray:
    """Cross-correlate ``x`` (N, C, H, W) with ``p.weight`` and add the bias."""
    _check_conv_input(x, p)
    if p.stride == 1:
        conv_output_size(x.shape[2], p.kernel, 1, p.padding)
        conv_output_size(x.shape[3], p.kernel, 1, p.padding)
        return _conv_s1_forward(x, p, cache)
    n = x.shape[0]
    co = p.weight.shape[0]
    cols, ho, wo = _im2col(x, p)
    out = cols @ _weight_matrix(p).T
    out += p.bias
    if cache is not None:
        cache["cols"] = cols
    return out.reshape(n, ho, wo, co).transpose(0, 3, 1, 2)


def conv2d_backward(x: np.ndarray, p: LayerParams, grad_out: np.ndarray,
                    cache: dict | None = None) -> tuple[np.ndarray, LayerGrads]:
    _check_conv_input(x, p)
    if p.stride == 1:
        return _conv_s1_backward(x, p, grad_out, cache)
    n, c, h, w = x.shape
    co, _, k, _ = p.weight.shape
    s, pad = p.stride, p.padding
    if cache is not None and "cols" in cache:
        cols = cache["cols"]
        ho, wo = grad_out.shape[2:]
    else:
        cols, ho, wo = _im2col(x, p)
    if grad_out.shape != (n, co, ho, wo):
        raise ValueError(f"conv2d_backward: grad_out shape {grad_out.shape}, expected {(n, co, ho, wo)}")

    g = grad_out.transpose(0, 2, 3, 1).reshape(n * ho * wo, co)
    grad_w = (g.T @ cols).reshape(co, k, k, c).transpose(0, 3, 1, 2)
    grad_b = g.sum(axis=0)
    dcols = (g @ _weight_matrix(p)).reshape(n, ho, wo, k, k, c)

    gx = np.zeros((n, h + 2 * pad, w + 2 * pad, c), dtype=dcols.dtype)
    for i in range(k):
        for j in range(k):
            gx[:, i:i + s * ho:s, j:j + s * wo:s, :] += dcols[:, :, :, i, j, :]
    gx = gx[:, pad:pad + h, pad:pad + w, :]
    return gx.transpose(0, 3, 1, 2), LayerGrads(np.ascontiguousarray(grad_w), grad_b)


# -- batch norm -------------------------------------------------------------

def batchnorm_forward(x: np.ndarray, p: LayerParams, training: bool,
                      cache: dict | None = None) -> np.ndarray:
    """Per-channel normalization; updates running stats in training mode."""
    if x.ndim != 4 or x.shape[1] != p.weight.shape[0]:
        raise ValueError(f"batchnorm over {p.weight.shape[0]} channels got input {x.shape}")
    shape = (1, -1, 1, 1)
    if training:
        if x.shape[0] < 2:
            raise ValueError("batchnorm in training mode needs a batch of at least 2")
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        m = x.shape[0] * x.shape[2] * x.shape[3]
        mom = p.momentum
        p.running_mean *= 1 - mom
        p.running_mean += mom * mean
        p.running_var *= 1 - mom
        p.running_var += mom * var * (m / (m - 1))
    else:
        mean, var = p.running_mean, p.running_var
    inv_std = 1.0 / np.sqrt(var + p.eps)
    xhat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
    if cache is not None:
        cache["xhat"] = xhat
        cache["inv_std"] = inv_std
    return xhat * p.weight.reshape(shape) + p.bias.reshape(shape)


def batchnorm_backward(x: np.ndarray, p: LayerParams, grad_out: np.ndarray,
                       training: bool = True,
                       cache: dict | None = None) -> tuple[np.ndarray, LayerGrads]:
    shape = (1, -1, 1, 1)
    if cache is not None and "xhat" in cache:
        xhat, inv_std = cache["xhat"], cache["inv_std"]
    else:
        if training:
            mean, var = x.mean(axis=(0, 2, 3)), x.var(axis=(0, 2, 3))
        else:
            mean, var = p.running_mean, p.running_var
        inv_std = 1.0 / np.sqrt(var + p.eps)
        xhat = (x - mean.reshape(shape)) * inv_std.reshape(shape)

    grad_gamma = (grad_out * xhat).sum(axis=(0, 2, 3))
    grad_beta = grad_out.sum(axis=(0, 2, 3))
    dxhat = grad_out * p.weight.reshape(shape)
    if not training:
        return dxhat * inv_std.reshape(shape), LayerGrads(grad_gamma, grad_beta)

    m = x.shape[0] * x.shape[2] * x.shape[3]
    mean_d = dxhat.sum(axis=(0, 2, 3)).reshape(shape) / m
    mean_dx = (dxhat * xhat).sum(axis=(0, 2, 3)).reshape(shape) / m
    grad_x = (dxhat - mean_d - xhat * mean_dx) * inv_std.reshape(shape)
    return grad_x, LayerGrads(grad_gamma, grad_beta)


# -- relu -------------------------------------------------------------------

def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0)


# -- max pool ---------------------------------------------------------------

def _pool_windows(x: np.ndarray, k: int) -> np.ndarray:
    n, c, h, w = x.shape
    if h % k or w % k:
        raise ConfigError(f"pool window {k} does not divide spatial dims {h}x{w}")
    return (x.reshape(n, c, h // k, k, w // k, k)
             .transpose(0, 1, 2, 4, 3, 5)
             .reshape(n, c, h // k, w // k, k * k))


def maxpool2d_forward(x: np.ndarray, p: LayerParams | None = None,
                      cache: dict | None = None) -> np.ndarray:
    k = 2 if p is None else p.kernel
    win = _pool_windows(x, k)
    idx = win.argmax(axis=-1)  # first maximum in row-major window order
    if cache is not None:
        cache["argmax"] = idx
    return np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]


def maxpool2d_backward(x: np.ndarray, p: LayerParams | None, grad_out: np.ndarray,
                       cache: dict | None = None) -> np.ndarray:
    k = 2 if p is None else p.kernel
    n, c, h, w = x.shape
    if cache is not None and "argmax" in cache:
        idx = cache["argmax"]
    else:
        idx = _pool_windows(x, k).argmax(axis=-1)
    g = np.zeros((n, c, h // k, w // k, k * k), dtype=grad_out.dtype)
    np.put_along_axis(g, idx[..., None], grad_out[..., None], axis=-1)
    return (g.reshape(n, c, h // k, w // k, k, k)
             .transpose(0, 1, 2, 4, 3, 5)
             .reshape(n, c, h, w))


# -- fully connected --------------------------------------------------------

def fc_forward(x: np.ndarray, p: LayerParams) -> np.ndarray:
    """Dense layer; inputs of rank > 2 are flattened per sample first."""
    flat = x.reshape(x.shape[0], -1)
    if flat.shape[1] != p.weight.shape[1]:
        raise ValueError(f"fc expects {p.weight.shape[1]} features, got {flat.shape[1]}")
    return flat @ p.weight.T + p.bias


def fc_backward(x: np.ndarray, p: LayerParams,
                grad_out: np.ndarray) -> tuple[np.ndarray, LayerGrads]:
    flat = x.reshape(x.shape[0], -1)
    grad_w = grad_out.T @ flat
    grad_b = grad_out.sum(axis=0)
    return (grad_out @ p.weight).reshape(x.shape), LayerGrads(grad_w, grad_b)


# -- softmax / cross entropy ------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_ce(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of softmax(logits) and its gradient wrt the logits."""
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2:
        raise ValueError(f"logits must be (N, K), got {logits.shape}")
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k}), got {labels.min()}..{labels.max()}")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(log_norm - z[rows, labels]))
    grad = np.exp(z - log_norm[:, None])
    grad[rows, labels] -= 1
    return loss, grad / n


__all__ = [
    "LayerKind", "LayerParams", "LayerGrads", "ConfigError",
    "conv2d", "batchnorm", "relu", "maxpool2d", "fully_connected",
    "conv_output_size",
    "conv2d_forward", "conv2d_backward",
    "batchnorm_forward", "batchnorm_backward",
    "relu_forward", "relu_backward",
    "maxpool2d_forward", "maxpool2d_backward",
    "fc_forward", "fc_backward",
    "softmax", "softmax_ce",
]
