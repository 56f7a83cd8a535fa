"""Residual CNN builder: stem conv, five residual blocks, two max pools, one FC.

The default :class:`ModelConfig` is the reference layout of exactly 32
conv2d layers (1 stem + 5x6 residual + 1 projection), 2 max pools and
1 fully connected layer. Every block is a run of residual units; a unit
wraps one conv (``SkipMode.SINGLE``) or two convs (``SkipMode.DOUBLE``)::

    out = relu(bn(conv(x)) + shortcut(x))

``shortcut`` is the identity, or a 1x1 projection conv where the channel
count changes. The last batch-norm gamma of each unit starts at zero, so a
freshly built unit passes its (projected, rectified) input straight through.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .nn import LayerGrads, LayerKind, LayerParams

KERNEL = 3


class SkipMode(str, enum.Enum):
    SINGLE = "single"
    DOUBLE = "double"

    @property
    def span(self) -> int:
        return 1 if self is SkipMode.SINGLE else 2


class ModelConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description.

    ``maxpool_after`` holds 1-based block numbers. ``reference_arch`` marks a
    config that claims the 32/2/1 reference layout; :meth:`validate` then
    enforces those counts.
    """

    input_shape: tuple[int, int, int] = (4, 32, 32)
    num_classes: int = 2
    block_convs: tuple[int, ...] = (6, 6, 6, 6, 6)
    channels: tuple[int, ...] = (16, 16, 32, 32, 32)
    skip_mode: SkipMode = SkipMode.SINGLE
    stem: bool = True
    maxpool_after: tuple[int, ...] = (2, 4)
    reference_arch: bool = True

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "block_convs", tuple(int(v) for v in self.block_convs))
        object.__setattr__(self, "channels", tuple(int(v) for v in self.channels))
        object.__setattr__(self, "maxpool_after", tuple(sorted(int(v) for v in self.maxpool_after)))
        object.__setattr__(self, "skip_mode", SkipMode(self.skip_mode))

    def projection_blocks(self) -> list[int]:
        """0-based indices of blocks whose first unit needs a projection."""
        c_in = self.channels[0] if self.stem else self.input_shape[0]
        out = []
        for b, c in enumerate(self.channels):
            if c != c_in:
                out.append(b)
            c_in = c
        return out

    def expected_counts(self) -> tuple[int, int, int]:
        convs = int(self.stem) + sum(self.block_convs) + len(self.projection_blocks())
        return convs, len(self.maxpool_after), 1

    def validate(self) -> "ModelConfig":
        c, h, w = self.input_shape
        if min(c, h, w) < 1:
            raise ModelConfigError(f"input_shape must be positive, got {self.input_shape}")
        if self.num_classes < 2:
            raise ModelConfigError("num_classes must be at least 2")
        if not self.block_convs or len(self.block_convs) != len(self.channels):
            raise ModelConfigError(
                f"block_convs ({len(self.block_convs)}) and channels ({len(self.channels)}) "
                "must be non-empty and the same length")
        if min(self.block_convs) < 1 or min(self.channels) < 1:
            raise ModelConfigError("every block needs at least one conv and one channel")
        span = self.skip_mode.span
        if any(n % span for n in self.block_convs):
            raise ModelConfigError(
                f"{self.skip_mode.value} skips need block conv counts divisible by {span}, "
                f"got {self.block_convs}")
        nblocks = len(self.block_convs)
        if len(set(self.maxpool_after)) != len(self.maxpool_after) or any(
                not 1 <= b <= nblocks for b in self.maxpool_after):
            raise ModelConfigError(
                f"maxpool_after must name distinct blocks in 1..{nblocks}, got {self.maxpool_after}")
        factor = 2 ** len(self.maxpool_after)
        if h % factor or w % factor:
            raise ModelConfigError(
                f"input {h}x{w} is not divisible by {factor} through {len(self.maxpool_after)} max pools")
        if self.reference_arch:
            if nblocks != 5:
                raise ModelConfigError(f"reference layout has 5 blocks, config has {nblocks}")
            counts = self.expected_counts()
            if counts != (32, 2, 1):
                raise ModelConfigError(
                    f"reference layout needs 32 convs / 2 pools / 1 fc, config gives {counts}")
        return self


@dataclass(frozen=True)
class Unit:
    """One residual unit, as indices into ``Model.layers``."""

    block: int
    main: tuple[int, ...]  # conv/bn/relu chain ending at the last bn
    relu: int  # post-addition relu
    proj: int | None = None
    skip: bool = True


@dataclass
class Model:
    config: ModelConfig
    layers: list[LayerParams]
    plan: list  # int (plain layer index) or Unit, in execution order
    _tape: dict = field(default_factory=dict, repr=False)

    # -- structure --------------------------------------------------------

    @property
    def units(self) -> list[Unit]:
        return [s for s in self.plan if isinstance(s, Unit)]

    @property
    def skip_edges(self) -> list[tuple[int, int]]:
        return [(u.main[0], u.relu) for u in self.units if u.skip]

    def block_units(self, block: int) -> list[Unit]:
        return [u for u in self.units if u.block == block]

    def count_layers(self) -> tuple[int, int, int]:
        kinds = [p.kind for p in self.layers]
        return (kinds.count(LayerKind.CONV2D), kinds.count(LayerKind.MAXPOOL2D),
                kinds.count(LayerKind.FC))

    @property
    def dtype(self):
        return self.layers[0].weight.dtype

    def named_arrays(self, buffers: bool = True) -> list[tuple[str, np.ndarray]]:
        """Parameters (and optionally BN running stats) in canonical order."""
        out = []
        for i, p in enumerate(self.layers):
            for name, arr in p.trainable().items():
                out.append((f"layers.{i}.{name}", arr))
            if buffers:
                for name, arr in p.buffers().items():
                    out.append((f"layers.{i}.{name}", arr))
        return out

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        return self.named_arrays(buffers=False)

    def astype(self, dtype) -> "Model":
        m = self.copy()
        for p in m.layers:
            for attr in ("weight", "bias", "running_mean", "running_var"):
                arr = getattr(p, attr)
                if arr is not None:
                    setattr(p, attr, arr.astype(dtype))
        return m

    def copy(self) -> "Model":
        return Model(self.config, copy.deepcopy(self.layers), list(self.plan))

    def without_skip(self, unit_index: int) -> "Model":
        """Copy with one unit's skip addition removed (for topology checks)."""
        m = self.copy()
        target = self.units[unit_index]
        m.plan = [replace(s, skip=False) if s is target else s for s in m.plan]
        return m

    # -- forward / backward ----------------------------------------------

    def _layer_forward(self, i, x, training, tape):
        p = self.layers[i]
        cache = {} if tape is not None else None
        if p.kind is LayerKind.CONV2D:
            out = nn.conv2d_forward(x, p, cache)
        elif p.kind is LayerKind.BATCHNORM:
            out = nn.batchnorm_forward(x, p, training, cache)
        elif p.kind is LayerKind.RELU:
            out = nn.relu_forward(x)
        elif p.kind is LayerKind.MAXPOOL2D:
            out = nn.maxpool2d_forward(x, p, cache)
        elif p.kind is LayerKind.FC:
            out = nn.fc_forward(x, p)
        else:
            raise RuntimeError(f"layer kind {p.kind} cannot appear inside a model")
        if tape is not None:
            tape[i] = (x, cache, training)
        return out

    def _layer_backward(self, i, g, grads):
        p = self.layers[i]
        x, cache, training = self._tape[i]
        if p.kind is LayerKind.CONV2D:
            gx, grads[i] = nn.conv2d_backward(x, p, g, cache)
        elif p.kind is LayerKind.BATCHNORM:
            gx, grads[i] = nn.batchnorm_backward(x, p, g, training, cache)
        elif p.kind is LayerKind.RELU:
            gx = nn.relu_backward(x, g)
        elif p.kind is LayerKind.MAXPOOL2D:
            gx = nn.maxpool2d_backward(x, p, g, cache)
        else:
            gx, grads[i] = nn.fc_backward(x, p, g)
        return gx

    def _unit_forward(self, u: Unit, x, training, tape):
        h = x
        for i in u.main:
            h = self._layer_forward(i, h, training, tape)
        if u.skip:
            shortcut = x if u.proj is None else self._layer_forward(u.proj, x, training, tape)
            if shortcut.shape != h.shape:
                raise RuntimeError(
                    f"skip junction shape mismatch in block {u.block + 1}: "
                    f"{shortcut.shape} vs {h.shape}")
            h = h + shortcut
        return self._layer_forward(u.relu, h, training, tape)

    def _unit_backward(self, u: Unit, g, grads):
        g = self._layer_backward(u.relu, g, grads)
        gm = g
        for i in reversed(u.main):
            gm = self._layer_backward(i, gm, grads)
        if not u.skip:
            return gm
        gs = g if u.proj is None else self._layer_backward(u.proj, g, grads)
        return gm + gs

    def _check_input(self, x):
        expected = self.config.input_shape
        if x.ndim != 4 or x.shape[1:] != expected:
            raise ValueError(f"model expects input (N, {', '.join(map(str, expected))}), got {x.shape}")

    def forward(self, x: np.ndarray, training: bool = False, keep: bool | None = None) -> np.ndarray:
        """Logits for a batch. ``keep`` (default: ``training``) records what
        :meth:`backward` needs."""
        x = np.asarray(x, dtype=self.dtype)
        self._check_input(x)
        keep = training if keep is None else keep
        tape = {} if keep else None
        h = x
        for stage in self.plan:
            if isinstance(stage, Unit):
                h = self._unit_forward(stage, h, training, tape)
            else:
                h = self._layer_forward(stage, h, training, tape)
        self._tape = tape if tape is not None else {}
        return h

    def backward(self, grad_logits: np.ndarray) -> tuple[np.ndarray, dict[int, LayerGrads]]:
        """Gradients wrt the input of the last kept forward pass and wrt every
        trainable layer, keyed by layer index."""
        if not self._tape:
            raise RuntimeError("backward() needs a preceding forward(..., keep=True)")
        grads: dict[int, LayerGrads] = {}
        g = grad_logits
        for stage in reversed(self.plan):
            if isinstance(stage, Unit):
                g = self._unit_backward(stage, g, grads)
            else:
                g = self._layer_backward(stage, g, grads)
        return g, grads

    def block_forward(self, block: int, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Run only the residual units of ``block`` (0-based)."""
        h = np.asarray(x, dtype=self.dtype)
        for u in self.block_units(block):
            h = self._unit_forward(u, h, training, None)
        return h

    def block_input(self, block: int, x: np.ndarray) -> np.ndarray:
        """Inference-mode activation entering ``block`` for model input ``x``."""
        h = np.asarray(x, dtype=self.dtype)
        for stage in self.plan:
            if isinstance(stage, Unit):
                if stage.block == block:
                    return h
                h = self._unit_forward(stage, h, False, None)
            else:
                h = self._layer_forward(stage, h, False, None)
        raise IndexError(f"model has no block {block}")


def _he_conv(rng, c_out, c_in, k, dtype):
    std = np.sqrt(2.0 / (c_in * k * k))
    return (rng.standard_normal((c_out, c_in, k, k)) * std).astype(dtype)


def build(config: ModelConfig | None = None, seed: int = 0, dtype=np.float64) -> Model:
    """Instantiate ``config`` with He-normal conv weights drawn from ``seed``."""
    config = (config or ModelConfig()).validate()
    rng = np.random.default_rng(seed)
    layers: list[LayerParams] = []
    plan: list = []

    def add(p: LayerParams) -> int:
        layers.append(p)
        return len(layers) - 1

    def conv_bn(c_in, c_out):
        conv = add(nn.conv2d(_he_conv(rng, c_out, c_in, KERNEL, dtype), padding=KERNEL // 2))
        bn = add(nn.batchnorm(c_out, dtype=dtype))
        return conv, bn

    c_in, h, w = config.input_shape
    if config.stem:
        conv, bn = conv_bn(c_in, config.channels[0])
        plan += [conv, bn, add(nn.relu())]
        c_in = config.channels[0]

    proj_blocks = set(config.projection_blocks())
    span = config.skip_mode.span
    for b, (n_convs, c_out) in enumerate(zip(config.block_convs, config.channels)):
        for u in range(n_convs // span):
            proj = None
            if u == 0 and b in proj_blocks:
                proj = add(nn.conv2d(_he_conv(rng, c_out, c_in, 1, dtype)))
            main = []
            for s in range(span):
                conv, bn = conv_bn(c_in, c_out)
                main += [conv, bn]
                c_in = c_out
                if s < span - 1:
                    main.append(add(nn.relu()))
            layers[main[-1]].weight[:] = 0  # identity at init
            plan.append(Unit(block=b, main=tuple(main), relu=add(nn.relu()), proj=proj))
        if b + 1 in config.maxpool_after:
            plan.append(add(nn.maxpool2d(2)))
            h, w = h // 2, w // 2

    d_in = c_in * h * w
    fc_w = (rng.standard_normal((config.num_classes, d_in)) * np.sqrt(1.0 / d_in)).astype(dtype)
    plan.append(add(nn.fully_connected(fc_w)))

    model = Model(config, layers, plan)
    counts = model.count_layers()
    if counts != config.expected_counts():
        raise RuntimeError(f"builder produced {counts}, config walk says {config.expected_counts()}")
    return model


def forward(model: Model, x: np.ndarray, training: bool = False) -> np.ndarray:
    return model.forward(x, training=training)


def count_layers(model: Model) -> tuple[int, int, int]:
    return model.count_layers()
