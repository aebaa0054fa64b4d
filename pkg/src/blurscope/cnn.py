"""Small convolutional blur classifier written directly in numpy.

Activations are ``[channels, height, width]`` float64 arrays, one image at a
time.  The network is described by a list of :class:`LayerSpec` and the
default stack is::

    Conv3x3(1->8)+ReLU, MaxPool2x2, Conv3x3(8->16)+ReLU, MaxPool2x2,
    Dense(16*(s/4)**2 -> 32)+ReLU, Dense(32 -> 1)+Sigmoid

for a square input of side ``s``.  The sigmoid output is the probability
that the image is blurry.
"""
from __future__ import annotations

import enum
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BadMagic,
    ShapeMismatch,
    OddExtent,
    SingleClassDataset,
    Truncated,
    VersionMismatch,
)
from .imageio import GrayImage, Label, LabeledDataset, load_image, resize_bilinear

log = logging.getLogger(__name__)

__all__ = [
    "LayerKind",
    "Activation",
    "LayerSpec",
    "CnnModel",
    "TrainConfig",
    "EpochStats",
    "default_architecture",
    "conv3x3_forward",
    "conv3x3_backward",
    "maxpool2x2_forward",
    "maxpool2x2_backward",
    "dense_forward",
    "relu",
    "sigmoid",
    "bce_loss",
    "forward",
    "backward",
    "init_weights",
    "sgd_step",
    "train",
    "predict",
    "save_model",
    "load_model",
    "dumps_model",
    "loads_model",
]

P_CLAMP = 1e-7


class LayerKind(enum.IntEnum):
    CONV3X3 = 0
    MAXPOOL2X2 = 1
    DENSE = 2


class Activation(enum.IntEnum):
    NONE = 0
    RELU = 1
    SIGMOID = 2


@dataclass(frozen=True)
class LayerSpec:
    """One layer.  ``n_in``/``n_out`` are channels for Conv3x3, features for Dense."""

    kind: LayerKind
    n_in: int = 0
    n_out: int = 0
    activation: Activation = Activation.NONE

    @classmethod
    def conv(cls, n_in, n_out, activation=Activation.RELU):
        return cls(LayerKind.CONV3X3, n_in, n_out, activation)

    @classmethod
    def pool(cls):
        return cls(LayerKind.MAXPOOL2X2)

    @classmethod
    def dense(cls, n_in, n_out, activation=Activation.RELU):
        return cls(LayerKind.DENSE, n_in, n_out, activation)

    @property
    def has_params(self) -> bool:
        return self.kind is not LayerKind.MAXPOOL2X2

    def param_shapes(self) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
        if self.kind is LayerKind.CONV3X3:
            return (self.n_out, self.n_in, 3, 3), (self.n_out,)
        if self.kind is LayerKind.DENSE:
            return (self.n_out, self.n_in), (self.n_out,)
        return None

    def fan_in(self) -> int:
        return self.n_in * 9 if self.kind is LayerKind.CONV3X3 else self.n_in

    def dims(self) -> tuple[int, int, int, int]:
        if self.kind is LayerKind.CONV3X3:
            return (self.n_in, self.n_out, 3, 3)
        if self.kind is LayerKind.DENSE:
            return (self.n_in, self.n_out, 0, 0)
        return (0, 0, 0, 0)


def default_architecture(input_side: int = 64) -> list[LayerSpec]:
    flat = 16 * (input_side // 4) ** 2
    return [
        LayerSpec.conv(1, 8),
        LayerSpec.pool(),
        LayerSpec.conv(8, 16),
        LayerSpec.pool(),
        LayerSpec.dense(flat, 32),
        LayerSpec.dense(32, 1, Activation.SIGMOID),
    ]


def layer_shapes(layers: Sequence[LayerSpec], input_side: int) -> list[tuple[int, ...]]:
    """Activation shapes from the input through every layer; raises on a broken chain."""
    shape: tuple[int, ...] = (1, input_side, input_side)
    shapes = [shape]
    for k, layer in enumerate(layers):
        if layer.kind is LayerKind.CONV3X3:
            if len(shape) != 3 or shape[0] != layer.n_in:
                raise ShapeMismatch(f"layer {k}: conv expects {layer.n_in} channels, got {shape}")
            shape = (layer.n_out, shape[1], shape[2])
        elif layer.kind is LayerKind.MAXPOOL2X2:
            if len(shape) != 3:
                raise ShapeMismatch(f"layer {k}: pooling needs a [C,H,W] input, got {shape}")
            if shape[1] % 2 or shape[2] % 2:
                raise OddExtent(f"layer {k}: cannot pool odd extent {shape}")
            shape = (shape[0], shape[1] // 2, shape[2] // 2)
        else:
            n = math.prod(shape)
            if n != layer.n_in:
                raise ShapeMismatch(f"layer {k}: dense expects {layer.n_in} inputs, got {n}")
            shape = (layer.n_out,)
        shapes.append(shape)
    return shapes


@dataclass(eq=False)
class CnnModel:
    layers: tuple[LayerSpec, ...]
    params: list[tuple[np.ndarray, np.ndarray] | None]
    input_side: int

    def __post_init__(self):
        self.layers = tuple(self.layers)
        if len(self.params) != len(self.layers):
            raise ShapeMismatch("one parameter slot per layer is required")
        shapes = layer_shapes(self.layers, self.input_side)
        if shapes[-1] != (1,) or self.layers[-1].activation is not Activation.SIGMOID:
            raise ShapeMismatch("the last layer must output one value through a sigmoid")
        for k, (layer, p) in enumerate(zip(self.layers, self.params)):
            expected = layer.param_shapes()
            got = None if p is None else (p[0].shape, p[1].shape)
            if expected != got:
                raise ShapeMismatch(f"layer {k}: parameters {got} do not match {expected}")

    def __eq__(self, other):
        if not isinstance(other, CnnModel):
            return NotImplemented
        if self.layers != other.layers or self.input_side != other.input_side:
            return False
        for a, b in zip(self.params, other.params):
            if (a is None) != (b is None):
                return False
            if a is not None and not all(
                x.tobytes() == y.tobytes() for x, y in zip(a, b)
            ):
                return False
        return True

    def copy(self) -> CnnModel:
        params = [None if p is None else (p[0].copy(), p[1].copy()) for p in self.params]
        return CnnModel(self.layers, params, self.input_side)

    def parameter_count(self) -> int:
        return sum(w.size + b.size for p in self.params if p is not None for w, b in [p])


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 0.05
    batch_size: int = 16
    seed: int = 0
    input_side: int = 64

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.input_side < 4 or self.input_side % 4:
            raise ValueError(f"input side must be a positive multiple of 4, got {self.input_side}")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_loss: float
    train_accuracy: float


# ---------------------------------------------------------------------------
# layer primitives

def _im2col3x3(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    cols = np.empty((c, 3, 3, h, w))
    for i in range(3):
        for j in range(3):
            cols[:, i, j] = padded[:, i:i + h, j:j + w]
    return cols.reshape(c * 9, h * w)


def conv3x3_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Zero-padded, stride-1 3x3 correlation of ``x [C,H,W]`` with ``weights [F,C,3,3]``."""
    if x.ndim != 3 or weights.ndim != 4 or weights.shape[1:] != (x.shape[0], 3, 3):
        raise ShapeMismatch(f"conv weights {weights.shape} do not fit input {x.shape}")
    if bias.shape != (weights.shape[0],):
        raise ShapeMismatch(f"conv bias {bias.shape} does not fit weights {weights.shape}")
    f = weights.shape[0]
    _, h, w = x.shape
    out = weights.reshape(f, -1) @ _im2col3x3(x) + bias[:, None]
    return out.reshape(f, h, w)


def conv3x3_backward(x: np.ndarray, weights: np.ndarray, dout: np.ndarray):
    """Gradients of a 3x3 conv with respect to input, weights and bias."""
    c, h, w = x.shape
    f = weights.shape[0]
    dout2 = dout.reshape(f, h * w)
    cols = _im2col3x3(x)
    dw = (dout2 @ cols.T).reshape(weights.shape)
    db = dout2.sum(axis=1)
    dcols = (weights.reshape(f, -1).T @ dout2).reshape(c, 3, 3, h, w)
    dpad = np.zeros((c, h + 2, w + 2))
    for i in range(3):
        for j in range(3):
            dpad[:, i:i + h, j:j + w] += dcols[:, i, j]
    return dpad[:, 1:-1, 1:-1], dw, db


def maxpool2x2_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 max pooling with stride 2.

    Returns the pooled map and, per output cell, the index (0..3, row-major)
    of the winning element inside its block; ties go to the lowest index.
    """
    if x.ndim != 3:
        raise ShapeMismatch(f"pooling needs a [C,H,W] input, got {x.shape}")
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise OddExtent(f"cannot pool odd extent {x.shape}")
    blocks = x.reshape(c, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h // 2, w // 2, 4)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, arg


def maxpool2x2_backward(dout: np.ndarray, argmax: np.ndarray) -> np.ndarray:
    c, h2, w2 = dout.shape
    blocks = np.zeros((c, h2, w2, 4))
    np.put_along_axis(blocks, argmax[..., None], dout[..., None], axis=-1)
    return blocks.reshape(c, h2, w2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h2 * 2, w2 * 2)


def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    x = x.ravel()
    if weights.ndim != 2 or weights.shape[1] != x.size or bias.shape != (weights.shape[0],):
        raise ShapeMismatch(f"dense weights {weights.shape} / bias {bias.shape} do not fit {x.size} inputs")
    return weights @ x + bias


def relu(x):
    return np.maximum(x, 0.0)


_EXP_LIMIT = 700.0  # exp(-700) ~ 1e-304 is still a normal float
_ALMOST_ONE = np.nextafter(1.0, 0.0)


def sigmoid(x):
    """Logistic function, evaluated without overflow and kept strictly inside (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.minimum(np.abs(x), _EXP_LIMIT))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    out = np.minimum(out, _ALMOST_ONE)
    return float(out) if out.ndim == 0 else out


def bce_loss(p: float, y: float) -> tuple[float, float]:
    """Binary cross-entropy and its derivative with respect to ``p``.

    ``p`` is clamped to ``[1e-7, 1 - 1e-7]`` first, bounding the loss near 16.12.
    """
    p = min(max(float(p), P_CLAMP), 1.0 - P_CLAMP)
    loss = -(y * math.log(p) + (1 - y) * math.log(1 - p))
    grad = -y / p + (1 - y) / (1 - p)
    return loss, grad


# ---------------------------------------------------------------------------
# whole-network passes

def _activate(pre, activation):
    if activation is Activation.RELU:
        return relu(pre)
    if activation is Activation.SIGMOID:
        return sigmoid(pre)
    return pre


def forward(model: CnnModel, x: np.ndarray, cache: list | None = None) -> float:
    """Run the network on one ``[1, s, s]`` input and return the output logit.

    When ``cache`` is a list it receives per-layer intermediates for :func:`backward`.
    """
    a = x
    last = len(model.layers) - 1
    for k, (layer, p) in enumerate(zip(model.layers, model.params)):
        if layer.kind is LayerKind.CONV3X3:
            pre = conv3x3_forward(a, *p)
            aux = None
        elif layer.kind is LayerKind.MAXPOOL2X2:
            pre, aux = maxpool2x2_forward(a)
        else:
            pre = dense_forward(a, *p)
            aux = a.shape
        if cache is not None:
            cache.append((a, pre, aux))
        if k == last:
            return float(pre[0])
        a = _activate(pre, layer.activation)
    raise AssertionError("unreachable")


def backward(model: CnnModel, x: np.ndarray, y: float):
    """Gradients of the BCE loss for one sample.

    Returns ``(loss, p, grads)``; ``grads`` mirrors ``model.params`` with
    ``(dW, db)`` per parameterised layer and ``None`` for pooling layers.
    The sigmoid and loss are differentiated together, so the logit
    receives ``p - y``.
    """
    cache: list = []
    z = forward(model, x, cache)
    p = sigmoid(z)
    loss, _ = bce_loss(p, y)
    grads: list = [None] * len(model.layers)
    d = np.array([p - y])
    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        a_in, pre, aux = cache[k]
        if k != len(model.layers) - 1:
            if layer.activation is Activation.RELU:
                d = d * (pre > 0)
            elif layer.activation is Activation.SIGMOID:
                s = sigmoid(pre)
                d = d * s * (1 - s)
        if layer.kind is LayerKind.CONV3X3:
            w, _ = model.params[k]
            d, dw, db = conv3x3_backward(a_in, w, d)
            grads[k] = (dw, db)
        elif layer.kind is LayerKind.MAXPOOL2X2:
            d = maxpool2x2_backward(d, aux)
        else:
            w, _ = model.params[k]
            grads[k] = (np.outer(d, a_in.ravel()), d.copy())
            d = (w.T @ d).reshape(aux)
    return loss, p, grads


def init_weights(layers: Sequence[LayerSpec], input_side: int, seed: int) -> CnnModel:
    """He initialisation: weights ~ N(0, 2 / fan_in), biases zero."""
    layer_shapes(layers, input_side)
    rng = np.random.default_rng(seed)
    params = []
    for layer in layers:
        shapes = layer.param_shapes()
        if shapes is None:
            params.append(None)
            continue
        wshape, bshape = shapes
        w = rng.standard_normal(wshape) * math.sqrt(2.0 / layer.fan_in())
        params.append((w, np.zeros(bshape)))
    return CnnModel(tuple(layers), params, input_side)


def sgd_step(model: CnnModel, grads, learning_rate: float) -> CnnModel:
    """Plain gradient descent update; returns a new model."""
    if len(grads) != len(model.params):
        raise ShapeMismatch("gradient list does not match the model's layers")
    params = []
    for p, g in zip(model.params, grads):
        if p is None:
            if g is not None:
                raise ShapeMismatch("gradient given for a layer without parameters")
            params.append(None)
            continue
        if g is None or g[0].shape != p[0].shape or g[1].shape != p[1].shape:
            raise ShapeMismatch("gradient shapes do not match parameters")
        params.append((p[0] - learning_rate * g[0], p[1] - learning_rate * g[1]))
    return CnnModel(model.layers, params, model.input_side)


# ---------------------------------------------------------------------------
# training and inference

def prepare_input(image: GrayImage, side: int) -> np.ndarray:
    return resize_bilinear(image, side, side).pixels[None].copy()


def _target(label: Label) -> float:
    return 1.0 if label is Label.BLURRY else 0.0


def mean_loss(model: CnnModel, inputs: Sequence[np.ndarray], targets: Sequence[float]) -> float:
    total = 0.0
    for x, y in zip(inputs, targets):
        total += bce_loss(sigmoid(forward(model, x)), y)[0]
    return total / len(inputs)


def train_arrays(
    inputs: Sequence[np.ndarray],
    targets: Sequence[float],
    config: TrainConfig,
    layers: Sequence[LayerSpec] | None = None,
    on_epoch: Callable[[EpochStats], None] | None = None,
) -> CnnModel:
    """Minibatch SGD on preprocessed ``[1, s, s]`` inputs with 0/1 targets."""
    n = len(inputs)
    if n == 0:
        raise SingleClassDataset("cannot train on an empty dataset")
    if len(set(targets)) < 2:
        raise SingleClassDataset("training data must contain both blurry and sharp samples")
    if layers is None:
        layers = default_architecture(config.input_side)
    init_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(2)
    model = init_weights(layers, config.input_side, int(init_seq.generate_state(1)[0]))
    rng = np.random.default_rng(shuffle_seq)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            acc = None
            for i in batch:
                loss, p, g = backward(model, inputs[i], targets[i])
                loss_sum += loss
                correct += (p >= 0.5) == (targets[i] == 1.0)
                if acc is None:
                    acc = [None if t is None else [t[0].copy(), t[1].copy()] for t in g]
                else:
                    for a, t in zip(acc, g):
                        if a is not None:
                            a[0] += t[0]
                            a[1] += t[1]
            scale = 1.0 / len(batch)
            mean_grads = [None if a is None else (a[0] * scale, a[1] * scale) for a in acc]
            model = sgd_step(model, mean_grads, config.learning_rate)
        stats = EpochStats(epoch, loss_sum / n, correct / n)
        log.info("epoch %d loss %.6f acc %.4f", stats.epoch, stats.mean_loss, stats.train_accuracy)
        if on_epoch is not None:
            on_epoch(stats)
    return model


def train(
    dataset: LabeledDataset,
    config: TrainConfig = TrainConfig(),
    layers: Sequence[LayerSpec] | None = None,
    on_epoch: Callable[[EpochStats], None] | None = None,
) -> CnnModel:
    """Load, resize and train on every sample of ``dataset``."""
    if len(dataset) == 0 or dataset.count(Label.BLURRY) == 0 or dataset.count(Label.SHARP) == 0:
        raise SingleClassDataset("training data must contain both blurry and sharp samples")
    inputs = [prepare_input(load_image(s.path), config.input_side) for s in dataset]
    targets = [_target(s.label) for s in dataset]
    return train_arrays(inputs, targets, config, layers, on_epoch)


def predict(model: CnnModel, image: GrayImage) -> tuple[float, Label]:
    """Probability of blur and the verdict; ``p >= 0.5`` counts as blurry."""
    p = sigmoid(forward(model, prepare_input(image, model.input_side)))
    return p, Label.BLURRY if p >= 0.5 else Label.SHARP


# ---------------------------------------------------------------------------
# model file: little-endian, magic, version, input side, layer table, f64 params

MAGIC = b"BLRCNN01"
VERSION = 1
_HEADER = struct.Struct("<8sIII")
_LAYER = struct.Struct("<BB4I")


def dumps_model(model: CnnModel) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION, model.input_side, len(model.layers))]
    for layer in model.layers:
        parts.append(_LAYER.pack(layer.kind, layer.activation, *layer.dims()))
    for p in model.params:
        if p is not None:
            parts.extend(np.ascontiguousarray(t, dtype="<f8").tobytes() for t in p)
    return b"".join(parts)


def loads_model(data: bytes) -> CnnModel:
    if len(data) < 8 or data[:8] != MAGIC:
        raise BadMagic(f"not a blurscope model file (magic {data[:8]!r})")
    if len(data) < _HEADER.size:
        raise Truncated("model header is incomplete")
    _, version, input_side, n_layers = _HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionMismatch(f"model file version {version}, expected {VERSION}")
    pos = _HEADER.size
    layers = []
    for _ in range(n_layers):
        if pos + _LAYER.size > len(data):
            raise Truncated("layer table is incomplete")
        kind, act, d0, d1, _, _ = _LAYER.unpack_from(data, pos)
        pos += _LAYER.size
        try:
            layers.append(LayerSpec(LayerKind(kind), d0, d1, Activation(act)))
        except ValueError as exc:
            raise ValueError(f"corrupt layer table: {exc}") from None
    params = []
    for layer in layers:
        shapes = layer.param_shapes()
        if shapes is None:
            params.append(None)
            continue
        tensors = []
        for shape in shapes:
            nbytes = 8 * math.prod(shape)
            if pos + nbytes > len(data):
                raise Truncated("parameter data ends early")
            tensors.append(np.frombuffer(data, dtype="<f8", count=nbytes // 8, offset=pos)
                           .astype(np.float64).reshape(shape))
            pos += nbytes
        params.append(tuple(tensors))
    if pos != len(data):
        raise ValueError(f"{len(data) - pos} unexpected trailing bytes in model file")
    return CnnModel(tuple(layers), params, input_side)


def save_model(model: CnnModel, path) -> None:
    Path(path).write_bytes(dumps_model(model))


def load_model(path) -> CnnModel:
    return loads_model(Path(path).read_bytes())
