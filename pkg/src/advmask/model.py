"""A compact differentiable convolutional classifier built on numpy.

The network is a plain layer stack (convolution with stride 1 and zero
padding, relu, 2x2 max-pooling, flatten, dense) evaluated in float64.
Besides forward inference it exposes the cross-entropy objective and its
exact gradient with respect to the *input*, which is what every attack
in this package consumes.

Conventions that make results reproducible:
  * relu's subgradient at 0 is 0;
  * max-pool ties route the gradient to the first maximal element in
    scan order (row-major within the window);
  * training is plain minibatch SGD, fully determined by its seed.

Activations are batches of shape (n, height, width, channels).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import WeightFormatError
from .image import Image

__all__ = [
    "Model",
    "Prediction",
    "build_model",
    "parse_architecture",
    "forward",
    "forward_batch",
    "loss",
    "input_gradient",
    "kink_margin",
    "train",
    "evaluate_accuracy",
    "save_weights",
    "load_weights",
    "REFERENCE_ARCHITECTURE",
]

LOSS_CLAMP = 1e-12

# conv 3x3x16 -> relu -> pool -> conv 3x3x32 -> relu -> pool -> dense K
REFERENCE_ARCHITECTURE = (
    ("conv", 16, 3, 1),
    ("relu",),
    ("maxpool", 2),
    ("conv", 32, 3, 1),
    ("relu",),
    ("maxpool", 2),
    ("flatten",),
    ("dense",),
)

_POOL_OFFSETS = ((0, 0), (0, 1), (1, 0), (1, 1))  # scan order within a window


# --------------------------------------------------------------------------
# layers
# --------------------------------------------------------------------------


class ConvLayer:
    """2D convolution, stride 1, zero padding.

    Computed as one matmul per kernel offset (shift-and-matmul), which
    keeps temporaries small for the 3x3 kernels used here.
    """

    kind = "conv"

    def __init__(self, weights, bias, pad):
        self.weights = weights  # (kh, kw, cin, cout)
        self.bias = bias        # (cout,)
        self.pad = int(pad)

    def output_shape(self, shape):
        h, w, _ = shape
        kh, kw, _, cout = self.weights.shape
        oh = h + 2 * self.pad - kh + 1
        ow = w + 2 * self.pad - kw + 1
        if oh < 1 or ow < 1:
            raise ValueError(f"conv kernel {kh}x{kw} too large for input {h}x{w}")
        return (oh, ow, cout)

    def forward(self, x):
        kh, kw, cin, cout = self.weights.shape
        p = self.pad
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
        n, hp, wp, _ = xp.shape
        oh, ow = hp - kh + 1, wp - kw + 1
        out = np.broadcast_to(self.bias, (n, oh, ow, cout)).copy()
        flat = out.reshape(-1, cout)
        for u in range(kh):
            for v in range(kw):
                patch = xp[:, u:u + oh, v:v + ow, :].reshape(-1, cin)
                flat += patch @ self.weights[u, v]
        return out, xp

    def backward(self, grad_out, cache):
        xp = cache
        kh, kw, cin, cout = self.weights.shape
        n, hp, wp, _ = xp.shape
        oh, ow = grad_out.shape[1], grad_out.shape[2]
        go_flat = grad_out.reshape(-1, cout)

        grad_w = np.empty_like(self.weights)
        grad_xp = np.zeros_like(xp)
        for u in range(kh):
            for v in range(kw):
                patch = xp[:, u:u + oh, v:v + ow, :].reshape(-1, cin)
                grad_w[u, v] = patch.T @ go_flat
                spread = go_flat @ self.weights[u, v].T
                grad_xp[:, u:u + oh, v:v + ow, :] += spread.reshape(n, oh, ow, cin)
        grad_b = go_flat.sum(axis=0)
        p = self.pad
        grad_x = grad_xp[:, p:hp - p, p:wp - p, :] if p else grad_xp
        return grad_x, [grad_w, grad_b]

    @property
    def params(self):
        return [self.weights, self.bias]

    def describe(self, in_shape):
        kh, kw, cin, cout = self.weights.shape
        return f"conv {kh} {kw} {cin} {cout} {self.pad}"


class ReluLayer:
    kind = "relu"
    params = ()

    def output_shape(self, shape):
        return shape

    def forward(self, x):
        return np.maximum(x, 0.0), x

    def backward(self, grad_out, cache):
        return grad_out * (cache > 0.0), []

    def describe(self, in_shape):
        return "relu"


class MaxPoolLayer:
    """2x2 max-pooling with stride 2; odd trailing rows/columns are dropped."""

    kind = "maxpool"
    params = ()

    def output_shape(self, shape):
        h, w, c = shape
        if h < 2 or w < 2:
            raise ValueError(f"input {h}x{w} too small for 2x2 pooling")
        return (h // 2, w // 2, c)

    def forward(self, x):
        n, h, w, c = x.shape
        oh, ow = h // 2, w // 2
        xt = x[:, :oh * 2, :ow * 2, :]
        stacked = np.stack(
            [xt[:, dy::2, dx::2, :] for dy, dx in _POOL_OFFSETS], axis=3
        )  # (n, oh, ow, 4, c)
        best = stacked.argmax(axis=3)  # first maximum in scan order
        out = np.take_along_axis(stacked, best[:, :, :, None, :], axis=3)[:, :, :, 0, :]
        return out, (best, x.shape)

    def backward(self, grad_out, cache):
        best, full_shape = cache
        n, h, w, c = full_shape
        oh, ow = h // 2, w // 2
        grad_x = np.zeros(full_shape, dtype=grad_out.dtype)
        for k, (dy, dx) in enumerate(_POOL_OFFSETS):
            mask = best == k
            grad_x[:, dy:oh * 2:2, dx:ow * 2:2, :][mask] = grad_out[mask]
        return grad_x, []

    def describe(self, in_shape):
        return "maxpool 2"


class FlattenLayer:
    kind = "flatten"
    params = ()

    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad_out, cache):
        return grad_out.reshape(cache), []

    def describe(self, in_shape):
        return "flatten"


class DenseLayer:
    kind = "dense"

    def __init__(self, weights, bias):
        self.weights = weights  # (nin, nout)
        self.bias = bias        # (nout,)

    def output_shape(self, shape):
        (nin,) = shape
        if nin != self.weights.shape[0]:
            raise ValueError(
                f"dense expects {self.weights.shape[0]} inputs, got {nin}"
            )
        return (self.weights.shape[1],)

    def forward(self, x):
        return x @ self.weights + self.bias, x

    def backward(self, grad_out, cache):
        grad_w = cache.T @ grad_out
        grad_b = grad_out.sum(axis=0)
        grad_x = grad_out @ self.weights.T
        return grad_x, [grad_w, grad_b]

    @property
    def params(self):
        return [self.weights, self.bias]

    def describe(self, in_shape):
        nin, nout = self.weights.shape
        return f"dense {nin} {nout}"


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------


@dataclass
class Model:
    """Immutable-once-trained layer stack; treat weights as read-only."""

    layers: list
    input_shape: tuple  # (height, width, channels)
    num_classes: int
    metrics: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = tuple(self.input_shape)
        for layer in self.layers:
            shape = layer.output_shape(shape)
        if shape != (self.num_classes,):
            raise ValueError(
                f"architecture produces {shape}, expected ({self.num_classes},)"
            )
        for layer in self.layers:
            for p in layer.params:
                if not np.isfinite(p).all():
                    raise ValueError("non-finite weights")

    def describe(self) -> str:
        """Canonical textual architecture (layer list + shapes)."""
        h, w, c = self.input_shape
        lines = [f"input {h} {w} {c}"]
        shape = tuple(self.input_shape)
        for layer in self.layers:
            lines.append(layer.describe(shape))
            shape = layer.output_shape(shape)
        lines.append(f"classes {self.num_classes}")
        return "\n".join(lines) + "\n"

    def copy(self) -> "Model":
        layers = []
        for layer in self.layers:
            if layer.kind == "conv":
                layers.append(ConvLayer(layer.weights.copy(), layer.bias.copy(), layer.pad))
            elif layer.kind == "dense":
                layers.append(DenseLayer(layer.weights.copy(), layer.bias.copy()))
            else:
                layers.append(layer)
        return Model(layers, self.input_shape, self.num_classes, dict(self.metrics))


def build_model(input_shape=(28, 28, 1), num_classes=10,
                architecture=REFERENCE_ARCHITECTURE, seed=0) -> Model:
    """Construct a model with He-normal initial weights.

    ``architecture`` is a sequence of layer specs: ("conv", out_channels,
    kernel, pad), ("relu",), ("maxpool", 2), ("flatten",), ("dense",) or
    ("dense", out_features); a bare trailing ("dense",) maps to the class
    count.
    """
    rng = np.random.default_rng(seed)
    h, w, c = input_shape
    shape = (h, w, c)
    layers = []
    for spec in architecture:
        kind = spec[0]
        if kind == "conv":
            _, cout, k, pad = spec
            cin = shape[2]
            std = np.sqrt(2.0 / (k * k * cin))
            weights = rng.normal(0.0, std, size=(k, k, cin, cout))
            layer = ConvLayer(weights, np.zeros(cout), pad)
        elif kind == "relu":
            layer = ReluLayer()
        elif kind == "maxpool":
            layer = MaxPoolLayer()
        elif kind == "flatten":
            layer = FlattenLayer()
        elif kind == "dense":
            nout = spec[1] if len(spec) > 1 else num_classes
            if len(shape) != 1:
                raise ValueError("dense must follow flatten")
            nin = shape[0]
            std = np.sqrt(2.0 / nin)
            layer = DenseLayer(rng.normal(0.0, std, size=(nin, nout)), np.zeros(nout))
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
        layers.append(layer)
        shape = layer.output_shape(shape)
    return Model(layers, tuple(input_shape), num_classes)


@dataclass(frozen=True)
class Prediction:
    """Logits plus their softmax read-out for one input."""

    logits: np.ndarray
    probabilities: np.ndarray
    label: int
    certainty: float


def _softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_input(m: Model, x: Image):
    expected = m.input_shape
    got = (x.height, x.width, x.channels)
    if got != tuple(expected):
        raise ValueError(f"input shape {got} does not match model {tuple(expected)}")


def _forward_pass(m: Model, batch):
    caches = []
    out = batch
    for layer in m.layers:
        out, cache = layer.forward(out)
        caches.append(cache)
    return out, caches


def forward_batch(m: Model, batch: np.ndarray) -> np.ndarray:
    """Logits for a (n, h, w, c) batch."""
    logits, _ = _forward_pass(m, batch)
    return logits


def forward(m: Model, x: Image) -> Prediction:
    """Deterministic inference with numerically stable softmax."""
    _check_input(m, x)
    logits = forward_batch(m, x.data[None])[0]
    probs = _softmax(logits)
    label = int(np.argmax(probs))  # ties resolve to the lowest index
    return Prediction(logits, probs, label, float(probs[label]))


def loss(m: Model, x: Image, y: int) -> float:
    """Cross-entropy -log p_y, with p clamped to >= 1e-12."""
    _check_label(m, y)
    pred = forward(m, x)
    return float(-np.log(max(float(pred.probabilities[y]), LOSS_CLAMP)))


def _check_label(m: Model, y):
    if not 0 <= y < m.num_classes:
        raise ValueError(f"label {y} out of range [0, {m.num_classes})")


def _backward_to_input(m: Model, caches, grad_logits):
    grad = grad_logits
    for layer, cache in reversed(list(zip(m.layers, caches))):
        grad, _ = layer.backward(grad, cache)
    return grad


def input_gradient(m: Model, x: Image, y: int) -> np.ndarray:
    """Exact gradient of the cross-entropy loss w.r.t. every input value."""
    _check_input(m, x)
    _check_label(m, y)
    batch = x.data[None]
    logits, caches = _forward_pass(m, batch)
    probs = _softmax(logits)
    grad_logits = probs.copy()
    grad_logits[0, y] -= 1.0
    grad = _backward_to_input(m, caches, grad_logits)
    return grad[0]


def kink_margin(m: Model, x: Image) -> float:
    """Distance of the nearest relu/max-pool argument to its kink.

    Returns min over relu inputs of |z| and over pool windows of
    (max - second max); useful for excluding near-nondifferentiable
    inputs from finite-difference checks.
    """
    _check_input(m, x)
    out = x.data[None]
    margin = np.inf
    for layer in m.layers:
        if layer.kind == "relu":
            margin = min(margin, float(np.abs(out).min()))
        elif layer.kind == "maxpool":
            n, h, w, c = out.shape
            oh, ow = h // 2, w // 2
            xt = out[:, :oh * 2, :ow * 2, :]
            stacked = np.stack(
                [xt[:, dy::2, dx::2, :] for dy, dx in _POOL_OFFSETS], axis=3
            )
            part = np.partition(stacked, 2, axis=3)
            top, second = part[:, :, :, 3, :], part[:, :, :, 2, :]
            gaps = top - second
            # windows tied exactly at the relu floor are locally constant,
            # not a differentiability hazard
            pinned = (top == 0.0) & (second == 0.0)
            if not pinned.all():
                margin = min(margin, float(gaps[~pinned].min()))
        out, _ = layer.forward(out)
    return margin


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------


def _dataset_arrays(dataset, input_shape):
    if isinstance(dataset, tuple) and len(dataset) == 2:
        xs = np.asarray(dataset[0], dtype=np.float64)
        ys = np.asarray(dataset[1], dtype=np.int64)
    else:
        pairs = list(dataset)
        if not pairs:
            raise ValueError("empty dataset")
        xs = np.stack([img.data for img, _ in pairs])
        ys = np.asarray([label for _, label in pairs], dtype=np.int64)
    if xs.shape[0] == 0:
        raise ValueError("empty dataset")
    if xs.shape[1:] != tuple(input_shape):
        raise ValueError(
            f"dataset shape {xs.shape[1:]} does not match model input {tuple(input_shape)}"
        )
    return xs, ys


def train(m: Model, dataset, epochs: int, learning_rate: float, seed: int = 0,
          batch_size: int = 64, test_dataset=None) -> Model:
    """Minibatch-SGD training; deterministic given the seed.

    Returns a new model (the input model is untouched) whose ``metrics``
    dict records the final train accuracy, and test accuracy when a test
    set is supplied. epochs=0 returns an unchanged copy.
    """
    xs, ys = _dataset_arrays(dataset, m.input_shape)
    if int(ys.max()) >= m.num_classes or int(ys.min()) < 0:
        raise ValueError(f"label {int(ys.max())} out of range [0, {m.num_classes})")

    out = m.copy()
    rng = np.random.default_rng(seed)
    n = xs.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _sgd_step(out, xs[idx], ys[idx], learning_rate)

    out.metrics["train_accuracy"] = evaluate_accuracy(out, (xs, ys))
    if test_dataset is not None:
        out.metrics["test_accuracy"] = evaluate_accuracy(out, test_dataset)
    return out


def _sgd_step(m: Model, xb, yb, lr):
    logits, caches = _forward_pass(m, xb)
    probs = _softmax(logits)
    grad_logits = probs
    grad_logits[np.arange(len(yb)), yb] -= 1.0
    grad_logits /= len(yb)

    grad = grad_logits
    grads = []
    for layer, cache in reversed(list(zip(m.layers, caches))):
        grad, layer_grads = layer.backward(grad, cache)
        grads.append(layer_grads)
    for layer, layer_grads in zip(m.layers, reversed(grads)):
        for p, g in zip(layer.params, layer_grads):
            p -= lr * g


def evaluate_accuracy(m: Model, dataset, batch_size: int = 256) -> float:
    xs, ys = _dataset_arrays(dataset, m.input_shape)
    hits = 0
    for start in range(0, xs.shape[0], batch_size):
        logits = forward_batch(m, xs[start:start + batch_size])
        hits += int((logits.argmax(axis=1) == ys[start:start + batch_size]).sum())
    return hits / xs.shape[0]


# --------------------------------------------------------------------------
# weight file format: magic "NNW1", length-prefixed UTF-8 architecture
# description, then all weights as little-endian float32 in layer order
# --------------------------------------------------------------------------

_WEIGHTS_MAGIC = b"NNW1"


def save_weights(m: Model, path) -> None:
    arch = m.describe().encode("utf-8")
    blobs = []
    for layer in m.layers:
        for p in layer.params:
            blobs.append(p.astype("<f4").tobytes())
    payload = b"".join(blobs)
    with open(path, "wb") as fh:
        fh.write(_WEIGHTS_MAGIC)
        fh.write(struct.pack("<I", len(arch)))
        fh.write(arch)
        fh.write(payload)


def parse_architecture(text: str):
    """Parse the canonical architecture description.

    Returns (input_shape, num_classes, layer specs with explicit shapes).
    """
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("input ") or not lines[-1].startswith("classes "):
        raise WeightFormatError("architecture must start with 'input' and end with 'classes'")
    try:
        h, w, c = (int(t) for t in lines[0].split()[1:])
        num_classes = int(lines[-1].split()[1])
    except (ValueError, IndexError) as exc:
        raise WeightFormatError(f"bad architecture header: {exc}") from exc
    specs = []
    for line in lines[1:-1]:
        parts = line.split()
        kind = parts[0]
        try:
            if kind == "conv":
                kh, kw, cin, cout, pad = (int(t) for t in parts[1:])
                specs.append(("conv", kh, kw, cin, cout, pad))
            elif kind == "relu":
                specs.append(("relu",))
            elif kind == "maxpool":
                specs.append(("maxpool", int(parts[1])))
            elif kind == "flatten":
                specs.append(("flatten",))
            elif kind == "dense":
                specs.append(("dense", int(parts[1]), int(parts[2])))
            else:
                raise WeightFormatError(f"unknown layer {kind!r}")
        except (ValueError, IndexError) as exc:
            raise WeightFormatError(f"bad layer line {line!r}") from exc
    return (h, w, c), num_classes, specs


def load_weights(path) -> Model:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != _WEIGHTS_MAGIC:
        raise WeightFormatError(f"bad magic {buf[:4]!r}, expected {_WEIGHTS_MAGIC!r}")
    if len(buf) < 8:
        raise WeightFormatError("truncated header")
    (arch_len,) = struct.unpack("<I", buf[4:8])
    arch_end = 8 + arch_len
    if len(buf) < arch_end:
        raise WeightFormatError(
            f"truncated architecture: expected {arch_len} bytes, got {len(buf) - 8}"
        )
    text = buf[8:arch_end].decode("utf-8")
    input_shape, num_classes, specs = parse_architecture(text)

    layers = []
    sizes = []
    for spec in specs:
        if spec[0] == "conv":
            _, kh, kw, cin, cout, pad = spec
            sizes.append(((kh, kw, cin, cout), (cout,)))
        elif spec[0] == "dense":
            _, nin, nout = spec
            sizes.append(((nin, nout), (nout,)))
        else:
            sizes.append(None)

    expected_floats = sum(
        int(np.prod(ws)) + int(np.prod(bs)) for pair in sizes if pair is not None
        for ws, bs in [pair]
    )
    payload = buf[arch_end:]
    if len(payload) != expected_floats * 4:
        raise WeightFormatError(
            f"weight blob length mismatch: expected {expected_floats * 4} bytes,"
            f" got {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64)

    offset = 0
    for spec, pair in zip(specs, sizes):
        if spec[0] == "conv":
            (ws, bs) = pair
            wn, bn = int(np.prod(ws)), int(np.prod(bs))
            weights = values[offset:offset + wn].reshape(ws)
            bias = values[offset + wn:offset + wn + bn]
            offset += wn + bn
            layers.append(ConvLayer(weights.copy(), bias.copy(), spec[5]))
        elif spec[0] == "dense":
            (ws, bs) = pair
            wn, bn = int(np.prod(ws)), int(np.prod(bs))
            weights = values[offset:offset + wn].reshape(ws)
            bias = values[offset + wn:offset + wn + bn]
            offset += wn + bn
            layers.append(DenseLayer(weights.copy(), bias.copy()))
        elif spec[0] == "relu":
            layers.append(ReluLayer())
        elif spec[0] == "maxpool":
            layers.append(MaxPoolLayer())
        elif spec[0] == "flatten":
            layers.append(FlattenLayer())
    return Model(layers, input_shape, num_classes)
