"""Minimal CNN engine used by both the image and pixel classifiers.

Tensors are plain float64 numpy arrays, shaped ``(channels, height,
width)`` for spatial data or ``(n,)`` flat. The layer set is fixed:
Conv2D, ReLU, MaxPool, Dropout (inverted scaling), Dense and a final
Softmax. Training is SGD with momentum over seeded shuffled
mini-batches, so a (spec, seed, data) triple always reproduces the same
weights on one platform.

Everything runs in double precision; gradient correctness is checked
against central finite differences (:func:`gradient_check`).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DataValidationError

MODEL_MAGIC = b"RTNN1"

#: Probabilities are clamped here before the log in the loss.
PROB_FLOOR = 1e-12


class ShapeMismatchError(DataValidationError):
    """Input or layer shapes are incompatible."""


class TrainingDivergedError(DataValidationError):
    """Loss became non-finite during training."""


class SerializationError(DataValidationError):
    """Model file is corrupt or inconsistent."""


# --------------------------------------------------------------------------
# Layer specifications
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Conv2D:
    filters: int
    kernel_h: int
    kernel_w: int
    stride: int = 1
    same_padding: bool = False

    def __post_init__(self):
        if self.filters < 1 or self.kernel_h < 1 or self.kernel_w < 1 or self.stride < 1:
            raise DataValidationError(f"bad Conv2D spec: {self}")


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class MaxPool:
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise DataValidationError(f"bad MaxPool size: {self.size}")


@dataclass(frozen=True)
class Dropout:
    rate: float

    def __post_init__(self):
        if not (0.0 <= self.rate < 1.0):
            raise DataValidationError(f"dropout rate {self.rate} outside [0, 1)")


@dataclass(frozen=True)
class Dense:
    units: int

    def __post_init__(self):
        if self.units < 1:
            raise DataValidationError(f"bad Dense units: {self.units}")


@dataclass(frozen=True)
class Softmax:
    pass


LayerSpec = Union[Conv2D, ReLU, MaxPool, Dropout, Dense, Softmax]


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, ...]
    n_classes: int

    def __post_init__(self):
        if len(self.input_shape) not in (1, 3) or any(d < 1 for d in self.input_shape):
            raise DataValidationError(f"bad input shape {self.input_shape}")
        if self.n_classes < 2:
            raise DataValidationError("need at least two classes")
        if not self.layers or not isinstance(self.layers[-1], Softmax):
            raise DataValidationError("final layer must be Softmax")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    dropout_rate: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise DataValidationError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise DataValidationError("learning rate must be > 0")
        if not (0.0 <= self.momentum < 1.0):
            raise DataValidationError("momentum must be in [0, 1)")
        if self.batch_size < 1:
            raise DataValidationError("batch size must be >= 1")
        if self.dropout_rate is not None and not (0.0 <= self.dropout_rate < 1.0):
            raise DataValidationError("dropout rate must be in [0, 1)")


# --------------------------------------------------------------------------
# Layer implementations: forward caches whatever backward needs.
# ``stats`` (when given) collects the smallest margin to a gradient
# discontinuity, used by the gradient checker to steer clear of kinks.
# --------------------------------------------------------------------------


class _ConvLayer:
    def __init__(self, spec: Conv2D, in_shape, rng):
        c, h, w = in_shape
        self.spec = spec
        self.stride = spec.stride
        if spec.same_padding:
            oh = -(-h // spec.stride)
            ow = -(-w // spec.stride)
            pad_h = max((oh - 1) * spec.stride + spec.kernel_h - h, 0)
            pad_w = max((ow - 1) * spec.stride + spec.kernel_w - w, 0)
            self.pads = (pad_h // 2, pad_h - pad_h // 2, pad_w // 2, pad_w - pad_w // 2)
        else:
            if spec.kernel_h > h or spec.kernel_w > w:
                raise ShapeMismatchError(
                    f"{spec.kernel_h}x{spec.kernel_w} kernel exceeds {h}x{w} input"
                )
            oh = (h - spec.kernel_h) // spec.stride + 1
            ow = (w - spec.kernel_w) // spec.stride + 1
            self.pads = (0, 0, 0, 0)
        if oh < 1 or ow < 1:
            raise ShapeMismatchError(f"conv output collapsed to {oh}x{ow}")
        self.out_shape = (spec.filters, oh, ow)
        fan_in = c * spec.kernel_h * spec.kernel_w
        limit = np.sqrt(6.0 / fan_in)
        self.w = rng.uniform(-limit, limit, size=(spec.filters, c, spec.kernel_h, spec.kernel_w))
        self.b = np.zeros(spec.filters)
        self._cache = None

    def params(self):
        return [self.w, self.b]

    def _im2col(self, xp, oh, ow):
        n, c, _, _ = xp.shape
        kh, kw, s = self.spec.kernel_h, self.spec.kernel_w, self.stride
        cols = np.empty((n, c, kh, kw, oh, ow))
        for i in range(kh):
            for j in range(kw):
                cols[:, :, i, j] = xp[:, :, i : i + s * oh : s, j : j + s * ow : s]
        return cols.reshape(n, c * kh * kw, oh * ow)

    def forward(self, x, train, rng, stats):
        pt, pb, pl, pr = self.pads
        xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr))) if any(self.pads) else x
        f, oh, ow = self.out_shape
        cols = self._im2col(xp, oh, ow)
        wm = self.w.reshape(f, -1)
        out = np.matmul(wm, cols) + self.b[:, None]
        self._cache = (cols, xp.shape)
        return out.reshape(x.shape[0], f, oh, ow)

    def backward(self, dout):
        cols, xp_shape = self._cache
        n = dout.shape[0]
        f, oh, ow = self.out_shape
        dm = dout.reshape(n, f, oh * ow)
        db = dm.sum(axis=(0, 2))
        dw = np.matmul(dm, cols.transpose(0, 2, 1)).sum(axis=0).reshape(self.w.shape)
        dcols = np.matmul(self.w.reshape(f, -1).T, dm)
        kh, kw, s = self.spec.kernel_h, self.spec.kernel_w, self.stride
        dc = dcols.reshape(n, -1, kh, kw, oh, ow)
        dxp = np.zeros(xp_shape)
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i : i + s * oh : s, j : j + s * ow : s] += dc[:, :, i, j]
        pt, pb, pl, pr = self.pads
        h, w = xp_shape[2] - pt - pb, xp_shape[3] - pl - pr
        dx = dxp[:, :, pt : pt + h, pl : pl + w]
        return dx, [dw, db]


class _ReLULayer:
    def __init__(self, in_shape):
        self.out_shape = in_shape
        self._mask = None

    def params(self):
        return []

    def forward(self, x, train, rng, stats):
        if stats is not None:
            stats.append(float(np.abs(x).min()))
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout):
        return dout * self._mask, []


class _MaxPoolLayer:
    def __init__(self, spec: MaxPool, in_shape):
        if len(in_shape) != 3:
            raise ShapeMismatchError("MaxPool needs a (channels, h, w) input")
        c, h, w = in_shape
        self.size = spec.size
        oh, ow = h // spec.size, w // spec.size
        if oh < 1 or ow < 1:
            raise ShapeMismatchError(f"pool size {spec.size} exceeds {h}x{w} input")
        self.out_shape = (c, oh, ow)
        self._cache = None

    def params(self):
        return []

    def _windows(self, x):
        n, c, _, _ = x.shape
        _, oh, ow = self.out_shape
        s = self.size
        xr = x[:, :, : oh * s, : ow * s].reshape(n, c, oh, s, ow, s)
        return xr.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, s * s)

    def forward(self, x, train, rng, stats):
        win = self._windows(x)
        idx = win.argmax(axis=-1)
        if stats is not None and win.shape[-1] > 1:
            top2 = np.sort(win, axis=-1)[..., -2:]
            stats.append(float((top2[..., 1] - top2[..., 0]).min()))
        self._cache = (idx, x.shape)
        return np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def backward(self, dout):
        idx, x_shape = self._cache
        n, c, oh, ow = dout.shape
        s = self.size
        buf = np.zeros((n, c, oh, ow, s * s))
        np.put_along_axis(buf, idx[..., None], dout[..., None], axis=-1)
        blocks = buf.reshape(n, c, oh, ow, s, s).transpose(0, 1, 2, 4, 3, 5)
        dx = np.zeros(x_shape)
        dx[:, :, : oh * s, : ow * s] = blocks.reshape(n, c, oh * s, ow * s)
        return dx, []


class _DropoutLayer:
    def __init__(self, spec: Dropout, in_shape):
        self.rate = spec.rate
        self.out_shape = in_shape
        self._mask = None

    def params(self):
        return []

    def forward(self, x, train, rng, stats):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise DataValidationError("train-mode forward through Dropout needs an rng")
        keep = rng.random(x.shape) >= self.rate
        self._mask = keep / (1.0 - self.rate)
        return x * self._mask

    def backward(self, dout):
        if self._mask is None:
            return dout, []
        return dout * self._mask, []


class _DenseLayer:
    def __init__(self, spec: Dense, in_shape, rng):
        fan_in = int(np.prod(in_shape))
        self.out_shape = (spec.units,)
        limit = np.sqrt(6.0 / fan_in)
        self.w = rng.uniform(-limit, limit, size=(spec.units, fan_in))
        self.b = np.zeros(spec.units)
        self._cache = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x, train, rng, stats):
        flat = x.reshape(x.shape[0], -1)
        self._cache = (flat, x.shape)
        return flat @ self.w.T + self.b

    def backward(self, dout):
        flat, x_shape = self._cache
        dw = dout.T @ flat
        db = dout.sum(axis=0)
        dx = (dout @ self.w).reshape(x_shape)
        return dx, [dw, db]


class _SoftmaxLayer:
    def __init__(self, in_shape, n_classes):
        if len(in_shape) != 1 or in_shape[0] != n_classes:
            raise ShapeMismatchError(
                f"softmax input {in_shape} does not match {n_classes} classes"
            )
        self.out_shape = in_shape
        self._probs = None

    def params(self):
        return []

    def forward(self, x, train, rng, stats):
        shifted = x - x.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        self._probs = e / e.sum(axis=1, keepdims=True)
        return self._probs

    def backward(self, dout):
        p = self._probs
        inner = (dout * p).sum(axis=1, keepdims=True)
        return p * (dout - inner), []


# --------------------------------------------------------------------------
# Network
# --------------------------------------------------------------------------


class Network:
    """A built network: runtime layers plus the spec that produced them."""

    def __init__(self, spec: NetworkSpec, layers):
        self.spec = spec
        self.layers = layers

    def parameters(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def dropout_layers(self):
        return [layer for layer in self.layers if isinstance(layer, _DropoutLayer)]

    def forward_batch(self, x, train=False, rng=None, stats=None):
        if x.shape[1:] != self.spec.input_shape:
            raise ShapeMismatchError(
                f"input shape {x.shape[1:]} != expected {self.spec.input_shape}"
            )
        out = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            out = layer.forward(out, train, rng, stats)
        return out

    def backward_batch(self, dout):
        grads = []
        for layer in reversed(self.layers):
            dout, layer_grads = layer.backward(dout)
            grads = layer_grads + grads
        return grads

    def kink_margin(self, x) -> float:
        """Smallest distance to a ReLU zero or MaxPool argmax tie for ``x``."""
        stats: list[float] = []
        self.forward_batch(x[None], train=False, stats=stats)
        return min(stats) if stats else np.inf


def build_network(spec: NetworkSpec, seed: int) -> Network:
    """Instantiate a network with fan-in-scaled uniform weights.

    The same (spec, seed) pair always yields identical weights.
    """
    rng = np.random.default_rng(seed)
    shape = spec.input_shape
    layers = []
    for ls in spec.layers:
        if isinstance(ls, Conv2D):
            if len(shape) != 3:
                raise ShapeMismatchError(f"Conv2D needs a 3-d input, got {shape}")
            layer = _ConvLayer(ls, shape, rng)
        elif isinstance(ls, ReLU):
            layer = _ReLULayer(shape)
        elif isinstance(ls, MaxPool):
            layer = _MaxPoolLayer(ls, shape)
        elif isinstance(ls, Dropout):
            layer = _DropoutLayer(ls, shape)
        elif isinstance(ls, Dense):
            layer = _DenseLayer(ls, shape, rng)
        elif isinstance(ls, Softmax):
            layer = _SoftmaxLayer(shape, spec.n_classes)
        else:
            raise DataValidationError(f"unknown layer spec {ls!r}")
        shape = layer.out_shape
        layers.append(layer)
    return Network(spec, layers)


def forward(net: Network, x: np.ndarray, mode: str = "infer", rng=None) -> np.ndarray:
    """Class-probability vector for one input tensor.

    Dropout fires only in ``train`` mode (inverted scaling, so inference
    needs no rescale).
    """
    if mode not in ("train", "infer"):
        raise DataValidationError(f"mode must be 'train' or 'infer', got {mode!r}")
    if mode == "train" and rng is None:
        rng = np.random.default_rng(0)
    probs = net.forward_batch(np.asarray(x)[None], train=(mode == "train"), rng=rng)
    return probs[0]


def loss_and_gradients(net: Network, batch, rng=None):
    """Mean cross-entropy over a batch plus gradients for every parameter.

    ``batch`` is ``(x, labels)`` with ``x`` of shape (n, *input_shape)
    and integer labels in ``[0, n_classes)``. Probabilities are clamped
    at ``PROB_FLOOR`` before the log.
    """
    x, labels = batch
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    n = x.shape[0]
    if n == 0:
        raise DataValidationError("batch must be nonempty")
    if labels.shape != (n,):
        raise ShapeMismatchError("labels must be one integer per sample")
    if labels.min() < 0 or labels.max() >= net.spec.n_classes:
        raise DataValidationError("label outside [0, n_classes)")
    probs = net.forward_batch(x, train=True, rng=rng)
    p_label = probs[np.arange(n), labels]
    clamped = np.maximum(p_label, PROB_FLOOR)
    loss = float(-np.mean(np.log(clamped)))
    dprobs = np.zeros_like(probs)
    dprobs[np.arange(n), labels] = np.where(p_label > PROB_FLOOR, -1.0 / (n * clamped), 0.0)
    grads = net.backward_batch(dprobs)
    return loss, grads


def predict(net: Network, x: np.ndarray) -> tuple[int, float]:
    """(label, confidence): argmax of infer-mode probabilities.

    Exact ties resolve to the lowest class index.
    """
    probs = forward(net, x, mode="infer")
    label = int(np.argmax(probs))
    return label, float(probs[label])


def predict_batch(net: Network, x: np.ndarray, batch_size: int = 256):
    """Vectorized prediction; returns (labels, confidences) arrays."""
    labels = np.empty(x.shape[0], dtype=np.int64)
    confs = np.empty(x.shape[0])
    for start in range(0, x.shape[0], batch_size):
        probs = net.forward_batch(x[start : start + batch_size])
        labels[start : start + probs.shape[0]] = probs.argmax(axis=1)
        confs[start : start + probs.shape[0]] = probs.max(axis=1)
    return labels, confs


def accuracy(net: Network, x: np.ndarray, labels: np.ndarray) -> float:
    pred, _ = predict_batch(net, x)
    return float(np.mean(pred == np.asarray(labels)))


def train(net: Network, train_set, val_set, cfg: TrainConfig):
    """SGD with momentum over seeded shuffled mini-batches.

    Returns ``(net, history)`` where ``history`` holds the validation
    accuracy after each epoch (length = ``cfg.epochs``). Raises
    :class:`TrainingDivergedError` the moment the loss stops being
    finite. If ``cfg.dropout_rate`` is set it overrides the rate of
    every Dropout layer (the sweep knob).
    """
    x_train, y_train = train_set
    x_val, y_val = val_set
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train)
    if x_train.shape[0] == 0 or np.asarray(x_val).shape[0] == 0:
        raise DataValidationError("training and validation sets must be nonempty")
    if cfg.dropout_rate is not None:
        for layer in net.dropout_layers():
            layer.rate = cfg.dropout_rate
    rng = np.random.default_rng(cfg.seed)
    params = net.parameters()
    velocity = [np.zeros_like(p) for p in params]
    history = []
    n = x_train.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            take = order[start : start + cfg.batch_size]
            loss, grads = loss_and_gradients(net, (x_train[take], y_train[take]), rng=rng)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch offset {start}"
                )
            for p, v, g in zip(params, velocity, grads):
                v *= cfg.momentum
                v -= cfg.learning_rate * g
                p += v
        history.append(accuracy(net, np.asarray(x_val, dtype=np.float64), y_val))
    return net, history


# --------------------------------------------------------------------------
# Gradient checking
# --------------------------------------------------------------------------


def gradient_check(net: Network, sample, eps: float = 1e-5, nudge_kinks: bool = True) -> float:
    """Max relative error between backprop and central finite differences.

    ``sample`` is ``(x, label)``. Dropout is disabled for the check so
    the result is deterministic. With ``nudge_kinks`` the input is
    perturbed (deterministically) until no ReLU pre-activation or
    MaxPool window sits within ``10 * eps`` of a gradient
    discontinuity, where finite differences would be meaningless.
    """
    if not (1e-7 <= eps <= 1e-3):
        raise DataValidationError(f"eps {eps} outside [1e-7, 1e-3]")
    x, label = sample
    x = np.array(x, dtype=np.float64)
    saved_rates = [(layer, layer.rate) for layer in net.dropout_layers()]
    for layer, _ in saved_rates:
        layer.rate = 0.0
    try:
        if nudge_kinks:
            for attempt in range(16):
                if net.kink_margin(x) > 10.0 * eps:
                    break
                jitter = np.random.default_rng(1000 + attempt).uniform(-1, 1, size=x.shape)
                x = x + 64.0 * eps * jitter
        batch = (x[None], np.array([label]))
        _, grads = loss_and_gradients(net, batch)

        def batch_loss():
            loss, _ = loss_and_gradients(net, batch)
            return loss

        worst = 0.0
        for p, g in zip(net.parameters(), grads):
            flat_p = p.reshape(-1)
            flat_g = g.reshape(-1)
            for i in range(flat_p.size):
                orig = flat_p[i]
                flat_p[i] = orig + eps
                up = batch_loss()
                flat_p[i] = orig - eps
                down = batch_loss()
                flat_p[i] = orig
                numeric = (up - down) / (2.0 * eps)
                analytic = flat_g[i]
                err = abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))
                worst = max(worst, err)
        return worst
    finally:
        for layer, rate in saved_rates:
            layer.rate = rate


# --------------------------------------------------------------------------
# Serialization: magic, text spec block, little-endian float64 weights.
# --------------------------------------------------------------------------


def _spec_lines(spec: NetworkSpec):
    lines = [
        "input " + " ".join(str(d) for d in spec.input_shape),
        f"classes {spec.n_classes}",
    ]
    for ls in spec.layers:
        if isinstance(ls, Conv2D):
            lines.append(
                f"layer conv2d {ls.filters} {ls.kernel_h} {ls.kernel_w} "
                f"{ls.stride} {int(ls.same_padding)}"
            )
        elif isinstance(ls, ReLU):
            lines.append("layer relu")
        elif isinstance(ls, MaxPool):
            lines.append(f"layer maxpool {ls.size}")
        elif isinstance(ls, Dropout):
            lines.append(f"layer dropout {ls.rate!r}")
        elif isinstance(ls, Dense):
            lines.append(f"layer dense {ls.units}")
        elif isinstance(ls, Softmax):
            lines.append("layer softmax")
    return lines


def _parse_spec_line(line: str) -> LayerSpec:
    parts = line.split()
    kind = parts[1]
    try:
        if kind == "conv2d":
            f, kh, kw, s, same = parts[2:]
            return Conv2D(int(f), int(kh), int(kw), int(s), bool(int(same)))
        if kind == "relu":
            return ReLU()
        if kind == "maxpool":
            return MaxPool(int(parts[2]))
        if kind == "dropout":
            return Dropout(float(parts[2]))
        if kind == "dense":
            return Dense(int(parts[2]))
        if kind == "softmax":
            return Softmax()
    except (ValueError, IndexError) as exc:
        raise SerializationError(f"bad layer line {line!r}: {exc}") from exc
    raise SerializationError(f"unknown layer kind {kind!r}")


def serialize_model(net: Network, path: str | Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    weights = net.parameters()
    count = sum(p.size for p in weights)
    header = MODEL_MAGIC + b"\n" + "\n".join(_spec_lines(net.spec)).encode("ascii")
    header += f"\nweights {count}\n".encode("ascii")
    payload = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in weights)
    path.write_bytes(header + payload)


def deserialize_model(path: str | Path) -> Network:
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"model file not found: {path}")
    buf = io.BytesIO(path.read_bytes())
    if buf.readline().rstrip(b"\n") != MODEL_MAGIC:
        raise SerializationError(f"{path}: bad magic, not a model file")
    input_shape = None
    n_classes = None
    layers: list[LayerSpec] = []
    count = None
    while True:
        raw = buf.readline()
        if not raw:
            raise SerializationError(f"{path}: truncated header")
        line = raw.rstrip(b"\n").decode("ascii", errors="replace")
        if line.startswith("input "):
            input_shape = tuple(int(t) for t in line.split()[1:])
        elif line.startswith("classes "):
            n_classes = int(line.split()[1])
        elif line.startswith("layer "):
            layers.append(_parse_spec_line(line))
        elif line.startswith("weights "):
            count = int(line.split()[1])
            break
        else:
            raise SerializationError(f"{path}: unexpected header line {line!r}")
    if input_shape is None or n_classes is None:
        raise SerializationError(f"{path}: header missing input/classes lines")
    try:
        spec = NetworkSpec(tuple(layers), input_shape, n_classes)
        net = build_network(spec, seed=0)
    except DataValidationError as exc:
        raise SerializationError(f"{path}: inconsistent spec: {exc}") from exc
    params = net.parameters()
    expected = sum(p.size for p in params)
    if count != expected:
        raise SerializationError(f"{path}: header says {count} weights, spec needs {expected}")
    payload = buf.read()
    if len(payload) != 8 * expected:
        raise SerializationError(
            f"{path}: payload is {len(payload)} bytes, expected {8 * expected}"
        )
    offset = 0
    for p in params:
        flat = np.frombuffer(payload, dtype="<f8", count=p.size, offset=offset)
        p[...] = flat.reshape(p.shape)
        offset += 8 * p.size
    return net


# --------------------------------------------------------------------------
# Default architectures. Filter counts and kernel sizes are this
# package's declared defaults; both classifiers accept any NetworkSpec.
# --------------------------------------------------------------------------


def default_image_spec(
    input_shape: tuple[int, int, int], n_classes: int, dropout_rate: float = 0.2
) -> NetworkSpec:
    """Three conv/pool blocks then a dense head, for street images."""
    return NetworkSpec(
        layers=(
            Conv2D(16, 3, 3),
            ReLU(),
            MaxPool(2),
            Conv2D(32, 3, 3),
            ReLU(),
            MaxPool(2),
            Conv2D(64, 3, 3),
            ReLU(),
            MaxPool(2),
            Dropout(dropout_rate),
            Dense(128),
            ReLU(),
            Dense(n_classes),
            Softmax(),
        ),
        input_shape=input_shape,
        n_classes=n_classes,
    )


def default_pixel_spec(
    n_scenes: int, n_features: int, n_classes: int, dropout_rate: float = 0.2
) -> NetworkSpec:
    """Two same-padded conv layers over a (1, T, F) temporal stack."""
    return NetworkSpec(
        layers=(
            Conv2D(16, 3, 3, same_padding=True),
            ReLU(),
            Conv2D(16, 3, 3, same_padding=True),
            ReLU(),
            Dropout(dropout_rate),
            Dense(64),
            ReLU(),
            Dense(n_classes),
            Softmax(),
        ),
        input_shape=(1, n_scenes, n_features),
        n_classes=n_classes,
    )


def clone_spec_with_dropout(spec: NetworkSpec, rate: float) -> NetworkSpec:
    """Same architecture with every Dropout layer set to ``rate``."""
    new_layers = tuple(
        replace(ls, rate=rate) if isinstance(ls, Dropout) else ls for ls in spec.layers
    )
    return replace(spec, layers=new_layers)


__all__ = [
    "Conv2D",
    "ReLU",
    "MaxPool",
    "Dropout",
    "Dense",
    "Softmax",
    "LayerSpec",
    "NetworkSpec",
    "TrainConfig",
    "Network",
    "ShapeMismatchError",
    "TrainingDivergedError",
    "SerializationError",
    "build_network",
    "forward",
    "loss_and_gradients",
    "predict",
    "predict_batch",
    "accuracy",
    "train",
    "gradient_check",
    "serialize_model",
    "deserialize_model",
    "default_image_spec",
    "default_pixel_spec",
    "clone_spec_with_dropout",
]
