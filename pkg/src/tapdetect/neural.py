"""Minimal tensor/backprop engine for the small spectrogram CNN.

Five 3x3 same-padding conv blocks, each followed by ReLU and 2x2 max
pooling, then a two-layer fully connected head producing one logit.
Training uses weighted binary cross-entropy (positive class up-weighted by
n_neg/n_pos) and bias-corrected Adam. Layers carry explicit backward
passes; no external autograd. Float32 is the training dtype, float64 exists
for finite-difference verification.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit as sigmoid

from .dataset import WindowSample, canonical_order
from .dsp import LogMelSpectrogram
from .errors import ConfigError, InferenceError, ModelFormatError, TrainingError
from .seeding import named_rng


@dataclass
class Tensor:
    """A trainable array with a gradient slot of the same shape."""

    values: np.ndarray
    grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def zero_grad(self):
        self.grad = np.zeros_like(self.values)


@dataclass(frozen=True)
class CnnConfig:
    """Architecture and input conditioning for the detector CNN."""

    n_mels: int = 64
    n_frames: int = 188
    channels: tuple[int, ...] = (8, 16, 32, 32, 64)
    hidden: int = 64
    kernel: int = 3
    # affine conditioning mapping max-referenced dB (about [-100, 0]) to [-1, 0];
    # zero offset keeps all-zero inputs at exactly zero through the net
    input_scale: float = 0.01
    input_offset: float = 0.0

    def __post_init__(self):
        if self.kernel != 3:
            raise ConfigError("only 3x3 kernels are supported")
        if not self.channels:
            raise ConfigError("need at least one conv block")
        h, w = self.spatial_after_pooling()
        if h < 1 or w < 1:
            raise ConfigError(
                f"input {self.n_mels}x{self.n_frames} collapses below 1x1 "
                f"after {len(self.channels)} pooling stages"
            )

    def spatial_after_pooling(self) -> tuple[int, int]:
        h, w = self.n_mels, self.n_frames
        for _ in self.channels:
            h = h // 2 if h >= 2 else h
            w = w // 2 if w >= 2 else w
        return h, w

    @property
    def flat_size(self) -> int:
        h, w = self.spatial_after_pooling()
        return self.channels[-1] * h * w

    def to_json_dict(self) -> dict:
        return {
            "n_mels": self.n_mels,
            "n_frames": self.n_frames,
            "channels": list(self.channels),
            "hidden": self.hidden,
            "kernel": self.kernel,
            "input_scale": self.input_scale,
            "input_offset": self.input_offset,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "CnnConfig":
        obj = dict(obj)
        obj["channels"] = tuple(obj["channels"])
        return cls(**obj)


@dataclass(frozen=True)
class LossConfig:
    pos_weight: float = 1.0

    def __post_init__(self):
        if not self.pos_weight > 0:
            raise ConfigError("pos_weight must be positive")


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


class Conv2d:
    """3x3 convolution, stride 1, same padding, via im2col matmul."""

    def __init__(self, in_channels: int, out_channels: int, rng, dtype):
        fan_in = in_channels * 9
        limit = np.sqrt(6.0 / fan_in)
        self.weight = Tensor(
            rng.uniform(-limit, limit, size=(out_channels, in_channels, 3, 3)).astype(dtype)
        )
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype))
        self._cache = None

    def params(self):
        return [self.weight, self.bias]

    @staticmethod
    def _im2col(x):
        n, c, h, w = x.shape
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        cols = np.empty((n, c, 3, 3, h, w), dtype=x.dtype)
        for di in range(3):
            for dj in range(3):
                cols[:, :, di, dj] = xp[:, :, di : di + h, dj : dj + w]
        return cols.reshape(n, c * 9, h * w)

    def forward(self, x):
        n, _c, h, w = x.shape
        cols = self._im2col(x)
        w2 = self.weight.values.reshape(self.weight.shape[0], -1)
        out = np.matmul(w2, cols) + self.bias.values[None, :, None]
        self._cache = (x.shape, cols)
        return out.reshape(n, -1, h, w)

    def backward(self, dout):
        (x_shape, cols) = self._cache
        n, c, h, w = x_shape
        out_channels = self.weight.shape[0]
        d2 = dout.reshape(n, out_channels, h * w)
        w2 = self.weight.values.reshape(out_channels, -1)
        dw = np.matmul(d2, cols.transpose(0, 2, 1)).sum(axis=0)
        self.weight.grad += dw.reshape(self.weight.shape)
        self.bias.grad += d2.sum(axis=(0, 2))
        dcols = np.matmul(w2.T, d2)  # (n, c*9, h*w)
        dxp = np.zeros((n, c, h + 2, w + 2), dtype=dout.dtype)
        dcols6 = dcols.reshape(n, c, 3, 3, h, w)
        for di in range(3):
            for dj in range(3):
                dxp[:, :, di : di + h, dj : dj + w] += dcols6[:, :, di, dj]
        return dxp[:, :, 1 : h + 1, 1 : w + 1]


class ReLU:
    def __init__(self):
        self._mask = None

    def params(self):
        return []

    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout):
        return dout * self._mask


class MaxPool2:
    """2x2 max pooling with floor division; axes already at size 1 pass
    through unpooled; odd remainders are dropped. Ties route to the first
    maximum for deterministic gradients."""

    def __init__(self):
        self._cache = None

    def params(self):
        return []

    def forward(self, x):
        n, c, h, w = x.shape
        kh = 2 if h >= 2 else 1
        kw = 2 if w >= 2 else 1
        h2, w2 = h // kh, w // kw
        xt = x[:, :, : h2 * kh, : w2 * kw]
        r = xt.reshape(n, c, h2, kh, w2, kw)
        patches = r.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2, w2, kh * kw)
        idx = patches.argmax(axis=-1)
        out = np.take_along_axis(patches, idx[..., None], axis=-1)[..., 0]
        self._cache = (x.shape, kh, kw, idx)
        return out

    def backward(self, dout):
        (x_shape, kh, kw, idx) = self._cache
        n, c, h, w = x_shape
        h2, w2 = h // kh, w // kw
        dpatches = np.zeros((n, c, h2, w2, kh * kw), dtype=dout.dtype)
        np.put_along_axis(dpatches, idx[..., None], dout[..., None], axis=-1)
        dxt = dpatches.reshape(n, c, h2, w2, kh, kw).transpose(0, 1, 2, 4, 3, 5)
        dx = np.zeros(x_shape, dtype=dout.dtype)
        dx[:, :, : h2 * kh, : w2 * kw] = dxt.reshape(n, c, h2 * kh, w2 * kw)
        return dx


class Flatten:
    def __init__(self):
        self._shape = None

    def params(self):
        return []

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)


class Linear:
    def __init__(self, in_features: int, out_features: int, rng, dtype):
        limit = np.sqrt(6.0 / in_features)
        self.weight = Tensor(
            rng.uniform(-limit, limit, size=(out_features, in_features)).astype(dtype)
        )
        self.bias = Tensor(np.zeros(out_features, dtype=dtype))
        self._x = None

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        self._x = x
        return x @ self.weight.values.T + self.bias.values

    def backward(self, dout):
        self.weight.grad += dout.T @ self._x
        self.bias.grad += dout.sum(axis=0)
        return dout @ self.weight.values


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


class CnnModel:
    """Conv blocks + classification head producing one logit per input."""

    def __init__(self, config: CnnConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.dtype = np.dtype(dtype)
        rng = named_rng(seed, "cnn-init")
        layers: list = []
        in_ch = 1
        for out_ch in config.channels:
            layers.extend([Conv2d(in_ch, out_ch, rng, self.dtype), ReLU(), MaxPool2()])
            in_ch = out_ch
        layers.append(Flatten())
        layers.append(Linear(config.flat_size, config.hidden, rng, self.dtype))
        layers.append(ReLU())
        layers.append(Linear(config.hidden, 1, rng, self.dtype))
        self.layers = layers

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.params()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def forward(self, batch: np.ndarray) -> np.ndarray:
        """Batch (n, 1, n_mels, n_frames) of log-mel values -> logits (n,)."""
        expected = (1, self.config.n_mels, self.config.n_frames)
        if batch.ndim != 4 or batch.shape[1:] != expected:
            raise InferenceError(f"expected batch shape (n, {expected}), got {batch.shape}")
        x = np.asarray(batch, dtype=self.dtype) * self.dtype.type(self.config.input_scale)
        x += self.dtype.type(self.config.input_offset)
        for layer in self.layers:
            x = layer.forward(x)
        return x[:, 0]

    def backward(self, dlogits: np.ndarray) -> None:
        """Populate parameter gradients for the last forward pass."""
        if self.layers[-1]._x is None:
            raise TrainingError("backward called before forward")
        self.zero_grad()
        d = dlogits[:, None].astype(self.dtype)
        for layer in reversed(self.layers):
            d = layer.backward(d)


def batch_from_logmels(logmels: Sequence[LogMelSpectrogram], dtype=np.float32) -> np.ndarray:
    return np.stack([lm.values for lm in logmels]).astype(dtype)[:, None, :, :]


# ---------------------------------------------------------------------------
# loss and optimizer
# ---------------------------------------------------------------------------


def weighted_bce(logits, labels, loss_config: LossConfig) -> float:
    """Mean of w(y) * (softplus(z) - y z); stable for |z| up to ~1e4.

    w(1) = pos_weight, w(0) = 1.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    w = np.where(y > 0, loss_config.pos_weight, 1.0)
    return float(np.mean(w * (softplus - y * z)))


def weighted_bce_grad(logits, labels, loss_config: LossConfig) -> np.ndarray:
    """d(mean loss)/d(logits): w(y) (sigmoid(z) - y) / n."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    w = np.where(y > 0, loss_config.pos_weight, 1.0)
    return w * (sigmoid(z) - y) / len(z)


@dataclass
class AdamState:
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[Tensor], alpha: float = 1e-3) -> "AdamState":
        return cls(
            alpha=alpha,
            m=[np.zeros_like(p.values) for p in params],
            v=[np.zeros_like(p.values) for p in params],
        )


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update, in place on the parameter values."""
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        p.values -= (state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)).astype(
            p.values.dtype
        )


# ---------------------------------------------------------------------------
# training and inference
# ---------------------------------------------------------------------------


@dataclass
class CnnTrainResult:
    model: CnnModel
    loss_curve: list[float]
    pos_weight: float


def train_cnn(
    samples: Sequence[WindowSample],
    config: CnnConfig = CnnConfig(),
    loss_config: LossConfig | None = None,
    epochs: int = 20,
    batch_size: int = 32,
    seed: int = 0,
    learning_rate: float = 1e-3,
    dtype=np.float32,
) -> CnnTrainResult:
    """Train on window log-mels; pos_weight defaults to n_neg/n_pos.

    epochs=0 returns the freshly initialized model untouched. Sample order
    is canonicalized first so training is a pure function of the sample
    set, the config, and the seed.
    """
    ordered = canonical_order(samples)
    missing = [s.sample_id for s in ordered if s.logmel is None]
    if missing:
        raise TrainingError(f"samples missing log-mel input, e.g. {missing[0]}")
    y = np.array([s.label for s in ordered], dtype=np.float64)
    if len(ordered) < 1 or y.all() or not y.any():
        raise TrainingError("CNN training needs both classes present")
    X = batch_from_logmels([s.logmel for s in ordered], dtype)

    if loss_config is None:
        n_pos = y.sum()
        loss_config = LossConfig(pos_weight=float((len(y) - n_pos) / n_pos))

    model = CnnModel(config, seed=seed, dtype=dtype)
    params = model.parameters()
    state = AdamState.for_params(params, alpha=learning_rate)
    loss_curve: list[float] = []
    for epoch in range(epochs):
        perm = named_rng(seed, f"cnn-shuffle-{epoch}").permutation(len(y))
        epoch_losses = []
        for start in range(0, len(y), batch_size):
            idx = perm[start : start + batch_size]
            logits = model.forward(X[idx])
            loss = weighted_bce(logits, y[idx], loss_config)
            model.backward(weighted_bce_grad(logits, y[idx], loss_config))
            adam_step(params, [p.grad for p in params], state)
            epoch_losses.append(loss)
        loss_curve.append(float(np.mean(epoch_losses)))
    return CnnTrainResult(model=model, loss_curve=loss_curve, pos_weight=loss_config.pos_weight)


def predict_cnn(model: CnnModel, logmel: LogMelSpectrogram) -> tuple[float, bool]:
    """(sigmoid score, label at 0.5) for one window spectrogram."""
    logits = model.forward(batch_from_logmels([logmel], model.dtype))
    score = float(sigmoid(float(logits[0])))
    return score, score >= 0.5


def predict_cnn_scores(model: CnnModel, logmels: Sequence[LogMelSpectrogram]) -> np.ndarray:
    if not logmels:
        return np.zeros(0)
    return sigmoid(model.forward(batch_from_logmels(logmels, model.dtype)).astype(np.float64))


# ---------------------------------------------------------------------------
# binary serialization ("CNN1" payload)
# ---------------------------------------------------------------------------


def cnn_to_bytes(model: CnnModel) -> bytes:
    params = model.parameters()
    header = json.dumps(
        {
            "config": model.config.to_json_dict(),
            "shapes": [list(p.shape) for p in params],
        },
        sort_keys=True,
    ).encode()
    blob = [struct.pack("<I", len(header)), header]
    for p in params:
        blob.append(p.values.astype("<f4").tobytes())
    return b"".join(blob)


def cnn_from_bytes(payload: bytes) -> CnnModel:
    try:
        (header_len,) = struct.unpack_from("<I", payload, 0)
        header = json.loads(payload[4 : 4 + header_len])
        config = CnnConfig.from_json_dict(header["config"])
        model = CnnModel(config, seed=0, dtype=np.float32)
        offset = 4 + header_len
        params = model.parameters()
        if len(header["shapes"]) != len(params):
            raise ModelFormatError("parameter count mismatch")
        for p, shape in zip(params, header["shapes"]):
            if list(p.shape) != shape:
                raise ModelFormatError(f"parameter shape mismatch: {p.shape} vs {shape}")
            count = int(np.prod(shape))
            values = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
            p.values = values.reshape(shape).astype(np.float32).copy()
            offset += count * 4
        if offset != len(payload):
            raise ModelFormatError("trailing bytes after CNN payload")
    except (struct.error, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt CNN payload: {exc}") from None
    return model
