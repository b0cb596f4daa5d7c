"""Analog layers with digital activations.

Layers keep the inputs and output gradients of the current mini-batch so the
optimizer step can replay them as per-sample (per-patch) pulsed updates.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..compounds import make_tile
from ..devices import DeviceParams
from ..errors import ConfigError, ShapeError
from ..tile import TileConfig


@dataclass(frozen=True)
class HardwareAware:
    """Hardware-aware training switches of one analog layer."""

    perfect_backward: bool = False
    perfect_update: bool = False
    weight_noise_sigma: float = 0.0

    def __post_init__(self):
        if not self.weight_noise_sigma >= 0:
            raise ConfigError(f"must be >= 0, got {self.weight_noise_sigma}", "weight_noise_sigma")


class Layer:
    trainable = False

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad):
        return np.where(self._mask, grad, 0.0)


class Tanh(Layer):
    def forward(self, x):
        self._y = np.tanh(x)
        return self._y

    def backward(self, grad):
        return grad * (1.0 - self._y ** 2)


class Sigmoid(Layer):
    def forward(self, x):
        self._y = 1.0 / (1.0 + np.exp(-x))
        return self._y

    def backward(self, grad):
        return grad * self._y * (1.0 - self._y)


class Flatten(Layer):
    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


def _member_tiles(tile) -> list:
    """Plain tiles that store state inside ``tile``; the first one carries the weight."""
    if hasattr(tile, "tiles"):
        return list(tile.tiles)
    if hasattr(tile, "slow"):
        return [tile.slow, tile.fast]
    return [tile]


class _AnalogLayer(Layer):
    """Shared tile handling of the analog linear and convolution layers."""

    trainable = True

    def _build(self, d_out: int, d_in: int, fan_in: int, bias: bool, analog_bias: bool,
               config: TileConfig | None, rng: np.random.Generator | None,
               init_rng: np.random.Generator | None, hw_aware: HardwareAware | None):
        self.config = config or TileConfig()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        init_rng = init_rng if init_rng is not None else self.rng
        self.hw_aware = hw_aware or HardwareAware()
        self.analog_bias = bool(bias and analog_bias)
        self.has_digital_bias = bool(bias and not analog_bias)
        self.tile = make_tile(d_out, d_in + int(self.analog_bias), self.config, self.rng)

        bound = 1.0 / np.sqrt(fan_in)
        w = init_rng.uniform(-bound, bound, size=(d_out, d_in + int(self.analog_bias)))
        self.tile.set_weights(w)
        self.bias = init_rng.uniform(-bound, bound, size=d_out) if self.has_digital_bias else None
        self._saved_weights = None
        self._x = None
        self._g = None

    # mini-batch hooks -------------------------------------------------
    def begin_batch(self) -> None:
        """Reversibly add weight noise for this mini-batch's forward/backward."""
        sigma = self.hw_aware.weight_noise_sigma
        if sigma > 0:
            members = _member_tiles(self.tile)
            self._saved_weights = [m.weights.copy() for m in members]
            primary = members[0]
            scale = 1.0 / self.tile.g[0] if hasattr(self.tile, "g") else 1.0
            noise = sigma * scale * self.rng.standard_normal(primary.weights.shape)
            primary.weights = np.ascontiguousarray(primary.device.clip(primary.weights + noise))

    def end_batch(self) -> None:
        """Put back the exact pre-noise weights (before the update is applied)."""
        if self._saved_weights is not None:
            for m, w in zip(_member_tiles(self.tile), self._saved_weights):
                m.weights = w
            self._saved_weights = None

    # tile-level products --------------------------------------------------
    def _tile_forward(self, rows: np.ndarray) -> np.ndarray:
        if self.analog_bias:
            rows = np.hstack([rows, np.ones((rows.shape[0], 1))])
        y = self.tile.forward(rows)
        if self.has_digital_bias:
            y = y + self.bias
        return y

    def _tile_backward(self, g_rows: np.ndarray) -> np.ndarray:
        if self.hw_aware.perfect_backward:
            grad = g_rows @ self.tile.get_weights()
        else:
            grad = self.tile.backward(g_rows)
        return grad[:, :-1] if self.analog_bias else grad

    def _rows_with_bias(self, rows: np.ndarray) -> np.ndarray:
        if self.analog_bias:
            return np.hstack([rows, np.ones((rows.shape[0], 1))])
        return rows

    def step(self, lr: float) -> None:
        """Apply the cached mini-batch gradient to the tile (and digital bias)."""
        if self._x is None or self._g is None:
            raise RuntimeError("no cached forward/backward for this layer")
        x_rows, g_rows = self._x, self._g
        if self.has_digital_bias:
            self.bias = self.bias - lr * g_rows.sum(axis=0)
        if lr == 0:
            return
        if self.hw_aware.perfect_update:
            w = self.tile.get_weights()
            self.tile.set_weights(w - lr * (g_rows.T @ x_rows))
            return
        for x, g in zip(x_rows, g_rows):
            self.tile.update(x, -g, lr)

    def finish_batch(self) -> None:
        """Mini-batch bookkeeping after the update: compound counters, temporal processes."""
        self.tile.on_batch_end()
        self.tile.apply_temporal_step()

    def tile_config_for_inference(self) -> TileConfig:
        return TileConfig(forward=self.config.forward, device=DeviceParams())

    def get_weights(self) -> np.ndarray:
        return self.tile.get_weights()

    def set_weights(self, w: np.ndarray) -> None:
        self.tile.set_weights(w)


class AnalogLinear(_AnalogLayer):
    """Fully connected layer computed on one analog tile of shape ``(out, in)``."""

    def __init__(self, in_features: int, out_features: int, bias: bool = True,
                 config: TileConfig | None = None, rng: np.random.Generator | None = None,
                 init_rng: np.random.Generator | None = None, analog_bias: bool = False,
                 hw_aware: HardwareAware | None = None):
        self.in_features, self.out_features = int(in_features), int(out_features)
        self._build(out_features, in_features, in_features, bias, analog_bias, config, rng,
                    init_rng, hw_aware)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"expected input (batch, {self.in_features}), got {x.shape}")
        self._x = self._rows_with_bias(x)
        self._g = None
        return self._tile_forward(x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("backward called before forward")
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != (self._x.shape[0], self.out_features):
            raise ShapeError(f"expected gradient {(self._x.shape[0], self.out_features)}, got {grad.shape}")
        self._g = grad
        return self._tile_backward(grad)


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def im2col(x: np.ndarray, k: int, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Unfold ``(N, C, H, W)`` images into patch rows ``(N, Ho, Wo, C*k*k)``.

    Patch entries are ordered channel-major, then kernel row, then column.
    """
    xp = _pad(x, padding)
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, ho, wo = win.shape[:4]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n, ho, wo, c * k * k)


def col2im(cols: np.ndarray, x_shape: tuple[int, int, int, int], k: int, stride: int = 1,
           padding: int = 0) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add patch rows back onto the image grid."""
    n, c, h, w = x_shape
    _, ho, wo, _ = cols.shape
    cols = cols.reshape(n, ho, wo, c, k, k)
    out = np.zeros((n, c, h + 2 * padding, w + 2 * padding))
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    if padding:
        out = out[:, :, padding:-padding, padding:-padding]
    return out


class AnalogConv2d(_AnalogLayer):
    """2-D convolution; the kernel is a tile of shape ``(c_out, c_in*k*k)``.

    Each output position is one analog forward of its input patch, and each
    patch contributes its own pulsed update.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, stride: int = 1,
                 padding: int = 0, bias: bool = True, config: TileConfig | None = None,
                 rng: np.random.Generator | None = None, init_rng: np.random.Generator | None = None,
                 analog_bias: bool = False, hw_aware: HardwareAware | None = None):
        self.in_channels, self.out_channels = int(in_channels), int(out_channels)
        self.kernel_size, self.stride, self.padding = int(kernel_size), int(stride), int(padding)
        fan_in = in_channels * kernel_size * kernel_size
        self._build(out_channels, fan_in, fan_in, bias, analog_bias, config, rng, init_rng, hw_aware)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(f"expected input (batch, {self.in_channels}, H, W), got {x.shape}")
        cols = im2col(x, self.kernel_size, self.stride, self.padding)
        n, ho, wo, p = cols.shape
        rows = cols.reshape(n * ho * wo, p)
        self._x_shape = x.shape
        self._out_hw = (ho, wo)
        self._x = self._rows_with_bias(rows)
        self._g = None
        y = self._tile_forward(rows)
        return y.reshape(n, ho, wo, self.out_channels).transpose(0, 3, 1, 2)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("backward called before forward")
        n = self._x_shape[0]
        ho, wo = self._out_hw
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != (n, self.out_channels, ho, wo):
            raise ShapeError(f"expected gradient {(n, self.out_channels, ho, wo)}, got {grad.shape}")
        g_rows = grad.transpose(0, 2, 3, 1).reshape(n * ho * wo, self.out_channels)
        self._g = g_rows
        g_cols = self._tile_backward(g_rows).reshape(n, ho, wo, -1)
        return col2im(g_cols, self._x_shape, self.kernel_size, self.stride, self.padding)


class Sequential:
    """Ordered stack of layers."""

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    __call__ = forward

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def analog_layers(self) -> list[_AnalogLayer]:
        return [layer for layer in self.layers if isinstance(layer, _AnalogLayer)]

    def with_tiles(self, tiles) -> "Sequential":
        """Shallow copy whose analog layers use ``tiles`` (in order) and no weight noise."""
        tiles = list(tiles)
        new_layers = []
        for layer in self.layers:
            layer = copy.copy(layer)
            if isinstance(layer, _AnalogLayer):
                layer.tile = tiles.pop(0)
                layer.hw_aware = HardwareAware(perfect_backward=True, perfect_update=True)
            new_layers.append(layer)
        if tiles:
            raise ValueError("more tiles than analog layers")
        return Sequential(new_layers)
