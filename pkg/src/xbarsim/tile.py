"""The analog tile: one crossbar holding a weight matrix.

A tile performs noisy forward (``W x``) and backward (``W^T d``) products
through its peripheral model, pulsed rank-1 updates through its device
model, and once-per-mini-batch temporal processes (decay, diffusion, reset).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Union

import numpy as np

from . import pulsed
from .devices import DeviceParams, DeviceRealization, preset, realize
from .errors import ConfigError, ShapeError
from .periphery import IOParams, analog_mvm
from .pulsed import UpdateParams

if TYPE_CHECKING:
    from .compounds import TransferConfig, UnitCellConfig


@dataclass(frozen=True)
class TemporalParams:
    """Per-mini-batch weight processes; the ``*_dtod`` fields are relative device spreads."""

    decay_rate: float = 0.0
    decay_dtod: float = 0.0
    diffusion_sigma: float = 0.0
    diffusion_dtod: float = 0.0
    reset_prob: float = 0.0
    reset_prob_dtod: float = 0.0
    reset_value: float = 0.0
    reset_value_dtod: float = 0.0

    def __post_init__(self):
        for name in ("decay_rate", "decay_dtod", "diffusion_sigma", "diffusion_dtod",
                     "reset_prob_dtod", "reset_value_dtod"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"must be >= 0, got {getattr(self, name)}", name)
        if not 0.0 <= self.decay_rate <= 1.0:
            raise ConfigError(f"must be in [0, 1], got {self.decay_rate}", "decay_rate")
        if not 0.0 <= self.reset_prob <= 1.0:
            raise ConfigError(f"must be in [0, 1], got {self.reset_prob}", "reset_prob")

    @property
    def is_null(self) -> bool:
        return self.decay_rate == 0 and self.diffusion_sigma == 0 and self.reset_prob == 0


@dataclass(frozen=True)
class TileConfig:
    """Everything that defines the non-idealities of a tile (an ``rpu_config``)."""

    forward: IOParams = field(default_factory=IOParams)
    backward: IOParams = field(default_factory=IOParams)
    update: UpdateParams = field(default_factory=UpdateParams)
    device: Union[DeviceParams, "UnitCellConfig", "TransferConfig"] = field(
        default_factory=lambda: preset("ideal"))
    temporal: TemporalParams = field(default_factory=TemporalParams)


class AnalogTile:
    """Crossbar of ``d_out x d_in`` single-device crosspoints.

    Weights are held in normalized units and always kept inside the
    per-crosspoint bounds of the sampled device realization.
    """

    def __init__(self, d_out: int, d_in: int, config: TileConfig | None = None,
                 rng: np.random.Generator | None = None, learning_rate: float = 0.01):
        config = config or TileConfig()
        if not isinstance(config.device, DeviceParams):
            raise ConfigError("AnalogTile needs a single DeviceParams; use make_tile for compounds",
                              "device")
        if d_out < 1 or d_in < 1:
            raise ShapeError(f"tile shape must be positive, got ({d_out}, {d_in})")
        self.d_out, self.d_in = int(d_out), int(d_in)
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.learning_rate = learning_rate
        self.device: DeviceRealization = realize(config.device, (self.d_out, self.d_in), self.rng)
        # fixed per-device deviations of the temporal processes
        self._temporal_xi = self.rng.standard_normal((4, self.d_out, self.d_in))
        self.weights = np.zeros((self.d_out, self.d_in))

    @property
    def shape(self) -> tuple[int, int]:
        return self.d_out, self.d_in

    def forward(self, x: np.ndarray) -> np.ndarray:
        return analog_mvm(self.weights, x, self.config.forward, self.rng)

    def backward(self, d: np.ndarray) -> np.ndarray:
        return analog_mvm(self.weights.T, d, self.config.backward, self.rng)

    def update(self, x: np.ndarray, d: np.ndarray, lr: float | None = None) -> None:
        pulsed.update(self, x, d, self.learning_rate if lr is None else lr)

    def get_weights(self) -> np.ndarray:
        return self.weights.copy()

    def set_weights(self, w: np.ndarray) -> None:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != self.shape:
            raise ShapeError(f"expected weights of shape {self.shape}, got {w.shape}")
        self.weights = np.ascontiguousarray(self.device.clip(w))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.device.w_min.copy(), self.device.w_max.copy()

    def reset_value(self, tp: TemporalParams) -> np.ndarray:
        return tp.reset_value + tp.reset_value_dtod * self._temporal_xi[3]

    def apply_temporal_step(self, tp: TemporalParams | None = None) -> None:
        """Decay toward the reset value, diffuse, then randomly reset; re-clip."""
        tp = self.config.temporal if tp is None else tp
        if tp.is_null:
            return
        xi_decay, xi_diff, xi_reset, _ = self._temporal_xi
        w = self.weights
        w_reset = self.reset_value(tp)
        if tp.decay_rate > 0:
            rate = np.clip(tp.decay_rate * (1.0 + tp.decay_dtod * xi_decay), 0.0, 1.0)
            w = w_reset + (w - w_reset) * (1.0 - rate)
        if tp.diffusion_sigma > 0:
            sigma = np.maximum(tp.diffusion_sigma * (1.0 + tp.diffusion_dtod * xi_diff), 0.0)
            w = w + sigma * self.rng.standard_normal(w.shape)
        if tp.reset_prob > 0:
            prob = np.clip(tp.reset_prob * (1.0 + tp.reset_prob_dtod * xi_reset), 0.0, 1.0)
            hit = self.rng.random(w.shape) < prob
            w = np.where(hit, w_reset, w)
        self.weights = np.ascontiguousarray(self.device.clip(w))

    def on_batch_end(self) -> None:
        """Hook called once per mini-batch by the trainer (no-op for plain tiles)."""

    def __repr__(self) -> str:
        return f"AnalogTile({self.d_out}, {self.d_in}, device={self.config.device.kind})"
