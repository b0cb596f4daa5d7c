"""Compound tiles built from several plain tiles.

* :class:`UnitCellTile` - every crosspoint holds several devices whose
  signed combination ``sum_k g_k w^(k)`` is the effective weight.
* :class:`TransferCompound` - Tiki-Taka style pair: SGD pulses go to a fast
  tile ``A``; every ``transfer_every`` counted units, columns of ``A`` are read
  out with one-hot analog forwards and pulsed onto the slow tile ``C``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .devices import DeviceParams, preset
from .errors import ConfigError, ShapeError
from .periphery import IOParams, analog_mvm
from .tile import AnalogTile, TemporalParams, TileConfig

UPDATE_POLICIES = ("all_together", "one_by_one_round_robin")


@dataclass(frozen=True)
class UnitCellConfig:
    unit_cell_devices: tuple[DeviceParams, ...] = field(default_factory=lambda: (preset("ideal"),))
    update_policy: str = "all_together"
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "unit_cell_devices", tuple(self.unit_cell_devices))
        if len(self.unit_cell_devices) < 1:
            raise ConfigError("need at least one device", "unit_cell_devices")
        if self.update_policy not in UPDATE_POLICIES:
            raise ConfigError(f"expected one of {UPDATE_POLICIES}, got {self.update_policy!r}",
                              "update_policy")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(g) for g in self.weights))
            if len(self.weights) != len(self.unit_cell_devices):
                raise ConfigError(
                    f"{len(self.weights)} weights for {len(self.unit_cell_devices)} devices", "weights")
            if not all(np.isfinite(self.weights)):
                raise ConfigError("weights must be finite", "weights")

    @property
    def combination(self) -> tuple[float, ...]:
        return self.weights if self.weights is not None else (1.0,) * len(self.unit_cell_devices)


@dataclass(frozen=True)
class TransferConfig:
    """Fast/slow tile pair. ``unit_cell_devices`` is ``(fast A, slow C)``.

    ``transfer_every=None`` disables transfers.
    """

    unit_cell_devices: tuple[DeviceParams, ...] = field(
        default_factory=lambda: (preset("ideal"), preset("ideal")))
    transfer_every: int | None = 1
    units_in_mbatch: bool = False
    transfer_lr: float = 1.0
    transfer_columns_per_event: int = 1
    gamma: float = 0.0
    transfer_forward: IOParams | None = None

    def __post_init__(self):
        object.__setattr__(self, "unit_cell_devices", tuple(self.unit_cell_devices))
        if len(self.unit_cell_devices) != 2:
            raise ConfigError(f"need exactly 2 devices (fast, slow), got {len(self.unit_cell_devices)}",
                              "unit_cell_devices")
        if self.transfer_every is not None and (
                isinstance(self.transfer_every, bool) or int(self.transfer_every) != self.transfer_every
                or self.transfer_every < 1):
            raise ConfigError(f"must be an integer >= 1 or null, got {self.transfer_every!r}",
                              "transfer_every")
        if not self.transfer_lr > 0:
            raise ConfigError(f"must be > 0, got {self.transfer_lr}", "transfer_lr")
        if int(self.transfer_columns_per_event) != self.transfer_columns_per_event or \
                self.transfer_columns_per_event < 1:
            raise ConfigError(f"must be an integer >= 1, got {self.transfer_columns_per_event!r}",
                              "transfer_columns_per_event")
        if not self.gamma >= 0:
            raise ConfigError(f"must be >= 0, got {self.gamma}", "gamma")


class UnitCellTile:
    """Tile whose crosspoints are groups of devices combined with weights ``g_k``."""

    def __init__(self, d_out: int, d_in: int, config: TileConfig,
                 rng: np.random.Generator | None = None, learning_rate: float = 0.01):
        cell = config.device
        if not isinstance(cell, UnitCellConfig):
            raise ConfigError("UnitCellTile needs a UnitCellConfig device", "device")
        self.config = config
        self.cell = cell
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.learning_rate = learning_rate
        self.d_out, self.d_in = int(d_out), int(d_in)
        self.g = np.array(cell.combination, dtype=np.float64)
        # all member devices draw from the cell's stream
        self.tiles = [AnalogTile(d_out, d_in, replace(config, device=dev), self.rng, learning_rate)
                      for dev in cell.unit_cell_devices]
        self.update_counts = [0] * len(self.tiles)
        self._next = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.d_out, self.d_in

    @property
    def weights(self) -> np.ndarray:
        eff = self.g[0] * self.tiles[0].weights
        for g, t in zip(self.g[1:], self.tiles[1:]):
            eff = eff + g * t.weights
        return eff

    def forward(self, x):
        return analog_mvm(self.weights, x, self.config.forward, self.rng)

    def backward(self, d):
        return analog_mvm(self.weights.T, d, self.config.backward, self.rng)

    def update(self, x, d, lr: float | None = None) -> None:
        lr = self.learning_rate if lr is None else lr
        d = np.asarray(d, dtype=np.float64)
        if self.cell.update_policy == "all_together":
            targets = range(len(self.tiles))
        else:
            targets = [self._next]
            self._next = (self._next + 1) % len(self.tiles)
        for k in targets:
            self.tiles[k].update(x, np.sign(self.g[k]) * d, lr)
            self.update_counts[k] += 1

    def get_weights(self) -> np.ndarray:
        return self.weights

    def set_weights(self, w) -> None:
        """Program ``w / g_0`` into the first device and zero the others."""
        w = np.asarray(w, dtype=np.float64)
        if w.shape != self.shape:
            raise ShapeError(f"expected weights of shape {self.shape}, got {w.shape}")
        if self.g[0] == 0:
            raise ValueError("first combination weight is zero; cannot program the cell")
        self.tiles[0].set_weights(w / self.g[0])
        for t in self.tiles[1:]:
            t.set_weights(np.zeros(self.shape))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.zeros(self.shape)
        hi = np.zeros(self.shape)
        for g, t in zip(self.g, self.tiles):
            t_lo, t_hi = t.bounds()
            lo += np.where(g >= 0, g * t_lo, g * t_hi)
            hi += np.where(g >= 0, g * t_hi, g * t_lo)
        return lo, hi

    def apply_temporal_step(self, tp: TemporalParams | None = None) -> None:
        for t in self.tiles:
            t.apply_temporal_step(tp)

    def on_batch_end(self) -> None:
        pass


class TransferCompound:
    """Coupled fast/slow tiles; forward reads ``C + gamma * A``."""

    def __init__(self, d_out: int, d_in: int, config: TileConfig,
                 rng: np.random.Generator | None = None, learning_rate: float = 0.01):
        tc = config.device
        if not isinstance(tc, TransferConfig):
            raise ConfigError("TransferCompound needs a TransferConfig device", "device")
        self.config = config
        self.transfer = tc
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.learning_rate = learning_rate
        self.d_out, self.d_in = int(d_out), int(d_in)
        dev_a, dev_c = tc.unit_cell_devices
        self.fast = AnalogTile(d_out, d_in, replace(config, device=dev_a), self.rng, learning_rate)
        self.slow = AnalogTile(d_out, d_in, replace(config, device=dev_c), self.rng, learning_rate)
        self.units = 0
        self.n_transfers = 0
        self.next_column = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.d_out, self.d_in

    @property
    def weights(self) -> np.ndarray:
        return self.slow.weights + self.transfer.gamma * self.fast.weights

    def forward(self, x):
        y = self.slow.forward(x)
        if self.transfer.gamma != 0:
            y = y + self.transfer.gamma * self.fast.forward(x)
        return y

    def backward(self, d):
        g = self.slow.backward(d)
        if self.transfer.gamma != 0:
            g = g + self.transfer.gamma * self.fast.backward(d)
        return g

    def update(self, x, d, lr: float | None = None) -> None:
        self.fast.update(x, d, self.learning_rate if lr is None else lr)
        if not self.transfer.units_in_mbatch:
            self._count_unit()

    def on_batch_end(self) -> None:
        if self.transfer.units_in_mbatch:
            self._count_unit()

    def _count_unit(self) -> None:
        self.units += 1
        every = self.transfer.transfer_every
        if every is not None and self.units % every == 0:
            for _ in range(self.transfer.transfer_columns_per_event):
                self.transfer_step()

    def read_column(self, j: int) -> np.ndarray:
        """Analog read of column ``j`` of the fast tile via a one-hot forward."""
        e = np.zeros(self.d_in)
        e[j] = 1.0
        io = self.transfer.transfer_forward or self.fast.config.forward
        return analog_mvm(self.fast.weights, e, io, self.rng)

    def transfer_step(self, column: int | None = None) -> None:
        """Pulse the read-out of one fast column onto the slow tile, then advance."""
        j = self.next_column if column is None else int(column)
        readout = self.read_column(j)
        e = np.zeros(self.d_in)
        e[j] = 1.0
        self.slow.update(e, readout, self.transfer.transfer_lr)
        self.next_column = (j + 1) % self.d_in
        self.n_transfers += 1

    def get_weights(self) -> np.ndarray:
        return self.weights

    def set_weights(self, w) -> None:
        """Program ``w`` into the slow tile and clear the fast tile."""
        self.slow.set_weights(w)
        self.fast.set_weights(np.zeros(self.shape))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        a_lo, a_hi = self.fast.bounds()
        c_lo, c_hi = self.slow.bounds()
        g = self.transfer.gamma
        return c_lo + g * a_lo, c_hi + g * a_hi

    def apply_temporal_step(self, tp: TemporalParams | None = None) -> None:
        self.fast.apply_temporal_step(tp)
        self.slow.apply_temporal_step(tp)


def make_tile(d_out: int, d_in: int, config: TileConfig | None = None,
              rng: np.random.Generator | None = None, learning_rate: float = 0.01):
    """Build the tile family selected by ``config.device``."""
    config = config or TileConfig()
    if isinstance(config.device, UnitCellConfig):
        return UnitCellTile(d_out, d_in, config, rng, learning_rate)
    if isinstance(config.device, TransferConfig):
        return TransferCompound(d_out, d_in, config, rng, learning_rate)
    return AnalogTile(d_out, d_in, config, rng, learning_rate)
