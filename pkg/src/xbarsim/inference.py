"""PCM-like inference tile: programming noise, read noise, power-law drift.

After :meth:`InferenceTile.program` every crosspoint holds
``w0 = clip(w_target + sigma_prog(|w_target|) * xi)`` and its own drift
exponent ``nu``. At time ``t >= t0`` the stored value is
``w0 * (t / t0) ** -nu``. Global drift compensation rescales digital outputs
by ``baseline / current`` readout of an all-ones probe.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, ShapeError
from .periphery import analog_mvm
from .rng import stream
from .tile import AnalogTile, TileConfig


@dataclass(frozen=True)
class InferenceNoiseModel:
    """Statistical inference noise; weights are in normalized units.

    ``sigma_prog(w) = prog_noise_scale * (c0 + c1 |w| + c2 w^2)``; the default
    scale of 1/25 reads the coefficients as microsiemens on a 25 uS range.
    ``drift_nu_std`` is relative: ``nu_ij = nu_mean * (1 + nu_std * xi)``.
    """

    prog_noise_scale: float = 0.04
    prog_coeffs: tuple[float, float, float] = (0.26, 1.66, 0.33)
    read_noise_scale: float = 0.01
    read_noise_time_dependent: bool = False
    t_read: float = 1e-6
    drift_nu_mean: float = 0.06
    drift_nu_std: float = 0.03
    t0: float = 20.0
    nu_clip: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "prog_coeffs", tuple(float(c) for c in self.prog_coeffs))
        object.__setattr__(self, "nu_clip", tuple(float(c) for c in self.nu_clip))
        if len(self.prog_coeffs) != 3:
            raise ConfigError("need three coefficients (c0, c1, c2)", "prog_coeffs")
        for name in ("prog_noise_scale", "read_noise_scale", "drift_nu_mean", "drift_nu_std"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"must be >= 0, got {getattr(self, name)}", name)
        if not self.t0 > 0:
            raise ConfigError(f"must be > 0, got {self.t0}", "t0")
        if not self.t_read > 0:
            raise ConfigError(f"must be > 0, got {self.t_read}", "t_read")
        lo, hi = self.nu_clip
        if not 0.0 <= lo <= hi <= 1.0:
            raise ConfigError(f"need 0 <= nu_min <= nu_max <= 1, got {self.nu_clip}", "nu_clip")

    @classmethod
    def noiseless(cls) -> "InferenceNoiseModel":
        return cls(prog_noise_scale=0.0, read_noise_scale=0.0, drift_nu_mean=0.0, drift_nu_std=0.0)

    def prog_sigma(self, w: np.ndarray) -> np.ndarray:
        c0, c1, c2 = self.prog_coeffs
        a = np.abs(w)
        return self.prog_noise_scale * (c0 + c1 * a + c2 * a * a)

    def read_sigma(self, t: float) -> float:
        if not self.read_noise_time_dependent:
            return self.read_noise_scale
        return self.read_noise_scale * math.sqrt(math.log((t + self.t_read) / self.t_read))

    def drift_factor(self, nu: np.ndarray, t: float) -> np.ndarray:
        if t < self.t0:
            raise ValueError(f"time {t} s precedes the reference time t0 = {self.t0} s")
        return (t / self.t0) ** (-np.asarray(nu))


@dataclass
class DriftCompensation:
    """Reference readout of the all-ones probe, taken right after programming."""

    repetitions: int = 10
    probe: str = "all_ones_vector"
    baseline_readout: float | None = None

    def __post_init__(self):
        if self.probe != "all_ones_vector":
            raise ConfigError(f"unsupported probe {self.probe!r}", "probe")
        if self.repetitions < 1:
            raise ConfigError("must be >= 1", "repetitions")


_TINY = 1e-12


class InferenceTile(AnalogTile):
    """Analog tile that is programmed once and then only read."""

    def __init__(self, d_out: int, d_in: int, config: TileConfig | None = None,
                 model: InferenceNoiseModel | None = None, rng: np.random.Generator | None = None,
                 bounds: tuple[np.ndarray, np.ndarray] | None = None,
                 compensation: DriftCompensation | None = None):
        super().__init__(d_out, d_in, config, rng)
        self.model = model or InferenceNoiseModel()
        if bounds is not None:
            lo, hi = (np.broadcast_to(np.asarray(b, dtype=np.float64), self.shape).copy() for b in bounds)
            self.device.w_min, self.device.w_max = lo, hi
        self.compensation = compensation
        self.programmed = np.zeros(self.shape)
        self.nu = np.zeros(self.shape)
        self.t = self.model.t0
        self.alpha = 1.0

    def program(self, w_target: np.ndarray, rng: np.random.Generator | None = None) -> None:
        """Write ``w_target`` with programming noise and sample per-device drift exponents."""
        rng = self.rng if rng is None else rng
        w_target = np.asarray(w_target, dtype=np.float64)
        if w_target.shape != self.shape:
            raise ShapeError(f"expected weights of shape {self.shape}, got {w_target.shape}")
        m = self.model
        noise = rng.standard_normal(self.shape)
        xi_nu = rng.standard_normal(self.shape)
        self.programmed = self.device.clip(w_target + m.prog_sigma(w_target) * noise)
        self.nu = np.clip(m.drift_nu_mean * (1.0 + m.drift_nu_std * xi_nu), *m.nu_clip)
        self.t = m.t0
        self.weights = np.ascontiguousarray(self.programmed.copy())
        self.alpha = 1.0
        if self.compensation is not None:
            self.compensation.baseline_readout = self.probe_readout(self.compensation.repetitions)

    def drift_to(self, t: float) -> None:
        """Set stored weights to their drifted values at ``t`` seconds (absolute, not incremental)."""
        factor = self.model.drift_factor(self.nu, t)
        self.t = float(t)
        self.weights = np.ascontiguousarray(self.programmed * factor)

    def forward_with_read_noise(self, x: np.ndarray) -> np.ndarray:
        return analog_mvm(self.weights, x, self.config.forward, self.rng,
                          extra_weight_sigma=self.model.read_sigma(self.t))

    def probe_readout(self, repetitions: int = 10) -> float:
        ones = np.ones((repetitions, self.d_in))
        y = self.forward_with_read_noise(ones)
        return float(np.mean(np.sum(np.abs(y), axis=1)))

    def drift_compensation_factor(self) -> float:
        """Measure ``alpha = baseline / current`` readout and use it for later forwards."""
        comp = self.compensation
        if comp is None or comp.baseline_readout is None:
            raise RuntimeError("no drift-compensation baseline; program the tile with compensation")
        current = self.probe_readout(comp.repetitions)
        if current <= _TINY:
            raise ValueError("probe readout is zero; cannot compensate an all-zero tile")
        self.alpha = comp.baseline_readout / current
        return self.alpha

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.alpha * self.forward_with_read_noise(x)

    def backward(self, d):
        raise NotImplementedError("inference tiles are forward-only")

    def update(self, x, d, lr=None):
        raise NotImplementedError("inference tiles are forward-only")


def conductance_traces(model: InferenceNoiseModel, targets: np.ndarray, times: Sequence[float],
                       rng: np.random.Generator, with_read_noise: bool = True) -> np.ndarray:
    """Program ``targets`` (one device each) and read them back at each time.

    Returns an array of shape ``(len(times), n_devices)``.
    """
    targets = np.asarray(targets, dtype=np.float64).ravel()
    tile = InferenceTile(1, targets.size, TileConfig(), model, rng,
                         bounds=(-np.inf, np.inf))
    tile.program(targets[None, :])
    rows = []
    for t in times:
        tile.drift_to(t)
        w = tile.weights[0]
        if with_read_noise and model.read_sigma(t) > 0:
            w = w + model.read_sigma(t) * rng.standard_normal(w.shape)
        rows.append(w)
    return np.vstack(rows)


def fit_loglog_slopes(times: Sequence[float], traces: np.ndarray) -> np.ndarray:
    """Least-squares slope of ``log|g|`` against ``log t`` for every column."""
    lt = np.log(np.asarray(times, dtype=np.float64))
    lg = np.log(np.abs(traces))
    lt_c = lt - lt.mean()
    return (lt_c @ (lg - lg.mean(axis=0))) / (lt_c @ lt_c)


def _accuracy(outputs: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(np.argmax(outputs, axis=1) == labels))


def _mse(outputs: np.ndarray, targets: np.ndarray) -> float:
    return float(np.mean((outputs - targets) ** 2))


METRICS: dict[str, Callable[[np.ndarray, np.ndarray], float]] = {"accuracy": _accuracy, "mse": _mse}


@dataclass
class DriftEvaluation:
    rows: list[tuple[float, int, float, float]] = field(default_factory=list)

    def summary(self) -> list[tuple[float, float, float]]:
        """``(time, mean metric, std metric)`` over seeds, in time order."""
        out = []
        for t in sorted({r[0] for r in self.rows}):
            vals = np.array([r[2] for r in self.rows if r[0] == t])
            out.append((t, float(vals.mean()), float(vals.std(ddof=1)) if vals.size > 1 else 0.0))
        return out

    def metric(self, t: float) -> np.ndarray:
        """Metric per seed at time ``t``, ordered by seed."""
        return np.array([r[2] for r in sorted(self.rows, key=lambda r: r[1]) if r[0] == t])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time_s", "seed", "metric", "alpha"])
            for t, s, m, a in self.rows:
                w.writerow([repr(float(t)), s, repr(m), repr(a)])


def evaluate_over_time(network, times: Iterable[float], model: InferenceNoiseModel,
                       x: np.ndarray, y: np.ndarray, metric: str = "accuracy", n_seeds: int = 10,
                       compensation: bool = False, seed: int = 0) -> DriftEvaluation:
    """Re-program ``network``'s analog layers ``n_seeds`` times and score it at each time.

    Seed ``s`` fixes programming noise and drift exponents for all times, and
    every time point re-uses the same read-noise stream, so times are paired.
    """
    times = [float(t) for t in times]
    for t in times:
        if t < model.t0:
            raise ValueError(f"time {t} s precedes the reference time t0 = {model.t0} s")
    score = METRICS[metric]
    result = DriftEvaluation()
    layers = network.analog_layers()
    for s in range(n_seeds):
        prog_rng = stream(seed, "inference", "program", s)
        tiles = []
        for layer in layers:
            lo, hi = layer.tile.bounds()
            tile = InferenceTile(layer.tile.d_out, layer.tile.d_in, layer.tile_config_for_inference(),
                                 model, stream(seed, "inference", "baseline", s), bounds=(lo, hi),
                                 compensation=DriftCompensation() if compensation else None)
            tile.program(layer.tile.get_weights(), prog_rng)
            tiles.append(tile)
        net = network.with_tiles(tiles)
        for t in times:
            alphas = []
            for k, tile in enumerate(tiles):
                tile.drift_to(t)
                tile.rng = stream(seed, "inference", "read", s, k)
                if compensation:
                    alphas.append(tile.drift_compensation_factor())
                else:
                    alphas.append(1.0)
            out = net.predict(x)
            result.rows.append((t, s, score(out, y), float(np.mean(alphas))))
    return result
