"""Pulse-response models of resistive crosspoint devices.

A device model says how far one up or down pulse moves a crosspoint weight.
Nominal parameters live in :class:`DeviceParams`; :func:`realize` samples the
fixed per-crosspoint deviations (device-to-device variation) once, and
:func:`apply_pulse` adds fresh cycle-to-cycle write noise on every pulse.

Step laws for an up pulse (down pulses mirror them with ``w_min``)::

    constant_step  s = dw_up
    linear_step    s = dw_up * (1 - slope * w)
    soft_bounds    s = dw_up * (1 - w / w_max)
    exp_step       s = dw_up * exp(-gamma * w / (w_max - w_min))

All laws give ``s = dw_up`` at ``w = 0``. The noisy step is
``s * max(0, 1 + dw_min_std * xi)`` and the result is clipped to the
crosspoint bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from . import _kernels
from .errors import ConfigError

DEVICE_KINDS = tuple(_kernels.KIND_CODES)

# realized step sizes and bounds never drop below this fraction of nominal
_FLOOR = 0.01


@dataclass(frozen=True)
class DeviceParams:
    """Nominal device model parameters (normalized weight units)."""

    kind: str = "constant_step"
    dw_min: float = 1e-6
    dw_min_dtod: float = 0.0
    dw_min_std: float = 0.0
    up_down: float = 0.0
    up_down_dtod: float = 0.0
    w_max: float = 1.0
    w_min: float = -1.0
    w_max_dtod: float = 0.0
    w_min_dtod: float = 0.0
    slope: float = 0.0
    gamma: float = 2.0

    def __post_init__(self):
        if self.kind not in DEVICE_KINDS:
            raise ConfigError(f"unknown device kind {self.kind!r}; expected one of {DEVICE_KINDS}",
                              "kind")
        if not self.dw_min > 0:
            raise ConfigError(f"must be > 0, got {self.dw_min}", "dw_min")
        if not self.w_min < 0 < self.w_max:
            raise ConfigError(f"need w_min < 0 < w_max, got [{self.w_min}, {self.w_max}]",
                              "w_max" if self.w_max <= 0 else "w_min")
        for name in ("dw_min_dtod", "dw_min_std", "up_down_dtod", "w_max_dtod", "w_min_dtod",
                     "gamma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"must be >= 0, got {getattr(self, name)}", name)
        if abs(self.up_down) >= 1:
            raise ConfigError(f"|up_down| must be < 1, got {self.up_down}", "up_down")

    @property
    def kind_code(self) -> int:
        return _kernels.KIND_CODES[self.kind]


@dataclass
class DeviceRealization:
    """Per-crosspoint sampled device parameters, fixed after tile construction."""

    params: DeviceParams
    dw_min: np.ndarray
    dw_min_up: np.ndarray
    dw_min_down: np.ndarray
    w_max: np.ndarray
    w_min: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.dw_min.shape

    def clip(self, w: np.ndarray) -> np.ndarray:
        return np.clip(w, self.w_min, self.w_max)


def realize(params: DeviceParams, shape: tuple[int, ...], rng: np.random.Generator) -> DeviceRealization:
    """Sample device-to-device variations: ``v_ij = v * (1 + dtod * xi_ij)``.

    Four standard-normal fields are always drawn (step size, up/down
    asymmetry, upper bound, lower bound) so the stream position does not
    depend on which spreads are zero.
    """
    shape = tuple(shape)
    xi_dw = rng.standard_normal(shape)
    xi_ud = rng.standard_normal(shape)
    xi_max = rng.standard_normal(shape)
    xi_min = rng.standard_normal(shape)

    floor = _FLOOR * params.dw_min
    dw = np.maximum(params.dw_min * (1.0 + params.dw_min_dtod * xi_dw), floor)
    asym = params.up_down + params.up_down_dtod * xi_ud
    dw_up = np.maximum(dw * (1.0 + asym), floor)
    dw_down = np.maximum(dw * (1.0 - asym), floor)
    w_max = np.maximum(params.w_max * (1.0 + params.w_max_dtod * xi_max), _FLOOR * params.w_max)
    w_min = np.minimum(params.w_min * (1.0 + params.w_min_dtod * xi_min), _FLOOR * params.w_min)
    return DeviceRealization(params, dw, dw_up, dw_down, w_max, w_min)


def _flat(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64).ravel()


def apply_pulse(real: DeviceRealization, w, up, rng: np.random.Generator) -> np.ndarray:
    """Apply one pulse to every crosspoint of ``w`` and return the new weights.

    ``up`` is a boolean (or boolean array broadcastable to ``w``): True for
    potentiation, False for depression.
    """
    w = np.asarray(w, dtype=np.float64)
    shape = real.shape
    w_b = np.broadcast_to(w, shape)
    up_b = np.broadcast_to(np.asarray(up, dtype=np.bool_), shape)
    p = real.params
    noise = rng.standard_normal(w_b.size) if p.dw_min_std > 0 else _kernels.empty_noise()
    out = _kernels.pulse_each(
        p.kind_code, _flat(w_b), np.ascontiguousarray(up_b).ravel(),
        _flat(real.dw_min_up), _flat(real.dw_min_down), _flat(real.w_max), _flat(real.w_min),
        float(p.slope), float(p.gamma), float(p.dw_min_std), noise,
    )
    return out.reshape(shape)


def apply_pulse_counts(real: DeviceRealization, w: np.ndarray, counts: np.ndarray,
                       up: np.ndarray, rng: np.random.Generator) -> None:
    """Apply ``counts[i, j]`` same-direction pulses to each crosspoint, in place.

    Pulses on one crosspoint are applied one after another through the step
    law; crosspoints do not interact, so this equals slot-by-slot application.
    """
    p = real.params
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        return
    noise = rng.standard_normal(total) if p.dw_min_std > 0 else _kernels.empty_noise()
    if w.dtype != np.float64 or not w.flags.c_contiguous:
        raise ValueError("weights must be a C-contiguous float64 array")
    _kernels.pulse_counts(
        p.kind_code, w.reshape(-1), counts.ravel(), np.ascontiguousarray(up, dtype=np.bool_).ravel(),
        _flat(real.dw_min_up), _flat(real.dw_min_down), _flat(real.w_max), _flat(real.w_min),
        float(p.slope), float(p.gamma), float(p.dw_min_std), noise,
    )


def pulse_response_trace(params: DeviceParams, n_devices: int, n_up: int, n_down: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Weight traces of independent devices under ``n_up`` up then ``n_down`` down pulses.

    Returns an array of shape ``(1 + n_up + n_down, n_devices)``; row 0 is the
    starting weight 0 and row ``k`` the weight after pulse ``k``.
    """
    if n_up < 0 or n_down < 0 or n_devices < 1:
        raise ValueError("need n_devices >= 1 and n_up, n_down >= 0")
    real = realize(params, (n_devices,), rng)
    w = np.zeros(n_devices)
    rows = [w]
    for k in range(n_up + n_down):
        w = apply_pulse(real, w, k < n_up, rng)
        rows.append(w)
    return np.vstack(rows)


_PRESETS = {
    "ideal": DeviceParams(kind="constant_step", dw_min=1e-6),
    "reram_sb": DeviceParams(
        kind="soft_bounds", dw_min=0.002, dw_min_dtod=0.3, dw_min_std=0.3,
        up_down=0.0, up_down_dtod=0.01, w_max=0.6, w_min=-0.6,
    ),
    "reram_es": DeviceParams(
        kind="exp_step", dw_min=0.002, dw_min_dtod=0.3, dw_min_std=0.3,
        up_down=0.1, up_down_dtod=0.05, w_max=0.6, w_min=-0.6,
        w_max_dtod=0.1, w_min_dtod=0.1, gamma=2.0,
    ),
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name: str, **overrides) -> DeviceParams:
    """Return a named device preset, optionally with fields overridden.

    The numbers are representative configuration, not calibrated hardware data.
    """
    try:
        base = _PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}",
                          "preset") from None
    return replace(base, **overrides) if overrides else base


def device_field_names() -> tuple[str, ...]:
    return tuple(f.name for f in fields(DeviceParams))
