"""Peripheral conversion and noise of an analog mat-vec.

Implements the noisy product ::

    y_i = f_adc( sum_j (w_ij + s_w xi_ij) (f_dac(x_j) + s_inp xi_j) + s_out xi_i )

with optional abs-max noise management around it. Quantizers are symmetric
uniform mid-rise over ``[-bound, bound]``; exact zeros pass through unchanged
(an undriven line carries no signal and no input noise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonFiniteInputError, ShapeError

NOISE_MANAGEMENT = ("none", "abs_max_scaling")


@dataclass(frozen=True)
class IOParams:
    dac_bits: int = 7
    adc_bits: int = 9
    input_bound: float = 1.0
    output_bound: float = 12.0
    sigma_inp: float = 0.0
    sigma_out: float = 0.06
    sigma_w: float = 0.0
    noise_management: str = "abs_max_scaling"
    is_perfect: bool = False

    def __post_init__(self):
        for name in ("dac_bits", "adc_bits"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 0:
                raise ConfigError(f"must be an integer >= 0, got {v!r}", name)
            if v > 24:
                raise ConfigError(f"more than 24 bits is not supported, got {v}", name)
        for name in ("input_bound", "output_bound"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"must be > 0, got {getattr(self, name)}", name)
        for name in ("sigma_inp", "sigma_out", "sigma_w"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"must be >= 0, got {getattr(self, name)}", name)
        if self.noise_management not in NOISE_MANAGEMENT:
            raise ConfigError(f"expected one of {NOISE_MANAGEMENT}, got {self.noise_management!r}",
                              "noise_management")


PERFECT_IO = IOParams(is_perfect=True)


def quantize(x: np.ndarray, bits: int, bound: float) -> np.ndarray:
    """Clip to ``[-bound, bound]`` and snap to the ``2**bits`` mid-rise levels.

    ``bits == 0`` clips only.
    """
    x = np.asarray(x, dtype=np.float64)
    clipped = np.clip(x, -bound, bound)
    if bits == 0:
        return clipped
    n_levels = 1 << bits
    step = 2.0 * bound / n_levels
    idx = np.clip(np.floor((clipped + bound) / step), 0, n_levels - 1)
    q = -bound + (idx + 0.5) * step
    return np.where(x == 0.0, 0.0, q)


def apply_dac(x: np.ndarray, io: IOParams) -> np.ndarray:
    if io.is_perfect:
        return np.asarray(x, dtype=np.float64)
    return quantize(x, io.dac_bits, io.input_bound)


def apply_adc(y: np.ndarray, io: IOParams) -> np.ndarray:
    if io.is_perfect:
        return np.asarray(y, dtype=np.float64)
    return quantize(y, io.adc_bits, io.output_bound)


def _check_input(x: np.ndarray, size: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != size:
        raise ShapeError(f"expected input of length {size}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInputError("input contains NaN or infinite entries")
    return x


def analog_mvm(w: np.ndarray, x: np.ndarray, io: IOParams, rng: np.random.Generator,
               extra_weight_sigma: float = 0.0) -> np.ndarray:
    """Noisy product ``w @ x`` for one vector (shape ``(d_in,)``) or a batch of rows.

    Every row of a batch is an independent analog read with its own noise.
    ``extra_weight_sigma`` adds transient per-use weight noise on top of
    ``io.sigma_w`` (used for inference read noise).
    """
    d_out, d_in = w.shape
    x = _check_input(x, d_in)
    single = x.ndim == 1
    x2 = x[None, :] if single else x

    if io.is_perfect:
        y = x2 @ w.T
        return y[0] if single else y

    if io.noise_management == "abs_max_scaling":
        alpha = np.max(np.abs(x2), axis=1, keepdims=True)
        alpha[alpha == 0.0] = 1.0
        xs = x2 / alpha
    else:
        alpha = None
        xs = x2

    xq = apply_dac(xs, io)
    if io.sigma_inp > 0:
        xq = xq + io.sigma_inp * rng.standard_normal(xq.shape) * (xq != 0.0)
    y = xq @ w.T
    sigma_w = float(np.hypot(io.sigma_w, extra_weight_sigma))
    if sigma_w > 0:
        # sum_j xi_ij x_j is N(0, |x|^2) independently per output line
        norm = np.sqrt(np.sum(xq * xq, axis=1, keepdims=True))
        y = y + sigma_w * norm * rng.standard_normal(y.shape)
    if io.sigma_out > 0:
        y = y + io.sigma_out * rng.standard_normal(y.shape)
    y = apply_adc(y, io)
    if alpha is not None:
        y = y * alpha
    return y[0] if single else y
