"""Compiled per-pulse device update loops.

Pulses must be applied one at a time so that the step law and the bounds act
on every pulse; these loops are the hot path of the pulsed update.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

CONSTANT_STEP = 0
LINEAR_STEP = 1
SOFT_BOUNDS = 2
EXP_STEP = 3

KIND_CODES = {
    "constant_step": CONSTANT_STEP,
    "linear_step": LINEAR_STEP,
    "soft_bounds": SOFT_BOUNDS,
    "exp_step": EXP_STEP,
}


@njit(cache=True)
def step_magnitude(kind, w, up, dw_up, dw_down, w_max, w_min, slope, gamma):
    """Noise-free size of one pulse (always >= 0)."""
    if up:
        if kind == CONSTANT_STEP:
            s = dw_up
        elif kind == SOFT_BOUNDS:
            s = dw_up * (1.0 - w / w_max)
        elif kind == LINEAR_STEP:
            s = dw_up * (1.0 - slope * w)
        else:
            s = dw_up * math.exp(-gamma * w / (w_max - w_min))
    else:
        if kind == CONSTANT_STEP:
            s = dw_down
        elif kind == SOFT_BOUNDS:
            s = dw_down * (1.0 - w / w_min)
        elif kind == LINEAR_STEP:
            s = dw_down * (1.0 + slope * w)
        else:
            s = dw_down * math.exp(gamma * w / (w_max - w_min))
    if s < 0.0:
        s = 0.0
    return s


@njit(cache=True)
def _one_pulse(kind, w, up, dw_up, dw_down, w_max, w_min, slope, gamma, factor):
    s = step_magnitude(kind, w, up, dw_up, dw_down, w_max, w_min, slope, gamma) * factor
    if up:
        w = w + s
    else:
        w = w - s
    if w > w_max:
        w = w_max
    elif w < w_min:
        w = w_min
    return w


@njit(cache=True)
def pulse_each(kind, w, up, dw_up, dw_down, w_max, w_min, slope, gamma, std, noise):
    """Apply exactly one pulse to every element (flat arrays). Returns a new array."""
    out = w.copy()
    for k in range(w.size):
        factor = 1.0
        if std > 0.0:
            factor = 1.0 + std * noise[k]
            if factor < 0.0:
                factor = 0.0
        out[k] = _one_pulse(kind, w[k], up[k], dw_up[k], dw_down[k], w_max[k], w_min[k],
                            slope, gamma, factor)
    return out


@njit(cache=True)
def pulse_counts(kind, w, counts, up, dw_up, dw_down, w_max, w_min, slope, gamma, std, noise):
    """Apply ``counts[k]`` same-direction pulses sequentially to element ``k`` in place.

    ``noise`` holds one standard normal per pulse, consumed in element order.
    """
    if kind == CONSTANT_STEP and std == 0.0:
        # identical steps until a bound is hit: sequential clip == clip of the sum
        for k in range(w.size):
            n = counts[k]
            if n == 0:
                continue
            if up[k]:
                v = w[k] + n * dw_up[k]
            else:
                v = w[k] - n * dw_down[k]
            if v > w_max[k]:
                v = w_max[k]
            elif v < w_min[k]:
                v = w_min[k]
            w[k] = v
        return
    pos = 0
    for k in range(w.size):
        v = w[k]
        for _ in range(counts[k]):
            factor = 1.0
            if std > 0.0:
                factor = 1.0 + std * noise[pos]
                pos += 1
                if factor < 0.0:
                    factor = 0.0
            v = _one_pulse(kind, v, up[k], dw_up[k], dw_down[k], w_max[k], w_min[k],
                           slope, gamma, factor)
        w[k] = v


def empty_noise() -> np.ndarray:
    return np.empty(0, dtype=np.float64)
