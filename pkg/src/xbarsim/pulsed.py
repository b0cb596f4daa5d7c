"""Stochastic pulse-train implementation of the rank-1 update ``w += lr * d x^T``.

Input lines ``x`` and error lines ``d`` each emit Bernoulli pulse trains of
``bl`` slots. Wherever an input pulse and an error pulse coincide, the
crosspoint device receives one pulse whose direction is ``sign(d_i * x_j)``.
Probabilities are chosen so that ``E[#coincidences_ij] * dw_min = lr * |d_i x_j|``
as long as no probability saturates at 1.

There is deliberately no batched entry point: mini-batches and convolution
patches are applied as successive rank-1 updates so that accumulation happens
on the devices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .devices import apply_pulse_counts
from .errors import ConfigError, ShapeError

PULSE_TYPES = ("stochastic", "deterministic_implicit")


@dataclass(frozen=True)
class UpdateParams:
    bl: int = 31
    bl_management: bool = False
    pulse_type: str = "stochastic"

    def __post_init__(self):
        if isinstance(self.bl, bool) or not isinstance(self.bl, (int, np.integer)) or self.bl < 1:
            raise ConfigError(f"must be an integer >= 1, got {self.bl!r}", "bl")
        if self.pulse_type not in PULSE_TYPES:
            raise ConfigError(f"expected one of {PULSE_TYPES}, got {self.pulse_type!r}",
                              "pulse_type")


@dataclass
class PulsePlan:
    """Per-line pulse probabilities (magnitudes) and signs for one update."""

    bl: int
    p_x: np.ndarray
    p_d: np.ndarray
    sign_x: np.ndarray
    sign_d: np.ndarray

    def expected_coincidences(self) -> np.ndarray:
        return self.bl * np.outer(self.p_d, self.p_x)


def translate(x, d, lr: float, dw_min: float, up: UpdateParams = UpdateParams()) -> PulsePlan:
    """Turn update vectors into pulse probabilities.

    Common amplitude ``A = sqrt(lr / (dw_min * bl))``; the inputs are scaled
    by ``sqrt(max|d| / max|x|)`` and the errors by its reciprocal so both sides
    reach their largest probability together. Probabilities above 1 are
    clipped (large updates are then biased low, as on hardware).
    """
    if not lr > 0:
        raise ValueError(f"learning rate must be > 0, got {lr}")
    if not dw_min > 0:
        raise ValueError(f"dw_min must be > 0, got {dw_min}")
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    x_abs, d_abs = np.abs(x), np.abs(d)
    x_max, d_max = float(x_abs.max(initial=0.0)), float(d_abs.max(initial=0.0))
    sign_x, sign_d = np.sign(x), np.sign(d)

    bl = up.bl
    if x_max == 0.0 or d_max == 0.0:
        return PulsePlan(bl, np.zeros_like(x_abs), np.zeros_like(d_abs), sign_x, sign_d)

    if up.bl_management:
        n_max = lr * x_max * d_max / dw_min
        bl = max(1, math.ceil(up.bl * min(1.0, n_max)))

    amp = math.sqrt(lr / (dw_min * bl))
    x_scale = math.sqrt(d_max / x_max)
    p_x = np.minimum(1.0, amp * x_abs * x_scale)
    p_d = np.minimum(1.0, amp * d_abs / x_scale)
    return PulsePlan(bl, p_x, p_d, sign_x, sign_d)


def generate_trains(plan: PulsePlan, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Independent Bernoulli bits, shapes ``(bl, d_in)`` and ``(bl, d_out)``."""
    x_bits = rng.random((plan.bl, plan.p_x.size)) < plan.p_x
    d_bits = rng.random((plan.bl, plan.p_d.size)) < plan.p_d
    return x_bits, d_bits


def coincidence_counts(x_trains: np.ndarray, d_trains: np.ndarray) -> np.ndarray:
    """Number of slots in which both line ``i`` of ``d`` and line ``j`` of ``x`` fire."""
    return d_trains.T.astype(np.int64) @ x_trains.astype(np.int64)


def apply_coincidences(tile, x_trains: np.ndarray, d_trains: np.ndarray,
                       signs: tuple[np.ndarray, np.ndarray]) -> None:
    """Pulse every crosspoint once per coincident slot, one pulse at a time.

    ``signs`` is ``(sign_x, sign_d)``. All pulses a crosspoint receives in
    one update share the direction ``sign(d_i x_j)``.
    """
    d_out, d_in = tile.weights.shape
    if x_trains.shape[1] != d_in or d_trains.shape[1] != d_out or x_trains.shape[0] != d_trains.shape[0]:
        raise ShapeError(f"trains {x_trains.shape}/{d_trains.shape} do not fit tile {tile.weights.shape}")
    sign_x, sign_d = signs
    counts = coincidence_counts(x_trains, d_trains)
    up = np.outer(sign_d, sign_x) > 0
    apply_pulse_counts(tile.device, tile.weights, counts, up, tile.rng)


def update(tile, x, d, lr: float) -> None:
    """Pulsed rank-1 update of ``tile`` towards ``w + lr * d x^T``.

    The caller supplies ``d = -dL/dy`` so that the update descends.
    """
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    d_out, d_in = tile.weights.shape
    if x.shape != (d_in,) or d.shape != (d_out,):
        raise ShapeError(
            f"update expects x of shape ({d_in},) and d of shape ({d_out},), got {x.shape} and {d.shape}"
        )
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    if lr == 0:
        return
    up_params = tile.config.update
    plan = translate(x, d, lr, tile.device.params.dw_min, up_params)
    if not plan.p_x.any() or not plan.p_d.any():
        return
    if up_params.pulse_type == "deterministic_implicit":
        counts = np.rint(plan.expected_coincidences()).astype(np.int64)
        directions = np.outer(plan.sign_d, plan.sign_x) > 0
        apply_pulse_counts(tile.device, tile.weights, counts, directions, tile.rng)
        return
    x_trains, d_trains = generate_trains(plan, tile.rng)
    apply_coincidences(tile, x_trains, d_trains, (plan.sign_x, plan.sign_d))
