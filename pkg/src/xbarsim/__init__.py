"""Simulator for training and inference on analog resistive crossbar tiles."""

from .compounds import TransferCompound, TransferConfig, UnitCellConfig, UnitCellTile, make_tile
from .devices import DeviceParams, DeviceRealization, apply_pulse, preset, pulse_response_trace, realize
from .errors import ConfigError, NonFiniteInputError, ShapeError
from .inference import DriftCompensation, InferenceNoiseModel, InferenceTile, evaluate_over_time
from .periphery import PERFECT_IO, IOParams, analog_mvm, apply_adc, apply_dac, quantize
from .pulsed import PulsePlan, UpdateParams, generate_trains, translate
from .tile import AnalogTile, TemporalParams, TileConfig

__version__ = "0.1.0"

__all__ = [
    "AnalogTile", "ConfigError", "DeviceParams", "DeviceRealization", "DriftCompensation",
    "IOParams", "InferenceNoiseModel", "InferenceTile", "NonFiniteInputError", "PERFECT_IO",
    "PulsePlan", "ShapeError", "TemporalParams", "TileConfig", "TransferCompound", "TransferConfig",
    "UnitCellConfig", "UnitCellTile", "UpdateParams", "analog_mvm", "apply_adc", "apply_dac",
    "apply_pulse", "evaluate_over_time", "generate_trains", "make_tile", "preset",
    "pulse_response_trace", "quantize", "realize", "translate",
]
