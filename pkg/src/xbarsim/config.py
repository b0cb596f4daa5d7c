"""Experiment configuration: YAML schema, validation and echo.

A document looks like::

    seed: 0
    tile:
      forward:  {sigma_out: 0.06, adc_bits: 9}
      backward: {is_perfect: false}
      update:   {bl: 31}
      device:   {preset: reram_es}         # or {unit_cell: {...}} / {transfer: {...}}
      temporal: {decay_rate: 0.0}
    hw_aware: {perfect_backward: false}
    network:
      layers:
        - {type: linear, in_features: 4, out_features: 2, bias: true}
    dataset:  {kind: linear_regression, n_samples: 32}
    training: {lr: 0.1, epochs: 100, batch_size: 1, loss: mse}
    inference:
      noise: {drift_nu_mean: 0.06, t0: 20.0}
      times: [20, 1.0e2, 1.0e4, 1.0e6]

Every section is optional and fully defaulted; unknown keys are errors.
"""

from __future__ import annotations

import types
from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Any, Union, get_args, get_origin, get_type_hints

import yaml

from .compounds import TransferConfig, UnitCellConfig
from .devices import DeviceParams, preset
from .errors import ConfigError
from .inference import InferenceNoiseModel
from .nn.layers import HardwareAware
from .tile import TileConfig

LAYER_TYPES = ("linear", "conv2d", "relu", "tanh", "sigmoid", "flatten")
DATASET_KINDS = ("linear_regression", "blobs", "csv")


@dataclass(frozen=True)
class LayerSpec:
    type: str
    in_features: int | None = None
    out_features: int | None = None
    in_channels: int | None = None
    out_channels: int | None = None
    kernel_size: int | None = None
    stride: int = 1
    padding: int = 0
    bias: bool = True
    analog_bias: bool = False

    def __post_init__(self):
        if self.type not in LAYER_TYPES:
            raise ConfigError(f"unknown layer type {self.type!r}; expected one of {LAYER_TYPES}", "type")
        required = {"linear": ("in_features", "out_features"),
                    "conv2d": ("in_channels", "out_channels", "kernel_size")}.get(self.type, ())
        for name in required:
            value = getattr(self, name)
            if value is None or value < 1:
                raise ConfigError(f"{self.type} layer needs a positive {name}", name)
        if self.stride < 1:
            raise ConfigError("must be >= 1", "stride")
        if self.padding < 0:
            raise ConfigError("must be >= 0", "padding")


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...] = (LayerSpec("linear", in_features=4, out_features=2),)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigError("need at least one layer", "layers")


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "linear_regression"
    n_samples: int = 32
    n_features: int = 4
    n_outputs: int = 2
    n_classes: int = 3
    spread: float = 0.15
    weight_scale: float = 0.4
    path: str | None = None

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"expected one of {DATASET_KINDS}, got {self.kind!r}", "kind")
        if self.kind == "csv" and not self.path:
            raise ConfigError("csv dataset needs a path", "path")
        for name in ("n_samples", "n_features", "n_outputs", "n_classes"):
            if getattr(self, name) < 1:
                raise ConfigError("must be >= 1", name)


@dataclass(frozen=True)
class TrainingSpec:
    lr: float = 0.1
    epochs: int = 100
    batch_size: int = 1
    loss: str = "mse"
    shuffle: bool = True

    def __post_init__(self):
        if not self.lr >= 0:
            raise ConfigError(f"must be >= 0, got {self.lr}", "lr")
        if self.epochs < 0:
            raise ConfigError("must be >= 0", "epochs")
        if self.batch_size < 1:
            raise ConfigError("must be >= 1", "batch_size")
        if self.loss not in ("mse", "cross_entropy"):
            raise ConfigError(f"expected mse or cross_entropy, got {self.loss!r}", "loss")


@dataclass(frozen=True)
class InferenceSpec:
    noise: InferenceNoiseModel = field(default_factory=InferenceNoiseModel)
    times: tuple[float, ...] = (20.0, 1e2, 1e4, 1e6)
    n_seeds: int = 10
    drift_compensation: bool = True
    metric: str = "accuracy"

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        if self.n_seeds < 1:
            raise ConfigError("must be >= 1", "n_seeds")
        if self.metric not in ("accuracy", "mse"):
            raise ConfigError(f"expected accuracy or mse, got {self.metric!r}", "metric")
        for t in self.times:
            if t < self.noise.t0:
                raise ConfigError(f"time {t} precedes t0 = {self.noise.t0}", "times")


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "runs"


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    tile: TileConfig = field(default_factory=TileConfig)
    hw_aware: HardwareAware = field(default_factory=HardwareAware)
    network: NetworkSpec = field(default_factory=NetworkSpec)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    training: TrainingSpec = field(default_factory=TrainingSpec)
    inference: InferenceSpec = field(default_factory=InferenceSpec)
    output: OutputSpec = field(default_factory=OutputSpec)


# parsing ---------------------------------------------------------------


class _Marks:
    """Source line of every node, keyed by dotted path."""

    def __init__(self):
        self.lines: dict[str, int] = {}

    def walk(self, node, path: str = "") -> None:
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                self.walk(value, _join(path, str(key.value)))
                self.lines.setdefault(_join(path, str(key.value)), key.start_mark.line + 1)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                self.walk(item, _join(path, str(i)))

    def line_for(self, path: str) -> int | None:
        while True:
            if path in self.lines:
                return self.lines[path]
            if not path:
                return None
            path = path.rpartition(".")[0]


def _hints(cls) -> dict:
    return get_type_hints(cls, localns={"UnitCellConfig": UnitCellConfig,
                                        "TransferConfig": TransferConfig})


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _is_union(tp) -> bool:
    return get_origin(tp) is Union or isinstance(tp, getattr(types, "UnionType", ()))


def _convert(tp, value: Any, path: str):
    if _is_union(tp):
        args = [a for a in get_args(tp) if a is not type(None)]
        if value is None:
            if len(args) < len(get_args(tp)):
                return None
            raise ConfigError("must not be null", path)
        if len(args) == 1:
            return _convert(args[0], value, path)
        raise ConfigError("ambiguous type", path)
    if is_dataclass(tp):
        return _build(tp, value, path)
    origin = get_origin(tp)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list, got {type(value).__name__}", path)
        args = get_args(tp)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_convert(args[0], v, _join(path, str(i))) for i, v in enumerate(value))
        if len(args) != len(value):
            raise ConfigError(f"expected {len(args)} entries, got {len(value)}", path)
        return tuple(_convert(a, v, _join(path, str(i))) for i, (a, v) in enumerate(zip(args, value)))
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", path)
        return value
    if tp is int:
        if isinstance(value, bool):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(f"expected an integer, got {value!r}", path)
    if tp is float:
        if isinstance(value, bool):
            raise ConfigError(f"expected a number, got {value!r}", path)
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
        raise ConfigError(f"expected a number, got {value!r}", path)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    raise ConfigError(f"unsupported field type {tp!r}", path)


def _build(cls, data, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping, got {type(data).__name__}", path)
    hints = _hints(cls)
    names = [f.name for f in fields(cls) if f.init]
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown key {key!r}; allowed: {', '.join(names)}", _join(path, str(key)))
    kwargs = {}
    for key, value in data.items():
        sub = _join(path, key)
        if cls is TileConfig and key == "device":
            kwargs[key] = _build_device(value, sub)
        elif cls is TransferConfig and key == "unit_cell_devices" or \
                cls is UnitCellConfig and key == "unit_cell_devices":
            if not isinstance(value, list):
                raise ConfigError("expected a list of device stanzas", sub)
            kwargs[key] = tuple(_build_device_params(v, _join(sub, str(i))) for i, v in enumerate(value))
        else:
            kwargs[key] = _convert(hints[key], value, sub)
    try:
        return cls(**kwargs)
    except ConfigError as err:
        raise err.prefixed(path) if path else err


def _build_device_params(data, path: str) -> DeviceParams:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", path)
    data = dict(data)
    name = data.pop("preset", None)
    if name is None:
        return _build(DeviceParams, data, path)
    try:
        base = preset(name)
    except ConfigError as err:
        raise err.prefixed(path)
    overrides = _build_partial(DeviceParams, data, path)
    try:
        return replace(base, **overrides)
    except ConfigError as err:
        raise err.prefixed(path)


def _build_partial(cls, data: dict, path: str) -> dict:
    hints = _hints(cls)
    names = [f.name for f in fields(cls)]
    out = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown key {key!r}; allowed: preset, {', '.join(names)}",
                              _join(path, str(key)))
        out[key] = _convert(hints[key], value, _join(path, key))
    return out


def _build_device(data, path: str):
    if isinstance(data, dict) and ("unit_cell" in data or "transfer" in data):
        if len(data) != 1:
            raise ConfigError("a compound device stanza must contain only 'unit_cell' or 'transfer'", path)
        key, value = next(iter(data.items()))
        cls = UnitCellConfig if key == "unit_cell" else TransferConfig
        return _build(cls, value, _join(path, key))
    return _build_device_params(data, path)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML experiment document (empty text gives all defaults)."""
    loader = yaml.SafeLoader(text)
    marks = _Marks()
    try:
        node = loader.get_single_node()
        data = loader.construct_document(node) if node is not None else {}
    except yaml.MarkedYAMLError as err:
        mark = err.problem_mark or err.context_mark
        raise ConfigError(f"syntax error: {err.problem}", "", mark.line + 1 if mark else None) from None
    finally:
        loader.dispose()
    if node is not None:
        marks.walk(node)
    try:
        return _build(ExperimentConfig, data, "")
    except ConfigError as err:
        raise ConfigError(err.message, err.path, marks.line_for(err.path)) from None


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


# echo ------------------------------------------------------------------


def _to_plain(obj):
    if isinstance(obj, UnitCellConfig):
        return {"unit_cell": _dataclass_dict(obj)}
    if isinstance(obj, TransferConfig):
        return {"transfer": _dataclass_dict(obj)}
    if is_dataclass(obj):
        return _dataclass_dict(obj)
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def _dataclass_dict(obj) -> dict:
    return {f.name: _to_plain(getattr(obj, f.name)) for f in fields(obj) if f.init}


def config_to_dict(config: ExperimentConfig) -> dict:
    return _to_plain(config)


def echo_config(config: ExperimentConfig) -> str:
    """Fully resolved YAML; ``parse_config(echo_config(c)) == c``."""
    return yaml.safe_dump(config_to_dict(config), sort_keys=False, default_flow_style=False)
