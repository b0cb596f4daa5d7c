"""Build networks and datasets from an :class:`ExperimentConfig`.

All randomness comes from ``config.seed`` through named streams: ``data``,
``init/<layer>``, ``tile/<layer>``, ``train/shuffle`` and ``inference/...``.
"""

from __future__ import annotations

import numpy as np

from .config import DatasetSpec, ExperimentConfig
from .nn.data import load_csv, make_blobs, make_linear_regression
from .nn.layers import AnalogConv2d, AnalogLinear, Flatten, ReLU, Sequential, Sigmoid, Tanh
from .nn.training import TrainState, train
from .rng import stream

_ACTIVATIONS = {"relu": ReLU, "tanh": Tanh, "sigmoid": Sigmoid, "flatten": Flatten}


def build_network(config: ExperimentConfig) -> Sequential:
    layers = []
    for i, spec in enumerate(config.network.layers):
        kwargs = dict(bias=spec.bias, config=config.tile, rng=stream(config.seed, "tile", i),
                      init_rng=stream(config.seed, "init", i), analog_bias=spec.analog_bias,
                      hw_aware=config.hw_aware)
        if spec.type == "linear":
            layers.append(AnalogLinear(spec.in_features, spec.out_features, **kwargs))
        elif spec.type == "conv2d":
            layers.append(AnalogConv2d(spec.in_channels, spec.out_channels, spec.kernel_size,
                                       spec.stride, spec.padding, **kwargs))
        else:
            layers.append(_ACTIVATIONS[spec.type]())
    return Sequential(layers)


def build_dataset(spec: DatasetSpec, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = stream(seed, "data")
    if spec.kind == "linear_regression":
        return make_linear_regression(spec.n_samples, spec.n_features, spec.n_outputs, rng,
                                      weight_scale=spec.weight_scale)
    if spec.kind == "blobs":
        return make_blobs(spec.n_samples, spec.n_features, spec.n_classes, rng, spread=spec.spread)
    return load_csv(spec.path)


def run_training(config: ExperimentConfig):
    """Train the configured network; returns ``(network, state, x, y)``."""
    net = build_network(config)
    x, y = build_dataset(config.dataset, config.seed)
    t = config.training
    state = TrainState(net, loss=t.loss, lr=t.lr, batch_size=t.batch_size, seed=config.seed,
                       shuffle=t.shuffle)
    train(state, x, y, t.epochs)
    return net, state, x, y
