"""Minimal network host for analog layers."""

from .data import load_csv, make_blobs, make_linear_regression
from .layers import (AnalogConv2d, AnalogLinear, Flatten, HardwareAware, ReLU, Sequential, Sigmoid,
                     Tanh, col2im, im2col)
from .training import (TrainState, cross_entropy_loss, evaluate, forward_backward, mse_loss,
                       one_hot, optimizer_step, train, write_history_csv)

__all__ = [
    "AnalogConv2d", "AnalogLinear", "Flatten", "HardwareAware", "ReLU", "Sequential", "Sigmoid",
    "Tanh", "TrainState", "col2im", "cross_entropy_loss", "evaluate", "forward_backward", "im2col",
    "load_csv", "make_blobs", "make_linear_regression", "mse_loss", "one_hot", "optimizer_step",
    "train", "write_history_csv",
]
