"""SGD loop driving analog layers.

One mini-batch is: add reversible weight noise, forward, loss, backward,
remove the noise, then one pulsed update per sample (or exact SGD in
perfect-update mode), then the per-batch compound and temporal hooks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..rng import stream
from .layers import Sequential

LOSSES = ("mse", "cross_entropy")


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over all entries; returns (loss, dL/dpred)."""
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy_loss(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Softmax cross entropy averaged over the batch; ``labels`` are class indices."""
    labels = np.asarray(labels, dtype=np.int64)
    p = _softmax(logits)
    n = logits.shape[0]
    loss = -float(np.mean(np.log(p[np.arange(n), labels] + 1e-300)))
    grad = p.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), np.asarray(labels, dtype=np.int64)] = 1.0
    return out


@dataclass
class TrainState:
    network: Sequential
    loss: str = "mse"
    lr: float = 0.1
    batch_size: int = 1
    seed: int = 0
    shuffle: bool = True
    epoch: int = 0
    steps: int = 0
    history: list[tuple[int, float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.rng = stream(self.seed, "train", "shuffle")


def _targets_for(state: TrainState, y: np.ndarray, n_out: int) -> np.ndarray:
    if state.loss == "mse" and y.ndim == 1:
        return one_hot(y, n_out)
    return y


def compute_loss(state: TrainState, pred: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    if state.loss == "cross_entropy":
        return cross_entropy_loss(pred, y)
    return mse_loss(pred, _targets_for(state, y, pred.shape[1]))


def forward_backward(state: TrainState, xb: np.ndarray, yb: np.ndarray) -> float:
    net = state.network
    for layer in net.analog_layers():
        layer.begin_batch()
    pred = net.forward(xb)
    loss, grad = compute_loss(state, pred, yb)
    net.backward(grad)
    for layer in net.analog_layers():
        layer.end_batch()
    return loss


def optimizer_step(state: TrainState) -> None:
    """Update every analog layer from its cached batch, then run per-batch hooks."""
    for layer in state.network.analog_layers():
        layer.step(state.lr)
    for layer in state.network.analog_layers():
        layer.finish_batch()
    state.steps += 1


def evaluate(state: TrainState, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Loss and (for class labels) accuracy of the current network on ``x``."""
    pred = state.network.forward(x)
    loss, _ = compute_loss(state, pred, y)
    if y.ndim == 1:
        acc = float(np.mean(np.argmax(pred, axis=1) == y))
    else:
        acc = float("nan")
    return loss, acc


def train(state: TrainState, x: np.ndarray, y: np.ndarray, epochs: int) -> list[tuple[int, float, float]]:
    """Run ``epochs`` epochs; appends ``(epoch, loss, accuracy)`` rows to ``state.history``.

    Loss and accuracy are evaluated on the full training set after each epoch.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    n = x.shape[0]
    for _ in range(epochs):
        order = state.rng.permutation(n) if state.shuffle else np.arange(n)
        for start in range(0, n, state.batch_size):
            idx = order[start:start + state.batch_size]
            forward_backward(state, x[idx], y[idx])
            optimizer_step(state)
        state.epoch += 1
        loss, acc = evaluate(state, x, y)
        state.history.append((state.epoch, loss, acc))
    return state.history


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "accuracy"])
        for epoch, loss, acc in history:
            w.writerow([epoch, repr(float(loss)), "" if np.isnan(acc) else repr(float(acc))])
