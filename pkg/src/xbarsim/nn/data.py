"""Desk-scale datasets: synthetic blobs, a linear teacher, and a CSV loader."""

from __future__ import annotations

import csv

import numpy as np


def make_blobs(n_samples: int, n_features: int, n_classes: int, rng: np.random.Generator,
               spread: float = 0.15, radius: float = 0.6) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian clusters around random centers on a sphere of ``radius``."""
    centers = rng.standard_normal((n_classes, n_features))
    centers *= radius / np.linalg.norm(centers, axis=1, keepdims=True)
    labels = np.arange(n_samples) % n_classes
    rng.shuffle(labels)
    x = centers[labels] + spread * rng.standard_normal((n_samples, n_features))
    return x, labels


def make_linear_regression(n_samples: int, n_features: int, n_outputs: int, rng: np.random.Generator,
                           weight_scale: float = 0.4, bias: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Noiseless targets ``y = T x + b`` from a random teacher with entries in ``+-weight_scale``."""
    teacher = rng.uniform(-weight_scale, weight_scale, size=(n_outputs, n_features))
    b = rng.uniform(-weight_scale, weight_scale, size=n_outputs) if bias else np.zeros(n_outputs)
    x = rng.uniform(-1.0, 1.0, size=(n_samples, n_features))
    return x, x @ teacher.T + b


def load_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """One sample per row: feature columns, then an integer label in the last column.

    A header row is skipped when its first field is not numeric.
    """
    rows = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or row[0].startswith("#"):
                continue
            if k == 0:
                try:
                    float(row[0])
                except ValueError:
                    continue
            rows.append([float(v) for v in row])
    data = np.asarray(rows, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError(f"{path}: need at least one feature column and a label column")
    return data[:, :-1], data[:, -1].astype(np.int64)
