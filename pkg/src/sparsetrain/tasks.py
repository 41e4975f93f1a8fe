"""Desk-scale tasks: spiral classification, teacher regression, CSV datasets.

Generated datasets are a pure function of (task parameters, seed).  The
validation split is a fixed 20% taken by seeded shuffle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

TASK_KINDS = ("spiral_classification", "teacher_regression", "csv_dataset")


@dataclass(frozen=True)
class TaskSpec:
    kind: str = "spiral_classification"
    batch_size: int = 64
    seed: int | None = None  # None: derived from the run's master seed
    # spiral_classification
    classes: int = 3
    points_per_class: int = 320
    noise_sd: float = 0.1
    # teacher_regression
    in_dim: int = 8
    teacher_hidden: int = 16
    out_dim: int = 1
    samples: int = 512
    # csv_dataset
    path: str | None = None
    target_column: str | None = None

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ConfigError(f"unknown task kind {self.kind!r}, expected one of {TASK_KINDS}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.kind == "csv_dataset" and (self.path is None or self.target_column is None):
            raise ConfigError("csv_dataset needs 'path' and 'target_column'")


@dataclass
class Dataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    task_type: str  # "classification" | "regression"

    @property
    def in_dim(self) -> int:
        return self.x_train.shape[1]

    @property
    def n_outputs(self) -> int:
        if self.task_type == "classification":
            return int(max(self.y_train.max(), self.y_val.max())) + 1
        return self.y_train.shape[1]


# Angular sweep of each arm, in radians.  Tight enough that a width-reduced
# MLP is capacity-bound while the full-width net still trains cleanly.
SPIRAL_TWIST = 14.0


def make_spirals(classes: int, points_per_class: int, noise_sd: float, rng) -> tuple:
    """Interleaved 2-D spiral arms, one per class."""
    n = classes * points_per_class
    x = np.zeros((n, 2), dtype=np.float32)
    y = np.zeros(n, dtype=np.int64)
    for j in range(classes):
        sl = slice(points_per_class * j, points_per_class * (j + 1))
        radius = np.linspace(0.05, 1.0, points_per_class)
        theta = (
            2.0 * np.pi * j / classes
            + SPIRAL_TWIST * radius
            + rng.normal(0.0, noise_sd, points_per_class)
        )
        x[sl] = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
        y[sl] = j
    return x, y


def make_teacher_regression(in_dim, teacher_hidden, out_dim, samples, noise_sd, rng) -> tuple:
    """Targets from a random frozen tanh MLP plus observation noise."""
    x = rng.normal(size=(samples, in_dim))
    w1 = rng.normal(size=(teacher_hidden, in_dim)) / np.sqrt(in_dim)
    w2 = rng.normal(size=(out_dim, teacher_hidden)) / np.sqrt(teacher_hidden)
    y = np.tanh(x @ w1.T) @ w2.T + noise_sd * rng.normal(size=(samples, out_dim))
    return x.astype(np.float32), y.astype(np.float32)


def load_csv(path: str, target_column: str) -> tuple:
    """Numeric CSV with a header row; classification iff targets are all integral."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    if target_column not in header:
        raise ConfigError(f"target column {target_column!r} not in CSV header {header}")
    data = np.asarray(rows, dtype=np.float64)
    tcol = header.index(target_column)
    target = data[:, tcol]
    features = np.delete(data, tcol, axis=1).astype(np.float32)
    if np.all(target == np.round(target)):
        return features, target.astype(np.int64), "classification"
    return features, target.reshape(-1, 1).astype(np.float32), "regression"


def build_dataset(spec: TaskSpec, seed: int) -> Dataset:
    """Materialize the task and apply the fixed 80/20 split."""
    rng = np.random.default_rng(seed if spec.seed is None else spec.seed)
    if spec.kind == "spiral_classification":
        x, y = make_spirals(spec.classes, spec.points_per_class, spec.noise_sd, rng)
        task_type = "classification"
    elif spec.kind == "teacher_regression":
        x, y = make_teacher_regression(
            spec.in_dim, spec.teacher_hidden, spec.out_dim, spec.samples, spec.noise_sd, rng
        )
        task_type = "regression"
    else:
        x, y, task_type = load_csv(spec.path, spec.target_column)
    n = x.shape[0]
    perm = rng.permutation(n)
    n_val = max(1, int(round(0.2 * n)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    return Dataset(
        x_train=x[train_idx],
        y_train=y[train_idx],
        x_val=x[val_idx],
        y_val=y[val_idx],
        task_type=task_type,
    )
