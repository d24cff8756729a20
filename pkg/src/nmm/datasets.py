"""Synthetic 2-D classification datasets (blobs, spiral, smiley)."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    n_out: int
    name: str = "data"
    seed: int = 0

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_in(self) -> int:
        return self.inputs.shape[1]

    @property
    def onehot(self) -> np.ndarray:
        return np.eye(self.n_out)[self.labels]


def _labels(n_s: int, classes: int) -> np.ndarray:
    if n_s < classes:
        raise ValueError("need at least one sample per class")
    return np.arange(n_s) % classes


def generate_blobs(n_s: int, classes: int = 3, seed: int = 0, noise: float = 0.3) -> Dataset:
    """Isotropic Gaussian clusters around points on a circle of radius 1.5."""
    rng = np.random.default_rng(seed)
    labels = _labels(n_s, classes)
    angles = 2.0 * np.pi * np.arange(classes) / classes
    centers = 1.5 * np.column_stack((np.cos(angles), np.sin(angles)))
    inputs = centers[labels] + noise * rng.standard_normal((n_s, 2))
    return Dataset(inputs, labels, classes, "blobs", seed)


def generate_spiral(n_s: int, seed: int = 0, noise: float = 0.05, turns: float = 1.5) -> Dataset:
    """Two interleaved Archimedean arms, r = t, theta = 2 pi turns t + pi k."""
    rng = np.random.default_rng(seed)
    labels = _labels(n_s, 2)
    t = rng.uniform(0.1, 1.0, n_s)
    theta = 2.0 * np.pi * turns * t + np.pi * labels
    r = t + noise * rng.standard_normal(n_s)
    inputs = np.column_stack((r * np.cos(theta), r * np.sin(theta)))
    return Dataset(inputs, labels, 2, "spiral", seed)


def generate_smiley(n_s: int, seed: int = 0, noise: float = 0.05) -> Dataset:
    """Four classes: left eye, right eye, mouth arc, surrounding ring."""
    rng = np.random.default_rng(seed)
    labels = _labels(n_s, 4)
    inputs = np.empty((n_s, 2))
    eyes = np.array([[-0.4, 0.4], [0.4, 0.4]])
    for k in (0, 1):
        idx = labels == k
        inputs[idx] = eyes[k] + 1.5 * noise * rng.standard_normal((idx.sum(), 2))
    idx = labels == 2
    phi = rng.uniform(np.pi + 0.5, 2.0 * np.pi - 0.5, idx.sum())
    r = 0.55 + noise * rng.standard_normal(idx.sum())
    inputs[idx] = np.column_stack((r * np.cos(phi), r * np.sin(phi)))
    idx = labels == 3
    phi = rng.uniform(0.0, 2.0 * np.pi, idx.sum())
    r = 1.0 + noise * rng.standard_normal(idx.sum())
    inputs[idx] = np.column_stack((r * np.cos(phi), r * np.sin(phi)))
    return Dataset(inputs, labels, 4, "smiley", seed)


GENERATORS = {
    "blobs": lambda n, seed: generate_blobs(n, 3, seed),
    "spiral": generate_spiral,
    "smiley": generate_smiley,
}


def generate(name: str, n_s: int, seed: int) -> Dataset:
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown dataset {name!r}; choose from {sorted(GENERATORS)}") from None
    return gen(n_s, seed)


def save_csv(data: Dataset, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "label"])
        for (a, b), c in zip(data.inputs, data.labels):
            w.writerow([repr(float(a)), repr(float(b)), int(c)])


def load_csv(path, name: str = "data") -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["x1", "x2", "label"]:
            raise ValueError(f"unexpected header {header}")
        rows = [(float(a), float(b), int(c)) for a, b, c in reader]
    arr = np.array(rows, dtype=np.float64).reshape(-1, 3)
    labels = arr[:, 2].astype(int)
    return Dataset(arr[:, :2], labels, int(labels.max()) + 1 if len(labels) else 0, name)
