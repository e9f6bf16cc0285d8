"""Datasets for the desk-scale training task and their split across devices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

__all__ = ["PartitionError", "Dataset", "load_dataset", "area_labels", "partition"]


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray

    @property
    def num_classes(self) -> int:
        return int(max(self.y_train.max(), self.y_test.max())) + 1

    @property
    def num_features(self) -> int:
        return self.x_train.shape[1]


def _standardize(train, test):
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd[sd == 0] = 1.0
    return (train - mu) / sd, (test - mu) / sd


def _split_per_class(x, y, per_class, rng):
    train, test = [], []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        if len(idx) <= per_class:
            raise PartitionError(f"class {c} has only {len(idx)} samples")
        train.append(idx[:per_class])
        test.append(idx[per_class:])
    train, test = np.concatenate(train), np.concatenate(test)
    return x[train], y[train], x[test], y[test]


def load_dataset(name: str, rng, train_per_class: int = 125) -> Dataset:
    """``digits``: the 8x8 handwritten digits bundled with scikit-learn.
    ``blobs``: ten overlapping Gaussian clusters in 64 dimensions.

    Features are standardized with training statistics.
    """
    if name == "digits":
        from sklearn.datasets import load_digits

        d = load_digits()
        x, y = d.data.astype(np.float64), d.target.astype(np.int64)
    elif name == "blobs":
        centers = rng.normal(0.0, 1.0, size=(10, 64))
        n = train_per_class + 200
        y = np.repeat(np.arange(10), n)
        x = centers[y] + rng.normal(0.0, 2.0, size=(len(y), 64))
    else:
        raise ValueError(f"unknown dataset {name!r}")
    xtr, ytr, xte, yte = _split_per_class(x, y, train_per_class, rng)
    xtr, xte = _standardize(xtr, xte)
    return Dataset(xtr, ytr, xte, yte)


def area_labels(area: int, num_classes: int = 10, areas: int = 5) -> np.ndarray:
    """Labels held by devices in ``area`` (1-based).

    For ten classes area ``u`` holds ``{u-1, ..., u+4}``; other class counts
    scale the window start and width proportionally.
    """
    start = ((area - 1) * num_classes) // 10
    width = max(1, round(0.6 * num_classes))
    return np.sort((start + np.arange(width)) % num_classes)


def partition(labels, mode: str, num_eds: int, rng, areas: int = 5) -> List[np.ndarray]:
    """Split sample indices across ``num_eds`` devices.

    ``homogeneous``: every device gets the same number of samples of every
    class.  ``heterogeneous``: devices are grouped into ``areas`` equal
    areas and each class is shared evenly among the devices of the areas
    holding it.
    """
    labels = np.asarray(labels)
    classes = np.unique(labels)
    C = int(classes.max()) + 1
    parts: List[list] = [[] for _ in range(num_eds)]
    if mode == "homogeneous":
        for c in classes:
            idx = rng.permutation(np.flatnonzero(labels == c))
            if len(idx) % num_eds:
                raise PartitionError(
                    f"class {c}: {len(idx)} samples do not divide among {num_eds} devices"
                )
            for k, chunk in enumerate(np.split(idx, num_eds)):
                parts[k].append(chunk)
    elif mode == "heterogeneous":
        if num_eds % areas:
            raise PartitionError(f"{num_eds} devices do not divide into {areas} areas")
        per_area = num_eds // areas
        holders = {c: [] for c in classes}
        for u in range(1, areas + 1):
            devices = range((u - 1) * per_area, u * per_area)
            for c in area_labels(u, C, areas):
                if c in holders:
                    holders[c].extend(devices)
        for c in classes:
            if not holders[c]:
                raise PartitionError(f"class {c} is not assigned to any area")
            idx = rng.permutation(np.flatnonzero(labels == c))
            for k, chunk in zip(holders[c], np.array_split(idx, len(holders[c]))):
                parts[k].append(chunk)
    else:
        raise ValueError(f"unknown partition mode {mode!r}")
    return [np.sort(np.concatenate(p)) if p else np.empty(0, dtype=np.int64) for p in parts]
