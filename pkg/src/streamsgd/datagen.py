"""Synthetic labeled datasets, device partitioning, and batch-level sample sharing.

The dataset is a stand-in for an image corpus: one Gaussian cluster per class
with well-separated means. Partitioning assigns training samples to devices
either uniformly (iid) or by disjoint label groups (noniid). Sample sharing
("injection") lets a random subset of devices broadcast part of their current
batch to every other device, de-skewing non-iid training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Cluster means are placed at this distance from the origin; with the default
# spreads this keeps the toy tasks solvable well past the 90% mark.
_MEAN_NORM = 2.0

_TRAIN_FRACTION = 0.8


@dataclass
class DatasetSpec:
    n_classes: int
    feature_dim: int
    samples_per_class: int
    cluster_spread: float
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("need at least two classes")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.samples_per_class < 2:
            raise ValueError("need at least two samples per class")
        if self.cluster_spread <= 0:
            raise ValueError("cluster_spread must be positive")


@dataclass
class Dataset:
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray

    @property
    def n_train(self) -> int:
        return len(self.train_y)


def _class_means(rng: np.random.Generator, k: int, dim: int) -> np.ndarray:
    if dim >= k:
        # Random orthonormal directions: distinct and maximally separated.
        q, _ = np.linalg.qr(rng.normal(size=(dim, k)))
        means = q[:, :k].T
    else:
        means = rng.normal(size=(k, dim))
        means /= np.linalg.norm(means, axis=1, keepdims=True)
    return _MEAN_NORM * means


def generate_dataset(spec: DatasetSpec) -> Dataset:
    """Per-class Gaussian clusters, split 80/20 into train/test per class."""
    rng = np.random.default_rng(spec.seed)
    means = _class_means(rng, spec.n_classes, spec.feature_dim)
    n_train_per_class = int(round(_TRAIN_FRACTION * spec.samples_per_class))
    train_parts, test_parts = [], []
    for c in range(spec.n_classes):
        x = means[c] + rng.normal(0.0, spec.cluster_spread, (spec.samples_per_class, spec.feature_dim))
        train_parts.append((x[:n_train_per_class], np.full(n_train_per_class, c)))
        test_parts.append((x[n_train_per_class:], np.full(spec.samples_per_class - n_train_per_class, c)))
    train_x = np.concatenate([p[0] for p in train_parts])
    train_y = np.concatenate([p[1] for p in train_parts]).astype(np.int64)
    test_x = np.concatenate([p[0] for p in test_parts])
    test_y = np.concatenate([p[1] for p in test_parts]).astype(np.int64)
    perm = rng.permutation(len(train_y))
    return Dataset(train_x[perm], train_y[perm], test_x, test_y)


def export_table(path, x: np.ndarray, y: np.ndarray) -> None:
    """Write (features, labels) as delimited text: feature_dim + 1 columns, last = label."""
    table = np.column_stack([x, y.astype(np.float64)])
    np.savetxt(path, table, fmt="%.17g", delimiter=",")


def import_table(path) -> tuple[np.ndarray, np.ndarray]:
    table = np.loadtxt(path, delimiter=",", ndmin=2)
    return table[:, :-1], table[:, -1].astype(np.int64)


@dataclass
class PartitionPlan:
    mode: str  # "iid" or "noniid"
    n_devices: int
    labels_per_device: int = 1

    def __post_init__(self):
        if self.mode not in ("iid", "noniid"):
            raise ValueError(f"unknown partition mode: {self.mode!r}")
        if self.n_devices < 1:
            raise ValueError("need at least one device")
        if self.labels_per_device < 1:
            raise ValueError("labels_per_device must be >= 1")


def partition(dataset: Dataset, plan: PartitionPlan, seed: int) -> list[np.ndarray]:
    """Split train sample indices into one pool per device.

    iid: a uniform random disjoint split. noniid: labels are shuffled and
    chunked into disjoint groups of ``labels_per_device``; devices join groups
    round-robin and evenly share the group's samples.
    """
    rng = np.random.default_rng(seed)
    n = plan.n_devices
    if plan.mode == "iid":
        perm = rng.permutation(dataset.n_train)
        return [np.sort(part) for part in np.array_split(perm, n)]

    labels = np.unique(dataset.train_y)
    k = len(labels)
    lpd = plan.labels_per_device
    if k % lpd != 0:
        raise ValueError(f"{k} labels cannot be split into groups of {lpd}")
    n_groups = k // lpd
    if n * lpd < k or n < n_groups:
        raise ValueError(f"{n} devices cannot cover {k} labels at {lpd} labels/device")

    label_perm = rng.permutation(labels)
    group_labels = [label_perm[g * lpd:(g + 1) * lpd] for g in range(n_groups)]
    group_members: list[list[int]] = [[] for _ in range(n_groups)]
    for dev in range(n):
        group_members[dev % n_groups].append(dev)

    pools: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * n
    for g in range(n_groups):
        idx = np.flatnonzero(np.isin(dataset.train_y, group_labels[g]))
        idx = rng.permutation(idx)
        for dev, part in zip(group_members[g], np.array_split(idx, len(group_members[g]))):
            pools[dev] = np.sort(part)
    return pools


@dataclass
class InjectionConfig:
    alpha: float  # fraction of devices that share
    beta: float  # fraction of each sender's batch that is shared
    sample_bytes: int = 3072

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.sample_bytes < 1:
            raise ValueError("sample_bytes must be positive")


def injection_plan(
    n_devices: int, cfg: InjectionConfig, batch_sizes: list[int], seed: int
) -> list[tuple[int, int]]:
    """Pick ceil(alpha*n) senders and how many samples each shares.

    Returns (sender index, share count) pairs in ascending sender order;
    sender i shares ceil(beta * batch_sizes[i]) samples.
    """
    if n_devices < 2:
        raise ValueError("injection needs at least two devices")
    if len(batch_sizes) != n_devices:
        raise ValueError("one batch size per device required")
    n_senders = math.ceil(cfg.alpha * n_devices)
    if n_senders == 0:
        return []
    rng = np.random.default_rng(seed)
    senders = np.sort(rng.choice(n_devices, size=n_senders, replace=False))
    return [(int(i), math.ceil(cfg.beta * batch_sizes[i])) for i in senders]


def inject(
    batches: list[list[int]],
    plan: list[tuple[int, int]],
    sample_bytes: int,
    rng: np.random.Generator,
) -> tuple[list[list[int]], int]:
    """Broadcast each sender's shared samples to every other device's batch.

    Shared samples are drawn uniformly without replacement from the sender's
    pre-injection batch and appended (copied) to all other batches; senders
    keep their own samples. Returns the augmented batches and total bytes
    moved, counting every (sender, recipient) copy.
    """
    n = len(batches)
    augmented = [list(b) for b in batches]
    bytes_moved = 0
    for sender, count in plan:
        if not 0 <= sender < n:
            raise ValueError(f"sender {sender} out of range")
        if count == 0:
            continue
        source = batches[sender]
        picks = rng.choice(len(source), size=count, replace=False)
        shared = [source[p] for p in picks]
        for dev in range(n):
            if dev != sender:
                augmented[dev].extend(shared)
        bytes_moved += count * (n - 1) * sample_bytes
    return augmented, bytes_moved
