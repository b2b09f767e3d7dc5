"""Gradient aggregation, Top-k sparsification, the adaptive gate, and costs.

Gradients travel either dense (a plain float64 vector) or sparse (kept
indices plus values). The gate decides per device, per iteration, whether the
Top-k payload preserves enough of the gradient's squared norm to be sent in
place of the full vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FLOAT_BYTES = 4  # payloads are counted as single-precision floats
INDEX_BYTES = 4


@dataclass
class SparseGradient:
    """Top-k remnant of a dense gradient: kept entries only, values unmodified."""

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.indices.shape != self.values.shape:
            raise ValueError("indices and values must align")
        if len(self.indices) and (
            np.any(np.diff(self.indices) <= 0)
            or self.indices[0] < 0
            or self.indices[-1] >= self.dim
        ):
            raise ValueError("indices must be strictly increasing and < dim")

    @property
    def nnz(self) -> int:
        return len(self.indices)


def densify(g: np.ndarray | SparseGradient) -> np.ndarray:
    if isinstance(g, SparseGradient):
        out = np.zeros(g.dim)
        out[g.indices] = g.values
        return out
    return np.asarray(g, dtype=np.float64)


def grad_dim(g: np.ndarray | SparseGradient) -> int:
    return g.dim if isinstance(g, SparseGradient) else len(g)


def weights_from_rates(rates) -> np.ndarray:
    """Normalize stream rates into aggregation weights summing to one."""
    r = np.asarray(rates, dtype=np.float64)
    if r.size == 0:
        raise ValueError("need at least one rate")
    if np.any(r < 1):
        raise ValueError("rates must be >= 1")
    return r / r.sum()


def weighted_aggregate(grads, weights) -> np.ndarray:
    """Weighted sum of device gradients, folded in ascending device order."""
    w = np.asarray(weights, dtype=np.float64)
    if len(grads) != len(w):
        raise ValueError("one weight per gradient required")
    dims = {grad_dim(g) for g in grads}
    if len(dims) != 1:
        raise ValueError(f"gradient dimensions differ: {sorted(dims)}")
    acc = np.zeros(dims.pop())
    for weight, g in zip(w, grads):
        acc += weight * densify(g)
    return acc


def topk_count(dim: int, cr: float) -> int:
    """Entries kept at compression ratio cr: max(1, ceil(cr*dim))."""
    if not 0.0 < cr <= 1.0:
        raise ValueError("compression ratio must lie in (0, 1]")
    # Small backoff so products like 0.1*dim that are integers in decimal do
    # not ceil one past the intended count through float representation.
    return max(1, math.ceil(cr * dim - 1e-12))


def topk_sparsify(g: np.ndarray, cr: float) -> SparseGradient:
    """Keep the largest-magnitude entries; ties go to the lower index."""
    g = np.asarray(g, dtype=np.float64)
    m = topk_count(len(g), cr)
    order = np.lexsort((np.arange(len(g)), -np.abs(g)))
    kept = np.sort(order[:m])
    return SparseGradient(len(g), kept, g[kept])


@dataclass
class CompressionState:
    """Per-device gate state: EWMAs of squared norms plus decision counters."""

    cr: float
    delta: float
    ewma_factor: float = 0.9
    raw_gate: bool = False  # gate on per-iteration norms instead of EWMAs
    ewma_full: float = 0.0
    ewma_topk: float = 0.0
    initialized: bool = False
    n_compressed: int = 0
    n_uncompressed: int = 0

    def __post_init__(self):
        if not 0.0 < self.cr <= 1.0:
            raise ValueError("compression ratio must lie in (0, 1]")
        if self.delta < 0:
            raise ValueError("threshold delta must be non-negative")
        if not 0.0 < self.ewma_factor < 1.0:
            raise ValueError("ewma_factor must lie in (0, 1)")


@dataclass
class GateDecision:
    compressed: bool
    payload: np.ndarray | SparseGradient
    ratio: float  # smoothed relative squared-norm loss used for the decision


def compression_gate(g: np.ndarray, state: CompressionState) -> GateDecision:
    """Send Top-k if its (smoothed) squared-norm loss stays within delta.

    Updates the EWMAs of |g|^2 and |Topk(g)|^2 (first call seeds them with the
    observed values), computes rho = (full - topk)/full from the smoothed
    values, and emits the sparse payload iff rho <= delta. A zero gradient
    gates as rho = 0 since the compressed form loses nothing. State counters
    are updated in place.
    """
    g = np.asarray(g, dtype=np.float64)
    sparse = topk_sparsify(g, state.cr)
    s_full = float(g @ g)
    s_topk = float(sparse.values @ sparse.values)

    if not state.initialized:
        state.ewma_full = s_full
        state.ewma_topk = s_topk
        state.initialized = True
    else:
        f = state.ewma_factor
        state.ewma_full = f * state.ewma_full + (1.0 - f) * s_full
        state.ewma_topk = f * state.ewma_topk + (1.0 - f) * s_topk

    full, kept = (s_full, s_topk) if state.raw_gate else (state.ewma_full, state.ewma_topk)
    rho = 0.0 if full == 0.0 else abs(full - kept) / full

    compressed = rho <= state.delta
    if compressed:
        state.n_compressed += 1
        return GateDecision(True, sparse, rho)
    state.n_uncompressed += 1
    return GateDecision(False, g, rho)


def cnc_ratio(state: CompressionState) -> float:
    """Fraction of recorded decisions that sent the compressed payload."""
    total = state.n_compressed + state.n_uncompressed
    if total == 0:
        raise ValueError("no gate decisions recorded")
    return state.n_compressed / total


@dataclass
class VolumeStats:
    floats_sent: int = 0
    bytes_sent: int = 0


def account_volume(compressed: bool, dim: int, cr: float, stats: VolumeStats) -> VolumeStats:
    """Add one payload to the running totals.

    Dense payloads count dim floats; sparse payloads count the kept values as
    floats and additionally 4 bytes per index in bytes_sent.
    """
    if compressed:
        m = topk_count(dim, cr)
        stats.floats_sent += m
        stats.bytes_sent += m * (FLOAT_BYTES + INDEX_BYTES)
    else:
        stats.floats_sent += dim
        stats.bytes_sent += dim * FLOAT_BYTES
    return stats


def payload_bytes(compressed: bool, dim: int, cr: float) -> int:
    """Wire size of one gradient payload."""
    if compressed:
        return topk_count(dim, cr) * (FLOAT_BYTES + INDEX_BYTES)
    return dim * FLOAT_BYTES


@dataclass
class LinkModel:
    latency: float
    bandwidth: float  # bytes per second

    def __post_init__(self):
        if self.latency < 0:
            raise ValueError("latency must be non-negative")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")


def comm_time(nbytes: float, link: LinkModel, n_devices: int) -> float:
    """Ring-allreduce shaped cost: latency + 2*(n-1)/n * bytes/bandwidth."""
    if nbytes < 0:
        raise ValueError("byte count must be non-negative")
    if n_devices < 1:
        raise ValueError("need at least one device")
    ring = 2.0 * (n_devices - 1) / n_devices
    return link.latency + ring * nbytes / link.bandwidth
