"""Per-device streaming buffers, rate sampling, and the analytic queue-growth model.

A device's stream delivers ``rate`` samples per second into a FIFO buffer of
opaque sample ids. Training draws batches from the front; a retention policy
decides what happens to the residue. The closed-form queue model predicts how
the buffer grows when inflow outpaces consumption.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

# Nudge added before flooring so exact products such as rate * (b / rate) are
# not truncated by one sample due to binary float rounding.
_FLOOR_EPS = 1e-9

PERSISTENCE = "persistence"
TRUNCATION = "truncation"
RETENTION_POLICIES = (PERSISTENCE, TRUNCATION)

RATE_KINDS = ("uniform", "normal")


class WouldBlock(Exception):
    """Raised when a batch draw needs more samples than the buffer holds."""

    def __init__(self, shortfall: int):
        super().__init__(f"buffer short by {shortfall} samples")
        self.shortfall = shortfall


@dataclass
class RateDistribution:
    """Sampling spec for device streaming rates, in samples per second.

    ``uniform`` draws from the unique uniform with the given mean and standard
    deviation, i.e. support [mean - std*sqrt(3), mean + std*sqrt(3)].
    ``normal`` draws from Gaussian(mean, std).
    """

    kind: str
    mean: float
    std: float = 0.0

    def __post_init__(self):
        if self.kind not in RATE_KINDS:
            raise ValueError(f"unknown rate distribution kind: {self.kind!r}")
        if self.mean <= 0:
            raise ValueError("rate distribution mean must be positive")
        if self.std < 0:
            raise ValueError("rate distribution std must be non-negative")


def sample_rates(dist: RateDistribution, n: int, seed: int) -> list[int]:
    """Sample n integer device rates, rounded to nearest and clamped to >= 1."""
    if n < 1:
        raise ValueError("need at least one device rate")
    rng = np.random.default_rng(seed)
    if dist.kind == "uniform":
        half_width = dist.std * math.sqrt(3.0)
        raw = rng.uniform(dist.mean - half_width, dist.mean + half_width, n)
    else:
        raw = rng.normal(dist.mean, dist.std, n)
    rates = np.maximum(1, np.rint(raw).astype(int))
    return [int(r) for r in rates]


@dataclass
class StreamBuffer:
    """FIFO of pending sample ids for one device, fed at a fixed rate.

    Sample ids are opaque monotonically increasing integers; payload content
    lives elsewhere. ``fractional_credit`` carries the non-integer part of
    arrivals across calls so long-run inflow stays exact.
    """

    rate: int
    policy: str = PERSISTENCE
    pending: deque = field(default_factory=deque)
    fractional_credit: float = 0.0
    _next_id: int = 0

    def __post_init__(self):
        if self.rate < 1:
            raise ValueError("stream rate must be >= 1")
        if self.policy not in RETENTION_POLICIES:
            raise ValueError(f"unknown retention policy: {self.policy!r}")

    def __len__(self) -> int:
        return len(self.pending)

    def enqueue_arrivals(self, elapsed: float) -> int:
        """Add the samples that arrive in ``elapsed`` seconds; return the count."""
        if elapsed < 0:
            raise ValueError("elapsed time must be non-negative")
        exact = self.rate * elapsed + self.fractional_credit
        added = int(math.floor(exact + _FLOOR_EPS))
        self.fractional_credit = min(max(exact - added, 0.0), math.nextafter(1.0, 0.0))
        for _ in range(added):
            self.pending.append(self._next_id)
            self._next_id += 1
        return added

    def draw_batch(self, b: int) -> list[int]:
        """Remove and return the b oldest pending sample ids."""
        if b < 1:
            raise ValueError("batch size must be >= 1")
        if len(self.pending) < b:
            raise WouldBlock(b - len(self.pending))
        return [self.pending.popleft() for _ in range(b)]

    def apply_retention(self) -> int:
        """Apply the retention policy; return how many samples were discarded.

        Truncation keeps only the newest ``rate`` samples (one second of
        stream); persistence keeps everything.
        """
        if self.policy == PERSISTENCE:
            return 0
        discard = max(0, len(self.pending) - self.rate)
        for _ in range(discard):
            self.pending.popleft()
        return discard


def streaming_wait(buffer_len: int, b: int, rate: int) -> float:
    """Seconds until ``b`` samples are available given the current occupancy."""
    if rate < 1:
        raise ValueError("rate must be >= 1")
    return max(0.0, (b - buffer_len) / rate)


@dataclass
class QueueModelParams:
    """Inputs to the closed-form buffer occupancy model.

    t: per-iteration time in seconds, S: stream rate in samples/sec,
    b: batch size consumed per iteration, T: number of timesteps.
    """

    t: float
    S: float
    b: int
    T: int

    def __post_init__(self):
        if self.S <= 0:
            raise ValueError("stream rate must be positive")
        if self.b < 1:
            raise ValueError("batch size must be >= 1")
        if self.T < 0:
            raise ValueError("timestep count must be non-negative")


def analytic_queue_size(p: QueueModelParams, form: str = "exact") -> float:
    """Predicted buffer occupancy after T timesteps.

    The exact form (t*S - b)*T + S requires t*S >= b; the approximate form
    T*t*S + S drops the consumed batches and is valid when t*S >> b (it also
    accepts t = 0, where the buffer holds just S samples).
    """
    if form == "exact":
        if p.t <= 0:
            raise ValueError("exact form requires t > 0")
        if p.t * p.S < p.b:
            raise ValueError("exact form requires t*S >= b")
        return (p.t * p.S - p.b) * p.T + p.S
    if form == "approx":
        if p.t < 0:
            raise ValueError("iteration time must be non-negative")
        return p.T * p.t * p.S + p.S
    raise ValueError(f"unknown queue model form: {form!r}")
