"""Synchronous multi-device training loop on a simulated clock.

Each global iteration: devices gather batches from their stream buffers
(waiting at a barrier until the slowest has enough samples), optionally share
batch samples, compute gradients, optionally gate them through Top-k
compression, aggregate with stream-rate weights, and apply one identical
optimizer step on every replica. The clock advances by wait + compute + comm;
arrivals keep accruing through all three phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import comm, datagen, nn, streams
from .config import (
    MODE_FIXED_BATCH,
    MODE_RATE_MATCHED,
    SimConfig,
    derive_seed,
    validate,
)


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass
class SimClock:
    now: float = 0.0
    iteration: int = 0

    def advance(self, elapsed: float) -> None:
        if elapsed < 0:
            raise ValueError("the clock cannot move backwards")
        self.now += elapsed
        self.iteration += 1


@dataclass
class IterationMetrics:
    iteration: int
    sim_time_s: float
    epoch: int
    global_batch: int
    lr_used: float
    train_loss: float
    test_accuracy: float | None
    wait_time_s: float
    buffer_occupancy: list[int]
    buffer_bytes: int
    floats_sent_cum: int
    bytes_sent_cum: int
    cnc_cum: float | None
    injection_bytes: int
    injection_bytes_cum: int

    @property
    def buffer_samples_total(self) -> int:
        return sum(self.buffer_occupancy)


@dataclass
class RunSummary:
    final_accuracy: float | None
    best_accuracy: float | None
    final_train_loss: float
    iterations: int
    epochs_completed: int
    sim_time_s: float
    target_accuracy: float | None
    reached_target: bool
    time_to_target_s: float | None
    floats_sent_total: int
    bytes_sent_total: int
    cnc: float | None
    injection_bytes_total: int
    final_buffer_samples: int
    final_buffer_bytes: int
    seed: int


@dataclass
class RunResult:
    summary: RunSummary
    metrics: list[IterationMetrics] = field(default_factory=list)


def compute_batch_size(mode: str, rate: int, b_min: int, b_max: int, fixed_batch: int) -> int:
    """fixed_batch mode trains the configured batch; rate_matched clamps the rate."""
    if mode == MODE_FIXED_BATCH:
        return fixed_batch
    if mode == MODE_RATE_MATCHED:
        return min(max(rate, b_min), b_max)
    raise ValueError(f"unknown mode: {mode!r}")


class Simulation:
    """Mutable state of one experiment run; step with run_iteration()."""

    def __init__(self, config: SimConfig):
        self.config = validate(config)
        n = config.n_devices

        self.rates = streams.sample_rates(
            config.rate_dist, n, derive_seed(config.seed, "rates")
        )
        self.dataset = datagen.generate_dataset(config.dataset)
        plan = datagen.PartitionPlan(
            config.partition.mode, n, config.partition.labels_per_device
        )
        self.pools = datagen.partition(
            self.dataset, plan, derive_seed(config.seed, "partition")
        )
        self.buffers = [
            streams.StreamBuffer(rate=r, policy=config.retention) for r in self.rates
        ]
        if config.prefill_seconds > 0:
            for buf in self.buffers:
                buf.enqueue_arrivals(config.prefill_seconds)

        sizes = (
            config.dataset.feature_dim,
            *config.model.hidden,
            config.dataset.n_classes,
        )
        base = nn.init_model(sizes, derive_seed(config.seed, "model_init"))
        self.replicas = [base.copy() for _ in range(n)]
        self.opt_states = [
            nn.OptimizerState(
                momentum=config.optimizer.momentum,
                weight_decay=config.optimizer.weight_decay,
                base_lr=config.optimizer.base_lr,
            )
            for _ in range(n)
        ]
        self.gate_states = (
            [
                comm.CompressionState(
                    cr=config.compression.cr,
                    delta=config.compression.delta,
                    ewma_factor=config.compression.ewma_factor,
                    raw_gate=config.compression.raw_gate,
                )
                for _ in range(n)
            ]
            if config.compression.enabled
            else None
        )
        self.link = comm.LinkModel(config.cost.link_latency, config.cost.link_bandwidth)
        self.base_global_batch = (
            config.optimizer.base_global_batch
            if config.optimizer.base_global_batch is not None
            else n * 64
        )

        self.clock = SimClock()
        self.volume = comm.VolumeStats()
        self.injection_bytes_cum = 0
        self.epoch = 0
        self.iter_in_epoch = 0
        self._refresh_epoch_layout()
        self._augment = self._augmentation_table(0)

    # -- per-epoch scaffolding -------------------------------------------------

    def _refresh_epoch_layout(self) -> None:
        cfg = self.config
        self.batch_sizes = [
            compute_batch_size(cfg.mode, r, cfg.b_min, cfg.b_max, cfg.fixed_batch)
            for r in self.rates
        ]
        nominal_global = sum(self.batch_sizes)
        self.iters_per_epoch = max(1, math.ceil(self.dataset.n_train / nominal_global))

    def _augmentation_table(self, epoch: int) -> np.ndarray:
        std = self.config.model.augment_std
        if std <= 0:
            return np.zeros_like(self.dataset.train_x)
        rng = np.random.default_rng(derive_seed(self.config.seed, f"augment:{epoch}"))
        return rng.normal(0.0, std, self.dataset.train_x.shape)

    def _start_epoch(self, epoch: int) -> None:
        self.epoch = epoch
        self.iter_in_epoch = 0
        self._augment = self._augmentation_table(epoch)
        if self.config.rate_jitter and epoch > 0:
            self.rates = streams.sample_rates(
                self.config.rate_dist,
                self.config.n_devices,
                derive_seed(self.config.seed, f"rates:{epoch}"),
            )
            for buf, rate in zip(self.buffers, self.rates):
                buf.rate = rate
            self._refresh_epoch_layout()

    def _materialize(self, device: int, train_indices: list[int]):
        idx = np.asarray(train_indices, dtype=np.int64)
        x = self.dataset.train_x[idx] + self._augment[idx]
        return x, self.dataset.train_y[idx]

    # -- the global step -------------------------------------------------------

    def run_iteration(self) -> IterationMetrics:
        cfg = self.config
        n = cfg.n_devices
        b = self.batch_sizes

        # Barrier: everyone waits until the slowest stream has a full batch.
        waits = [
            streams.streaming_wait(len(buf), b[d], self.rates[d])
            for d, buf in enumerate(self.buffers)
        ]
        global_wait = max(waits)
        if global_wait > 0:
            for buf in self.buffers:
                buf.enqueue_arrivals(global_wait)

        drawn = [buf.draw_batch(b[d]) for d, buf in enumerate(self.buffers)]
        batches = [
            [int(self.pools[d][a % len(self.pools[d])]) for a in ids]
            for d, ids in enumerate(drawn)
        ]

        injection_bytes = 0
        if cfg.injection.enabled and cfg.injection.alpha > 0:
            inj_cfg = datagen.InjectionConfig(
                cfg.injection.alpha, cfg.injection.beta, cfg.sample_bytes
            )
            it = self.clock.iteration
            plan = datagen.injection_plan(
                n, inj_cfg, b, derive_seed(cfg.seed, f"inject-plan:{it}")
            )
            draw_rng = np.random.default_rng(derive_seed(cfg.seed, f"inject-draw:{it}"))
            batches, injection_bytes = datagen.inject(
                batches, plan, cfg.sample_bytes, draw_rng
            )
            self.injection_bytes_cum += injection_bytes

        losses = np.empty(n)
        payloads = []
        payload_sizes = []
        dim = self.replicas[0].flat.size
        for d in range(n):
            x, y = self._materialize(d, batches[d])
            loss, grad = nn.loss_and_grad(self.replicas[d], x, y)
            losses[d] = loss
            if self.gate_states is not None:
                decision = comm.compression_gate(grad, self.gate_states[d])
                comm.account_volume(
                    decision.compressed, dim, cfg.compression.cr, self.volume
                )
                payloads.append(decision.payload)
                payload_sizes.append(
                    comm.payload_bytes(decision.compressed, dim, cfg.compression.cr)
                )
            else:
                comm.account_volume(False, dim, 1.0, self.volume)
                payloads.append(grad)
                payload_sizes.append(comm.payload_bytes(False, dim, 1.0))

        if cfg.mode == MODE_RATE_MATCHED:
            weights = comm.weights_from_rates(self.rates)
        else:
            weights = np.full(n, 1.0 / n)
        aggregate = comm.weighted_aggregate(payloads, weights)
        train_loss = float(weights @ losses)
        if not np.isfinite(train_loss):
            raise DivergenceError(
                f"non-finite loss at iteration {self.clock.iteration + 1}"
            )

        lr = nn.lr_at_epoch(
            cfg.optimizer.base_lr, cfg.optimizer.schedule, self.epoch
        )
        if cfg.mode == MODE_RATE_MATCHED:
            lr = nn.scale_lr(lr, sum(self.rates), self.base_global_batch)
        for d in range(n):
            nn.sgd_momentum_step(self.opt_states[d], self.replicas[d].flat, aggregate, lr)
        for d in range(1, n):
            if not np.array_equal(self.replicas[d].flat, self.replicas[0].flat):
                raise AssertionError("device replicas diverged after the update")

        # The allreduce is bounded by the largest payload on the wire.
        compute_time = max(cfg.cost.c0 + cfg.cost.c1 * len(batches[d]) for d in range(n))
        comm_t = comm.comm_time(max(payload_sizes), self.link, n)
        busy = compute_time + comm_t
        for buf in self.buffers:
            buf.enqueue_arrivals(busy)
        for buf in self.buffers:
            buf.apply_retention()

        self.clock.advance(global_wait + busy)
        self.iter_in_epoch += 1

        occupancy = [len(buf) for buf in self.buffers]
        cnc = None
        if self.gate_states is not None:
            n_comp = sum(s.n_compressed for s in self.gate_states)
            n_total = n_comp + sum(s.n_uncompressed for s in self.gate_states)
            cnc = n_comp / n_total
        return IterationMetrics(
            iteration=self.clock.iteration,
            sim_time_s=self.clock.now,
            epoch=self.epoch,
            global_batch=sum(b),
            lr_used=lr,
            train_loss=train_loss,
            test_accuracy=None,
            wait_time_s=global_wait,
            buffer_occupancy=occupancy,
            buffer_bytes=sum(occupancy) * cfg.sample_bytes,
            floats_sent_cum=self.volume.floats_sent,
            bytes_sent_cum=self.volume.bytes_sent,
            cnc_cum=cnc,
            injection_bytes=injection_bytes,
            injection_bytes_cum=self.injection_bytes_cum,
        )

    def evaluate(self) -> float:
        return nn.evaluate(self.replicas[0], self.dataset.test_x, self.dataset.test_y)

    def run(self, sink=None) -> RunResult:
        """Run until target accuracy or max_epochs; emit one row per iteration."""
        cfg = self.config
        rows: list[IterationMetrics] = []
        best_acc: float | None = None
        final_acc: float | None = None
        time_to_target: float | None = None
        reached = False

        while True:
            row = self.run_iteration()
            epoch_done = self.iter_in_epoch >= self.iters_per_epoch
            if epoch_done:
                acc = self.evaluate()
                row.test_accuracy = acc
                final_acc = acc
                best_acc = acc if best_acc is None else max(best_acc, acc)
                if (
                    cfg.target_accuracy is not None
                    and acc >= cfg.target_accuracy
                    and not reached
                ):
                    reached = True
                    time_to_target = row.sim_time_s
            rows.append(row)
            if sink is not None:
                sink(row)
            if epoch_done:
                completed = self.epoch + 1
                if reached:
                    break
                if cfg.max_epochs is not None and completed >= cfg.max_epochs:
                    break
                self._start_epoch(completed)

        summary = RunSummary(
            final_accuracy=final_acc,
            best_accuracy=best_acc,
            final_train_loss=rows[-1].train_loss,
            iterations=len(rows),
            epochs_completed=self.epoch + 1,
            sim_time_s=self.clock.now,
            target_accuracy=cfg.target_accuracy,
            reached_target=reached,
            time_to_target_s=time_to_target,
            floats_sent_total=self.volume.floats_sent,
            bytes_sent_total=self.volume.bytes_sent,
            cnc=rows[-1].cnc_cum,
            injection_bytes_total=self.injection_bytes_cum,
            final_buffer_samples=rows[-1].buffer_samples_total,
            final_buffer_bytes=rows[-1].buffer_bytes,
            seed=cfg.seed,
        )
        return RunResult(summary, rows)


def run_experiment(config: SimConfig, sink=None) -> RunResult:
    return Simulation(config).run(sink=sink)
