#!/usr/bin/env python3
"""Rate-matched vs fixed-batch training on heterogeneous streams.

Runs both modes on the same streaming setup (one run per mode per retention
policy), writes metrics.csv/summary.json under --out, and prints the simulated
time to the target accuracy. The output directories feed the plotting
frontend, e.g.:

    python scripts/compare_modes.py --out out/compare
    cd frontend && npm run plot -- convergence \
        --csv ../out/compare/rate_matched/metrics.csv:rate-matched \
        --csv ../out/compare/fixed_batch/metrics.csv:fixed-batch \
        --out ../out/compare/convergence.svg
"""

import argparse
from pathlib import Path

from streamsgd.cli import write_metrics_csv, write_summary_json
from streamsgd.config import (
    CostConfig,
    ModelConfig,
    OptimizerConfig,
    PartitionConfig,
    SimConfig,
    save_config,
)
from streamsgd.datagen import DatasetSpec
from streamsgd.engine import run_experiment
from streamsgd.streams import RateDistribution


def base_config(seed: int) -> SimConfig:
    return SimConfig(
        n_devices=8,
        rate_dist=RateDistribution("uniform", 38, 24),
        dataset=DatasetSpec(
            n_classes=10, feature_dim=16, samples_per_class=100,
            cluster_spread=0.5, seed=101,
        ),
        seed=seed,
        mode="rate_matched",
        fixed_batch=64,
        retention="persistence",
        partition=PartitionConfig(mode="iid"),
        model=ModelConfig(hidden=[32], augment_std=0.05),
        optimizer=OptimizerConfig(base_lr=0.2, momentum=0.9),
        cost=CostConfig(),
        max_epochs=80,
        target_accuracy=0.9,
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="out/compare")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out_root = Path(args.out)
    summaries = {}
    for mode in ("rate_matched", "fixed_batch"):
        for retention in ("persistence", "truncation"):
            config = base_config(args.seed)
            config.mode = mode
            config.retention = retention
            name = mode if retention == "persistence" else f"{mode}_{retention}"
            run_dir = out_root / name
            run_dir.mkdir(parents=True, exist_ok=True)
            save_config(config, run_dir / "config.json")
            result = run_experiment(config)
            write_metrics_csv(run_dir / "metrics.csv", result, config.n_devices)
            write_summary_json(run_dir / "summary.json", result)
            summaries[name] = result.summary

    print(f"{'run':<28} {'time to target (s)':>20} {'final buffer':>14}")
    for name, summary in summaries.items():
        t = summary.time_to_target_s
        t_str = f"{t:.1f}" if t is not None else "not reached"
        print(f"{name:<28} {t_str:>20} {summary.final_buffer_samples:>14}")

    a = summaries["rate_matched"].time_to_target_s
    b = summaries["fixed_batch"].time_to_target_s
    if a and b:
        print(f"\nrate-matched speedup over fixed-batch: {b / a:.2f}x (simulated time)")
    print(f"outputs under {out_root}/ ({', '.join(sorted(summaries))})")


if __name__ == "__main__":
    main()
