#!/usr/bin/env python3
"""Adaptive-compression sweep over (compression ratio, threshold).

Drives the CLI `sweep` subcommand over the 8-point grid used for the
communication-volume comparison and prints the CNC ratio and floats sent per
configuration from sweep_summary.csv.
"""

import argparse
import csv
import sys
import tempfile
from pathlib import Path

from streamsgd.cli import main as cli_main
from streamsgd.config import (
    CompressionConfig,
    ModelConfig,
    OptimizerConfig,
    SimConfig,
    save_config,
)
from streamsgd.datagen import DatasetSpec
from streamsgd.streams import RateDistribution


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="out/gate_sweep")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    config = SimConfig(
        n_devices=8,
        rate_dist=RateDistribution("uniform", 38, 24),
        dataset=DatasetSpec(
            n_classes=10, feature_dim=16, samples_per_class=100,
            cluster_spread=0.5, seed=101,
        ),
        seed=args.seed,
        mode="rate_matched",
        model=ModelConfig(hidden=[32]),
        optimizer=OptimizerConfig(base_lr=0.2, momentum=0.9),
        compression=CompressionConfig(enabled=True, cr=0.1, delta=0.3),
        max_epochs=20,
    )
    with tempfile.TemporaryDirectory() as tmp:
        cfg_path = Path(tmp) / "config.json"
        save_config(config, cfg_path)
        code = cli_main([
            "sweep", "--config", str(cfg_path), "--out", args.out, "--quiet",
            "--grid", "compression.delta=0.1,0.2,0.3,0.4",
            "--grid", "compression.cr=0.1,0.01",
        ])
    if code != 0:
        return code

    with open(Path(args.out) / "sweep_summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    print(f"{'cr':>6} {'delta':>6} {'cnc':>6} {'floats sent':>14} {'accuracy':>9}")
    for row in sorted(rows, key=lambda r: (float(r["compression.cr"]), float(r["compression.delta"]))):
        acc = row["final_accuracy"]
        print(
            f"{row['compression.cr']:>6} {row['compression.delta']:>6} "
            f"{float(row['cnc']):>6.2f} {int(row['floats_sent_total']):>14,} "
            f"{float(acc):>9.3f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
