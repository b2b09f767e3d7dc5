#!/usr/bin/env python3
"""Pre-registration oracle for the non-iid injection margin.

Runs the frozen non-iid configuration (10 devices, one label each) with and
without (0.5, 0.5) sample injection across five seeds and prints the
best-accuracy margins. The margin asserted by tests/test_acceptance.py was
frozen from this script's output.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from conftest import make_config

from streamsgd.config import InjectionSettings, OptimizerConfig, PartitionConfig
from streamsgd.datagen import DatasetSpec
from streamsgd.engine import run_experiment
from streamsgd.streams import RateDistribution


def main() -> None:
    margins = []
    for seed in range(5):
        shared = dict(
            n_devices=10,
            rate_dist=RateDistribution("uniform", 30, 100),
            dataset=DatasetSpec(
                n_classes=10, feature_dim=16, samples_per_class=200,
                cluster_spread=0.55, seed=101,
            ),
            partition=PartitionConfig(mode="noniid", labels_per_device=1),
            optimizer=OptimizerConfig(base_lr=0.1, momentum=0.9, weight_decay=1e-3),
            mode="rate_matched",
            max_epochs=150,
            seed=seed,
        )
        off = run_experiment(
            make_config(injection=InjectionSettings(enabled=False), **shared)
        ).summary
        on = run_experiment(
            make_config(
                injection=InjectionSettings(enabled=True, alpha=0.5, beta=0.5), **shared
            )
        ).summary
        margin = (on.best_accuracy - off.best_accuracy) * 100
        margins.append(margin)
        print(
            f"seed {seed}: best accuracy off={off.best_accuracy:.3f} "
            f"on={on.best_accuracy:.3f} margin={margin:+.1f} points"
        )
    clearing = sum(m >= 10 for m in margins)
    print(f"\nmargins: {[round(m, 1) for m in margins]}")
    print(f"{clearing} of 5 seeds clear the 10-point margin")


if __name__ == "__main__":
    main()
