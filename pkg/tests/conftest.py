import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from streamsgd.config import (
    CompressionConfig,
    CostConfig,
    InjectionSettings,
    ModelConfig,
    OptimizerConfig,
    PartitionConfig,
    SimConfig,
)
from streamsgd.datagen import DatasetSpec
from streamsgd.streams import RateDistribution


def make_config(**overrides) -> SimConfig:
    """A small, fast baseline config that tests tweak field by field."""
    base = dict(
        n_devices=4,
        rate_dist=RateDistribution("normal", 40, 0),
        dataset=DatasetSpec(
            n_classes=10, feature_dim=16, samples_per_class=100,
            cluster_spread=0.5, seed=101,
        ),
        seed=1,
        mode="rate_matched",
        fixed_batch=64,
        retention="persistence",
        partition=PartitionConfig(mode="iid"),
        model=ModelConfig(hidden=[32], augment_std=0.05),
        optimizer=OptimizerConfig(base_lr=0.2, momentum=0.9),
        compression=CompressionConfig(enabled=False),
        injection=InjectionSettings(enabled=False),
        cost=CostConfig(c0=1.0, c1=0.001, link_latency=0.005, link_bandwidth=625e6),
        max_epochs=5,
    )
    base.update(overrides)
    return SimConfig(**base)
