from __future__ import annotations

import pytest

from config import TrainConfig
from dataset.splits import split_by_cluster
from dataset.synthetic import SyntheticSpec, generate_synthetic
from numeric.rng import RngStream


@pytest.fixture
def rng() -> RngStream:
    return RngStream(1234)


def tiny_config(**overrides) -> TrainConfig:
    values = dict(
        d_model=16,
        n_layers=1,
        n_heads=2,
        n_experts=2,
        expert_hidden=16,
        contrast_dim=8,
        contrast_hidden=16,
        classifier_hidden=16,
        gcn_dim=8,
        dropout=0.0,
        lr=5e-3,
        batch_size=16,
        max_epochs=2,
        patience=5,
        swa_start_epoch=1,
        dtype="float64",
    )
    values.update(overrides)
    return TrainConfig(**values)


@pytest.fixture
def tiny_cfg() -> TrainConfig:
    return tiny_config()


def tiny_spec(**overrides) -> SyntheticSpec:
    values = dict(
        n_classes=3,
        samples_per_class=8,
        min_length=4,
        max_length=6,
        separation=5.0,
        seed=7,
        cluster_size=2,
        widths={"onehot": 20, "blosum": 20, "esm": 8, "struct": 6, "gcn": 6},
        dtype="float64",
    )
    values.update(overrides)
    return SyntheticSpec(**values)


@pytest.fixture
def tiny_dataset(tmp_path):
    """(records, parts, out_dir) for a 24-sample synthetic dataset."""
    records = generate_synthetic(tiny_spec(), tmp_path / "data")
    parts = split_by_cluster(records, ratios=(0.6, 0.2, 0.2), seed=0, strict=True).partition(records)
    return records, parts, tmp_path / "data"
