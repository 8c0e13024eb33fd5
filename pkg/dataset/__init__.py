from dataset.balance import balance_classes
from dataset.manifest import SampleRecord, class_count, load_manifest, write_manifest
from dataset.splits import SPLITS, SplitAssignment, split_by_cluster
from dataset.synthetic import SyntheticSpec, generate_synthetic

__all__ = [
    "SPLITS",
    "SampleRecord",
    "SplitAssignment",
    "SyntheticSpec",
    "balance_classes",
    "class_count",
    "generate_synthetic",
    "load_manifest",
    "split_by_cluster",
    "write_manifest",
]
