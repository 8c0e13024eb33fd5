from __future__ import annotations

import dataclasses
import itertools
import json
import math
import os
import pathlib
from collections.abc import Iterator
from dataclasses import dataclass, field

from dotenv import load_dotenv

from errors import ConfigError

load_dotenv()

# Paths
DATABASE_PATH = os.getenv("DATABASE_PATH", "came.db")
OUTPUT_DIR = os.getenv("CAME_OUTPUT_DIR", "runs")

# Logging
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

# Numeric precision for training; tests and gradient checks always use float64
DTYPE = os.getenv("CAME_DTYPE", "float64")

# Modalities, in AMF slot order
MODALITIES = ("onehot", "blosum", "esm", "struct", "gcn")
FILE_MODALITIES = ("esm", "struct")
ABLATION_FLAGS = MODALITIES + ("amf", "moe", "contrastive", "swa")

ABLATION_LABELS = {
    "full": "Full Model",
    "onehot": "w/o One-hot",
    "blosum": "w/o BLOSUM",
    "esm": "w/o ESMC",
    "struct": "w/o ESMC Structure",
    "gcn": "w/o GCN",
    "amf": "w/o adaptive modal fusion",
    "moe": "w/o MoE",
    "contrastive": "w/o contrastive learning",
    "swa": "w/o SWA",
}

# Architecture defaults
DEFAULT_D_MODEL = 256
DEFAULT_N_LAYERS = 2
DEFAULT_N_HEADS = 8
DEFAULT_N_EXPERTS = 4
DEFAULT_EXPERT_HIDDEN = 512
DEFAULT_CONTRAST_DIM = 128
DEFAULT_CLASSIFIER_HIDDEN = 128
DEFAULT_GCN_DIM = 64
DEFAULT_SYNTHETIC_EMBED_DIM = 64

# Optimization defaults
DEFAULT_LR = 1e-4
DEFAULT_LR_DECAY = 0.95
DEFAULT_LR_DECAY_EVERY = 10
DEFAULT_WEIGHT_DECAY = 1e-5
DEFAULT_BATCH_SIZE = 64
DEFAULT_MAX_EPOCHS = 50
DEFAULT_PATIENCE = 10
DEFAULT_DROPOUT = 0.1

# Loss defaults
DEFAULT_LAMBDA_AUX = 0.3
DEFAULT_LAMBDA_CONTRAST = 0.3
DEFAULT_LAMBDA_DIV = 0.1
DEFAULT_TEMPERATURE = 0.07
DEFAULT_FOCAL_GAMMA = 2.0

# Featurization defaults
DEFAULT_SIMILARITY_THRESHOLD = 0.85
DEFAULT_DESCRIPTORS = ("hydropathy", "charge", "polarity", "molecular_weight", "isoelectric_point")

# Grid the hyperparameter search enumerates
GRID_D_MODEL = (64, 128, 256)
GRID_N_LAYERS = (2, 4, 6)
GRID_N_HEADS = (4, 8, 12)


@dataclass
class TrainConfig:
    # architecture
    d_model: int = DEFAULT_D_MODEL
    n_layers: int = DEFAULT_N_LAYERS
    n_heads: int = DEFAULT_N_HEADS
    n_experts: int = DEFAULT_N_EXPERTS
    expert_hidden: int = DEFAULT_EXPERT_HIDDEN
    ffn_mult: int = 4
    contrast_dim: int = DEFAULT_CONTRAST_DIM
    contrast_hidden: int = DEFAULT_D_MODEL
    classifier_hidden: int = DEFAULT_CLASSIFIER_HIDDEN
    gcn_dim: int = DEFAULT_GCN_DIM
    dropout: float = DEFAULT_DROPOUT
    ln_eps: float = 1e-5
    use_positional: bool = False
    max_len: int = 512
    # fusion
    gamma_inference: str = "mean"
    amf_normalize: bool = False
    # optimization
    lr: float = DEFAULT_LR
    lr_decay: float = DEFAULT_LR_DECAY
    lr_decay_every: int = DEFAULT_LR_DECAY_EVERY
    lr_schedule: str = "step"
    lr_cycle_epochs: int = 10
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    batch_size: int = DEFAULT_BATCH_SIZE
    max_epochs: int = DEFAULT_MAX_EPOCHS
    patience: int = DEFAULT_PATIENCE
    swa_start_epoch: int | None = None
    # losses
    lambda_aux: float = DEFAULT_LAMBDA_AUX
    lambda_contrast: float = DEFAULT_LAMBDA_CONTRAST
    lambda_div: float = DEFAULT_LAMBDA_DIV
    temperature: float = DEFAULT_TEMPERATURE
    focal_gamma: float = DEFAULT_FOCAL_GAMMA
    focal_alpha: tuple[float, ...] | None = None
    diversity_mode: str = "batch_mean"
    hard_negative_mining: bool = False
    feature_augmentation: bool = False
    augmentation_sigma: float = 0.01
    class_aware_sampling: bool = False
    # featurization
    similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD
    descriptors: tuple[str, ...] = DEFAULT_DESCRIPTORS
    # run
    num_classes: int | None = None
    seed: int = 0
    dtype: str = DTYPE
    eval_workers: int = 1
    ablate: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        for name in ("ablate", "descriptors", "focal_alpha"):
            value = getattr(self, name)
            if isinstance(value, list):
                setattr(self, name, tuple(value))

    @property
    def swa_start(self) -> int:
        if self.swa_start_epoch is not None:
            return self.swa_start_epoch
        return math.ceil(0.75 * self.max_epochs)

    @property
    def active_modalities(self) -> tuple[str, ...]:
        return tuple(m for m in MODALITIES if m not in self.ablate)

    def is_enabled(self, component: str) -> bool:
        return component not in self.ablate

    def validate(self) -> TrainConfig:
        positive = (
            "lr", "lr_decay", "batch_size", "max_epochs", "temperature", "d_model", "n_heads",
            "lr_decay_every", "lr_cycle_epochs", "patience",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.d_model % self.n_heads:
            raise ConfigError(f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}")
        if self.swa_start >= self.max_epochs:
            raise ConfigError(
                f"swa_start_epoch {self.swa_start} must be below max_epochs {self.max_epochs}"
            )
        for name in ("lambda_aux", "lambda_contrast", "lambda_div", "weight_decay", "focal_gamma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        unknown = set(self.ablate) - set(ABLATION_FLAGS)
        if unknown:
            raise ConfigError(f"unknown ablation flag(s): {', '.join(sorted(unknown))}")
        choices = {
            "gamma_inference": ("mean", "two_pass"),
            "diversity_mode": ("batch_mean", "per_sample"),
            "lr_schedule": ("step", "cosine_cyclic"),
            "dtype": ("float32", "float64"),
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        return self

    def with_ablations(self, *flags: str) -> TrainConfig:
        merged = tuple(dict.fromkeys((*self.ablate, *flags)))
        return dataclasses.replace(self, ablate=merged)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> TrainConfig:
        try:
            data = json.loads(pathlib.Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a flat JSON object")
        return cls.from_dict(data)


def grid_configs(
    base: TrainConfig,
    d_model: tuple[int, ...] = GRID_D_MODEL,
    n_layers: tuple[int, ...] = GRID_N_LAYERS,
    n_heads: tuple[int, ...] = GRID_N_HEADS,
) -> Iterator[TrainConfig]:
    """Enumerate the architecture grid; head counts that do not divide d are skipped."""
    for d, layers, heads in itertools.product(d_model, n_layers, n_heads):
        if d % heads:
            continue
        yield dataclasses.replace(base, d_model=d, n_layers=layers, n_heads=heads)
