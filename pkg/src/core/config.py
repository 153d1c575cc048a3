"""
Configuration settings for the class-Fourier GNN toolkit.
"""

from dataclasses import dataclass, field
from typing import Literal, Optional
import os

import numpy as np
from dotenv import load_dotenv

from src.core.errors import ConfigError

load_dotenv()

# Graph construction guards
DEFAULT_MAX_PRODUCT_NODES = 4096
SYMMETRY_TOLERANCE = 1e-9

# Eigensolvers
JACOBI_MAX_SWEEPS = 100
JACOBI_AUTO_MAX_NODES = 32  # "auto" switches to LAPACK above this size
POWER_ITERATION_EPS = 1e-10
POWER_ITERATION_MAX_ITER = 10_000

# Filters
MAX_POLYNOMIAL_ORDER = 16

# Model / training
PROBABILITY_FLOOR = 1e-12
CLASS_WEIGHT_MIN = 0.1
CLASS_WEIGHT_MAX = 100.0
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Data
KNN_NEIGHBORS = 10
DEFAULT_LABEL_COLUMN = "label"

Variant = Literal["base", "v", "e", "global"]
BasisKind = Literal["chebyshev", "monomial"]
Eigensolver = Literal["jacobi", "lapack", "auto"]

VARIANTS: tuple[str, ...] = ("base", "v", "e", "global")

# Fixed spawn keys so every named stream stays stable across releases.
_SEED_STREAMS = {
    "init": 0,
    "split": 1,
    "dropout": 2,
    "resample": 3,
    "synthetic": 4,
    "power": 5,
}


def max_product_nodes() -> int:
    """Size guard for product constructions (CFGNN_MAX_PRODUCT_NODES overrides)."""
    raw = os.getenv("CFGNN_MAX_PRODUCT_NODES")
    if not raw:
        return DEFAULT_MAX_PRODUCT_NODES
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"CFGNN_MAX_PRODUCT_NODES must be an integer, got {raw!r}")


def derive_rng(seed: int, stream: str) -> np.random.Generator:
    """
    Return the generator for one named randomness stream of a run.

    All randomness of a run (init, split, dropout, resampling, synthetic data)
    derives from one seed; each stream gets its own spawn key.
    """
    if stream not in _SEED_STREAMS:
        raise ConfigError(f"Unknown seed stream '{stream}'")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(_SEED_STREAMS[stream],))
    return np.random.default_rng(sequence)


@dataclass
class TrainConfig:
    """Hyper-parameters of one training run."""

    variant: Variant = "v"
    num_layers: int = 2
    hidden_dim: int = 64
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 350
    adjacency_dropout: float = 0.2
    K: int = 2
    basis_kind: BasisKind = "chebyshev"
    class_weight_mode: Literal["inverse-frequency", "none"] = "inverse-frequency"
    eigensolver: Eigensolver = "lapack"
    seed: int = 0
    log_every: int = 50

    @classmethod
    def for_profile(cls, profile: str, **overrides) -> "TrainConfig":
        """Parameter settings reported for the digital-twin (A) and real-network (C) domains."""
        profiles = {
            "domain_a": dict(learning_rate=0.01, weight_decay=5e-4, epochs=350),
            "domain_c": dict(learning_rate=0.01, weight_decay=1e-6, epochs=250),
        }
        if profile not in profiles:
            raise ConfigError(f"Unknown training profile '{profile}'. Available: {sorted(profiles)}")
        return cls(**{**profiles[profile], **overrides})

    def validate(self) -> "TrainConfig":
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.num_layers < 1:
            raise ConfigError("num_layers must be at least 1")
        if self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be at least 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if not 0.0 <= self.adjacency_dropout < 1.0:
            raise ConfigError("adjacency_dropout must lie in [0, 1)")
        if not 0 <= self.K <= MAX_POLYNOMIAL_ORDER:
            raise ConfigError(f"K must lie in [0, {MAX_POLYNOMIAL_ORDER}]")
        if self.basis_kind not in ("chebyshev", "monomial"):
            raise ConfigError(f"Unknown basis_kind {self.basis_kind!r}")
        if self.class_weight_mode not in ("inverse-frequency", "none"):
            raise ConfigError(f"Unknown class_weight_mode {self.class_weight_mode!r}")
        if self.eigensolver not in ("jacobi", "lapack", "auto"):
            raise ConfigError(f"Unknown eigensolver {self.eigensolver!r}")
        return self


@dataclass
class SyntheticConfig:
    """Stochastic-block-model stand-in for the failure-classification corpora."""

    num_classes: int = 16
    num_samples: int = 3642
    normal_fraction: float = 0.67
    class_counts: Optional[tuple[int, ...]] = None
    feature_dim: int = 32
    p_in: float = 0.05
    p_out: float = 0.002
    separation: float = 3.0
    noise: float = 1.0
    seed: int = 0

    @classmethod
    def for_profile(cls, profile: str, **overrides) -> "SyntheticConfig":
        """Class histograms of the digital-twin (A) and real-network (C) datasets."""
        totals = {"domain_a": (2456, 1186), "domain_c": (588, 285)}
        if profile not in totals:
            raise ConfigError(f"Unknown synthetic profile '{profile}'. Available: {sorted(totals)}")
        normal, failures = totals[profile]
        num_classes = overrides.pop("num_classes", 16)
        counts = (normal,) + _even_split(failures, num_classes - 1)
        return cls(num_classes=num_classes, num_samples=normal + failures,
                   normal_fraction=normal / (normal + failures),
                   class_counts=counts, **overrides)

    def resolved_counts(self) -> tuple[int, ...]:
        """Per-class sample counts; class 0 is the normal class."""
        if self.class_counts is not None:
            return tuple(int(c) for c in self.class_counts)
        normal = int(round(self.num_samples * self.normal_fraction))
        return (normal,) + _even_split(self.num_samples - normal, self.num_classes - 1)

    def validate(self) -> "SyntheticConfig":
        if self.num_classes < 2:
            raise ConfigError("num_classes must be at least 2")
        if not 0.0 < self.normal_fraction <= 1.0:
            raise ConfigError("normal_fraction must lie in (0, 1]")
        for name in ("p_in", "p_out"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be at least 1")
        if self.noise < 0 or self.separation < 0:
            raise ConfigError("noise and separation must be non-negative")
        if self.class_counts is not None and len(self.class_counts) != self.num_classes:
            raise ConfigError(
                f"class_counts has {len(self.class_counts)} entries for {self.num_classes} classes"
            )
        return self


@dataclass
class SplitSpec:
    """Stratified train/test split settings."""

    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = field(default=True, init=False)

    def validate(self) -> "SplitSpec":
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        return self


def _even_split(total: int, parts: int) -> tuple[int, ...]:
    """Split total into parts, remainder going to the lowest indices."""
    if parts <= 0:
        return ()
    base, extra = divmod(total, parts)
    return tuple(base + (1 if i < extra else 0) for i in range(parts))
