"""
Pydantic schemas for experiment configuration files.
"""

import json
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.core.config import (
    DEFAULT_LABEL_COLUMN,
    KNN_NEIGHBORS,
    MAX_POLYNOMIAL_ORDER,
    SplitSpec,
    SyntheticConfig,
    TrainConfig,
)
from src.core.errors import ConfigError

VariantName = Literal["base", "v", "e", "global"]
ProfileName = Literal["domain_a", "domain_c"]

DEFAULT_SWEEP_RATIOS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TrainSettings(_Strict):
    """Training hyper-parameters; unset fields fall back to the profile, then to TrainConfig defaults."""

    num_layers: Optional[int] = Field(None, ge=1, description="Number of spectral layers")
    hidden_dim: Optional[int] = Field(None, ge=1, description="Hidden embedding size")
    learning_rate: Optional[float] = Field(None, gt=0, description="Adam learning rate")
    weight_decay: Optional[float] = Field(None, ge=0, description="L2 weight added to the gradient")
    epochs: Optional[int] = Field(None, ge=0, description="Fixed epoch budget")
    adjacency_dropout: Optional[float] = Field(None, ge=0, lt=1, description="Edge dropout probability")
    K: Optional[int] = Field(None, ge=0, le=MAX_POLYNOMIAL_ORDER, description="Polynomial order")
    basis_kind: Optional[Literal["chebyshev", "monomial"]] = None
    class_weight_mode: Optional[Literal["inverse-frequency", "none"]] = None
    eigensolver: Optional[Literal["jacobi", "lapack", "auto"]] = None
    log_every: Optional[int] = Field(None, ge=0, description="INFO summary interval in epochs")


class SyntheticSettings(_Strict):
    """Synthetic dataset generator settings."""

    num_classes: Optional[int] = Field(None, ge=2)
    num_samples: Optional[int] = Field(None, ge=2)
    normal_fraction: Optional[float] = Field(None, gt=0, le=1)
    class_counts: Optional[List[int]] = None
    feature_dim: Optional[int] = Field(None, ge=1)
    p_in: Optional[float] = Field(None, ge=0, le=1)
    p_out: Optional[float] = Field(None, ge=0, le=1)
    separation: Optional[float] = Field(None, ge=0)
    noise: Optional[float] = Field(None, ge=0)


class SplitSettings(_Strict):
    train_fraction: float = Field(0.8, gt=0, lt=1, description="Per-class share of training nodes")


class DatasetSettings(_Strict):
    """CSV input; when absent, commands use the synthetic generator."""

    features_path: Path = Field(..., description="Feature CSV, one row per sample")
    edges_path: Optional[Path] = Field(None, description="Edge CSV (src,dst,weight); k-NN graph when missing")
    label_column: str = DEFAULT_LABEL_COLUMN
    categorical_columns: List[str] = Field(default_factory=list, description="Columns to one-hot encode")
    normalize: bool = True
    knn_k: int = Field(KNN_NEIGHBORS, ge=1)


class SweepSettings(_Strict):
    ratios: List[float] = Field(default_factory=lambda: list(DEFAULT_SWEEP_RATIOS))
    variants: List[VariantName] = Field(default_factory=lambda: ["v", "global"])
    unweighted_global: bool = Field(True, description="Train the global baseline without class weights")
    max_workers: int = Field(4, ge=1, description="Concurrent (resample, train, evaluate) jobs")

    @field_validator("ratios")
    @classmethod
    def validate_ratios(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("ratios must not be empty")
        for r in v:
            if not 0 < r <= 1:
                raise ValueError(f"ratio {r} outside (0, 1]")
        return v


class ExperimentConfig(_Strict):
    """One experiment: data source, model variant, training and output location."""

    seed: int = Field(0, ge=0, lt=2**64, description="Single seed for every randomness stream")
    variant: VariantName = "v"
    profile: Optional[ProfileName] = Field(None, description="Domain profile for training and synthetic defaults")
    output_dir: Path = Field(Path("runs/default"), description="Directory receiving every artifact")
    checkpoint_path: Optional[Path] = Field(None, description="Checkpoint to evaluate (default: <output_dir>/checkpoint.json)")
    train: TrainSettings = Field(default_factory=TrainSettings)
    synthetic: SyntheticSettings = Field(default_factory=SyntheticSettings)
    split: SplitSettings = Field(default_factory=SplitSettings)
    dataset: Optional[DatasetSettings] = None
    sweep: SweepSettings = Field(default_factory=SweepSettings)

    @model_validator(mode="after")
    def validate_class_counts(self):
        counts = self.synthetic.class_counts
        if counts is not None:
            if any(c < 1 for c in counts):
                raise ValueError("synthetic.class_counts entries must be positive")
            if self.synthetic.num_classes is not None and len(counts) != self.synthetic.num_classes:
                raise ValueError("synthetic.class_counts length must equal synthetic.num_classes")
        return self

    def resolve_paths(self, base_dir: Path) -> "ExperimentConfig":
        """Return a copy with every path made absolute against base_dir."""

        def absolute(p: Optional[Path]) -> Optional[Path]:
            if p is None:
                return None
            return p if p.is_absolute() else (base_dir / p).resolve()

        update: dict = {
            "output_dir": absolute(self.output_dir),
            "checkpoint_path": absolute(self.checkpoint_path),
        }
        if self.dataset is not None:
            update["dataset"] = self.dataset.model_copy(update={
                "features_path": absolute(self.dataset.features_path),
                "edges_path": absolute(self.dataset.edges_path),
            })
        return self.model_copy(update=update)

    def to_train_config(self, variant: Optional[str] = None, **overrides) -> TrainConfig:
        values = {k: v for k, v in self.train.model_dump().items() if v is not None}
        values.update(variant=variant or self.variant, seed=self.seed, **overrides)
        if self.profile is not None:
            return TrainConfig.for_profile(self.profile, **values).validate()
        return TrainConfig(**values).validate()

    def to_synthetic_config(self) -> SyntheticConfig:
        values = {k: v for k, v in self.synthetic.model_dump().items() if v is not None}
        if "class_counts" in values:
            values["class_counts"] = tuple(values["class_counts"])
            values.setdefault("num_classes", len(values["class_counts"]))
            values.setdefault("num_samples", sum(values["class_counts"]))
        values["seed"] = self.seed
        histogram_keys = {"class_counts", "num_samples", "normal_fraction"}
        if self.profile is not None and not histogram_keys & values.keys():
            return SyntheticConfig.for_profile(self.profile, **values).validate()
        return SyntheticConfig(**values).validate()

    def to_split_spec(self) -> SplitSpec:
        return SplitSpec(train_fraction=self.split.train_fraction, seed=self.seed).validate()


def load_experiment_config(path: Optional[Path]) -> ExperimentConfig:
    """Read and validate a JSON config file; no path means all defaults."""
    if path is None:
        return ExperimentConfig()
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"Cannot read config file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid JSON: {exc}")
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(f"Invalid config file {path}:\n{exc}")
