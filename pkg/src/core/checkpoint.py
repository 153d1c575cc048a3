"""
Model checkpoint: a versioned JSON document validated with pydantic.

Floats are written in shortest round-trip form, so save → load restores
every parameter bit for bit.
"""

import json
import logging
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.core.errors import DataError
from src.core.model import CFGNNModel
from src.core.storage import write_text_atomic

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1


class CheckpointTensor(BaseModel):
    """A parameter tensor stored as its shape plus row-major float64 values."""

    model_config = ConfigDict(extra="forbid")

    shape: list[int] = Field(..., description="Tensor shape")
    data: list[float] = Field(..., description="Row-major values")

    @model_validator(mode="after")
    def check_size(self):
        expected = int(np.prod(self.shape)) if self.shape else 1
        if len(self.data) != expected:
            raise ValueError(f"tensor of shape {self.shape} needs {expected} values, got {len(self.data)}")
        return self

    @classmethod
    def from_array(cls, array: np.ndarray) -> "CheckpointTensor":
        return cls(shape=list(array.shape), data=[float(x) for x in np.ravel(array)])

    def to_array(self) -> np.ndarray:
        return np.asarray(self.data, dtype=np.float64).reshape(self.shape)


class Checkpoint(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: Literal[1] = CHECKPOINT_FORMAT_VERSION
    variant: Literal["base", "v", "e", "global"]
    num_layers: int = Field(..., ge=1)
    hidden_dim: int = Field(..., ge=1)
    num_classes: int = Field(..., ge=2)
    input_dim: int = Field(..., ge=0)
    n_nodes: int = Field(..., ge=1)
    K: int = Field(..., ge=0)
    basis_kind: Literal["chebyshev", "monomial"]
    class_names: list[str]
    seed: int
    config: dict[str, Any] = Field(default_factory=dict, description="Echo of the training configuration")
    params: dict[str, CheckpointTensor]

    def to_model(self) -> CFGNNModel:
        model = CFGNNModel(
            variant=self.variant,
            num_layers=self.num_layers,
            hidden_dim=self.hidden_dim,
            num_classes=self.num_classes,
            input_dim=self.input_dim,
            n_nodes=self.n_nodes,
            K=self.K,
            basis_kind=self.basis_kind,
        )
        model.params = {name: tensor.to_array() for name, tensor in self.params.items()}
        return model.validate()


def build_checkpoint(model: CFGNNModel, class_names, seed: int, config: dict[str, Any]) -> Checkpoint:
    return Checkpoint(
        variant=model.variant,
        num_layers=model.num_layers,
        hidden_dim=model.hidden_dim,
        num_classes=model.num_classes,
        input_dim=model.input_dim,
        n_nodes=model.n_nodes,
        K=model.K,
        basis_kind=model.basis_kind,
        class_names=list(class_names),
        seed=seed,
        config=config,
        params={name: CheckpointTensor.from_array(value) for name, value in sorted(model.params.items())},
    )


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> None:
    text = json.dumps(checkpoint.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
    write_text_atomic(path, text)
    logger.info(f"Saved checkpoint ({len(checkpoint.params)} tensors) to {path}")


def load_checkpoint(path: Path) -> Checkpoint:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return Checkpoint.model_validate(payload)
    except (OSError, json.JSONDecodeError, ValidationError) as exc:
        raise DataError(f"Cannot read checkpoint {path}: {exc}")
