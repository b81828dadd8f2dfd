"""Run configuration with a strict schema.

Defaults follow the published training settings (AdamW, lr 3e-4, betas
0.9/0.95, no weight decay, batch 16, 100 warmup steps, gradient accumulation
10, alpha 2.0, lambda_ref 2.0, lambda_dice 0.5).  ``TOY_OVERRIDES`` holds the
desk-scale settings used for the synthetic experiments.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .exceptions import ConfigError


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    # model
    n_scales: int = Field(2, ge=1)
    strides: tuple[int, ...] = (4, 8)
    width: int = Field(32, ge=4)
    enc_width: int = Field(32, ge=1)
    n_codebook: int = Field(3, ge=1)
    n_out: int = Field(2, ge=1)
    mlp_width: int = Field(64, ge=1)
    # losses
    alpha: float = Field(2.0, ge=1.0)
    lambda_ref: float = Field(2.0, ge=0.0)
    lambda_dice: float = Field(0.5, ge=0.0)
    # optimiser
    learning_rate: float = Field(3.0e-4, gt=0.0)
    weight_decay: float = Field(0.0, ge=0.0)
    betas: tuple[float, float] = (0.9, 0.95)
    batch_size: int = Field(16, ge=1)
    warmup_steps: int = Field(100, ge=0)
    grad_accum: int = Field(10, ge=1)
    n_steps: int = Field(2000, ge=1)
    # data
    image_size: int = Field(64, ge=8)
    n_train: int = Field(2000, ge=1)
    n_test: int = Field(200, ge=1)
    min_targets: int = Field(1, ge=1)
    max_targets: int = Field(4, ge=1)
    seed: int = 0
    out: Optional[str] = None

    @model_validator(mode="after")
    def _consistent(self):
        if len(self.strides) != self.n_scales:
            raise ValueError(f"strides {self.strides} must have n_scales={self.n_scales} entries")
        if self.min_targets > self.max_targets:
            raise ValueError("min_targets exceeds max_targets")
        if self.image_size % self.strides[-1]:
            raise ValueError(f"image_size {self.image_size} not divisible by deepest stride {self.strides[-1]}")
        if self.width % 4:
            raise ValueError("width must be divisible by 4")
        for b in self.betas:
            if not 0.0 <= b < 1.0:
                raise ValueError(f"beta {b} outside [0, 1)")
        return self

    def estimator_params(self) -> dict:
        keys = (
            "n_scales strides width enc_width n_codebook n_out mlp_width alpha lambda_ref lambda_dice "
            "learning_rate weight_decay betas batch_size warmup_steps grad_accum n_steps"
        ).split()
        params = {k: getattr(self, k) for k in keys}
        params["random_state"] = self.seed
        return params


TOY_OVERRIDES = {"learning_rate": 1.0e-3, "batch_size": 8, "grad_accum": 1}


def build_config(file_values=None, overrides=None) -> RunConfig:
    """Merge file values and CLI overrides (later wins); raise ConfigError with field diagnostics."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig(**merged)
    except ValidationError as exc:
        fields = {".".join(str(p) for p in e["loc"]) or "config": e["msg"] for e in exc.errors()}
        raise ConfigError("invalid configuration", fields) from None


def load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON", {"config": str(exc)}) from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}", {"config": str(exc)}) from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object", {"config": type(data).__name__})
    return data
