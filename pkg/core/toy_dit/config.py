"""Configuration models of the toy transformer and its distillation."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.errors import ConfigError
from core.geometry.grid import TokenGrid
from core.geometry.rope import ClipMode, RopeConfig


class ToyDitConfig(BaseModel):
    """Shape of the toy text-image transformer.

    Defaults match the acceptance run: an 8x8 latent raster, four text
    tokens, width 64, four blocks.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    height: int = Field(default=8, ge=1)
    width: int = Field(default=8, ge=1)
    n_text: int = Field(default=4, ge=0)
    dim: int = Field(default=64, gt=0)
    n_heads: int = Field(default=4, gt=0)
    n_blocks: int = Field(default=4, gt=0)
    mlp_ratio: int = Field(default=2, gt=0)
    latent_channels: int = Field(default=4, gt=0)
    text_channels: int = Field(default=16, gt=0)
    n_classes: int = Field(default=4, gt=0)
    time_dim: int = Field(default=16, gt=0)
    rope_base: float = Field(default=10000.0, gt=0)
    ntk_factor: float = Field(default=1.0, ge=1.0)
    clip_mode: ClipMode = ClipMode.NONE
    clip_radius: float | None = None
    logit_scale: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _check(self) -> "ToyDitConfig":
        if self.dim % self.n_heads:
            raise ValueError(f"dim {self.dim} is not divisible by {self.n_heads} heads")
        if self.time_dim % 2:
            raise ValueError("time_dim must be even")
        if self.head_dim % 4:
            raise ValueError(f"head width {self.head_dim} must be a multiple of 4")
        if self.clip_mode is not ClipMode.NONE and not (self.clip_radius or 0) > 0:
            raise ValueError("clip_radius must be positive when clipping is enabled")
        return self

    @property
    def head_dim(self) -> int:
        return self.dim // self.n_heads

    @property
    def grid(self) -> TokenGrid:
        return TokenGrid(self.n_text, self.height, self.width)

    @property
    def rope(self) -> RopeConfig:
        return RopeConfig(
            head_dim=self.head_dim,
            base=self.rope_base,
            ntk_factor=self.ntk_factor,
            clip_mode=self.clip_mode,
            clip_radius=self.clip_radius,
            logit_scale=self.logit_scale,
        )


class DistillConfig(BaseModel):
    """Weights and schedule of the distillation objective.

    ``attn_loss_layers`` of ``None`` selects the second half of the blocks.
    """

    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(default=0.5, ge=0)
    beta: float = Field(default=0.5, ge=0)
    attn_loss_layers: list[int] | None = None
    steps: int = Field(default=2000, ge=0)
    batch_size: int = Field(default=4, gt=0)
    learning_rate: float = Field(default=1e-3, gt=0)
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    seed: int = 0
    log_every: int = Field(default=100, gt=0)
    holdout_size: int = Field(default=8, gt=0)

    def layers_for(self, n_blocks: int) -> list[int]:
        if self.attn_loss_layers is None:
            return list(range(n_blocks // 2, n_blocks))
        layers = sorted(set(self.attn_loss_layers))
        missing = [l for l in layers if not 0 <= l < n_blocks]
        if missing:
            raise ConfigError(
                f"attention loss layers {missing} do not exist in a {n_blocks}-block model"
            )
        return layers
