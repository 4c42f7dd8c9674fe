"""Axis-split 2D rotary position embeddings with NTK scaling and distance clipping.

Each head vector is split in two halves: the first half of the channels
encodes the x offset, the second half the y offset.  Within a half, channels
are rotated in interleaved pairs ``(2p, 2p+1)`` with frequency
``theta_t = (base * ntk_factor) ** (-2t / axis_dim)``.

Text tokens sit at ``(0, 0)``, i.e. they are left unrotated, and pairs that
involve a text token are never clipped.

Clipping relative distances cannot be expressed by rotating each token on
its own, so :func:`rope_scores` evaluates scores pair by pair from angle
tables built on (possibly clipped) offsets.  With ``clip_mode = none`` both
paths agree up to rounding.
"""

from __future__ import annotations

from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.errors import ConfigError, ShapeError
from core.geometry.grid import TokenGrid
from core.tensor import tape as F


class ClipMode(str, Enum):
    NONE = "none"
    REMOTE = "remote"
    LOCAL = "local"


class RopeConfig(BaseModel):
    """Rotary embedding parameters for one attention head."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    head_dim: int = Field(gt=0)
    base: float = Field(default=10000.0, gt=0)
    ntk_factor: float = Field(default=1.0, ge=1.0)
    clip_mode: ClipMode = ClipMode.NONE
    clip_radius: float | None = None
    # log-scale attention factor; 1 leaves logits untouched
    logit_scale: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _check(self) -> "RopeConfig":
        if self.head_dim % 2:
            raise ValueError(f"head_dim must be even, got {self.head_dim}")
        if self.head_dim % 4:
            raise ValueError(
                f"head_dim must split into whole channel pairs per axis, got {self.head_dim}"
            )
        if self.clip_mode is not ClipMode.NONE:
            if self.clip_radius is None or self.clip_radius <= 0:
                raise ValueError("clip_radius must be positive when clipping is enabled")
        return self

    @property
    def axis_dim(self) -> int:
        return self.head_dim // 2


def clip_offsets(d, mode: ClipMode | str, r: float | None = None):
    """Perturb a signed offset (scalar or array).

    ``remote`` clamps offsets to ``[-r, r]``; ``local`` pushes offsets with
    ``|d| < r`` out to ``sign(d) * r`` (zero goes to ``+r``).
    """

    mode = ClipMode(mode)
    if mode is ClipMode.NONE:
        raise ConfigError("clip_offsets needs a clipping mode other than 'none'")
    if r is None or r <= 0:
        raise ConfigError(f"clip radius must be positive, got {r!r}")
    arr = np.asarray(d)
    if mode is ClipMode.REMOTE:
        out = np.clip(arr, -r, r)
    else:
        sign = np.where(arr < 0, -1, 1)
        out = np.where(np.abs(arr) < r, sign * r, arr)
    if np.ndim(d) == 0:
        result = out.item()
        if isinstance(d, (int, np.integer)) and float(result).is_integer():
            return int(result)
        return result
    return out


def rope_frequencies(cfg: RopeConfig) -> np.ndarray:
    """Angular frequency of each channel pair within one axis half."""

    t = np.arange(cfg.axis_dim // 2, dtype=np.float64)
    return (cfg.base * cfg.ntk_factor) ** (-2.0 * t / cfg.axis_dim)


def rope_angles(grid: TokenGrid, cfg: RopeConfig, row_offset: int = 0) -> np.ndarray:
    """Per-token rotation angle of every channel pair, shape ``(n, head_dim/2)``."""

    freqs = rope_frequencies(cfg)
    pos = grid.positions(row_offset).astype(np.float64)
    pos[: grid.n_text] = 0.0
    return np.concatenate(
        [pos[:, :1] * freqs[None, :], pos[:, 1:2] * freqs[None, :]], axis=1
    )


def rope_apply(x, grid: TokenGrid, cfg: RopeConfig, row_offset: int = 0):
    """Rotate per-token head vectors by their absolute 2D position.

    Works on plain arrays and on tape variables.  Clipped configurations
    are rejected here; use :func:`rope_scores`.
    """

    width = F.value(x).shape[1]
    if width % 2:
        raise ShapeError(f"rotary embedding needs an even head width, got {width}")
    if width != cfg.head_dim:
        raise ShapeError(f"vector width {width} differs from head_dim {cfg.head_dim}")
    if cfg.clip_mode is not ClipMode.NONE:
        raise ConfigError(
            "clipped relative distances only exist pairwise; use rope_scores"
        )
    angles = rope_angles(grid, cfg, row_offset)
    if angles.shape[0] != F.value(x).shape[0]:
        raise ShapeError(
            f"{F.value(x).shape[0]} vectors for a grid of {angles.shape[0]} tokens"
        )
    return F.rotate_pairs(x, np.cos(angles), np.sin(angles))


def pair_angle_tables(
    grid: TokenGrid, cfg: RopeConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Cosine and sine of every (query, key, channel pair) angle.

    Offsets between two image tokens are clipped according to
    ``cfg.clip_mode``; offsets involving a text token are used as is.
    """

    pos = grid.positions().astype(np.float64)
    dx = pos[:, None, 0] - pos[None, :, 0]
    dy = pos[:, None, 1] - pos[None, :, 1]
    if cfg.clip_mode is not ClipMode.NONE:
        image = np.zeros(grid.n, dtype=bool)
        image[grid.n_text :] = True
        pair = image[:, None] & image[None, :]
        dx = np.where(pair, clip_offsets(dx, cfg.clip_mode, cfg.clip_radius), dx)
        dy = np.where(pair, clip_offsets(dy, cfg.clip_mode, cfg.clip_radius), dy)
    freqs = rope_frequencies(cfg)
    angles = np.concatenate(
        [dx[:, :, None] * freqs[None, None, :], dy[:, :, None] * freqs[None, None, :]],
        axis=2,
    )
    return np.cos(angles), np.sin(angles)


def rope_scores(q, k, grid: TokenGrid, cfg: RopeConfig):
    """Unscaled scores ``<R(p_i) q_i, R(p_j) k_j>`` for all pairs.

    The score of a pair depends on positions only through the (clipped)
    relative offset.
    """

    for operand in (q, k):
        width = F.value(operand).shape[1]
        if width != cfg.head_dim:
            raise ShapeError(f"vector width {width} differs from head_dim {cfg.head_dim}")
        if F.value(operand).shape[0] != grid.n:
            raise ShapeError(
                f"{F.value(operand).shape[0]} vectors for a grid of {grid.n} tokens"
            )
    cos, sin = pair_angle_tables(grid, cfg)
    return F.pairwise_rope_scores(q, k, cos, sin)
