"""Toy text-image diffusion transformer with joint attention.

Tokens are laid out as ``[text; image]`` on the configured grid.  Each block
normalises its input, adds a projected timestep embedding, runs multi-head
joint attention with 2D rotary embeddings under the block's mask and then a
GELU MLP, both residual.  Parameters live in a flat ``name -> array`` dict;
everything named ``blocks.<l>.attn.*`` belongs to the attention layers.

The block helpers are module functions built on :mod:`core.tensor.tape`
ops, so they work with plain arrays (inference, simulated workers) and with
tape variables (training) alike.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np
from pydantic import ValidationError

from core.errors import ConfigError, ShapeError
from core.geometry.grid import TokenGrid
from core.geometry.rope import ClipMode, rope_apply, rope_scores
from core.masks.builders import builder_for
from core.masks.mask import AttentionMask
from core.tensor import tape as F
from core.tensor.tape import Tape, Var
from core.toy_dit.config import ToyDitConfig

logger = logging.getLogger(__name__)

ATTENTION_WEIGHTS = ("wq", "wk", "wv", "wo")


def attention_param_names(n_blocks: int) -> list[str]:
    return [f"blocks.{l}.attn.{w}" for l in range(n_blocks) for w in ATTENTION_WEIGHTS]


def is_attention_param(name: str) -> bool:
    return ".attn." in name


def init_params(config: ToyDitConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Gaussian weights scaled by ``1 / sqrt(fan_in)``."""

    def dense(fan_in: int, fan_out: int) -> np.ndarray:
        return rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)

    c = config.dim
    hidden = config.mlp_ratio * c
    params = {
        "embed.image": dense(config.latent_channels, c),
        "embed.text": dense(config.text_channels, c),
    }
    for l in range(config.n_blocks):
        params[f"blocks.{l}.time"] = dense(config.time_dim, c)
        for w in ATTENTION_WEIGHTS:
            params[f"blocks.{l}.attn.{w}"] = dense(c, c)
        params[f"blocks.{l}.mlp.w1"] = dense(c, hidden)
        params[f"blocks.{l}.mlp.w2"] = dense(hidden, c)
    params["head.out"] = dense(c, config.latent_channels)
    return params


def time_features(t: float, dim: int) -> np.ndarray:
    """Sinusoidal features of a scalar time, shape ``(1, dim)``."""

    half = dim // 2
    freqs = np.exp(np.linspace(0.0, np.log(1000.0), half))
    angles = float(t) * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)])[None, :]


def block_params(params: dict[str, Any], layer: int) -> dict[str, Any]:
    prefix = f"blocks.{layer}."
    return {name[len(prefix) :]: p for name, p in params.items() if name.startswith(prefix)}


def embed(params: dict[str, Any], z: Any, y: Any) -> Any:
    return F.concat_rows(
        [F.matmul(y, params["embed.text"]), F.matmul(z, params["embed.image"])]
    )


def block_input(h: Any, temb: np.ndarray, blk: dict[str, Any]) -> Any:
    return F.add(F.rms_norm(h), F.matmul(temb, blk["time"]))


def project_qkv(u: Any, blk: dict[str, Any]) -> tuple[Any, Any, Any]:
    return (
        F.matmul(u, blk["attn.wq"]),
        F.matmul(u, blk["attn.wk"]),
        F.matmul(u, blk["attn.wv"]),
    )


def head_logits(
    q_h: Any,
    k_h: Any,
    config: ToyDitConfig,
    q_grid: TokenGrid,
    k_grid: TokenGrid,
    q_offset: int = 0,
    k_offset: int = 0,
) -> Any:
    """Scaled rotary scores of one head.

    ``q_offset`` / ``k_offset`` shift the raster rows of the two grids so
    that a slice of the image keeps its global positions.
    """

    rope = config.rope
    if rope.clip_mode is ClipMode.NONE:
        qr = rope_apply(q_h, q_grid, rope, q_offset)
        kr = rope_apply(k_h, k_grid, rope, k_offset)
        scores = F.matmul(qr, F.transpose(kr))
    else:
        if q_grid != k_grid or q_offset or k_offset:
            raise ConfigError("clipped rotary scores need queries and keys on one grid")
        scores = rope_scores(q_h, k_h, q_grid, rope)
    return F.scale(scores, rope.logit_scale / np.sqrt(config.head_dim))


def attend_heads(
    q: Any,
    k: Any,
    v: Any,
    config: ToyDitConfig,
    q_grid: TokenGrid,
    k_grid: TokenGrid,
    additive: np.ndarray | None,
    q_offset: int = 0,
    k_offset: int = 0,
    maps: list[np.ndarray] | None = None,
) -> Any:
    """Concatenated per-head attention outputs (before the output projection)."""

    d = config.head_dim
    heads = []
    for h in range(config.n_heads):
        cols = (h * d, (h + 1) * d)
        logits = head_logits(
            F.slice_cols(q, *cols),
            F.slice_cols(k, *cols),
            config,
            q_grid,
            k_grid,
            q_offset,
            k_offset,
        )
        weights = F.softmax(logits, additive)
        if maps is not None:
            maps.append(np.array(F.value(weights)))
        heads.append(F.matmul(weights, F.slice_cols(v, *cols)))
    return F.concat_cols(heads)


def mlp_residual(h: Any, blk: dict[str, Any]) -> Any:
    hidden = F.gelu(F.matmul(F.rms_norm(h), blk["mlp.w1"]))
    return F.add(h, F.matmul(hidden, blk["mlp.w2"]))


def readout(params: dict[str, Any], h: Any, config: ToyDitConfig) -> Any:
    grid = config.grid
    image = F.slice_rows(h, grid.n_text, grid.n)
    return F.matmul(F.rms_norm(image), params["head.out"])


@dataclass
class ForwardResult:
    velocity: Any
    #: attention output of every block, after the output projection
    attn_outputs: list[Any] = field(default_factory=list)
    #: per block, per head attention weights when requested
    maps: list[list[np.ndarray]] = field(default_factory=list)


class ToyDit:
    """Weights plus one attention mask per block."""

    def __init__(
        self,
        config: ToyDitConfig,
        params: dict[str, np.ndarray],
        mask_method: str = "full",
        mask_params: dict[str, Any] | None = None,
    ) -> None:
        self.config = config
        self.params = params
        self.mask_method = mask_method
        self.mask_params = dict(mask_params or {})
        grid = config.grid
        self.masks: list[AttentionMask] = [
            builder_for(mask_method, l, **self.mask_params).build(grid)
            for l in range(config.n_blocks)
        ]
        self.additive = [m.additive() for m in self.masks]

    @classmethod
    def initialise(cls, config: ToyDitConfig, seed: int = 0) -> "ToyDit":
        return cls(config, init_params(config, np.random.default_rng(seed)))

    def student(self, mask_method: str = "clear", **mask_params: Any) -> "ToyDit":
        """A copy of this model's weights with a different mask per block."""

        params = {name: p.copy() for name, p in self.params.items()}
        return ToyDit(self.config, params, mask_method, mask_params)

    def with_config(self, **updates: Any) -> "ToyDit":
        """Same weights and masks under a modified configuration (e.g. RoPE clipping)."""

        try:
            config = ToyDitConfig(**{**self.config.model_dump(), **updates})
        except ValidationError as exc:
            first = exc.errors()[0]["msg"]
            raise ConfigError(f"invalid model update {sorted(updates)}: {first}") from exc
        return ToyDit(config, self.params, self.mask_method, self.mask_params)

    def attention_names(self) -> list[str]:
        return attention_param_names(self.config.n_blocks)

    def bind(self, tape: Tape, trainable: Iterable[str]) -> dict[str, Any]:
        """Parameter dict with the ``trainable`` entries recorded on ``tape``."""

        names = set(trainable)
        unknown = names - set(self.params)
        if unknown:
            raise ConfigError(f"unknown parameters {sorted(unknown)}")
        return {
            name: tape.param(p, name) if name in names else p
            for name, p in self.params.items()
        }

    def check_inputs(self, z: np.ndarray, y: np.ndarray) -> None:
        cfg = self.config
        if np.shape(z) != (cfg.grid.n_image, cfg.latent_channels):
            raise ShapeError(
                f"latent tokens of shape {np.shape(z)}, expected "
                f"{(cfg.grid.n_image, cfg.latent_channels)}"
            )
        if np.shape(y) != (cfg.n_text, cfg.text_channels):
            raise ShapeError(
                f"text tokens of shape {np.shape(y)}, expected {(cfg.n_text, cfg.text_channels)}"
            )

    def forward(
        self,
        z_t: np.ndarray,
        t: float,
        y: np.ndarray,
        params: dict[str, Any] | None = None,
        keep_maps: bool = False,
    ) -> ForwardResult:
        """Velocity prediction for latent ``z_t`` at time ``t`` under condition ``y``."""

        self.check_inputs(z_t, y)
        p = self.params if params is None else params
        cfg = self.config
        grid = cfg.grid
        temb = time_features(t, cfg.time_dim)
        result = ForwardResult(velocity=None)
        h = embed(p, z_t, y)
        for l in range(cfg.n_blocks):
            blk = block_params(p, l)
            u = block_input(h, temb, blk)
            q, k, v = project_qkv(u, blk)
            maps: list[np.ndarray] | None = [] if keep_maps else None
            heads = attend_heads(q, k, v, cfg, grid, grid, self.additive[l], maps=maps)
            o = F.matmul(heads, blk["attn.wo"])
            result.attn_outputs.append(o)
            if maps is not None:
                result.maps.append(maps)
            h = mlp_residual(F.add(h, o), blk)
        result.velocity = readout(p, h, cfg)
        return result

    def predict(self, z_t: np.ndarray, t: float, y: np.ndarray) -> np.ndarray:
        return self.forward(z_t, t, y).velocity


def trainable_vars(bound: dict[str, Any]) -> dict[str, Var]:
    return {name: p for name, p in bound.items() if isinstance(p, Var)}
