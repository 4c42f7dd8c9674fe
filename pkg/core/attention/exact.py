"""Scaled dot-product attention with an optional sparse mask."""

from __future__ import annotations

import numpy as np

from core.attention.inputs import AttentionInputs
from core.errors import MaskError, ShapeError
from core.geometry.grid import TokenGrid
from core.masks.mask import AttentionMask
from core.tensor.ops import softmax_rows


def attention_weights(inputs: AttentionInputs, mask: AttentionMask | None = None) -> np.ndarray:
    """Row-stochastic ``n x m`` weights of (masked) softmax attention."""

    scores = (inputs.q @ inputs.k.T) * inputs.scale_value
    if mask is None:
        return softmax_rows(scores)
    if mask.n != inputs.q.shape[0] or mask.n != inputs.m:
        raise ShapeError(f"mask of size {mask.n} for {inputs.q.shape[0]}x{inputs.m} scores")
    empty = np.flatnonzero(mask.row_counts() == 0)
    if empty.size:
        raise MaskError(f"query rows {empty[:5].tolist()} attend to nothing")
    return softmax_rows(scores, mask.additive(scores.dtype))


def masked_attention(inputs: AttentionInputs, mask: AttentionMask) -> np.ndarray:
    return attention_weights(inputs, mask) @ inputs.v


def dense_attention(inputs: AttentionInputs) -> np.ndarray:
    return attention_weights(inputs) @ inputs.v


def attention_locality(weights: np.ndarray, grid: TokenGrid, r: float) -> float:
    """Average share of image-query attention mass inside a radius-``r`` circle."""

    if grid.n_image == 0:
        return 0.0
    x, y = grid.image_xy()
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    inside = dx * dx + dy * dy < r * r
    block = weights[grid.n_text :, grid.n_text :]
    total = weights[grid.n_text :].sum(axis=1)
    local = (block * inside).sum(axis=1)
    return float(np.mean(np.divide(local, total, out=np.zeros_like(local), where=total > 0)))
