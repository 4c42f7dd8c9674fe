"""Agent attention: a pooled set of query agents brokers every exchange."""

from __future__ import annotations

import numpy as np

from core.attention.inputs import AttentionInputs
from core.errors import ShapeError
from core.tensor.ops import softmax_rows


def pool_queries(inputs: AttentionInputs, factor: int) -> np.ndarray:
    """Average-pool the image queries; text queries stay as their own agents."""

    grid = inputs.grid
    if factor < 1 or grid.height % factor or grid.width % factor:
        raise ShapeError(
            f"agent factor {factor} must divide the {grid.height}x{grid.width} raster"
        )
    if inputs.q.shape[0] != grid.n:
        raise ShapeError("agent attention expects self-attention queries on the grid")
    t = grid.n_text
    c = inputs.c
    image = inputs.q[t:].reshape(
        grid.height // factor, factor, grid.width // factor, factor, c
    )
    pooled = image.mean(axis=(1, 3)).reshape(-1, c)
    return np.concatenate([inputs.q[:t], pooled])


def agent_attention(inputs: AttentionInputs, down_factor: int) -> np.ndarray:
    s = inputs.scale_value
    agents = pool_queries(inputs, down_factor)
    aggregated = softmax_rows(agents @ inputs.k.T * s) @ inputs.v
    return softmax_rows(inputs.q @ agents.T * s) @ aggregated
