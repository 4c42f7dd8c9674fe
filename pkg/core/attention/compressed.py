"""Key/value compression with a 4x4 stride-4 group-wise convolution."""

from __future__ import annotations

import numpy as np

from core.attention.exact import dense_attention
from core.attention.inputs import AttentionInputs, CompressorParams
from core.errors import ShapeError
from core.geometry.grid import TokenGrid

STRIDE = 4


def compressed_grid(grid: TokenGrid) -> TokenGrid:
    """Grid of the shortened key set (image side lengths rounded up)."""

    return TokenGrid(
        grid.n_text, -(-grid.height // STRIDE), -(-grid.width // STRIDE)
    )


def conv_downsample(tokens: np.ndarray, grid: TokenGrid, kernel: np.ndarray) -> np.ndarray:
    """Apply a per-channel ``4 x 4`` stride-4 kernel to the image raster.

    ``tokens`` holds the image tokens only, in raster order.  The raster is
    padded up to multiples of 4; a padded position takes the mean of the
    real tokens in its cell, so partial cells at the border are not diluted.
    """

    c = tokens.shape[1]
    if tokens.shape[0] != grid.n_image:
        raise ShapeError(f"{tokens.shape[0]} image tokens for a {grid.height}x{grid.width} raster")
    if kernel.shape != (c, STRIDE, STRIDE):
        raise ShapeError(f"kernel shape {kernel.shape} does not match width {c}")
    small = compressed_grid(grid)
    padded = np.zeros((small.height * STRIDE, small.width * STRIDE, c), dtype=tokens.dtype)
    padded[: grid.height, : grid.width] = tokens.reshape(grid.height, grid.width, c)
    real = np.zeros(padded.shape[:2], dtype=bool)
    real[: grid.height, : grid.width] = True
    cells = padded.reshape(small.height, STRIDE, small.width, STRIDE, c)
    real_cells = real.reshape(small.height, STRIDE, small.width, STRIDE)
    count = real_cells.sum(axis=(1, 3))
    mean = cells.sum(axis=(1, 3)) / count[:, :, None]
    cells = np.where(real_cells[..., None], cells, mean[:, None, :, None, :])
    out = np.einsum("hawbc,cab->hwc", cells, kernel)
    return out.reshape(small.n_image, c)


def kv_compressed_attention(inputs: AttentionInputs, params: CompressorParams) -> np.ndarray:
    """Dense attention against text keys plus down-sampled image keys."""

    grid = inputs.grid
    t = grid.n_text
    k = np.concatenate([inputs.k[:t], conv_downsample(inputs.k[t:], grid, params.conv_k)])
    v = np.concatenate([inputs.v[:t], conv_downsample(inputs.v[t:], grid, params.conv_v)])
    short = AttentionInputs(inputs.q, k, v, compressed_grid(grid), inputs.scale_value)
    return dense_attention(short)
