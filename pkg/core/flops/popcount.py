"""Closed-form popcounts of every mask pattern.

The masks at published resolutions have up to ~2.6e5 tokens per side, far
too many to materialise.  Every image-image rule used here depends only on
the offset ``(dx, dy)``, and a given offset occurs ``(W - |dx|) * (H - |dy|)``
times on an ``H x W`` raster, so counts reduce to sums over offsets.
"""

from __future__ import annotations

import math

import numpy as np

from core.errors import ConfigError, MaskError
from core.geometry.grid import TokenGrid
from core.masks.builders import SwinMask


def offset_multiplicity(extent: int, d: np.ndarray) -> np.ndarray:
    """How often signed offset ``d`` occurs along an axis of length ``extent``."""

    return np.maximum(extent - np.abs(d), 0).astype(np.int64)


def text_popcount(grid: TokenGrid) -> int:
    """Entries contributed by text rows and text columns."""

    t = grid.n_text
    return t * t + 2 * t * grid.n_image


def full_popcount(grid: TokenGrid) -> int:
    return grid.n * grid.n


def clear_image_popcount(grid: TokenGrid, r: float) -> int:
    """Image-image entries with ``dx^2 + dy^2 < r^2``."""

    if not r > 0:
        raise MaskError(f"CLEAR radius must be positive, got {r}")
    reach = math.ceil(r)
    d = np.arange(-reach, reach + 1)
    dx, dy = np.meshgrid(d, d, indexing="xy")
    inside = dx * dx + dy * dy < r * r
    weight = offset_multiplicity(grid.width, dx) * offset_multiplicity(grid.height, dy)
    return int((weight * inside).sum())


def clear_popcount(grid: TokenGrid, r: float) -> int:
    return text_popcount(grid) + clear_image_popcount(grid, r)


def neighborhood_popcount(grid: TokenGrid, half_width: int) -> int:
    d = np.arange(-half_width, half_width + 1)
    per_x = offset_multiplicity(grid.width, d).sum()
    per_y = offset_multiplicity(grid.height, d).sum()
    return text_popcount(grid) + int(per_x * per_y)


def _window_lengths(extent: int, window: int, lead: int) -> np.ndarray:
    ids = (np.arange(extent) + lead) // window
    return np.bincount(ids).astype(np.int64)


def swin_popcount(grid: TokenGrid, window: int, shift: int = 0, layer_index: int = 0) -> int:
    """Sum of squared window sizes; window sizes factor over the two axes."""

    builder = SwinMask(window, shift, layer_index)
    lead_x, lead_y = builder.axis_leads(grid)
    lx = _window_lengths(grid.width, window, lead_x)
    ly = _window_lengths(grid.height, window, lead_y)
    return text_popcount(grid) + int((lx * lx).sum() * (ly * ly).sum())


def strided_popcount(grid: TokenGrid, r: int, layer_index: int = 0) -> int:
    if r < 1 or layer_index < 0 or layer_index // r >= r:
        raise MaskError(f"no residue class for layer {layer_index} at stride {r}")
    rx, ry = layer_index % r, layer_index // r
    dxs = np.arange(-(grid.width - 1), grid.width) if grid.width else np.arange(0)
    dys = np.arange(-(grid.height - 1), grid.height) if grid.height else np.arange(0)
    per_x = offset_multiplicity(grid.width, dxs[np.mod(dxs, r) == rx]).sum()
    per_y = offset_multiplicity(grid.height, dys[np.mod(dys, r) == ry]).sum()
    count = int(per_x * per_y)
    if (rx, ry) != (0, 0):
        # the diagonal is forced on
        count += grid.n_image
    return text_popcount(grid) + count


def analytic_popcount(method: str, grid: TokenGrid, **params) -> int:
    """Popcount of ``method`` on ``grid`` without building the mask."""

    if method == "full":
        return full_popcount(grid)
    if method == "clear":
        return clear_popcount(grid, params["r"])
    if method == "neighborhood":
        return neighborhood_popcount(grid, int(params["half_width"]))
    if method == "swin":
        return swin_popcount(
            grid,
            int(params["window"]),
            int(params.get("shift") or 0),
            int(params.get("layer_index") or 0),
        )
    if method == "strided":
        return strided_popcount(grid, int(params["r"]), int(params.get("layer_index") or 0))
    raise ConfigError(f"no analytic popcount for method {method!r}")
