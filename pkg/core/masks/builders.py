"""Builders for every sparse attention pattern studied by the lab.

All image-image rules are evaluated on absolute raster coordinates; the text
clause (text rows and text columns fully attended) is added afterwards.
"""

from __future__ import annotations

import logging
from typing import Any

import numpy as np

from core.errors import ConfigError, MaskError
from core.geometry.grid import TokenGrid
from core.interfaces.mask_builder import MaskBuilder
from core.masks.mask import AttentionMask

logger = logging.getLogger(__name__)


def _offsets(grid: TokenGrid) -> tuple[np.ndarray, np.ndarray]:
    x, y = grid.image_xy()
    return x[:, None] - x[None, :], y[:, None] - y[None, :]


def _with_text_clause(grid: TokenGrid, image_block: np.ndarray) -> np.ndarray:
    dense = np.ones((grid.n, grid.n), dtype=bool)
    dense[grid.n_text :, grid.n_text :] = image_block
    return dense


class _ImageRuleBuilder(MaskBuilder):
    def build(self, grid: TokenGrid) -> AttentionMask:
        block = self.image_rule(grid)
        np.fill_diagonal(block, True)
        mask = AttentionMask.from_dense(
            _with_text_clause(grid, block), grid, self.tag, self.params()
        )
        logger.debug(
            "built %s mask on %dx%d grid (+%d text): popcount %d",
            self.tag,
            grid.height,
            grid.width,
            grid.n_text,
            mask.popcount(),
        )
        return mask

    def image_rule(self, grid: TokenGrid) -> np.ndarray:
        raise NotImplementedError


class FullMask(_ImageRuleBuilder):
    tag = "full"

    def image_rule(self, grid: TokenGrid) -> np.ndarray:
        return np.ones((grid.n_image, grid.n_image), dtype=bool)


class ClearMask(_ImageRuleBuilder):
    """Circular window: ``dx^2 + dy^2 < r^2`` (strict)."""

    tag = "clear"

    def __init__(self, r: float) -> None:
        if not r > 0:
            raise MaskError(f"CLEAR radius must be positive, got {r}")
        self.r = float(r)

    def params(self) -> dict[str, Any]:
        return {"r": self.r}

    def image_rule(self, grid: TokenGrid) -> np.ndarray:
        dx, dy = _offsets(grid)
        return dx * dx + dy * dy < self.r * self.r


class NeighborhoodMask(_ImageRuleBuilder):
    """Square window: ``max(|dx|, |dy|) <= half_width``."""

    tag = "neighborhood"

    def __init__(self, half_width: int) -> None:
        if half_width < 0:
            raise MaskError(f"half_width must be non-negative, got {half_width}")
        self.half_width = int(half_width)

    def params(self) -> dict[str, Any]:
        return {"half_width": self.half_width}

    def image_rule(self, grid: TokenGrid) -> np.ndarray:
        dx, dy = _offsets(grid)
        return np.maximum(np.abs(dx), np.abs(dy)) <= self.half_width


class SwinMask(_ImageRuleBuilder):
    """Non-overlapping windows, shifted by ``shift`` on odd layers.

    Window boundaries sit at ``shift, shift + window, ...`` on shifted
    layers; leading and trailing partial windows form their own groups.
    An axis that a single window already covers is never shifted.
    """

    tag = "swin"

    def __init__(self, window: int, shift: int = 0, layer_index: int = 0) -> None:
        if window < 1:
            raise MaskError(f"window must be at least 1, got {window}")
        if not 0 <= shift < window:
            raise MaskError(f"shift must lie in [0, window), got {shift}")
        self.window = int(window)
        self.shift = int(shift)
        self.layer_index = int(layer_index)

    def axis_shifts(self, grid: TokenGrid) -> tuple[int, int]:
        """Shift applied along ``(x, y)``; zero on even layers."""

        if self.layer_index % 2 == 0:
            return 0, 0
        return (
            self.shift if grid.width > self.window else 0,
            self.shift if grid.height > self.window else 0,
        )

    def axis_leads(self, grid: TokenGrid) -> tuple[int, int]:
        sx, sy = self.axis_shifts(grid)
        return (self.window - sx) % self.window, (self.window - sy) % self.window

    def params(self) -> dict[str, Any]:
        return {"window": self.window, "shift": self.shift, "layer": self.layer_index}

    def window_ids(self, grid: TokenGrid) -> np.ndarray:
        x, y = grid.image_xy()
        lead_x, lead_y = self.axis_leads(grid)
        wx = (x + lead_x) // self.window
        wy = (y + lead_y) // self.window
        cols = (grid.width + lead_x + self.window - 1) // self.window
        return wy * cols + wx

    def image_rule(self, grid: TokenGrid) -> np.ndarray:
        ids = self.window_ids(grid)
        return ids[:, None] == ids[None, :]

    def window_count(self, grid: TokenGrid) -> int:
        return int(np.unique(self.window_ids(grid)).size)


class StridedMask(_ImageRuleBuilder):
    """Keys at a fixed stride: ``dx % r == r_x`` and ``dy % r == r_y``.

    The layer index selects the residue class, ``r_x = l % r`` and
    ``r_y = l // r``.  The diagonal is always kept.
    """

    tag = "strided"

    def __init__(self, r: int, layer_index: int = 0) -> None:
        if r < 1:
            raise MaskError(f"stride must be at least 1, got {r}")
        if layer_index < 0 or layer_index // r >= r:
            raise MaskError(
                f"layer {layer_index} has no residue class for stride {r} "
                f"(needs layer < {r * r})"
            )
        self.r = int(r)
        self.layer_index = int(layer_index)

    @property
    def residues(self) -> tuple[int, int]:
        return self.layer_index % self.r, self.layer_index // self.r

    def params(self) -> dict[str, Any]:
        return {"r": self.r, "layer": self.layer_index}

    def image_rule(self, grid: TokenGrid) -> np.ndarray:
        rx, ry = self.residues
        dx, dy = _offsets(grid)
        return (np.mod(dx, self.r) == rx) & (np.mod(dy, self.r) == ry)


def build_full(grid: TokenGrid) -> AttentionMask:
    return FullMask().build(grid)


def build_clear(grid: TokenGrid, r: float) -> AttentionMask:
    return ClearMask(r).build(grid)


def build_neighborhood(grid: TokenGrid, half_width: int) -> AttentionMask:
    return NeighborhoodMask(half_width).build(grid)


def build_swin(
    grid: TokenGrid, window: int, shift: int = 0, layer_index: int = 0
) -> AttentionMask:
    return SwinMask(window, shift, layer_index).build(grid)


def build_strided(grid: TokenGrid, r: int, layer_index: int = 0) -> AttentionMask:
    return StridedMask(r, layer_index).build(grid)


MASK_METHODS = ("full", "clear", "neighborhood", "swin", "strided")


def builder_for(method: str, layer_index: int = 0, **params: Any) -> MaskBuilder:
    """Builder for ``method`` at a given layer.

    Recognised parameters: ``r`` (clear, strided), ``half_width``
    (neighborhood), ``window`` and ``shift`` (swin).  Strided layers cycle
    through the ``r * r`` residue classes.
    """

    if method == "full":
        return FullMask()
    if method == "clear":
        return ClearMask(_require(params, "r", method))
    if method == "neighborhood":
        return NeighborhoodMask(int(_require(params, "half_width", method)))
    if method == "swin":
        return SwinMask(
            int(_require(params, "window", method)),
            int(params.get("shift") or 0),
            layer_index,
        )
    if method == "strided":
        r = int(_require(params, "r", method))
        return StridedMask(r, layer_index % (r * r))
    raise ConfigError(f"unknown mask method {method!r}; choose from {MASK_METHODS}")


def _require(params: dict[str, Any], key: str, method: str) -> Any:
    if params.get(key) is None:
        raise ConfigError(f"mask method {method!r} needs parameter {key!r}")
    return params[key]
