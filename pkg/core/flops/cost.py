"""Attention cost model: ``4 * popcount * c`` FLOPS per layer.

Only the score and value products under the mask are counted; projections
and MLPs are left out.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.errors import ConfigError, GeometryError
from core.flops.popcount import analytic_popcount, full_popcount
from core.geometry.grid import TokenGrid
from core.masks.mask import AttentionMask

logger = logging.getLogger(__name__)

COST_COLUMNS = ("method", "resolution", "radius", "n_tokens", "popcount", "flops")
COST_KEYS = ("method", "resolution", "radius")


class FluxConfig(BaseModel):
    """Width, text length and patch size of the large text-to-image model."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    c: int = Field(default=3072, gt=0)
    n_text: int = Field(default=512, ge=0)
    patch: int = Field(default=16, gt=0)

    def grid_for(self, resolution: int) -> TokenGrid:
        if resolution <= 0 or resolution % self.patch:
            raise ConfigError(
                f"resolution {resolution} is not a positive multiple of {self.patch}"
            )
        side = resolution // self.patch
        return TokenGrid(self.n_text, side, side)


def flops_of_popcount(popcount: int, c: int) -> int:
    return 4 * int(popcount) * int(c)


def flops_of_mask(mask: AttentionMask, c: int) -> int:
    return flops_of_popcount(mask.popcount(), c)


@dataclass
class CostReport:
    """Cost rows keyed by ``(method, resolution, radius)``.

    ``radius`` holds the pattern parameter of the row: the CLEAR radius, the
    neighborhood half width, the Swin window or the stride; it is ``None``
    for full attention.
    """

    config: FluxConfig
    rows: list[dict[str, Any]] = field(default_factory=list)

    def lookup(self, method: str, resolution: int, radius: float | None = None) -> dict[str, Any]:
        for row in self.rows:
            if (
                row["method"] == method
                and row["resolution"] == resolution
                and row["radius"] == radius
            ):
                return row
        raise KeyError((method, resolution, radius))

    def reduction(self, method: str, resolution: int, radius: float | None) -> float:
        """Share of full-attention FLOPS removed; within ``[0, 1]``."""

        full = self.lookup("full", resolution)["flops"]
        flops = self.lookup(method, resolution, radius)["flops"]
        if full == 0:
            return 0.0
        return min(max(1.0 - flops / full, 0.0), 1.0)


def _param_name(method: str) -> str:
    return {
        "clear": "r",
        "neighborhood": "half_width",
        "swin": "window",
        "strided": "r",
    }[method]


def flux_cost_table(
    resolutions: Iterable[int],
    radii: Sequence[float],
    config: FluxConfig | None = None,
    baselines: dict[str, Sequence[int]] | None = None,
) -> CostReport:
    """Full attention plus CLEAR at every radius, for every resolution.

    ``baselines`` optionally maps ``neighborhood``, ``swin`` or ``strided``
    to the parameter values to list as well (Swin rows use an unshifted
    layer, strided rows layer 0).
    """

    config = config or FluxConfig()
    report = CostReport(config)
    extra = dict(baselines or {})
    for resolution in resolutions:
        grid = config.grid_for(resolution)
        entries: list[tuple[str, float | None, int]] = [
            ("full", None, full_popcount(grid))
        ]
        for r in radii:
            entries.append(("clear", r, analytic_popcount("clear", grid, r=r)))
        for method, values in extra.items():
            for value in values:
                count = analytic_popcount(method, grid, **{_param_name(method): value})
                entries.append((method, value, count))
        for method, radius, count in entries:
            report.rows.append(
                {
                    "method": method,
                    "resolution": resolution,
                    "radius": radius,
                    "n_tokens": grid.n,
                    "popcount": count,
                    "flops": flops_of_popcount(count, config.c),
                }
            )
        logger.info("cost rows for %dpx (%d tokens) done", resolution, grid.n)
    return report


def circle_square_overhead(
    grid: TokenGrid, r: float, query: tuple[int, int] | None = None
) -> float:
    """Keys in the circular window over keys in the square window of half width ``r``.

    Counted for one interior query (the raster centre by default).  Both
    windows are closed here, ``dx^2 + dy^2 <= r^2`` against
    ``max(|dx|, |dy|) <= r``, so that equal radii give equal diameters.
    """

    if not r > 0:
        raise GeometryError(f"radius must be positive, got {r}")
    if grid.height < 4 * r or grid.width < 4 * r:
        raise GeometryError(
            f"a {grid.height}x{grid.width} raster is too small for radius {r} (needs 4r)"
        )
    if query is None:
        query = (grid.width // 2, grid.height // 2)
    reach = int(np.floor(r))
    qx, qy = query
    if not (reach <= qx < grid.width - reach and reach <= qy < grid.height - reach):
        raise GeometryError(f"query {query} is not interior for radius {r}")
    x, y = grid.image_xy()
    dx = x - qx
    dy = y - qy
    circle = np.count_nonzero(dx * dx + dy * dy <= r * r)
    square = np.count_nonzero(np.maximum(np.abs(dx), np.abs(dy)) <= r)
    return float(circle) / float(square)
