"""FLOPS cost model and closed-form mask popcounts."""

from core.flops.cost import (
    COST_COLUMNS,
    COST_KEYS,
    CostReport,
    FluxConfig,
    circle_square_overhead,
    flops_of_mask,
    flops_of_popcount,
    flux_cost_table,
)
from core.flops.popcount import (
    analytic_popcount,
    clear_image_popcount,
    clear_popcount,
    full_popcount,
    neighborhood_popcount,
    strided_popcount,
    swin_popcount,
    text_popcount,
)

__all__ = [
    "COST_COLUMNS",
    "COST_KEYS",
    "CostReport",
    "FluxConfig",
    "analytic_popcount",
    "circle_square_overhead",
    "clear_image_popcount",
    "clear_popcount",
    "flops_of_mask",
    "flops_of_popcount",
    "flux_cost_table",
    "full_popcount",
    "neighborhood_popcount",
    "strided_popcount",
    "swin_popcount",
    "text_popcount",
]
