"""Token grids, relative offsets and 2D rotary position embeddings."""

from core.geometry.grid import TokenGrid, relative_offsets
from core.geometry.rope import (
    ClipMode,
    RopeConfig,
    clip_offsets,
    pair_angle_tables,
    rope_angles,
    rope_apply,
    rope_frequencies,
    rope_scores,
)

__all__ = [
    "ClipMode",
    "RopeConfig",
    "TokenGrid",
    "clip_offsets",
    "pair_angle_tables",
    "relative_offsets",
    "rope_angles",
    "rope_apply",
    "rope_frequencies",
    "rope_scores",
]
