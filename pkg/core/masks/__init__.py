"""Sparse attention masks: builders, statistics and file formats."""

from core.masks.builders import (
    MASK_METHODS,
    ClearMask,
    FullMask,
    NeighborhoodMask,
    StridedMask,
    SwinMask,
    build_clear,
    build_full,
    build_neighborhood,
    build_strided,
    build_swin,
    builder_for,
)
from core.masks.io import load_mask, save_mask, write_pbm, write_pgm
from core.masks.mask import AttentionMask
from core.masks.stats import MaskStats, mask_stats

__all__ = [
    "MASK_METHODS",
    "AttentionMask",
    "ClearMask",
    "FullMask",
    "MaskStats",
    "NeighborhoodMask",
    "StridedMask",
    "SwinMask",
    "build_clear",
    "build_full",
    "build_neighborhood",
    "build_strided",
    "build_swin",
    "builder_for",
    "load_mask",
    "mask_stats",
    "save_mask",
    "write_pbm",
    "write_pgm",
]
