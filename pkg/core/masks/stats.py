"""Mask statistics: popcount, sparsity and the rank of the image block."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from core.masks.mask import AttentionMask
from core.tensor.rank import exact_rank, rank_of

logger = logging.getLogger(__name__)

# Grids up to 32x32 image tokens get the exact integer rank.
EXACT_RANK_MAX_TOKENS = 32 * 32


@dataclass(frozen=True)
class MaskStats:
    popcount: int
    sparsity: float
    image_rank: int
    exact: bool


def mask_stats(mask: AttentionMask, with_rank: bool = True) -> MaskStats:
    image_rank = -1
    exact = False
    if with_rank and mask.grid.n_image:
        block = mask.image_block()
        if mask.grid.n_image <= EXACT_RANK_MAX_TOKENS:
            image_rank = exact_rank(block)
            exact = True
        else:
            logger.warning(
                "image block of %d tokens exceeds the exact rank limit; using SVD",
                mask.grid.n_image,
            )
            image_rank = rank_of(block.astype(float))
    elif with_rank:
        image_rank = 0
        exact = True
    return MaskStats(mask.popcount(), mask.sparsity(), image_rank, exact)
