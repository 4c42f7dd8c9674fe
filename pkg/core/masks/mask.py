"""Bit-packed boolean attention masks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from core.errors import MaskError, ShapeError
from core.geometry.grid import TokenGrid


@dataclass(frozen=True, eq=False)
class AttentionMask:
    """An ``n x n`` boolean mask stored as row-major packed bits.

    ``bits[i]`` holds row ``i`` packed most-significant bit first, padded to
    a whole number of bytes.  Masks are immutable after construction.
    """

    n: int
    bits: np.ndarray
    grid: TokenGrid
    builder: str = "custom"
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n != self.grid.n:
            raise MaskError(f"mask size {self.n} differs from grid size {self.grid.n}")
        expected = (self.n, (self.n + 7) // 8)
        if self.bits.shape != expected or self.bits.dtype != np.uint8:
            raise MaskError(f"packed bits must be uint8 of shape {expected}")
        self.bits.setflags(write=False)

    @classmethod
    def from_dense(
        cls,
        dense: np.ndarray,
        grid: TokenGrid,
        builder: str = "custom",
        params: dict[str, Any] | None = None,
    ) -> "AttentionMask":
        dense = np.asarray(dense, dtype=bool)
        if dense.shape != (grid.n, grid.n):
            raise ShapeError(f"dense mask {dense.shape} does not fit grid of {grid.n} tokens")
        bits = np.packbits(dense, axis=1)
        return cls(grid.n, bits, grid, builder, dict(params or {}))

    def to_dense(self) -> np.ndarray:
        return np.unpackbits(self.bits, axis=1, count=self.n).astype(bool)

    def popcount(self) -> int:
        return int(np.bitwise_count(self.bits).sum(dtype=np.int64))

    def sparsity(self) -> float:
        if self.n == 0:
            return 0.0
        return 1.0 - self.popcount() / float(self.n * self.n)

    def row_counts(self) -> np.ndarray:
        return np.bitwise_count(self.bits).sum(axis=1, dtype=np.int64)

    def image_block(self) -> np.ndarray:
        """Dense image-to-image sub-block."""

        start = self.grid.n_text
        return self.to_dense()[start:, start:]

    def additive(self, dtype: np.dtype | type = np.float64) -> np.ndarray:
        """``0`` where attention is allowed, ``-inf`` elsewhere."""

        return np.where(self.to_dense(), 0.0, -np.inf).astype(dtype)

    def subset_of(self, other: "AttentionMask") -> bool:
        if other.n != self.n:
            return False
        return not np.any(self.bits & ~other.bits)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttentionMask):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.bits, other.bits)

    __hash__ = None  # type: ignore[assignment]
