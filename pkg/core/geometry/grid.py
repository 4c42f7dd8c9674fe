"""Layout of a joint text-image token sequence.

Tokens ``0 .. n_text-1`` are text tokens; the remaining ``height * width``
tokens form a row-major image raster, so image token ``k`` (counted from the
first image token) sits at ``x = k % width`` and ``y = k // width``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from core.errors import GeometryError


@dataclass(frozen=True)
class TokenGrid:
    n_text: int
    height: int
    width: int

    def __post_init__(self) -> None:
        if self.n_text < 0 or self.height < 0 or self.width < 0:
            raise GeometryError(f"grid dimensions must be non-negative: {self}")
        if (self.height == 0) != (self.width == 0):
            raise GeometryError(f"an empty raster needs height = width = 0: {self}")

    @property
    def n_image(self) -> int:
        return self.height * self.width

    @property
    def n(self) -> int:
        return self.n_text + self.n_image

    def is_text(self, index: int) -> bool:
        self._check_index(index)
        return index < self.n_text

    def coords(self, index: int) -> tuple[int, int]:
        """``(x, y)`` of an image token."""

        self._check_index(index)
        if index < self.n_text:
            raise GeometryError(f"token {index} is a text token and has no 2D position")
        k = index - self.n_text
        return k % self.width, k // self.width

    def index_of(self, x: int, y: int) -> int:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise GeometryError(f"({x}, {y}) lies outside a {self.width}x{self.height} raster")
        return self.n_text + y * self.width + x

    def image_xy(self, row_offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of all image tokens, with ``row_offset`` added to ``y``."""

        k = np.arange(self.n_image)
        return k % self.width, k // self.width + row_offset

    def positions(self, row_offset: int = 0) -> np.ndarray:
        """``(n, 2)`` integer positions; text tokens sit at ``(0, 0)``."""

        pos = np.zeros((self.n, 2), dtype=np.int64)
        x, y = self.image_xy(row_offset)
        pos[self.n_text :, 0] = x
        pos[self.n_text :, 1] = y
        return pos

    def sub_rows(self, start: int, stop: int) -> "TokenGrid":
        """Grid of the same text prefix over raster rows ``[start, stop)``."""

        if not 0 <= start <= stop <= self.height:
            raise GeometryError(f"row range [{start}, {stop}) outside height {self.height}")
        return TokenGrid(self.n_text, stop - start, self.width if stop > start else 0)

    def image_slice(self, start_row: int, stop_row: int) -> slice:
        """Token index slice of raster rows ``[start_row, stop_row)``."""

        return slice(
            self.n_text + start_row * self.width, self.n_text + stop_row * self.width
        )

    def _check_index(self, index: int) -> None:
        if not 0 <= index < self.n:
            raise GeometryError(f"token index {index} outside [0, {self.n})")


def relative_offsets(grid: TokenGrid, i: int, j: int) -> tuple[int, int]:
    """Signed ``(x_i - x_j, y_i - y_j)`` between two image tokens."""

    xi, yi = grid.coords(i)
    xj, yj = grid.coords(j)
    return xi - xj, yi - yj
