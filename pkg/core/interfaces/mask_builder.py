"""Interface for attention-pattern builders.

A builder turns a :class:`~core.geometry.grid.TokenGrid` into an
:class:`~core.masks.mask.AttentionMask`.  Every concrete builder must keep the
diagonal set and honour the text clause: text rows and text columns are
fully attended.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any


class MaskBuilder(ABC):
    """Abstract base class for sparse attention patterns."""

    #: short name written into mask headers and reports
    tag: str = "custom"

    @abstractmethod
    def build(self, grid: Any) -> Any:
        """Return the attention mask of this pattern on ``grid``."""

    def params(self) -> dict[str, Any]:
        """Parameters recorded alongside the mask."""

        return {}
