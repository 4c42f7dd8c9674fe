"""Interface shared by every attention method in the zoo.

All methods take the same :class:`~core.attention.inputs.AttentionInputs`
record so they can be compared head to head.  Pattern-based methods use the
token grid to place tokens in 2D; sequence-only methods ignore it.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any


class Support(str, Enum):
    YES = "yes"
    NO = "no"
    MAYBE = "maybe"


@dataclass(frozen=True)
class Taxonomy:
    """The four properties used to judge an efficient attention method."""

    locality: Support
    formulation_consistency: Support
    high_rank: Support
    feature_integrity: Support

    def as_row(self) -> dict[str, str]:
        return {
            "locality": self.locality.value,
            "formulation_consistency": self.formulation_consistency.value,
            "high_rank": self.high_rank.value,
            "feature_integrity": self.feature_integrity.value,
        }


class AttentionMethod(ABC):
    """Abstract base class for attention operators."""

    name: str = "attention"
    taxonomy: Taxonomy

    @abstractmethod
    def attend(self, inputs: Any) -> Any:
        """Return the ``n x c'`` attention output for ``inputs``."""
