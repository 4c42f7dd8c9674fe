"""Interface for moving typed messages between simulated workers.

Workers never share mutable state; everything they exchange goes through a
transport so the communication ledger stays exact and a real network
transport could be dropped in later.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any


class Transport(ABC):
    """Point-to-point mailbox between numbered workers."""

    @abstractmethod
    def send(self, sender: int, receiver: int, message: Any) -> None:
        """Deliver ``message`` from ``sender`` to ``receiver``."""

    @abstractmethod
    def recv(self, receiver: int, sender: int, timeout: float | None = None) -> Any:
        """Block until the next message from ``sender`` arrives.

        Implementations raise :class:`~core.errors.DeadlockError` when nothing
        arrives within ``timeout`` seconds (the transport default when ``None``).
        """
