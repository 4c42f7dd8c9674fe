"""Thread-safe record of every message exchanged between workers."""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import asdict, dataclass

LEDGER_COLUMNS = ("step", "layer", "sender", "receiver", "kind", "token_count")
LEDGER_KEYS = ("step", "layer", "sender", "receiver", "kind")


@dataclass(frozen=True)
class LedgerEntry:
    step: int
    layer: int
    sender: int
    receiver: int
    kind: str
    token_count: int


class Ledger:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._sent: list[LedgerEntry] = []
        self._received: list[LedgerEntry] = []

    def record_sent(self, entry: LedgerEntry) -> None:
        with self._lock:
            self._sent.append(entry)

    def record_received(self, entry: LedgerEntry) -> None:
        with self._lock:
            self._received.append(entry)

    def clear(self) -> None:
        with self._lock:
            self._sent.clear()
            self._received.clear()

    @property
    def sent(self) -> list[LedgerEntry]:
        with self._lock:
            return sorted(self._sent, key=_order)

    @property
    def received(self) -> list[LedgerEntry]:
        with self._lock:
            return sorted(self._received, key=_order)

    def rows(self) -> list[dict[str, object]]:
        return [asdict(e) for e in self.sent]

    def tokens_by_pair(self, kind: str | None = None, received: bool = False) -> Counter:
        """Token totals keyed by ``(step, sender, receiver)``."""

        entries = self.received if received else self.sent
        totals: Counter = Counter()
        for e in entries:
            if kind is None or e.kind == kind:
                totals[(e.step, e.sender, e.receiver)] += e.token_count
        return totals

    def conserved(self) -> bool:
        """Every pair received exactly what it was sent, step by step."""

        return self.tokens_by_pair() == self.tokens_by_pair(received=True) and len(
            self._sent
        ) == len(self._received)

    def total_tokens(self, kind: str | None = None) -> int:
        return sum(self.tokens_by_pair(kind).values())


def _order(e: LedgerEntry) -> tuple:
    return (e.step, e.layer, e.sender, e.receiver, e.kind, e.token_count)
