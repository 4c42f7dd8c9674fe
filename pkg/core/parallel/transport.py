"""In-process message transport between simulated workers.

Each ordered ``(sender, receiver)`` pair has its own FIFO queue, so message
order per pair is the program order of the sender.  Every send and receive
is written to the plan's ledger.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from core.errors import DeadlockError
from core.interfaces.transport import Transport
from core.parallel.ledger import Ledger, LedgerEntry

logger = logging.getLogger(__name__)


class MsgKind(str, Enum):
    HALO_KV = "halo_kv"
    TEXT_PARTIAL = "text_partial"
    BARRIER = "barrier"


@dataclass(frozen=True)
class WorkerMsg:
    kind: MsgKind
    sender: int
    receiver: int
    step: int
    layer: int
    payload: dict[str, np.ndarray] = field(default_factory=dict)
    token_count: int = 0

    def entry(self) -> LedgerEntry:
        return LedgerEntry(
            self.step, self.layer, self.sender, self.receiver, self.kind.value, self.token_count
        )


class QueueTransport(Transport):
    """FIFO queues per worker pair.

    ``jitter`` (seconds) adds a random pause before every delivery so tests
    can shake up thread interleavings; ``seed`` fixes the pauses.
    """

    def __init__(
        self,
        n_workers: int,
        ledger: Ledger,
        timeout: float,
        jitter: float = 0.0,
        seed: int = 0,
    ) -> None:
        self.n_workers = n_workers
        self.ledger = ledger
        self.timeout = timeout
        self.jitter = jitter
        self._rng = np.random.default_rng(seed)
        self._rng_lock = threading.Lock()
        self._queues = {
            (s, r): queue.Queue() for s in range(n_workers) for r in range(n_workers)
        }

    def _pause(self) -> None:
        if self.jitter <= 0:
            return
        with self._rng_lock:
            delay = float(self._rng.uniform(0.0, self.jitter))
        time.sleep(delay)

    def send(self, sender: int, receiver: int, message: WorkerMsg) -> None:
        self._pause()
        self.ledger.record_sent(message.entry())
        self._queues[(sender, receiver)].put(message)

    def recv(self, receiver: int, sender: int, timeout: float | None = None) -> WorkerMsg:
        wait = self.timeout if timeout is None else timeout
        try:
            message = self._queues[(sender, receiver)].get(timeout=wait)
        except queue.Empty as exc:
            raise DeadlockError(
                f"worker {receiver} waited {wait}s for a message from worker {sender}"
            ) from exc
        self.ledger.record_received(message.entry())
        return message


class Channel:
    """One worker's view of the transport with step/layer tag checking."""

    def __init__(self, worker: int, transport: Transport) -> None:
        self.worker = worker
        self.transport = transport

    def send(
        self,
        receiver: int,
        kind: MsgKind,
        step: int,
        layer: int,
        payload: dict[str, Any] | None = None,
        token_count: int = 0,
    ) -> None:
        msg = WorkerMsg(kind, self.worker, receiver, step, layer, payload or {}, token_count)
        logger.debug(
            "step %d layer %d: %s %d -> %d (%d tokens)",
            step,
            layer,
            kind.value,
            self.worker,
            receiver,
            token_count,
        )
        self.transport.send(self.worker, receiver, msg)

    def expect(self, sender: int, kind: MsgKind, step: int, layer: int) -> WorkerMsg:
        msg = self.transport.recv(self.worker, sender)
        if (msg.kind, msg.step, msg.layer) != (kind, step, layer):
            raise DeadlockError(
                f"worker {self.worker} expected {kind.value} for step {step} layer {layer} "
                f"from {sender}, got {msg.kind.value} for step {msg.step} layer {msg.layer}"
            )
        return msg

    def barrier(self, n_workers: int, step: int, layer: int) -> None:
        """Centralised barrier: everyone reports to worker 0, which releases all."""

        if n_workers == 1:
            return
        if self.worker == 0:
            for w in range(1, n_workers):
                self.expect(w, MsgKind.BARRIER, step, layer)
            for w in range(1, n_workers):
                self.send(w, MsgKind.BARRIER, step, layer)
        else:
            self.send(0, MsgKind.BARRIER, step, layer)
            self.expect(0, MsgKind.BARRIER, step, layer)
