"""Vertical patch partition of the image raster for simulated workers."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from core.errors import PlanError
from core.geometry.grid import TokenGrid
from core.parallel.ledger import Ledger

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PatchPlan:
    """``n_workers`` contiguous row ranges plus a halo of ``ceil(r)`` rows.

    Worker ``w`` owns raster rows ``ranges[w]``; it receives up to ``halo``
    boundary rows from each adjacent worker.
    """

    grid: TokenGrid
    n_workers: int
    r: float
    halo: int
    ranges: tuple[tuple[int, int], ...]
    ledger: Ledger = field(default_factory=Ledger, compare=False)

    def patch_height(self, worker: int) -> int:
        start, stop = self.ranges[worker]
        return stop - start

    def neighbours(self, worker: int) -> list[int]:
        return [w for w in (worker - 1, worker + 1) if 0 <= w < self.n_workers]

    def halo_rows(self, sender: int, receiver: int) -> tuple[int, int]:
        """Rows of ``sender``'s patch that ``receiver`` needs."""

        start, stop = self.ranges[sender]
        if receiver == sender - 1:
            return start, min(start + self.halo, stop)
        if receiver == sender + 1:
            return max(stop - self.halo, start), stop
        raise PlanError(f"workers {sender} and {receiver} are not adjacent")

    def local_rows(self, worker: int) -> tuple[int, int]:
        """Own rows widened by the halos actually received."""

        start, stop = self.ranges[worker]
        lo = self.halo_rows(worker - 1, worker)[0] if worker > 0 else start
        hi = self.halo_rows(worker + 1, worker)[1] if worker + 1 < self.n_workers else stop
        return lo, hi

    def halo_tokens(self, sender: int, receiver: int) -> int:
        start, stop = self.halo_rows(sender, receiver)
        return (stop - start) * self.grid.width

    def planned_transfers(self) -> list[tuple[int, int, int]]:
        """``(sender, receiver, tokens)`` of every halo transfer in one layer."""

        return [
            (s, rcv, self.halo_tokens(s, rcv))
            for s in range(self.n_workers)
            for rcv in self.neighbours(s)
        ]


def make_plan(grid: TokenGrid, n_workers: int, r: float) -> PatchPlan:
    if n_workers < 1:
        raise PlanError(f"need at least one worker, got {n_workers}")
    if not r > 0:
        raise PlanError(f"radius must be positive, got {r}")
    halo = math.ceil(r)
    base = grid.height // n_workers
    if n_workers > 1 and base < halo:
        raise PlanError(
            f"patches of {base} rows (H={grid.height}, N={n_workers}) are thinner "
            f"than the {halo}-row halo"
        )
    ranges = []
    for w in range(n_workers):
        start = w * base
        stop = grid.height if w == n_workers - 1 else start + base
        ranges.append((start, stop))
    logger.debug("plan for %d workers over %d rows: %s", n_workers, grid.height, ranges)
    return PatchPlan(grid, n_workers, float(r), halo, tuple(ranges))
