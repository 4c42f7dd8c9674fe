"""Patch-parallel CLEAR attention on a single layer.

Image queries only see keys within the radius, so each worker computes its
rows exactly from its own patch plus ``ceil(r)`` halo rows per neighbour.
Text queries see every key; their rows are assembled from per-patch
partials, either exactly (log-sum-exp weights over a partition of the keys)
or with uniform ``1/N`` weights over blocks that each repeat the text keys.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from core.attention.exact import masked_attention
from core.attention.inputs import AttentionInputs
from core.errors import (
    CommunicationError,
    ConfigError,
    MissingHaloError,
    PlanError,
    ShapeError,
)
from core.geometry.grid import TokenGrid
from core.masks.builders import ClearMask, build_clear
from core.parallel.plan import PatchPlan
from core.parallel.transport import Channel, MsgKind, QueueTransport
from core.parallel.workers import run_workers
from core.settings import worker_timeout
from core.tensor.ops import logsumexp_rows, softmax_rows

logger = logging.getLogger(__name__)

TEXT_MODES = ("exact", "average")

Partial = tuple[np.ndarray, np.ndarray]


def partial_attention(logits: np.ndarray, v: np.ndarray) -> Partial:
    """Softmax output of one key block and its log partition mass."""

    return softmax_rows(logits) @ v, logsumexp_rows(logits)


def merge_exact(partials: Sequence[Partial]) -> np.ndarray:
    """Combine partials over a key partition; ``lse`` has one column per head."""

    outs = [o for o, _ in partials]
    lses = np.stack([l for _, l in partials])
    total = np.logaddexp.reduce(lses, axis=0)
    heads = lses.shape[2]
    width = outs[0].shape[1] // heads
    merged = np.zeros_like(outs[0])
    for out, lse in zip(outs, lses):
        weight = np.exp(lse - total)
        merged += np.repeat(weight, width, axis=1) * out
    return merged


def merge_average(partials: Sequence[Partial]) -> np.ndarray:
    merged = np.zeros_like(partials[0][0])
    for out, _ in partials:
        merged += out
    return merged / len(partials)


def merge_text(partials: Sequence[Partial], mode: str) -> np.ndarray:
    if len(partials) == 1:
        return partials[0][0]
    if mode == "exact":
        return merge_exact(partials)
    if mode == "average":
        return merge_average(partials)
    raise ConfigError(f"text mode must be one of {TEXT_MODES}, got {mode!r}")


def text_block_columns(
    grid: TokenGrid, rows: tuple[int, int], with_text: bool, first_row: int = 0
) -> np.ndarray:
    """Key columns of one patch block in a key set starting at raster row ``first_row``."""

    t = grid.n_text
    start, stop = rows
    image = np.arange(t + (start - first_row) * grid.width, t + (stop - first_row) * grid.width)
    return np.concatenate([np.arange(t), image]) if with_text else image


def text_patch_partials(
    plan: PatchPlan,
    q_text: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    scale: float | None = None,
    replicate_text: bool = True,
) -> list[Partial]:
    """Per-patch text attention partials.

    With ``replicate_text`` every block holds the text keys; otherwise the
    text keys belong to the first block only, which makes the blocks a
    partition of the key set.
    """

    grid = plan.grid
    if k.shape[0] != grid.n or v.shape[0] != grid.n:
        raise ShapeError(f"{k.shape[0]} keys for a grid of {grid.n} tokens")
    s = scale if scale is not None else 1.0 / np.sqrt(k.shape[1])
    partials = []
    for w, rows in enumerate(plan.ranges):
        cols = text_block_columns(grid, rows, replicate_text or w == 0)
        partials.append(partial_attention(q_text @ k[cols].T * s, v[cols]))
    return partials


def text_patch_average(
    plan: PatchPlan,
    q_text: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    scale: float | None = None,
) -> np.ndarray:
    """Uniform average of per-patch text attentions (text keys in every patch)."""

    return merge_text(text_patch_partials(plan, q_text, k, v, scale, True), "average")


def exact_text_attention(
    plan: PatchPlan,
    q_text: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    scale: float | None = None,
) -> np.ndarray:
    """Text attention recombined from a key partition with log-sum-exp weights."""

    return merge_text(text_patch_partials(plan, q_text, k, v, scale, False), "exact")


def text_average_gap(
    plan: PatchPlan, q_text: np.ndarray, k: np.ndarray, v: np.ndarray, scale: float | None = None
) -> dict[str, float]:
    gap = np.abs(
        text_patch_average(plan, q_text, k, v, scale)
        - exact_text_attention(plan, q_text, k, v, scale)
    )
    return {
        "max_abs_gap": float(gap.max()) if gap.size else 0.0,
        "mean_abs_gap": float(gap.mean()) if gap.size else 0.0,
    }


def receive_halo(channel: Channel, plan: PatchPlan, sender: int, step: int, layer: int):
    """Halo keys and values from ``sender``, checked against the plan."""

    try:
        msg = channel.expect(sender, MsgKind.HALO_KV, step, layer)
    except CommunicationError as exc:
        raise MissingHaloError(
            f"worker {channel.worker} is missing its halo from worker {sender} "
            f"(step {step}, layer {layer}): {exc}"
        ) from exc
    expected = plan.halo_tokens(sender, channel.worker)
    k = msg.payload.get("k")
    v = msg.payload.get("v")
    if k is None or v is None or k.shape[0] != expected or v.shape[0] != expected:
        raise MissingHaloError(
            f"worker {channel.worker} got an incomplete halo from worker {sender}: "
            f"expected {expected} tokens"
        )
    return k, v


def own_image_rows(grid: TokenGrid, rows: tuple[int, int], first_row: int) -> np.ndarray:
    """Positions of a patch's image tokens inside a local token list."""

    t = grid.n_text
    start, stop = rows
    return np.arange(t + (start - first_row) * grid.width, t + (stop - first_row) * grid.width)


def local_clear_additive(plan: PatchPlan, worker: int, r: float) -> np.ndarray:
    """Additive mask of the worker's image queries over its local key set."""

    lo, hi = plan.local_rows(worker)
    local = plan.grid.sub_rows(lo, hi)
    dense = ClearMask(r).build(local).to_dense()
    rows = own_image_rows(plan.grid, plan.ranges[worker], lo)
    return np.where(dense[rows], 0.0, -np.inf)


def make_transport(
    plan: PatchPlan, timeout: float | None = None, jitter: float = 0.0, seed: int = 0
) -> QueueTransport:
    return QueueTransport(
        plan.n_workers,
        plan.ledger,
        worker_timeout() if timeout is None else timeout,
        jitter,
        seed,
    )


def distributed_clear_attention(
    plan: PatchPlan,
    inputs: AttentionInputs,
    r: float | None = None,
    transport: QueueTransport | None = None,
) -> np.ndarray:
    """CLEAR attention computed by ``plan.n_workers`` message-passing workers.

    A single worker takes the ordinary masked path.
    """

    grid = plan.grid
    r = plan.r if r is None else float(r)
    if inputs.grid != grid or inputs.q.shape[0] != grid.n:
        raise ShapeError("inputs must be self-attention on the plan's grid")
    if np.ceil(r) > plan.halo:
        raise PlanError(f"radius {r} needs more than the planned {plan.halo} halo rows")
    if plan.n_workers == 1:
        return masked_attention(inputs, build_clear(grid, r))
    transport = transport or make_transport(plan)
    t = grid.n_text
    s = inputs.scale_value

    def worker(w: int) -> tuple[np.ndarray, np.ndarray | None]:
        chan = Channel(w, transport)
        start, stop = plan.ranges[w]
        lo, hi = plan.local_rows(w)
        own = grid.image_slice(start, stop)
        for nb in plan.neighbours(w):
            a, b = plan.halo_rows(w, nb)
            rows = grid.image_slice(a, b)
            chan.send(
                nb,
                MsgKind.HALO_KV,
                0,
                0,
                {"k": inputs.k[rows], "v": inputs.v[rows]},
                plan.halo_tokens(w, nb),
            )
        halos = {nb: receive_halo(chan, plan, nb, 0, 0) for nb in plan.neighbours(w)}
        empty = np.zeros((0, inputs.c))
        above = halos.get(w - 1, (empty, empty))
        below = halos.get(w + 1, (empty, empty))
        k_local = np.concatenate([inputs.k[:t], above[0], inputs.k[own], below[0]])
        v_local = np.concatenate([inputs.v[:t], above[1], inputs.v[own], below[1]])
        logits = inputs.q[own] @ k_local.T * s
        image = softmax_rows(logits, local_clear_additive(plan, w, r)) @ v_local
        cols = text_block_columns(grid, (start, stop), w == 0, lo)
        partial = partial_attention(inputs.q[:t] @ k_local[cols].T * s, v_local[cols])
        if w != 0:
            chan.send(0, MsgKind.TEXT_PARTIAL, 0, 0, {"out": partial[0], "lse": partial[1]}, t)
            return image, None
        partials = [partial]
        for other in range(1, plan.n_workers):
            msg = chan.expect(other, MsgKind.TEXT_PARTIAL, 0, 0)
            partials.append((msg.payload["out"], msg.payload["lse"]))
        return image, merge_text(partials, "exact")

    results = run_workers(plan.n_workers, worker)
    out = np.zeros((grid.n, inputs.c), dtype=np.result_type(inputs.q, inputs.v))
    out[:t] = results[0][1]
    for w, (image, _) in enumerate(results):
        out[grid.image_slice(*plan.ranges[w])] = image
    logger.info(
        "distributed CLEAR attention on %d workers: %d halo tokens exchanged",
        plan.n_workers,
        plan.ledger.total_tokens(MsgKind.HALO_KV.value),
    )
    return out


def comm_report(plan: PatchPlan, mode: str = "clear") -> dict[str, float]:
    """Image tokens exchanged per adjacent directed pair and per layer.

    ``clear`` exchanges the halo, ``full_sync`` replicates the whole image
    key/value map; ``ratio`` is always clear over full sync, at most 1.
    """

    grid = plan.grid
    full = grid.height * grid.width
    clear = min(plan.halo, grid.height) * grid.width
    if mode == "clear":
        per_pair = clear
    elif mode == "full_sync":
        per_pair = full
    else:
        raise ConfigError(f"communication mode must be 'clear' or 'full_sync', got {mode!r}")
    pairs = 2 * (plan.n_workers - 1)
    return {
        "mode": mode,
        "tokens_per_pair": per_pair,
        "pairs": pairs,
        "total_tokens": per_pair * pairs,
        "ratio": min(clear / full, 1.0) if full else 0.0,
    }
