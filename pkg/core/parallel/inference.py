"""End-to-end patch-parallel denoising of a CLEAR student.

Every worker owns a band of latent rows and keeps a replica of the text
tokens.  Per block it sends its boundary keys and values to its neighbours,
attends its image queries over the local key set, contributes a text
partial to worker 0, receives the merged text rows back and finally meets
the others at a barrier.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from core.errors import ConfigError
from core.geometry.rope import ClipMode
from core.parallel.attention import (
    TEXT_MODES,
    local_clear_additive,
    make_transport,
    merge_text,
    own_image_rows,
    partial_attention,
    receive_halo,
    text_block_columns,
)
from core.parallel.plan import PatchPlan
from core.parallel.transport import Channel, MsgKind, QueueTransport
from core.parallel.workers import run_workers
from core.tensor import tape as F
from core.tensor.ops import softmax_rows
from core.toy_dit.flow import euler_step, euler_trajectory, time_steps
from core.toy_dit.model import (
    ToyDit,
    block_input,
    block_params,
    embed,
    head_logits,
    mlp_residual,
    project_qkv,
    time_features,
)

logger = logging.getLogger(__name__)

DIVERGENCE_COLUMNS = ("step", "max_abs_gap", "mean_abs_gap")


@dataclass
class InferenceResult:
    z: np.ndarray
    trajectory: list[np.ndarray]
    #: ``[step][layer]`` attention outputs over all tokens, when captured
    attn_outputs: list[list[np.ndarray]] = field(default_factory=list)


def single_worker_inference(
    model: ToyDit, z_start: np.ndarray, y: np.ndarray, steps: int, capture: bool = False
) -> InferenceResult:
    trajectory = euler_trajectory(model.predict, z_start, y, steps)
    captured = []
    if capture:
        z = np.array(z_start, dtype=np.float64)
        for (t_now, _), z_next in zip(time_steps(steps), trajectory):
            captured.append(list(model.forward(z, t_now, y).attn_outputs))
            z = z_next
    return InferenceResult(trajectory[-1], trajectory, captured)


def _check_student(plan: PatchPlan, model: ToyDit) -> None:
    cfg = model.config
    if model.mask_method != "clear":
        raise ConfigError(
            f"patch-parallel inference needs a CLEAR student, got {model.mask_method}"
        )
    if plan.grid != cfg.grid:
        raise ConfigError("plan and model disagree on the token grid")
    if cfg.clip_mode is not ClipMode.NONE:
        raise ConfigError("patch-parallel inference does not support clipped rotary scores")
    if np.ceil(float(model.mask_params["r"])) > plan.halo:
        raise ConfigError(
            f"student radius {model.mask_params['r']} exceeds the planned halo {plan.halo}"
        )


def simulate_inference(
    plan: PatchPlan,
    model: ToyDit,
    z_start: np.ndarray,
    y: np.ndarray,
    steps: int,
    text_mode: str = "exact",
    transport: QueueTransport | None = None,
    capture: bool = False,
) -> InferenceResult:
    """Denoise ``z_start`` with ``plan.n_workers`` workers.

    ``text_mode`` selects exact log-sum-exp recombination of text rows or
    uniform patch averaging.  One worker runs the single-worker sampler.
    """

    _check_student(plan, model)
    model.check_inputs(z_start, y)
    if text_mode not in TEXT_MODES:
        raise ConfigError(f"text mode must be one of {TEXT_MODES}, got {text_mode!r}")
    if plan.n_workers == 1:
        return single_worker_inference(model, z_start, y, steps, capture)
    transport = transport or make_transport(plan)
    cfg = model.config
    grid = cfg.grid
    t = grid.n_text
    r = float(model.mask_params["r"])
    params = model.params
    schedule = time_steps(steps)

    def worker(w: int):
        chan = Channel(w, transport)
        start, stop = plan.ranges[w]
        lo, hi = plan.local_rows(w)
        q_grid = grid.sub_rows(start, stop)
        k_grid = grid.sub_rows(lo, hi)
        additive = local_clear_additive(plan, w, r)
        image_cols = own_image_rows(grid, (start, stop), lo)
        text_cols = text_block_columns(grid, (start, stop), text_mode == "average" or w == 0, lo)
        z = np.array(z_start[start * grid.width : stop * grid.width], dtype=np.float64)
        trajectory, captured = [], []
        for step, (t_now, t_next) in enumerate(schedule):
            temb = time_features(t_now, cfg.time_dim)
            h = embed(params, z, y)
            layers = []
            for layer in range(cfg.n_blocks):
                blk = block_params(params, layer)
                q, k, v = project_qkv(block_input(h, temb, blk), blk)
                for nb in plan.neighbours(w):
                    a, b = plan.halo_rows(w, nb)
                    rows = np.arange(t + (a - start) * grid.width, t + (b - start) * grid.width)
                    chan.send(
                        nb,
                        MsgKind.HALO_KV,
                        step,
                        layer,
                        {"k": k[rows], "v": v[rows]},
                        plan.halo_tokens(w, nb),
                    )
                halos = {nb: receive_halo(chan, plan, nb, step, layer) for nb in plan.neighbours(w)}
                empty = np.zeros((0, cfg.dim))
                above = halos.get(w - 1, (empty, empty))
                below = halos.get(w + 1, (empty, empty))
                k_local = np.concatenate([k[:t], above[0], k[t:], below[0]])
                v_local = np.concatenate([v[:t], above[1], v[t:], below[1]])

                image_heads, text_outs, text_lses = [], [], []
                d = cfg.head_dim
                for head in range(cfg.n_heads):
                    cols = slice(head * d, (head + 1) * d)
                    logits = head_logits(
                        q[:, cols], k_local[:, cols], cfg, q_grid, k_grid, start, lo
                    )
                    image_heads.append(softmax_rows(logits[t:], additive) @ v_local[:, cols])
                    out, lse = partial_attention(logits[:t][:, text_cols], v_local[text_cols, cols])
                    text_outs.append(out)
                    text_lses.append(lse)
                partial = (np.concatenate(text_outs, axis=1), np.concatenate(text_lses, axis=1))

                if w == 0:
                    partials = [partial]
                    for other in range(1, plan.n_workers):
                        msg = chan.expect(other, MsgKind.TEXT_PARTIAL, step, layer)
                        partials.append((msg.payload["out"], msg.payload["lse"]))
                    text_heads = merge_text(partials, text_mode)
                    for other in range(1, plan.n_workers):
                        chan.send(other, MsgKind.TEXT_PARTIAL, step, layer, {"out": text_heads}, t)
                else:
                    chan.send(
                        0,
                        MsgKind.TEXT_PARTIAL,
                        step,
                        layer,
                        {"out": partial[0], "lse": partial[1]},
                        t,
                    )
                    text_heads = chan.expect(0, MsgKind.TEXT_PARTIAL, step, layer).payload["out"]

                heads = np.concatenate([text_heads, np.concatenate(image_heads, axis=1)])
                o = heads @ blk["attn.wo"]
                if capture:
                    layers.append(o)
                h = mlp_residual(h + o, blk)
                chan.barrier(plan.n_workers, step, layer)
            velocity = F.rms_norm(h[t:]) @ params["head.out"]
            z = euler_step(z, velocity, t_now, t_next)
            trajectory.append(z)
            captured.append(layers)
        return trajectory, captured

    results = run_workers(plan.n_workers, worker)
    trajectory = [
        np.concatenate([results[w][0][i] for w in range(plan.n_workers)])
        for i in range(steps)
    ]
    captured = []
    if capture:
        for i in range(steps):
            per_layer = []
            for layer in range(cfg.n_blocks):
                text = results[0][1][i][layer][:t]
                image = [results[w][1][i][layer][t:] for w in range(plan.n_workers)]
                per_layer.append(np.concatenate([text, *image]))
            captured.append(per_layer)
    logger.info(
        "simulated %d steps on %d workers (%s text rows): %d messages",
        steps,
        plan.n_workers,
        text_mode,
        len(plan.ledger.sent),
    )
    return InferenceResult(trajectory[-1], trajectory, captured)


def divergence_rows(
    trajectory: list[np.ndarray], reference: list[np.ndarray]
) -> list[dict[str, float]]:
    """Per-step gap between a parallel trajectory and the single-worker one."""

    rows = []
    for step, (a, b) in enumerate(zip(trajectory, reference)):
        gap = np.abs(a - b)
        rows.append(
            {"step": step, "max_abs_gap": float(gap.max()), "mean_abs_gap": float(gap.mean())}
        )
    return rows
