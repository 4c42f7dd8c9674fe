"""Implementations of the ``lab`` subcommands.

Each command takes the resolved :class:`~lab.config.RunConfig`, prints a
short summary to stdout and writes its report files.
"""

from __future__ import annotations

import hashlib
import logging
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from pydantic import ValidationError

from core.attention import (
    METHOD_NAMES,
    TAXONOMY,
    AttentionInputs,
    attention_locality,
    build_method,
    masked_attention,
)
from core.errors import ConfigError
from core.flops import COST_COLUMNS, COST_KEYS, flux_cost_table
from core.geometry.grid import TokenGrid
from core.masks import build_clear, build_full, builder_for, mask_stats, save_mask, write_pbm
from core.parallel import (
    DIVERGENCE_COLUMNS,
    LEDGER_COLUMNS,
    LEDGER_KEYS,
    comm_report,
    distributed_clear_attention,
    divergence_rows,
    make_plan,
    make_transport,
    simulate_inference,
    single_worker_inference,
    text_average_gap,
)
from core.reports import emit_report
from core.settings import default_dtype, output_dir
from core.tensor.rank import rank_of
from core.toy_dit import (
    LOSS_COLUMNS,
    Dataset,
    SyntheticTask,
    ToyDit,
    ToyDitConfig,
    generate_teacher_dataset,
    load_checkpoint,
    pretrain_teacher,
    save_checkpoint,
    train_distill,
)
from lab.config import RunConfig

logger = logging.getLogger(__name__)

MASK_COLUMNS = (
    "method",
    "height",
    "width",
    "n_text",
    "popcount",
    "sparsity",
    "image_rank",
    "corner_row_count",
)
BENCH_COLUMNS = (
    "method",
    "locality",
    "formulation_consistency",
    "high_rank",
    "feature_integrity",
    "max_abs_dev",
    "rel_dev",
)
RANK_COLUMNS = ("clip_mode", "clip_radius", "layer", "mean_rank", "locality", "velocity_gap")
COMPARE_COLUMNS = ("data",) + LOSS_COLUMNS


def digest(x: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(x, dtype=np.float64).tobytes()).hexdigest()


def grid_of(cfg: RunConfig) -> TokenGrid:
    return TokenGrid(cfg.n_text, cfg.height, cfg.width)


def report_path(cfg: RunConfig, explicit: Path | None, default_name: str) -> Path:
    return Path(explicit) if explicit is not None else output_dir() / default_name


def write_report(
    cfg: RunConfig,
    path: Path,
    rows: list[dict[str, Any]],
    columns: Sequence[str],
    keys: Sequence[str],
) -> None:
    emit_report(path, rows, columns, keys, cfg.format if path == cfg.out else None, cfg.header())
    print(f"wrote {path}")


def bench_inputs(cfg: RunConfig) -> AttentionInputs:
    """Seeded random self-attention inputs shared by ``attn-bench`` and ``parallel``."""

    rng = np.random.default_rng(cfg.seed)
    return AttentionInputs.random(grid_of(cfg), cfg.channels, rng, default_dtype())


# -- mask ------------------------------------------------------------------


def cmd_mask(cfg: RunConfig) -> None:
    grid = grid_of(cfg)
    mask = builder_for(cfg.method, cfg.layer, **cfg.method_params()).build(grid)
    counts = mask.row_counts()
    corner = int(counts[grid.n_text]) if grid.n_image else 0
    print(f"popcount {mask.popcount()}")
    print(f"sparsity {mask.sparsity()!r}")
    print(f"corner_row_count {corner}")
    image_rank = None
    if cfg.stats:
        stats = mask_stats(mask)
        image_rank = stats.image_rank
        kind = "exact" if stats.exact else "numerical"
        print(f"image_rank {image_rank} ({kind})")
    if cfg.save_mask is not None:
        save_mask(cfg.save_mask, mask)
        print(f"wrote {cfg.save_mask}")
    if cfg.pbm is not None:
        write_pbm(cfg.pbm, mask)
        print(f"wrote {cfg.pbm}")
    if cfg.out is not None:
        row = {
            "method": cfg.method,
            "height": grid.height,
            "width": grid.width,
            "n_text": grid.n_text,
            "popcount": mask.popcount(),
            "sparsity": mask.sparsity(),
            "image_rank": image_rank,
            "corner_row_count": corner,
        }
        write_report(cfg, cfg.out, [row], MASK_COLUMNS, ("method",))


# -- flops -----------------------------------------------------------------


def cmd_flops(cfg: RunConfig) -> None:
    baselines = {
        name: values
        for name, values in (
            ("neighborhood", cfg.neighborhood),
            ("swin", cfg.swin),
            ("strided", cfg.strided),
        )
        if values
    }
    report = flux_cost_table(cfg.resolutions, cfg.radii, cfg.flux, baselines)
    for row in report.rows:
        line = (
            f"{row['method']:<12} {row['resolution']:>5}px "
            f"param={row['radius']!s:<5} {row['flops'] / 1e9:12.2f} GFLOPS"
        )
        if row["method"] != "full":
            saved = report.reduction(row["method"], row["resolution"], row["radius"])
            line += f"  reduction {100 * saved:.2f}%"
        print(line)
    path = report_path(cfg, cfg.out, "flops.csv")
    write_report(cfg, path, report.rows, COST_COLUMNS, COST_KEYS)


# -- attention benchmark ---------------------------------------------------


def cmd_attn_bench(cfg: RunConfig) -> None:
    inputs = bench_inputs(cfg)
    grid = inputs.grid
    reference = masked_attention(inputs, build_full(grid))
    ref_norm = float(np.linalg.norm(reference)) or 1.0
    rows = []
    for name in cfg.methods or METHOD_NAMES:
        method = build_method(
            name,
            inputs.c,
            rng=np.random.default_rng(cfg.seed + 1),
            layer_index=cfg.layer,
            **cfg.method_params(name),
        )
        out = method.attend(inputs)
        gap = out - reference
        rows.append(
            {
                "method": name,
                **TAXONOMY[name].as_row(),
                "max_abs_dev": float(np.abs(gap).max()),
                "rel_dev": float(np.linalg.norm(gap)) / ref_norm,
            }
        )
        logger.info("%s: relative deviation %.3e", name, rows[-1]["rel_dev"])
    for row in sorted(rows, key=lambda r: r["method"]):
        print(
            f"{row['method']:<14} L={row['locality']:<5} F={row['formulation_consistency']:<5} "
            f"R={row['high_rank']:<5} I={row['feature_integrity']:<5} rel_dev={row['rel_dev']:.3e}"
        )
    clear = masked_attention(inputs, build_clear(grid, cfg.r))
    print(f"clear_sha256 {digest(clear)}")
    path = report_path(cfg, cfg.out, "attn_bench.csv")
    write_report(cfg, path, rows, BENCH_COLUMNS, ("method",))


# -- toy model helpers -----------------------------------------------------


def toy_config(cfg: RunConfig) -> ToyDitConfig:
    """The model configuration on the run's token grid."""

    values = cfg.model.model_dump()
    values.update(height=cfg.height, width=cfg.width, n_text=cfg.n_text)
    try:
        return ToyDitConfig(**values)
    except ValidationError as exc:
        raise ConfigError(f"model does not fit the grid: {exc.errors()[0]['msg']}") from exc


def obtain_teacher(cfg: RunConfig) -> tuple[ToyDit, SyntheticTask]:
    """Load the teacher checkpoint, or initialise and pretrain a fresh teacher."""

    if cfg.teacher_ckpt is not None:
        loaded = load_checkpoint(cfg.teacher_ckpt)
        teacher = ToyDit(loaded.config, loaded.params, "full")
        logger.info("loaded teacher from %s", cfg.teacher_ckpt)
        return teacher, SyntheticTask.create(teacher.config)
    teacher = ToyDit.initialise(toy_config(cfg), seed=cfg.seed)
    task = SyntheticTask.create(teacher.config)
    if cfg.teacher_steps:
        pretrain_teacher(
            teacher, task, cfg.teacher_steps, batch_size=cfg.distill.batch_size, seed=cfg.seed
        )
    return teacher, task


def build_dataset(cfg: RunConfig, teacher: ToyDit, task: SyntheticTask, kind: str) -> Dataset:
    if kind == "teacher":
        return generate_teacher_dataset(
            teacher, cfg.dataset_size, cfg.sampler_steps, task=task, seed=cfg.seed
        )
    return task.sample(cfg.dataset_size, np.random.default_rng(cfg.seed))


def run_distillation(cfg: RunConfig, teacher: ToyDit, dataset: Dataset):
    student = teacher.student(cfg.method, **cfg.method_params())
    result = train_distill(student, teacher, dataset, cfg.distill)
    print(
        f"holdout L_pred {result.initial_holdout:.6f} -> {result.final_holdout:.6f} "
        f"({cfg.method}, {cfg.distill.steps} steps)"
    )
    return result


# -- distill / data-gen ----------------------------------------------------


def cmd_distill(cfg: RunConfig) -> None:
    teacher, task = obtain_teacher(cfg)
    dataset = build_dataset(cfg, teacher, task, cfg.data)
    result = run_distillation(cfg, teacher, dataset)
    path = report_path(cfg, cfg.out, "distill.csv")
    write_report(cfg, path, result.curve, LOSS_COLUMNS, ("step",))
    if cfg.out_ckpt is not None:
        save_checkpoint(cfg.out_ckpt, result.student)
        print(f"wrote {cfg.out_ckpt}")


def cmd_data_gen(cfg: RunConfig) -> None:
    teacher, task = obtain_teacher(cfg)
    dataset = build_dataset(cfg, teacher, task, "teacher")
    path = report_path(cfg, cfg.out, "teacher_data.npz")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        np.savez(f, z0=dataset.z0, y=dataset.y, labels=dataset.labels)
    print(f"wrote {len(dataset)} samples to {path}")
    if cfg.out_ckpt is not None:
        save_checkpoint(cfg.out_ckpt, teacher)
        print(f"wrote {cfg.out_ckpt}")
    if not cfg.compare:
        return
    rows = []
    external = build_dataset(cfg, teacher, task, "external")
    for kind, data in (("teacher", dataset), ("external", external)):
        result = run_distillation(cfg, teacher, data)
        rows.extend({"data": kind, **row} for row in result.curve)
        final = result.curve[-1]["L_fm"] if result.curve else float("nan")
        print(f"{kind} data: final L_fm {final:.6f}")
    path = report_path(cfg, cfg.curves, "data_compare.csv")
    write_report(cfg, path, rows, COMPARE_COLUMNS, ("data", "step"))


# -- rank ------------------------------------------------------------------


def cmd_rank(cfg: RunConfig) -> None:
    """Attention-map rank and locality of the teacher under RoPE clipping."""

    teacher, task = obtain_teacher(cfg)
    rng = np.random.default_rng(cfg.seed)
    sample = task.sample(1, rng)
    t = 0.5
    eps = rng.standard_normal(sample.z0[0].shape)
    z_t = (1.0 - t) * sample.z0[0] + t * eps
    y = sample.y[0]
    grid = teacher.config.grid
    base = teacher.forward(z_t, t, y, keep_maps=True)
    variants: list[tuple[str, float | None]] = [("none", None)]
    variants += [(mode, r) for mode in ("remote", "local") for r in cfg.clip_radii]
    rows = []
    for mode, radius in variants:
        if radius is None:
            res = base
        else:
            clipped = teacher.with_config(clip_mode=mode, clip_radius=radius)
            res = clipped.forward(z_t, t, y, keep_maps=True)
        gap = float(np.sqrt(np.mean((res.velocity - base.velocity) ** 2)))
        for layer, maps in enumerate(res.maps):
            rows.append(
                {
                    "clip_mode": mode,
                    "clip_radius": radius,
                    "layer": layer,
                    "mean_rank": float(np.mean([rank_of(m) for m in maps])),
                    "locality": float(np.mean([attention_locality(m, grid, cfg.r) for m in maps])),
                    "velocity_gap": gap,
                }
            )
        print(f"{mode:<7} r={radius!s:<5} velocity gap {gap:.6f}")
    path = report_path(cfg, cfg.out, "rank.csv")
    write_report(cfg, path, rows, RANK_COLUMNS, ("clip_mode", "clip_radius", "layer"))


# -- parallel --------------------------------------------------------------


def cmd_parallel(cfg: RunConfig) -> None:
    grid = grid_of(cfg)
    plan = make_plan(grid, cfg.workers, cfg.r)
    transport = make_transport(plan, jitter=cfg.jitter, seed=cfg.seed)
    clear_cost = comm_report(plan, "clear")
    full_cost = comm_report(plan, "full_sync")
    print(
        f"halo {plan.halo} rows: {clear_cost['tokens_per_pair']} tokens per adjacent pair "
        f"vs {full_cost['tokens_per_pair']} for full sync (ratio {clear_cost['ratio']:.4f})"
    )
    if cfg.inference:
        teacher, task = obtain_teacher(cfg)
        student = teacher.student("clear", r=cfg.r)
        rng = np.random.default_rng(cfg.seed)
        z_start = rng.standard_normal((grid.n_image, student.config.latent_channels))
        y = task.conditions(np.array([0]))[0]
        result = simulate_inference(
            plan, student, z_start, y, cfg.steps, cfg.text_mode, transport
        )
        reference = single_worker_inference(student, z_start, y, cfg.steps)
        rows = divergence_rows(result.trajectory, reference.trajectory)
        print(f"final max gap to single worker {rows[-1]['max_abs_gap']:.3e}")
        print(f"latent_sha256 {digest(result.z)}")
        write_report(
            cfg,
            report_path(cfg, cfg.divergence, "divergence.csv"),
            rows,
            DIVERGENCE_COLUMNS,
            ("step",),
        )
    else:
        inputs = bench_inputs(cfg)
        out = distributed_clear_attention(plan, inputs, transport=transport)
        t = grid.n_text
        gap = text_average_gap(plan, inputs.q[:t], inputs.k, inputs.v)
        print(
            f"text rows, patch average vs exact: max gap {gap['max_abs_gap']:.3e}, "
            f"mean gap {gap['mean_abs_gap']:.3e}"
        )
        print(f"clear_sha256 {digest(out)}")
    print(f"ledger conserved: {plan.ledger.conserved()}")
    path = report_path(cfg, cfg.ledger, "ledger.csv")
    write_report(cfg, path, plan.ledger.rows(), LEDGER_COLUMNS, LEDGER_KEYS)


COMMAND_TABLE: dict[str, Callable[[RunConfig], None]] = {
    "mask": cmd_mask,
    "flops": cmd_flops,
    "rank": cmd_rank,
    "attn-bench": cmd_attn_bench,
    "distill": cmd_distill,
    "parallel": cmd_parallel,
    "data-gen": cmd_data_gen,
}
