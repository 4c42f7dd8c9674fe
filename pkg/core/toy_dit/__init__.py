"""Toy joint-attention diffusion transformer, flow matching and distillation."""

from core.toy_dit.checkpoint import load_checkpoint, save_checkpoint
from core.toy_dit.config import DistillConfig, ToyDitConfig
from core.toy_dit.data import (
    Dataset,
    SyntheticTask,
    draw_batch,
    generate_teacher_dataset,
    pretrain_teacher,
)
from core.toy_dit.distill import (
    LOSS_COLUMNS,
    DistillResult,
    batch_losses,
    distill_losses,
    holdout_pred_loss,
    train_distill,
)
from core.toy_dit.flow import (
    FlowSample,
    euler_sample,
    euler_step,
    euler_trajectory,
    flow_matching_loss,
    time_steps,
)
from core.toy_dit.model import (
    ForwardResult,
    ToyDit,
    attention_param_names,
    init_params,
    is_attention_param,
)
from core.toy_dit.optim import Adam

__all__ = [
    "LOSS_COLUMNS",
    "Adam",
    "Dataset",
    "DistillConfig",
    "DistillResult",
    "FlowSample",
    "ForwardResult",
    "SyntheticTask",
    "ToyDit",
    "ToyDitConfig",
    "attention_param_names",
    "batch_losses",
    "distill_losses",
    "draw_batch",
    "euler_sample",
    "euler_step",
    "euler_trajectory",
    "flow_matching_loss",
    "generate_teacher_dataset",
    "init_params",
    "is_attention_param",
    "load_checkpoint",
    "pretrain_teacher",
    "holdout_pred_loss",
    "save_checkpoint",
    "time_steps",
    "train_distill",
]
