"""Distillation of a full-attention teacher into a sparse-attention student.

The objective is ``L_fm + alpha * L_pred + beta * L_attn``:

* ``L_fm``: flow matching against the data,
* ``L_pred``: squared gap between student and teacher predictions,
* ``L_attn``: squared gap between per-block attention outputs, averaged
  over the configured blocks.

Only attention weights are trained; every other parameter of the student
stays bit-identical.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from core.errors import DivergenceError, ShapeError
from core.tensor import tape as F
from core.tensor.tape import Tape, grad_of
from core.toy_dit.config import DistillConfig
from core.toy_dit.data import Dataset, draw_batch
from core.toy_dit.flow import FlowSample
from core.toy_dit.model import ToyDit, trainable_vars
from core.toy_dit.optim import Adam

logger = logging.getLogger(__name__)

LOSS_COLUMNS = ("step", "L_fm", "L_pred", "L_attn", "total")


def distill_losses(
    student: ToyDit,
    teacher: ToyDit,
    sample: FlowSample,
    config: DistillConfig,
    params: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """``L_fm``, ``L_pred`` and ``L_attn`` of one sample.

    With ``params`` bound on a tape the losses are tape variables.  An empty
    layer set gives ``L_attn = 0``.
    """

    if student.config != teacher.config:
        raise ShapeError("student and teacher must share one configuration")
    layers = config.layers_for(student.config.n_blocks)
    ref = teacher.forward(sample.z_t, sample.t, sample.y)
    out = student.forward(sample.z_t, sample.t, sample.y, params)
    l_fm = F.mse(sample.target, out.velocity)
    l_pred = F.mse(out.velocity, ref.velocity)
    if layers:
        gaps = [F.mse(out.attn_outputs[l], ref.attn_outputs[l]) for l in layers]
        l_attn = gaps[0]
        for gap in gaps[1:]:
            l_attn = F.add(l_attn, gap)
        l_attn = F.scale(l_attn, 1.0 / len(layers))
    else:
        l_attn = np.asarray(0.0)
    return {"L_fm": l_fm, "L_pred": l_pred, "L_attn": l_attn}


def total_loss(losses: dict[str, Any], config: DistillConfig) -> Any:
    return F.add(
        losses["L_fm"],
        F.add(
            F.scale(losses["L_pred"], config.alpha),
            F.scale(losses["L_attn"], config.beta),
        ),
    )


def batch_losses(
    student: ToyDit,
    teacher: ToyDit,
    samples: Sequence[FlowSample],
    config: DistillConfig,
    params: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Batch means of the three losses and of the weighted total."""

    sums: dict[str, Any] = {}
    for sample in samples:
        losses = distill_losses(student, teacher, sample, config, params)
        for key, value in losses.items():
            sums[key] = value if key not in sums else F.add(sums[key], value)
    means = {key: F.scale(value, 1.0 / len(samples)) for key, value in sums.items()}
    means["total"] = total_loss(means, config)
    return means


def holdout_pred_loss(student: ToyDit, teacher: ToyDit, holdout: Sequence[FlowSample]) -> float:
    """Mean ``L_pred`` over a fixed holdout batch."""

    gaps = [
        np.mean((student.predict(s.z_t, s.t, s.y) - teacher.predict(s.z_t, s.t, s.y)) ** 2)
        for s in holdout
    ]
    return float(np.mean(gaps))


@dataclass
class DistillResult:
    student: ToyDit
    curve: list[dict[str, float]] = field(default_factory=list)
    initial_holdout: float = float("nan")
    final_holdout: float = float("nan")


def _scalar(x: Any) -> float:
    return float(F.value(x))


def train_distill(
    student: ToyDit,
    teacher: ToyDit,
    dataset: Dataset,
    config: DistillConfig,
) -> DistillResult:
    """Train the student's attention weights in place on ``dataset``."""

    rng = np.random.default_rng(config.seed)
    holdout = draw_batch(dataset, config.holdout_size, np.random.default_rng(config.seed + 1))
    names = student.attention_names()
    optimiser = Adam(
        config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps
    )
    result = DistillResult(student, initial_holdout=holdout_pred_loss(student, teacher, holdout))
    logger.info(
        "distilling %s student for %d steps (initial holdout L_pred %.6f)",
        student.mask_method,
        config.steps,
        result.initial_holdout,
    )
    for step in range(1, config.steps + 1):
        batch = draw_batch(dataset, config.batch_size, rng)
        tape = Tape()
        bound = student.bind(tape, names)
        losses = batch_losses(student, teacher, batch, config, bound)
        row = {"step": step, **{k: _scalar(v) for k, v in losses.items()}}
        if not all(np.isfinite(v) for v in row.values()):
            raise DivergenceError(
                f"loss became non-finite at step {step}: "
                + ", ".join(f"{k}={v}" for k, v in row.items() if k != "step")
            )
        variables = trainable_vars(bound)
        grads = grad_of(losses["total"], variables.values())
        optimiser.step(student.params, dict(zip(variables, grads)))
        result.curve.append(row)
        if step % config.log_every == 0 or step == config.steps:
            logger.info(
                "step %d: L_fm %.5f L_pred %.5f L_attn %.5f total %.5f",
                step,
                row["L_fm"],
                row["L_pred"],
                row["L_attn"],
                row["total"],
            )
    result.final_holdout = holdout_pred_loss(student, teacher, holdout)
    return result
