"""Synthetic conditional data, teacher pretraining and teacher sampling.

The ground-truth task: each of ``n_classes`` conditions owns a fixed set of
text tokens and a small mixture of smooth wave patterns over the latent
raster.  A clean latent is one mixture component of its class plus a little
Gaussian noise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from core.errors import ConfigError, DivergenceError
from core.tensor import tape as F
from core.tensor.tape import Tape, grad_of
from core.toy_dit.config import ToyDitConfig
from core.toy_dit.flow import FlowSample, euler_sample, flow_matching_loss
from core.toy_dit.model import ToyDit, trainable_vars
from core.toy_dit.optim import Adam

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """``count`` clean latents with their text conditions and class labels."""

    z0: np.ndarray
    y: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        if not len(self.z0) == len(self.y) == len(self.labels):
            raise ConfigError("dataset arrays disagree on the sample count")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class SyntheticTask:
    config: ToyDitConfig
    text_table: np.ndarray
    modes: np.ndarray
    noise: float

    @classmethod
    def create(
        cls, config: ToyDitConfig, seed: int = 1234, n_modes: int = 2, noise: float = 0.1
    ) -> "SyntheticTask":
        rng = np.random.default_rng(seed)
        grid = config.grid
        x, y = grid.image_xy()
        text_table = rng.standard_normal((config.n_classes, config.n_text, config.text_channels))
        shape = (config.n_classes, n_modes, 1, config.latent_channels)
        fx = rng.integers(0, 3, size=shape)
        fy = rng.integers(0, 3, size=shape)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
        waves = 2.0 * np.pi * (
            fx * x[:, None] / config.width + fy * y[:, None] / config.height
        )
        modes = np.cos(waves + phase)
        return cls(config, text_table, modes, noise)

    def conditions(self, labels: np.ndarray) -> np.ndarray:
        return self.text_table[labels]

    def sample(self, count: int, rng: np.random.Generator) -> Dataset:
        """Draw ``count`` clean latents straight from the ground truth."""

        labels = rng.integers(0, self.config.n_classes, size=count)
        picks = rng.integers(0, self.modes.shape[1], size=count)
        clean = self.modes[labels, picks]
        z0 = clean + self.noise * rng.standard_normal(clean.shape)
        return Dataset(z0, self.conditions(labels), labels)


def draw_batch(dataset: Dataset, size: int, rng: np.random.Generator) -> list[FlowSample]:
    picks = rng.integers(0, len(dataset), size=size)
    return [FlowSample.draw(dataset.z0[i], dataset.y[i], rng) for i in picks]


def pretrain_teacher(
    teacher: ToyDit,
    task: SyntheticTask,
    steps: int,
    batch_size: int = 4,
    learning_rate: float = 2e-3,
    seed: int = 0,
    log_every: int = 100,
) -> list[dict[str, float]]:
    """Fit every teacher parameter to the task with the flow-matching loss."""

    rng = np.random.default_rng(seed)
    optimiser = Adam(learning_rate)
    names = list(teacher.params)
    curve = []
    for step in range(1, steps + 1):
        data = task.sample(batch_size, rng)
        tape = Tape()
        bound = teacher.bind(tape, names)
        loss = None
        for sample in draw_batch(data, batch_size, rng):
            term = flow_matching_loss(teacher, sample, bound)
            loss = term if loss is None else F.add(loss, term)
        loss = F.scale(loss, 1.0 / batch_size)
        value = float(F.value(loss))
        if not np.isfinite(value):
            raise DivergenceError(f"teacher pretraining diverged at step {step}")
        variables = trainable_vars(bound)
        optimiser.step(teacher.params, dict(zip(variables, grad_of(loss, variables.values()))))
        curve.append({"step": step, "L_fm": value})
        if step % log_every == 0 or step == steps:
            logger.info("teacher step %d: L_fm %.5f", step, value)
    return curve


def generate_teacher_dataset(
    teacher: ToyDit,
    count: int,
    sampler_steps: int = 20,
    *,
    task: SyntheticTask,
    seed: int = 0,
) -> Dataset:
    """Samples from the teacher, integrated from noise over ``sampler_steps``."""

    rng = np.random.default_rng(seed)
    cfg = teacher.config
    labels = rng.integers(0, cfg.n_classes, size=count)
    y = task.conditions(labels)
    noise = rng.standard_normal((count, cfg.grid.n_image, cfg.latent_channels))
    z0 = np.stack(
        [euler_sample(teacher.predict, noise[i], y[i], sampler_steps) for i in range(count)]
    )
    logger.info("generated %d teacher samples with %d Euler steps", count, sampler_steps)
    return Dataset(z0, y, labels)
