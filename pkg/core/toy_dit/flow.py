"""Rectified-flow interpolant, the flow-matching loss and an Euler sampler."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from core.errors import ConfigError, ShapeError
from core.tensor import tape as F

logger = logging.getLogger(__name__)

Velocity = Callable[[np.ndarray, float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FlowSample:
    """One training example: ``z_t = (1 - t) z0 + t eps``, target ``eps - z0``."""

    z0: np.ndarray
    eps: np.ndarray
    t: float
    y: np.ndarray

    def __post_init__(self) -> None:
        if self.z0.shape != self.eps.shape:
            raise ShapeError(f"z0 {self.z0.shape} and noise {self.eps.shape} differ")
        if not 0.0 <= self.t <= 1.0:
            raise ConfigError(f"t must lie in [0, 1], got {self.t}")

    @property
    def z_t(self) -> np.ndarray:
        return (1.0 - self.t) * self.z0 + self.t * self.eps

    @property
    def target(self) -> np.ndarray:
        return self.eps - self.z0

    @classmethod
    def draw(cls, z0: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> "FlowSample":
        t = float(rng.uniform(0.0, 1.0))
        return cls(z0, rng.standard_normal(z0.shape), t, y)


def flow_matching_loss(model: Any, sample: FlowSample, params: dict[str, Any] | None = None):
    """Mean squared error between ``eps - z0`` and the model's prediction."""

    prediction = model.forward(sample.z_t, sample.t, sample.y, params).velocity
    return F.mse(sample.target, prediction)


def time_steps(steps: int) -> list[tuple[float, float]]:
    """``(t_now, t_next)`` pairs of a uniform schedule from 1 down to 0."""

    if steps < 1:
        raise ConfigError(f"sampler needs at least one step, got {steps}")
    ts = np.linspace(1.0, 0.0, steps + 1)
    return [(float(a), float(b)) for a, b in zip(ts[:-1], ts[1:])]


def euler_step(z: np.ndarray, velocity: np.ndarray, t_now: float, t_next: float) -> np.ndarray:
    return z - (t_now - t_next) * velocity


def euler_trajectory(
    velocity: Velocity, z_start: np.ndarray, y: np.ndarray, steps: int = 20
) -> list[np.ndarray]:
    """Latents after every step of ``dz/dt = v`` integrated from ``t = 1`` to ``t = 0``."""

    z = np.array(z_start, dtype=np.float64)
    out = []
    for t_now, t_next in time_steps(steps):
        z = euler_step(z, velocity(z, t_now, y), t_now, t_next)
        out.append(z)
    return out


def euler_sample(
    velocity: Velocity, z_start: np.ndarray, y: np.ndarray, steps: int = 20
) -> np.ndarray:
    return euler_trajectory(velocity, z_start, y, steps)[-1]
