"""Common inputs of every attention method."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from core.errors import ShapeError
from core.geometry.grid import TokenGrid
from core.tensor.ops import check_finite


@dataclass(frozen=True)
class AttentionInputs:
    """Queries ``q`` (n x c), keys ``k`` (m x c) and values ``v`` (m x c).

    Keys and values are laid out on ``grid`` (``m == grid.n``).  ``scale``
    defaults to ``1 / sqrt(c)``.
    """

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    grid: TokenGrid
    scale: float | None = None

    def __post_init__(self) -> None:
        for name in ("q", "k", "v"):
            arr = getattr(self, name)
            if arr.ndim != 2:
                raise ShapeError(f"{name} must be a matrix, got shape {arr.shape}")
            check_finite(arr, name)
        if self.q.shape[1] != self.k.shape[1]:
            raise ShapeError(f"q width {self.q.shape[1]} != k width {self.k.shape[1]}")
        if self.k.shape[0] != self.v.shape[0]:
            raise ShapeError(f"{self.k.shape[0]} keys but {self.v.shape[0]} values")
        if self.v.shape[1] != self.k.shape[1]:
            raise ShapeError("value width must equal key width")
        if self.k.shape[0] != self.grid.n:
            raise ShapeError(f"{self.k.shape[0]} keys for a grid of {self.grid.n} tokens")

    @property
    def c(self) -> int:
        return self.q.shape[1]

    @property
    def m(self) -> int:
        return self.k.shape[0]

    @property
    def scale_value(self) -> float:
        return self.scale if self.scale is not None else 1.0 / np.sqrt(self.c)

    @classmethod
    def random(
        cls,
        grid: TokenGrid,
        c: int,
        rng: np.random.Generator,
        dtype: np.dtype | type = np.float64,
    ) -> "AttentionInputs":
        """Standard normal self-attention inputs on ``grid``."""

        q, k, v = (rng.standard_normal((grid.n, c)).astype(dtype) for _ in range(3))
        return cls(q, k, v, grid)


@dataclass
class CompressorParams:
    """Learnable pieces of the compression-based methods.

    ``conv_k`` / ``conv_v`` are group-wise (one kernel per channel) 4x4
    stride-4 kernels of shape ``(c, 4, 4)``; ``slots`` is the ``s x c`` slot
    writing matrix; ``sigmoid_bias`` of ``None`` means ``-ln(m)``.
    """

    conv_k: np.ndarray
    conv_v: np.ndarray
    slots: np.ndarray
    agent_factor: int = 2
    sigmoid_bias: float | None = None

    def __post_init__(self) -> None:
        if self.slots.ndim != 2 or self.slots.shape[0] < 1:
            raise ShapeError("slot matrix needs at least one row")
        if self.conv_k.shape != self.conv_v.shape or self.conv_k.shape[1:] != (4, 4):
            raise ShapeError("conv kernels must have shape (c, 4, 4)")
        if self.agent_factor < 1:
            raise ShapeError("agent down-sampling factor must be at least 1")

    @classmethod
    def initial(
        cls,
        c: int,
        n_slots: int,
        rng: np.random.Generator,
        agent_factor: int = 2,
        sigmoid_bias: float | None = None,
    ) -> "CompressorParams":
        """Average-pooling kernels (all ``1/16``) and random slots."""

        kernel = np.full((c, 4, 4), 1.0 / 16.0)
        return cls(
            conv_k=kernel.copy(),
            conv_v=kernel.copy(),
            slots=rng.standard_normal((n_slots, c)),
            agent_factor=agent_factor,
            sigmoid_bias=sigmoid_bias,
        )
