"""Sigmoid attention: elementwise sigmoid instead of a row softmax."""

from __future__ import annotations

import numpy as np

from core.attention.inputs import AttentionInputs
from core.tensor.ops import sigmoid


def default_bias(m: int) -> float:
    # keeps the total attention mass O(1) as the key count grows
    return -float(np.log(m)) if m > 0 else 0.0


def sigmoid_attention(inputs: AttentionInputs, b: float | None = None) -> np.ndarray:
    bias = default_bias(inputs.m) if b is None else b
    scores = (inputs.q @ inputs.k.T) * inputs.scale_value + bias
    return sigmoid(scores) @ inputs.v
