"""Slot attention: tokens are written into ``s`` learned slots first."""

from __future__ import annotations

import numpy as np

from core.attention.inputs import AttentionInputs
from core.errors import ShapeError
from core.tensor.ops import softmax_rows


def write_slots(inputs: AttentionInputs, slots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Slot keys and values; the writing features are the keys themselves."""

    if slots.ndim != 2 or slots.shape[0] < 1 or slots.shape[1] != inputs.c:
        raise ShapeError(f"slot matrix of shape {slots.shape} for width {inputs.c}")
    intensity = softmax_rows(slots @ inputs.k.T * inputs.scale_value)
    return intensity @ inputs.k, intensity @ inputs.v


def slot_attention(inputs: AttentionInputs, slots: np.ndarray) -> np.ndarray:
    k_slots, v_slots = write_slots(inputs, slots)
    return softmax_rows(inputs.q @ k_slots.T * inputs.scale_value) @ v_slots
