"""Kernelised linear attention with the ``elu + 1`` feature map."""

from __future__ import annotations

import numpy as np

from core.attention.inputs import AttentionInputs
from core.tensor.ops import elu


def feature_map(x: np.ndarray) -> np.ndarray:
    return elu(x) + 1.0


def linear_attention(inputs: AttentionInputs) -> np.ndarray:
    """``phi(Q) (phi(K)^T V) / (phi(Q) sum_j phi(K_j)^T)``.

    Only the ``c x c`` right product is formed, never the ``n x m`` map.
    """

    phi_q = feature_map(inputs.q)
    phi_k = feature_map(inputs.k)
    kv = phi_k.T @ inputs.v
    z = phi_k.sum(axis=0)
    return (phi_q @ kv) / (phi_q @ z)[:, None]


def linear_attention_weights(inputs: AttentionInputs) -> np.ndarray:
    """Explicit ``n x m`` normalised similarities (quadratic; for checks)."""

    sim = feature_map(inputs.q) @ feature_map(inputs.k).T
    return sim / sim.sum(axis=1, keepdims=True)
