"""Every attention method behind the common :class:`AttentionMethod` interface.

``build_method`` is the single factory used by the benchmark command and
the tests; each adapter declares where it stands on the four taxonomy
properties.
"""

from __future__ import annotations

import logging
from typing import Any

import numpy as np

from core.attention.agent import agent_attention
from core.attention.compressed import kv_compressed_attention
from core.attention.exact import masked_attention
from core.attention.inputs import AttentionInputs, CompressorParams
from core.attention.linear import linear_attention
from core.attention.sigmoid import sigmoid_attention
from core.attention.slot import slot_attention
from core.errors import ConfigError
from core.interfaces.attention import AttentionMethod, Support, Taxonomy
from core.interfaces.mask_builder import MaskBuilder
from core.masks.builders import builder_for

logger = logging.getLogger(__name__)

Y, N, MAYBE = Support.YES, Support.NO, Support.MAYBE

TAXONOMY: dict[str, Taxonomy] = {
    "full": Taxonomy(Y, Y, Y, Y),
    "clear": Taxonomy(Y, Y, Y, Y),
    "neighborhood": Taxonomy(Y, Y, Y, Y),
    "swin": Taxonomy(Y, Y, N, Y),
    "strided": Taxonomy(N, Y, Y, Y),
    "linear": Taxonomy(Y, N, N, Y),
    "sigmoid": Taxonomy(Y, N, Y, Y),
    "kv_compressed": Taxonomy(Y, Y, Y, N),
    "agent": Taxonomy(MAYBE, Y, Y, N),
    "slot": Taxonomy(N, Y, N, N),
}

MASK_BASED = ("full", "clear", "neighborhood", "swin", "strided")
METHOD_NAMES = tuple(TAXONOMY)


class MaskedMethod(AttentionMethod):
    """Softmax attention restricted by a sparse mask."""

    def __init__(self, builder: MaskBuilder) -> None:
        self.builder = builder
        self.name = builder.tag
        self.taxonomy = TAXONOMY[builder.tag]

    def attend(self, inputs: AttentionInputs) -> np.ndarray:
        return masked_attention(inputs, self.builder.build(inputs.grid))


class LinearMethod(AttentionMethod):
    name = "linear"
    taxonomy = TAXONOMY["linear"]

    def attend(self, inputs: AttentionInputs) -> np.ndarray:
        return linear_attention(inputs)


class SigmoidMethod(AttentionMethod):
    name = "sigmoid"
    taxonomy = TAXONOMY["sigmoid"]

    def __init__(self, bias: float | None = None) -> None:
        self.bias = bias

    def attend(self, inputs: AttentionInputs) -> np.ndarray:
        return sigmoid_attention(inputs, self.bias)


class CompressedMethod(AttentionMethod):
    name = "kv_compressed"
    taxonomy = TAXONOMY["kv_compressed"]

    def __init__(self, params: CompressorParams) -> None:
        self.params = params

    def attend(self, inputs: AttentionInputs) -> np.ndarray:
        return kv_compressed_attention(inputs, self.params)


class AgentMethod(AttentionMethod):
    name = "agent"
    taxonomy = TAXONOMY["agent"]

    def __init__(self, down_factor: int) -> None:
        self.down_factor = down_factor

    def attend(self, inputs: AttentionInputs) -> np.ndarray:
        return agent_attention(inputs, self.down_factor)


class SlotMethod(AttentionMethod):
    name = "slot"
    taxonomy = TAXONOMY["slot"]

    def __init__(self, slots: np.ndarray) -> None:
        self.slots = slots

    def attend(self, inputs: AttentionInputs) -> np.ndarray:
        return slot_attention(inputs, self.slots)


def build_method(
    name: str,
    c: int,
    rng: np.random.Generator | None = None,
    layer_index: int = 0,
    **params: Any,
) -> AttentionMethod:
    """Instantiate method ``name`` for head width ``c``.

    Mask parameters are those of :func:`core.masks.builders.builder_for`;
    the others are ``bias`` (sigmoid), ``down_factor`` (agent) and
    ``n_slots`` (slot, default 8, drawn from ``rng``).
    """

    if name in MASK_BASED:
        return MaskedMethod(builder_for(name, layer_index, **params))
    if name == "linear":
        return LinearMethod()
    if name == "sigmoid":
        return SigmoidMethod(params.get("bias"))
    if name == "kv_compressed":
        return CompressedMethod(
            CompressorParams.initial(c, 1, rng or np.random.default_rng(0))
        )
    if name == "agent":
        return AgentMethod(int(params.get("down_factor") or 2))
    if name == "slot":
        rng = rng or np.random.default_rng(0)
        n_slots = int(params.get("n_slots") or 8)
        logger.debug("drawing %d slots of width %d", n_slots, c)
        return SlotMethod(rng.standard_normal((n_slots, c)))
    raise ConfigError(f"unknown attention method {name!r}; choose from {METHOD_NAMES}")
