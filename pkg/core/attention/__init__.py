"""The attention zoo: exact masked attention and its efficient alternatives."""

from core.attention.agent import agent_attention, pool_queries
from core.attention.compressed import (
    compressed_grid,
    conv_downsample,
    kv_compressed_attention,
)
from core.attention.exact import (
    attention_locality,
    attention_weights,
    dense_attention,
    masked_attention,
)
from core.attention.inputs import AttentionInputs, CompressorParams
from core.attention.linear import linear_attention, linear_attention_weights
from core.attention.registry import METHOD_NAMES, TAXONOMY, build_method
from core.attention.sigmoid import sigmoid_attention
from core.attention.slot import slot_attention, write_slots

__all__ = [
    "AttentionInputs",
    "CompressorParams",
    "METHOD_NAMES",
    "TAXONOMY",
    "agent_attention",
    "attention_locality",
    "attention_weights",
    "build_method",
    "compressed_grid",
    "conv_downsample",
    "dense_attention",
    "kv_compressed_attention",
    "linear_attention",
    "linear_attention_weights",
    "masked_attention",
    "pool_queries",
    "sigmoid_attention",
    "slot_attention",
    "write_slots",
]
