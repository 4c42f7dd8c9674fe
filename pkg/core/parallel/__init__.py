"""Simulated patch-parallel inference with halo exchange."""

from core.parallel.attention import (
    TEXT_MODES,
    comm_report,
    distributed_clear_attention,
    exact_text_attention,
    make_transport,
    merge_average,
    merge_exact,
    text_average_gap,
    text_patch_average,
    text_patch_partials,
)
from core.parallel.inference import (
    DIVERGENCE_COLUMNS,
    InferenceResult,
    divergence_rows,
    simulate_inference,
    single_worker_inference,
)
from core.parallel.ledger import LEDGER_COLUMNS, LEDGER_KEYS, Ledger, LedgerEntry
from core.parallel.plan import PatchPlan, make_plan
from core.parallel.transport import Channel, MsgKind, QueueTransport, WorkerMsg

__all__ = [
    "DIVERGENCE_COLUMNS",
    "LEDGER_COLUMNS",
    "LEDGER_KEYS",
    "TEXT_MODES",
    "Channel",
    "InferenceResult",
    "Ledger",
    "LedgerEntry",
    "MsgKind",
    "PatchPlan",
    "QueueTransport",
    "WorkerMsg",
    "comm_report",
    "distributed_clear_attention",
    "divergence_rows",
    "exact_text_attention",
    "make_plan",
    "make_transport",
    "merge_average",
    "merge_exact",
    "simulate_inference",
    "single_worker_inference",
    "text_average_gap",
    "text_patch_average",
    "text_patch_partials",
]
