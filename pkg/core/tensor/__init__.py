"""Dense numerics used throughout the lab: stable softmax, a small tape and rank."""

from core.tensor.ops import (
    as_matrix,
    check_finite,
    elu,
    logsumexp_rows,
    sigmoid,
    softmax_rows,
)
from core.tensor.rank import exact_rank, rank_of
from core.tensor.tape import Tape, Var, grad_of

__all__ = [
    "Tape",
    "Var",
    "as_matrix",
    "check_finite",
    "elu",
    "exact_rank",
    "grad_of",
    "logsumexp_rows",
    "rank_of",
    "sigmoid",
    "softmax_rows",
]
