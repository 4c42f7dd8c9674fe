"""Plain numpy building blocks shared by the attention methods and the tape.

Matrices are ordinary two-dimensional :class:`numpy.ndarray` objects.  The
working precision is 64-bit unless a caller asks for something else (see
:func:`core.settings.default_dtype`).
"""

from __future__ import annotations

import numpy as np

from core.errors import NumericError, ShapeError


def as_matrix(x: object, dtype: np.dtype | type | None = None) -> np.ndarray:
    """Return ``x`` as a 2D floating point array, validating the shape."""

    arr = np.asarray(x, dtype=dtype if dtype is not None else np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"expected a matrix, got array with shape {arr.shape}")
    return arr


def check_finite(x: np.ndarray, what: str = "input") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"{what} contains non-finite entries")
    return x


def _masked_scores(x: np.ndarray, additive_mask: np.ndarray | None) -> np.ndarray:
    if x.ndim != 2:
        raise ShapeError(f"softmax expects a matrix, got shape {x.shape}")
    if np.isnan(x).any() or np.isposinf(x).any():
        raise NumericError("softmax input contains NaN or +inf")
    if additive_mask is None:
        return x
    mask = np.asarray(additive_mask)
    if mask.shape != x.shape:
        raise ShapeError(f"mask shape {mask.shape} does not match scores {x.shape}")
    if np.isnan(mask).any() or np.isposinf(mask).any():
        raise NumericError("additive mask may only contain finite values or -inf")
    return x + mask


def softmax_rows(x: np.ndarray, additive_mask: np.ndarray | None = None) -> np.ndarray:
    """Row-wise softmax with an optional additive ``0 / -inf`` mask.

    Rows whose entries are all masked come back as zeros instead of NaN.
    """

    scores = _masked_scores(np.asarray(x), additive_mask)
    row_max = scores.max(axis=1, keepdims=True)
    empty = ~np.isfinite(row_max)
    row_max = np.where(empty, 0.0, row_max)
    e = np.exp(scores - row_max)
    total = e.sum(axis=1, keepdims=True)
    return np.divide(e, total, out=np.zeros_like(e), where=total > 0)


def logsumexp_rows(
    x: np.ndarray, additive_mask: np.ndarray | None = None
) -> np.ndarray:
    """Return the per-row log partition mass as a column vector.

    Fully masked rows yield ``-inf``.
    """

    scores = _masked_scores(np.asarray(x), additive_mask)
    row_max = scores.max(axis=1, keepdims=True)
    empty = ~np.isfinite(row_max)
    safe_max = np.where(empty, 0.0, row_max)
    total = np.exp(scores - safe_max).sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        lse = safe_max + np.log(total)
    return np.where(empty, -np.inf, lse)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x, dtype=np.result_type(x, np.float64))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def elu(x: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    return np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0.0)))
