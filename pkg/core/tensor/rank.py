"""Numerical and exact matrix rank."""

from __future__ import annotations

import logging

import numpy as np

from core.errors import MaskError
from core.tensor.ops import check_finite

logger = logging.getLogger(__name__)

# Reduced 0/1 matrices up to this many rows are eliminated over the integers.
EXACT_INTEGER_LIMIT = 256
_PRIMES = (2_147_483_647, 2_147_483_629, 2_147_483_587)


def rank_of(m: np.ndarray, tol: float = 1e-8) -> int:
    """Number of singular values above ``tol`` times the largest one."""

    m = check_finite(np.asarray(m, dtype=np.float64), "rank input")
    if m.size == 0:
        return 0
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int((sv > tol * sv[0]).sum())


def exact_rank(m: np.ndarray) -> int:
    """Rank over the rationals of an integer matrix (typically 0/1 masks).

    Duplicate rows and columns are dropped first since they never change the
    rank.  Small remainders go through fraction-free integer elimination; large
    ones through elimination modulo several large primes, whose maximum is the
    rational rank unless every prime divides all maximal nonzero minors.
    """

    a = np.asarray(m)
    if not np.issubdtype(a.dtype, np.integer) and a.dtype != np.bool_:
        if not np.array_equal(a, np.round(a)):
            raise MaskError("exact_rank expects an integer matrix")
    a = np.asarray(np.round(a), dtype=np.int64)
    if a.size == 0:
        return 0
    a = np.unique(a, axis=0)
    a = np.unique(a, axis=1)
    a = a[np.any(a != 0, axis=1)]
    if a.shape[0] == 0:
        return 0
    if a.shape[0] > a.shape[1]:
        a = a.T
    if a.shape[0] <= EXACT_INTEGER_LIMIT:
        return _bareiss_rank(a)
    logger.debug(
        "exact rank of %dx%d matrix via modular elimination", a.shape[0], a.shape[1]
    )
    return max(_rank_mod_p(a, p) for p in _PRIMES)


def _bareiss_rank(a: np.ndarray) -> int:
    work = a.astype(object)
    n_rows, n_cols = work.shape
    rank = 0
    prev = 1
    for col in range(n_cols):
        if rank == n_rows:
            break
        nz = [r for r in range(rank, n_rows) if work[r, col] != 0]
        if not nz:
            continue
        pivot_row = nz[0]
        if pivot_row != rank:
            work[[rank, pivot_row]] = work[[pivot_row, rank]]
        pivot = work[rank, col]
        if rank + 1 < n_rows:
            below = work[rank + 1 :, col].copy()
            block = work[rank + 1 :, col + 1 :]
            work[rank + 1 :, col + 1 :] = (
                pivot * block - np.outer(below, work[rank, col + 1 :])
            ) // prev
            work[rank + 1 :, col] = 0
        prev = pivot
        rank += 1
    return rank


def _rank_mod_p(a: np.ndarray, p: int) -> int:
    work = np.mod(a, p).astype(np.int64)
    n_rows, n_cols = work.shape
    rank = 0
    for col in range(n_cols):
        if rank == n_rows:
            break
        nz = np.nonzero(work[rank:, col])[0]
        if nz.size == 0:
            continue
        pivot_row = rank + int(nz[0])
        if pivot_row != rank:
            work[[rank, pivot_row]] = work[[pivot_row, rank]]
        inv = pow(int(work[rank, col]), p - 2, p)
        work[rank] = (work[rank] * inv) % p
        below = work[rank + 1 :, col]
        rows = rank + 1 + np.nonzero(below)[0]
        if rows.size:
            factors = work[rows, col]
            work[rows] = (work[rows] - np.outer(factors, work[rank]) % p) % p
        rank += 1
    return rank
