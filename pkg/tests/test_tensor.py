import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).resolve().parents[1]))

from core.errors import MaskError, NumericError, ShapeError, TapeError  # noqa: E402
from core.tensor import (  # noqa: E402
    Tape,
    exact_rank,
    grad_of,
    logsumexp_rows,
    rank_of,
    sigmoid,
    softmax_rows,
)
from core.tensor import tape as F  # noqa: E402


def numeric_grad(fn, x, eps=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + eps
        hi = fn(x)
        x[idx] = old - eps
        lo = fn(x)
        x[idx] = old
        g[idx] = (hi - lo) / (2 * eps)
    return g


def test_softmax_rows_are_distributions_and_shift_invariant():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((5, 7))
    p = softmax_rows(x)
    assert np.allclose(p.sum(axis=1), 1.0)
    assert np.allclose(softmax_rows(x + 1000.0), p)


def test_softmax_masked_and_empty_rows():
    x = np.zeros((2, 3))
    mask = np.array([[0.0, -np.inf, 0.0], [-np.inf, -np.inf, -np.inf]])
    p = softmax_rows(x, mask)
    assert np.allclose(p[0], [0.5, 0.0, 0.5])
    assert np.all(p[1] == 0.0)
    lse = logsumexp_rows(x, mask)
    assert lse[0, 0] == pytest.approx(np.log(2.0))
    assert lse[1, 0] == -np.inf


def test_softmax_rejects_nan_and_bad_mask_shape():
    with pytest.raises(NumericError):
        softmax_rows(np.array([[np.nan, 0.0]]))
    with pytest.raises(ShapeError):
        softmax_rows(np.zeros((2, 2)), np.zeros((2, 3)))


def test_sigmoid_is_stable_for_large_inputs():
    out = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert np.allclose(out, [0.0, 0.5, 1.0])
    assert np.all(np.isfinite(out))


def test_tape_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    x0 = rng.standard_normal((4, 6))
    w0 = rng.standard_normal((6, 6)) / 3
    target = rng.standard_normal((4, 6))
    mask = np.zeros((4, 4))
    mask[0, 3] = -np.inf

    def loss_of(x, w):
        h = F.gelu(F.rms_norm(x))
        a = F.softmax(F.matmul(h, F.transpose(h)), mask)
        out = F.matmul(F.matmul(a, h), w)
        return F.mse(out, target)

    tape = Tape()
    x, w = tape.param(x0.copy()), tape.param(w0.copy())
    loss = loss_of(x, w)
    gx, gw = grad_of(loss, [x, w])

    nx = numeric_grad(lambda v: float(loss_of(v, w0)), x0.copy())
    nw = numeric_grad(lambda v: float(loss_of(x0, v)), w0.copy())
    assert np.allclose(gx, nx, atol=1e-6, rtol=1e-4)
    assert np.allclose(gw, nw, atol=1e-6, rtol=1e-4)


def test_pairwise_rope_scores_gradient():
    rng = np.random.default_rng(2)
    q0 = rng.standard_normal((3, 4))
    k0 = rng.standard_normal((5, 4))
    angles = rng.uniform(-np.pi, np.pi, size=(3, 5, 2))
    cos, sin = np.cos(angles), np.sin(angles)

    def loss_of(q, k):
        return F.sum_all(F.square(F.pairwise_rope_scores(q, k, cos, sin)))

    tape = Tape()
    q, k = tape.param(q0.copy()), tape.param(k0.copy())
    gq, gk = grad_of(loss_of(q, k), [q, k])
    num_q = numeric_grad(lambda v: float(loss_of(v, k0)), q0.copy())
    num_k = numeric_grad(lambda v: float(loss_of(q0, v)), k0.copy())
    assert np.allclose(gq, num_q, rtol=1e-5, atol=1e-6)
    assert np.allclose(gk, num_k, rtol=1e-5, atol=1e-6)


def test_ops_without_tape_return_arrays():
    out = F.add(np.ones((2, 2)), np.ones((2, 2)))
    assert isinstance(out, np.ndarray)
    assert np.all(out == 2.0)


def test_unused_variable_gets_zero_gradient():
    tape = Tape()
    a = tape.param(np.ones((2, 2)))
    b = tape.param(np.ones((2, 2)))
    (gb,) = grad_of(F.sum_all(a), [b])
    assert np.all(gb == 0.0)


def test_foreign_variable_is_rejected():
    tape, other = Tape(), Tape()
    loss = F.sum_all(tape.param(np.ones((2, 2))))
    stray = other.param(np.ones((2, 2)))
    with pytest.raises(TapeError):
        grad_of(loss, [stray])
    with pytest.raises(TapeError):
        F.add(tape.param(np.ones(2)), stray)


def test_non_scalar_loss_is_rejected():
    tape = Tape()
    x = tape.param(np.ones((2, 2)))
    with pytest.raises(ShapeError):
        grad_of(F.square(x), [x])


def test_rank_of_and_exact_rank_agree_on_small_masks():
    rng = np.random.default_rng(3)
    m = rng.random((20, 20)) < 0.3
    assert exact_rank(m) == rank_of(m.astype(float))
    assert exact_rank(np.eye(5, dtype=bool)) == 5
    assert exact_rank(np.ones((6, 6), dtype=bool)) == 1
    assert exact_rank(np.zeros((3, 3))) == 0


def test_exact_rank_rejects_fractions():
    with pytest.raises(MaskError):
        exact_rank(np.array([[0.5, 1.0], [1.0, 0.0]]))


@pytest.mark.parametrize("shape", [(1, 1), (3, 512), (64, 64), (512, 512)])
def test_softmax_rows_sum_to_one_at_full_precision(shape):
    rng = np.random.default_rng(shape[0] * shape[1])
    x = 10.0 * rng.standard_normal(shape)
    assert np.max(np.abs(softmax_rows(x).sum(axis=1) - 1.0)) <= 1e-12

    mask = np.where(rng.random(shape) < 0.5, -np.inf, 0.0)
    mask[:, 0] = 0.0
    p = softmax_rows(x, mask)
    assert np.max(np.abs(p.sum(axis=1) - 1.0)) <= 1e-12
    assert np.all(p[np.isinf(mask)] == 0.0)


def test_rank_of_examples():
    assert rank_of(np.eye(5)) == 5
    rng = np.random.default_rng(8)
    u = rng.standard_normal(7)
    v = rng.standard_normal(5)
    assert rank_of(np.outer(u, v)) == 1
    assert rank_of(np.zeros((3, 4))) == 0


@pytest.mark.parametrize("sizes", [[3], [2, 2], [1, 3, 2], [2, 1, 4, 1, 3]])
def test_block_diagonal_of_ones_has_one_rank_per_block(sizes):
    n = sum(sizes)
    m = np.zeros((n, n))
    start = 0
    for size in sizes:
        m[start : start + size, start : start + size] = 1.0
        start += size
    assert rank_of(m) == len(sizes)
    assert exact_rank(m.astype(bool)) == len(sizes)


@pytest.mark.parametrize("seed", range(4))
def test_rank_is_invariant_under_permutations(seed):
    rng = np.random.default_rng(seed)
    low = rng.standard_normal((12, 4)) @ rng.standard_normal((4, 9))
    rows = rng.permutation(12)
    cols = rng.permutation(9)
    assert rank_of(low) == 4
    assert rank_of(low[rows][:, cols]) == 4

    mask = rng.random((16, 16)) < 0.25
    shuffled = mask[rng.permutation(16)][:, rng.permutation(16)]
    assert exact_rank(shuffled) == exact_rank(mask)
    assert rank_of(shuffled.astype(float)) == rank_of(mask.astype(float))
