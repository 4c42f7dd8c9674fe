"""Minimal reverse-mode differentiation over the fixed op set of the toy model.

A :class:`Tape` records every primitive applied to a :class:`Var` as a
Wengert list.  Each record stores its parents and a closure that maps the
output gradient to one gradient per parent; :meth:`Tape.backward` walks the
list in reverse and accumulates.

The op functions in this module accept plain arrays as well as variables.
When none of the operands lives on a tape the op simply returns the numpy
result, so the same model code serves training (with a tape) and inference
(without one).
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from core.errors import ShapeError, TapeError
from core.tensor.ops import softmax_rows

Backward = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Var:
    """A value recorded on a tape."""

    __slots__ = ("value", "tape", "index", "parents", "backward", "trainable", "name")

    def __init__(
        self,
        value: np.ndarray,
        tape: "Tape",
        index: int,
        parents: tuple = (),
        backward: Backward | None = None,
        trainable: bool = False,
        name: str | None = None,
    ) -> None:
        self.value = value
        self.tape = tape
        self.index = index
        self.parents = parents
        self.backward = backward
        self.trainable = trainable
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        label = self.name or f"v{self.index}"
        return f"Var({label}, shape={self.value.shape})"


class Tape:
    """Records primitive ops for one forward pass."""

    def __init__(self) -> None:
        self._vars: list[Var] = []

    def __len__(self) -> int:
        return len(self._vars)

    def leaf(
        self, value: np.ndarray, *, trainable: bool = False, name: str | None = None
    ) -> Var:
        var = Var(
            np.asarray(value),
            self,
            len(self._vars),
            trainable=trainable,
            name=name,
        )
        self._vars.append(var)
        return var

    def param(self, value: np.ndarray, name: str | None = None) -> Var:
        return self.leaf(value, trainable=True, name=name)

    def record(self, value: np.ndarray, parents: tuple, backward: Backward) -> Var:
        var = Var(value, self, len(self._vars), parents=parents, backward=backward)
        self._vars.append(var)
        return var

    def owns(self, var: Var) -> bool:
        return (
            var.tape is self
            and var.index < len(self._vars)
            and self._vars[var.index] is var
        )

    def backward(self, loss: Var) -> dict[int, np.ndarray]:
        """Return gradients of the scalar ``loss`` keyed by variable index."""

        if not self.owns(loss):
            raise TapeError("loss was not recorded on this tape")
        if loss.value.size != 1:
            raise ShapeError(f"loss must be a scalar, got shape {loss.value.shape}")

        grads: dict[int, np.ndarray] = {loss.index: np.ones_like(loss.value)}
        for index in range(loss.index, -1, -1):
            var = self._vars[index]
            if var.backward is None:
                continue
            g = grads.pop(index, None)
            if g is None:
                continue
            for parent, pg in zip(var.parents, var.backward(g)):
                if not isinstance(parent, Var) or pg is None:
                    continue
                pg = _unbroadcast(pg, parent.value.shape)
                prev = grads.get(parent.index)
                grads[parent.index] = pg if prev is None else prev + pg
        return grads


def grad_of(loss: Var, wrt: Iterable[Var]) -> list[np.ndarray]:
    """Gradients of ``loss`` with respect to each variable in ``wrt``.

    Variables that do not influence the loss get a zero gradient.
    """

    tape = loss.tape
    wrt = list(wrt)
    for var in wrt:
        if not isinstance(var, Var) or not tape.owns(var):
            raise TapeError(f"{var!r} is not recorded on the loss tape")
    grads = tape.backward(loss)
    return [
        grads.get(var.index, np.zeros_like(var.value)).reshape(var.value.shape)
        for var in wrt
    ]


# -- helpers ---------------------------------------------------------------


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _tape_of(*xs: object) -> Tape | None:
    tape = None
    for x in xs:
        if isinstance(x, Var):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise TapeError("operands belong to different tapes")
    return tape


def value(x: object) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x)


# -- primitives ------------------------------------------------------------


def add(a, b):
    tape = _tape_of(a, b)
    out = value(a) + value(b)
    if tape is None:
        return out
    return tape.record(out, (a, b), lambda g: (g, g))


def sub(a, b):
    tape = _tape_of(a, b)
    out = value(a) - value(b)
    if tape is None:
        return out
    return tape.record(out, (a, b), lambda g: (g, -g))


def mul(a, b):
    tape = _tape_of(a, b)
    av, bv = value(a), value(b)
    out = av * bv
    if tape is None:
        return out
    return tape.record(out, (a, b), lambda g: (g * bv, g * av))


def scale(a, factor: float):
    tape = _tape_of(a)
    out = value(a) * factor
    if tape is None:
        return out
    return tape.record(out, (a,), lambda g: (g * factor,))


def matmul(a, b):
    tape = _tape_of(a, b)
    av, bv = value(a), value(b)
    out = av @ bv
    if tape is None:
        return out
    return tape.record(out, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a):
    tape = _tape_of(a)
    out = value(a).T
    if tape is None:
        return out
    return tape.record(out, (a,), lambda g: (g.T,))


def sum_all(a):
    tape = _tape_of(a)
    av = value(a)
    out = np.asarray(av.sum())
    if tape is None:
        return out
    return tape.record(out, (a,), lambda g: (np.full(av.shape, float(g)),))


def mean_all(a):
    tape = _tape_of(a)
    av = value(a)
    out = np.asarray(av.mean())
    if tape is None:
        return out
    return tape.record(out, (a,), lambda g: (np.full(av.shape, float(g) / av.size),))


def square(a):
    tape = _tape_of(a)
    av = value(a)
    out = av * av
    if tape is None:
        return out
    return tape.record(out, (a,), lambda g: (2.0 * av * g,))


def mse(a, b):
    """Mean of squared differences over all entries."""

    return mean_all(square(sub(a, b)))


def tanh(a):
    tape = _tape_of(a)
    out = np.tanh(value(a))
    if tape is None:
        return out
    return tape.record(out, (a,), lambda g: (g * (1.0 - out * out),))


_GELU_K = np.sqrt(2.0 / np.pi)
_GELU_C = 0.044715


def gelu(a):
    """Tanh approximation of GELU."""

    tape = _tape_of(a)
    x = value(a)
    t = np.tanh(_GELU_K * (x + _GELU_C * x**3))
    out = 0.5 * x * (1.0 + t)
    if tape is None:
        return out

    def backward(g):
        dt = (1.0 - t * t) * _GELU_K * (1.0 + 3.0 * _GELU_C * x * x)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * dt),)

    return tape.record(out, (a,), backward)


def rms_norm(a, eps: float = 1e-6):
    """Normalise every row to unit root-mean-square (no learned gain)."""

    tape = _tape_of(a)
    x = value(a)
    width = x.shape[1]
    rms = np.sqrt((x * x).mean(axis=1, keepdims=True) + eps)
    out = x / rms
    if tape is None:
        return out

    def backward(g):
        dot = (g * x).sum(axis=1, keepdims=True)
        return (g / rms - x * dot / (width * rms**3),)

    return tape.record(out, (a,), backward)


def softmax(a, additive_mask: np.ndarray | None = None):
    tape = _tape_of(a)
    out = softmax_rows(value(a), additive_mask)
    if tape is None:
        return out

    def backward(g):
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return tape.record(out, (a,), backward)


def rotate_pairs(a, cos: np.ndarray, sin: np.ndarray):
    """Rotate interleaved channel pairs ``(2p, 2p+1)`` row by row.

    ``cos`` and ``sin`` have one column per pair.
    """

    tape = _tape_of(a)
    x = value(a)
    if cos.shape != (x.shape[0], x.shape[1] // 2) or x.shape[1] % 2:
        raise ShapeError(
            f"rotation tables {cos.shape} do not fit operand {x.shape}"
        )
    out = _rotate(x, cos, sin)
    if tape is None:
        return out
    return tape.record(out, (a,), lambda g: (_rotate(g, cos, -sin),))


def _rotate(x: np.ndarray, cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    even, odd = x[:, 0::2], x[:, 1::2]
    out = np.empty_like(x, dtype=np.result_type(x, cos))
    out[:, 0::2] = even * cos - odd * sin
    out[:, 1::2] = even * sin + odd * cos
    return out


def pairwise_rope_scores(q, k, cos: np.ndarray, sin: np.ndarray):
    """Dot products of rotated queries and keys from per-pair angle tables.

    ``cos`` and ``sin`` have shape ``(n_q, n_k, pairs)`` and hold the angle
    of every query/key/channel-pair triple, which lets callers use relative
    distances that no per-token rotation can express.
    """

    tape = _tape_of(q, k)
    qv, kv = value(q), value(k)
    qa, qb = qv[:, 0::2], qv[:, 1::2]
    ka, kb = kv[:, 0::2], kv[:, 1::2]
    if cos.shape != (qv.shape[0], kv.shape[0], qa.shape[1]):
        raise ShapeError(
            f"angle tables {cos.shape} do not fit q {qv.shape} and k {kv.shape}"
        )
    same = qa[:, None, :] * ka[None] + qb[:, None, :] * kb[None]
    cross = qa[:, None, :] * kb[None] - qb[:, None, :] * ka[None]
    out = (same * cos + cross * sin).sum(axis=-1)
    if tape is None:
        return out

    def backward(g):
        gc = g[:, :, None] * cos
        gs = g[:, :, None] * sin
        dq = np.empty_like(qv, dtype=out.dtype)
        dk = np.empty_like(kv, dtype=out.dtype)
        dq[:, 0::2] = np.einsum("ijp,jp->ip", gc, ka) + np.einsum("ijp,jp->ip", gs, kb)
        dq[:, 1::2] = np.einsum("ijp,jp->ip", gc, kb) - np.einsum("ijp,jp->ip", gs, ka)
        dk[:, 0::2] = np.einsum("ijp,ip->jp", gc, qa) - np.einsum("ijp,ip->jp", gs, qb)
        dk[:, 1::2] = np.einsum("ijp,ip->jp", gc, qb) + np.einsum("ijp,ip->jp", gs, qa)
        return dq, dk

    return tape.record(out, (q, k), backward)


def slice_cols(a, start: int, stop: int):
    tape = _tape_of(a)
    x = value(a)
    out = x[:, start:stop]
    if tape is None:
        return out

    def backward(g):
        full = np.zeros_like(x, dtype=g.dtype)
        full[:, start:stop] = g
        return (full,)

    return tape.record(out, (a,), backward)


def slice_rows(a, start: int, stop: int):
    tape = _tape_of(a)
    x = value(a)
    out = x[start:stop]
    if tape is None:
        return out

    def backward(g):
        full = np.zeros_like(x, dtype=g.dtype)
        full[start:stop] = g
        return (full,)

    return tape.record(out, (a,), backward)


def concat_cols(parts: Sequence):
    return _concat(parts, axis=1)


def concat_rows(parts: Sequence):
    return _concat(parts, axis=0)


def _concat(parts: Sequence, axis: int):
    parts = list(parts)
    tape = _tape_of(*parts)
    values = [value(p) for p in parts]
    out = np.concatenate(values, axis=axis)
    if tape is None:
        return out
    bounds = np.cumsum([v.shape[axis] for v in values])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return tape.record(out, tuple(parts), backward)
