"""Dense tensor arithmetic and a reverse-mode differentiation tape.

Values are numpy arrays. A :class:`Var` wraps one array and remembers the
:class:`GradTape` that produced it, if any. Primitives compute their value
eagerly and, when an input lives on a tape, append a record holding the
local vector-Jacobian product. :meth:`GradTape.backward` replays the
records in reverse.

Complex values use the packed adjoint convention: the adjoint of
``z = a + ib`` with respect to a real loss is ``dL/da + i dL/db``. A complex
leaf therefore receives its gradient as the independent real pair
``(dL/da, dL/db)``. The model keeps its complex parameters as two real
leaves joined by :func:`complex_pair`, so the optimizer only sees real
arrays.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from . import fft as _fft
from .errors import (
    ContractError,
    NumericError,
    ShapeError,
    UnsupportedLengthError,
)

Index = int | slice | tuple

# Philox keys are 128-bit.
KEY_SPACE = 2**128


@dataclass(frozen=True)
class ComplexTensor:
    """Complex tensor stored as two real arrays of equal shape."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        if np.shape(self.re) != np.shape(self.im):
            raise ShapeError(
                f"re and im shapes differ: {np.shape(self.re)} vs "
                f"{np.shape(self.im)}"
            )

    @classmethod
    def from_complex(cls, z) -> ComplexTensor:
        z = np.asarray(z)
        return cls(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag))

    @property
    def shape(self) -> tuple[int, ...]:
        return np.shape(self.re)

    def to_complex(self) -> np.ndarray:
        return np.asarray(self.re) + 1j * np.asarray(self.im)


def complex_vecmat(v: ComplexTensor, h: ComplexTensor) -> ComplexTensor:
    """Row vector times matrix, ``(1, D) @ (D, E)``, as four real products."""
    if len(v.shape) != 2 or len(h.shape) != 2 or v.shape[1] != h.shape[0]:
        raise ShapeError(
            f"cannot multiply {v.shape} row vector by {h.shape} matrix"
        )
    re = v.re @ h.re - v.im @ h.im
    im = v.re @ h.im + v.im @ h.re
    return ComplexTensor(re, im)


class Var:
    """A value, optionally recorded on a :class:`GradTape`."""

    __slots__ = ("value", "tape", "node")

    def __init__(self, value, tape: GradTape | None = None, node=None):
        self.value = np.asarray(value)
        self.tape = tape
        self.node = node

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        where = "const" if self.tape is None else f"node={self.node}"
        return f"Var(shape={self.shape}, dtype={self.value.dtype}, {where})"


@dataclass(frozen=True)
class _Record:
    output: int
    inputs: tuple[int | None, ...]
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class GradTape:
    """Ordered record of primitive applications for one forward pass."""

    def __init__(self):
        self._records: list[_Record] = []
        self._leaves: dict[str, tuple[int, np.ndarray]] = {}
        self._count = 0

    def _new_node(self) -> int:
        self._count += 1
        return self._count - 1

    def leaf(self, name: str, value) -> Var:
        """Register a named parameter leaf."""
        if name in self._leaves:
            raise ContractError(f"leaf {name!r} registered twice")
        value = np.asarray(value)
        node = self._new_node()
        self._leaves[name] = (node, value)
        return Var(value, self, node)

    def record(self, value, inputs: Sequence[Var], vjp) -> Var:
        node = self._new_node()
        ids = tuple(v.node if v.tape is self else None for v in inputs)
        self._records.append(_Record(node, ids, vjp))
        return Var(value, self, node)

    def __len__(self) -> int:
        return len(self._records)

    def backward(self, loss: Var) -> dict[str, np.ndarray | ComplexTensor]:
        """Return d(loss)/d(leaf) for every registered leaf.

        Leaves the loss does not depend on receive zeros. Complex leaves
        receive a :class:`ComplexTensor` of real partials.
        """
        if loss.tape is not self:
            raise ContractError("loss was not produced on this tape")
        if loss.value.size != 1 or loss.value.ndim != 0:
            raise ContractError(
                f"backward needs a scalar loss, got shape {loss.shape}"
            )
        adjoints: dict[int, np.ndarray] = {loss.node: np.ones_like(loss.value)}
        for rec in reversed(self._records):
            g = adjoints.pop(rec.output, None)
            if g is None:
                continue
            for node, gi in zip(rec.inputs, rec.vjp(g)):
                if node is None or gi is None:
                    continue
                if node in adjoints:
                    adjoints[node] = adjoints[node] + gi
                else:
                    adjoints[node] = gi
        grads: dict[str, np.ndarray | ComplexTensor] = {}
        for name, (node, value) in self._leaves.items():
            g = adjoints.get(node)
            if g is None:
                g = np.zeros_like(value)
            if np.iscomplexobj(value):
                grads[name] = ComplexTensor.from_complex(g)
            else:
                grads[name] = np.real(g).astype(value.dtype, copy=False)
        return grads


def backward(loss: Var) -> dict[str, np.ndarray | ComplexTensor]:
    """Gradient map of a scalar ``loss`` over the leaves of its tape."""
    if loss.tape is None:
        raise ContractError("loss is a constant; nothing to differentiate")
    return loss.tape.backward(loss)


# -- primitive helpers ------------------------------------------------------


def constant(value) -> Var:
    return Var(value)


def _as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _tape_of(*vs: Var) -> GradTape | None:
    tape = None
    for v in vs:
        if v.tape is None:
            continue
        if tape is not None and v.tape is not tape:
            raise ContractError("inputs were recorded on different tapes")
        tape = v.tape
    return tape


def _emit(value, inputs: Sequence[Var], vjp) -> Var:
    tape = _tape_of(*inputs)
    if tape is None:
        return Var(value)
    return tape.record(value, inputs, vjp)


def _unbroadcast(g: np.ndarray, like: np.ndarray) -> np.ndarray:
    """Sum ``g`` down to ``like``'s shape and drop imaginary parts if real."""
    shape = like.shape
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    if not np.iscomplexobj(like):
        g = np.real(g)
    return g


# -- elementwise ------------------------------------------------------------


def add(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    av, bv = a.value, b.value
    return _emit(
        av + bv,
        (a, b),
        lambda g: (_unbroadcast(g, av), _unbroadcast(g, bv)),
    )


def sub(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    av, bv = a.value, b.value
    return _emit(
        av - bv,
        (a, b),
        lambda g: (_unbroadcast(g, av), _unbroadcast(-g, bv)),
    )


def mul(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    av, bv = a.value, b.value
    return _emit(
        av * bv,
        (a, b),
        lambda g: (
            _unbroadcast(g * np.conj(bv), av),
            _unbroadcast(g * np.conj(av), bv),
        ),
    )


def scale(a, factor: float) -> Var:
    a = _as_var(a)
    return _emit(a.value * factor, (a,), lambda g: (g * factor,))


def square(a) -> Var:
    a = _as_var(a)
    av = a.value
    return _emit(av * av, (a,), lambda g: (2.0 * g * av,))


def tanh(a) -> Var:
    a = _as_var(a)
    y = np.tanh(a.value)
    return _emit(y, (a,), lambda g: (g * (1.0 - y * y),))


# -- linear algebra ---------------------------------------------------------


def matmul(a, b) -> Var:
    """Batched matrix product over the last two axes."""
    a, b = _as_var(a), _as_var(b)
    av, bv = a.value, b.value
    if av.ndim < 2 or bv.ndim < 2 or av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"cannot multiply {av.shape} by {bv.shape}")

    def vjp(g):
        ga = g @ np.conj(np.swapaxes(bv, -1, -2))
        gb = np.conj(np.swapaxes(av, -1, -2)) @ g
        return _unbroadcast(ga, av), _unbroadcast(gb, bv)

    return _emit(av @ bv, (a, b), vjp)


def affine(x, w, b) -> Var:
    """``x @ w + b`` applied to the last axis of ``x``."""
    x, w, b = _as_var(x), _as_var(w), _as_var(b)
    xv, wv, bv = x.value, w.value, b.value
    if xv.shape[-1] != wv.shape[0] or bv.shape != (wv.shape[1],):
        raise ShapeError(
            f"affine map {wv.shape} + bias {bv.shape} does not fit input "
            f"{xv.shape}"
        )

    def vjp(g):
        flat_x = xv.reshape(-1, xv.shape[-1])
        flat_g = g.reshape(-1, g.shape[-1])
        return (
            g @ wv.T,
            flat_x.T @ flat_g,
            flat_g.sum(axis=0),
        )

    return _emit(xv @ wv + bv, (x, w, b), vjp)


def complex_pair(re, im) -> Var:
    """Join two real tensors into one complex tensor."""
    re, im = _as_var(re), _as_var(im)
    if re.shape != im.shape:
        raise ShapeError(f"re {re.shape} and im {im.shape} differ")
    return _emit(
        re.value + 1j * im.value,
        (re, im),
        lambda g: (np.real(g), np.imag(g)),
    )


def bin_vecmat(v, h) -> Var:
    """Right-multiply every bin's row vector by that bin's matrix.

    ``v`` has shape (..., K, D) and ``h`` has shape (K, D, E); the result
    has shape (..., K, E).
    """
    v, h = _as_var(v), _as_var(h)
    vv, hv = v.value, h.value
    if hv.ndim != 3 or vv.shape[-2:] != hv.shape[:2]:
        raise ShapeError(
            f"bin matrices {hv.shape} do not fit spectrum {vv.shape}"
        )
    lead = vv.shape[:-2]
    flat = vv.reshape((-1,) + vv.shape[-2:])
    out = np.einsum("bkd,kde->bke", flat, hv).reshape(
        lead + (hv.shape[0], hv.shape[2])
    )

    def vjp(g):
        flat_g = g.reshape((-1,) + g.shape[-2:])
        gv = np.einsum("bke,kde->bkd", flat_g, np.conj(hv))
        gh = np.einsum("bkd,bke->kde", np.conj(flat), flat_g)
        return gv.reshape(vv.shape), _unbroadcast(gh, hv)

    return _emit(out, (v, h), vjp)


# -- structural -------------------------------------------------------------


def take(x, index: Index) -> Var:
    """Basic (non-fancy) indexing; the adjoint scatters back."""
    x = _as_var(x)
    xv = x.value

    def vjp(g):
        out = np.zeros(xv.shape, dtype=np.result_type(xv, g))
        out[index] = g
        return (_unbroadcast(out, xv),)

    return _emit(xv[index], (x,), vjp)


def place(x, index: Index, shape: tuple[int, ...]) -> Var:
    """Zeros of ``shape`` with ``x`` written at ``index``."""
    x = _as_var(x)
    out = np.zeros(shape, dtype=x.value.dtype)
    out[index] = x.value
    return _emit(out, (x,), lambda g: (g[index],))


def reshape(x, shape: tuple[int, ...]) -> Var:
    x = _as_var(x)
    before = x.shape
    return _emit(
        x.value.reshape(shape), (x,), lambda g: (g.reshape(before),)
    )


def pad_rows(x, after: int) -> Var:
    """Append ``after`` zero rows along the time axis (-2)."""
    x = _as_var(x)
    n = x.shape[-2]
    width = [(0, 0)] * x.value.ndim
    width[-2] = (0, after)
    return _emit(
        np.pad(x.value, width), (x,), lambda g: (g[..., :n, :],)
    )


def add_all(terms: Sequence[Var]) -> Var:
    """Left-to-right sum, so the summation order is fixed."""
    if not terms:
        raise ContractError("nothing to sum")
    out = terms[0]
    for t in terms[1:]:
        out = add(out, t)
    return out


def total(x) -> Var:
    x = _as_var(x)
    shape = x.shape
    return _emit(
        x.value.sum(), (x,), lambda g: (np.broadcast_to(g, shape).copy(),)
    )


def mean(x) -> Var:
    x = _as_var(x)
    return scale(total(x), 1.0 / max(x.value.size, 1))


# -- transforms -------------------------------------------------------------


def check_even(n: int) -> None:
    if n < 2 or n % 2:
        raise UnsupportedLengthError(
            f"real transforms need an even length >= 2, got {n}"
        )


def rdft(x) -> Var:
    """Unnormalized real-input DFT along axis -2, keeping n/2 + 1 bins."""
    x = _as_var(x)
    n = x.shape[-2]
    check_even(n)
    k = n // 2 + 1
    out = _fft.fft(x.value, axis=-2)[..., :k, :]
    if x.value.dtype == np.float32:
        out = out.astype(np.complex64)

    def vjp(g):
        full = np.zeros(x.shape, dtype=np.complex128)
        full[..., :k, :] = g
        back = np.real(_fft.ifft_unnormalized(full, axis=-2))
        return (back.astype(x.value.dtype, copy=False),)

    return _emit(out, (x,), vjp)


def hermitian_weights(n: int) -> np.ndarray:
    """Completion weights ``[1, 2, ..., 2, 1]`` for the n/2 + 1 bins."""
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


def synthesize(c, n: int) -> Var:
    """Complex synthesis ``(1/n) sum_k w_k c_k exp(2 pi i k t / n)``.

    ``c`` holds the n/2 + 1 stored bins along axis -2; ``w`` are the
    Hermitian completion weights. The real part of the result is the
    inverse real DFT.
    """
    c = _as_var(c)
    check_even(n)
    k = n // 2 + 1
    if c.shape[-2] != k:
        raise ShapeError(f"expected {k} bins for length {n}, got {c.shape}")
    w = hermitian_weights(n)[:, None] / n
    full_shape = c.shape[:-2] + (n, c.shape[-1])
    full = np.zeros(full_shape, dtype=np.complex128)
    full[..., :k, :] = c.value * w
    out = _fft.ifft_unnormalized(full, axis=-2)
    if c.value.dtype == np.complex64:
        out = out.astype(np.complex64)

    def vjp(g):
        return (w * _fft.fft(g, axis=-2)[..., :k, :],)

    return _emit(out, (c,), vjp)


def real(z) -> Var:
    """Real-part projection."""
    z = _as_var(z)
    return _emit(np.real(z.value).copy(), (z,), lambda g: (np.real(g),))


def irdft(c, n: int) -> Var:
    """Inverse real DFT with Hermitian completion and real projection."""
    return real(synthesize(c, n))


# -- checks and randomness --------------------------------------------------


def ensure_finite(value, what: str) -> None:
    if not np.all(np.isfinite(value)):
        raise NumericError(f"{what} is not finite")


def counter_rng(seed: int, *counter: int) -> np.random.Generator:
    """Counter-based generator keyed by ``seed``.

    Up to three counter words select an independent stream (for example
    purpose, epoch, step). The lowest word is left free for the draws.
    Negative seeds wrap into the 128-bit key space.
    """
    if len(counter) > 3:
        raise ContractError("at most three counter words are supported")
    words = [0, *counter] + [0] * (3 - len(counter))
    bits = np.random.Philox(
        key=int(seed) % KEY_SPACE, counter=np.array(words, np.uint64)
    )
    return np.random.Generator(bits)


def finite_difference_grad(
    f: Callable[[Mapping[str, np.ndarray]], float],
    theta: Mapping[str, np.ndarray],
    h: float = 1e-6,
) -> dict[str, np.ndarray]:
    """Central-difference gradient of ``f`` over every coordinate of theta.

    ``theta`` is any mapping of names to real arrays (a ParameterSet
    qualifies). ``f`` receives a perturbed copy of the mapping.
    """
    if not h > 0:
        raise ContractError(f"step must be positive, got {h}")
    base = {name: np.array(v, dtype=np.float64) for name, v in theta.items()}
    grads = {}
    for name, value in base.items():
        g = np.zeros_like(value)
        flat = value.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = float(f(base))
            flat[i] = keep - h
            down = float(f(base))
            flat[i] = keep
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError(
                    f"function is not finite around {name}[{i}]"
                )
            g.reshape(-1)[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


def relative_error(a, b, floor: float = 1e-4) -> float:
    """Largest entrywise ``|a - b| / max(|a|, |b|, floor)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
