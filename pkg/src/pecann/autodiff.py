"""Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Tape` records one backward closure per operation, in creation
order.  Creation order is a valid topological order, so the backward pass
simply walks the tape in reverse.  :class:`Var` wraps a float64 ndarray;
arithmetic between a Var and a plain ndarray (or scalar) treats the plain
operand as a constant, which keeps constraint targets and sampled
coordinates out of the graph entirely.

The engine implements only the operations the residual and loss
expressions need: broadcasting arithmetic, powers, tanh, indexing and
axis reductions.  Composite operations with hand-derived adjoints (the
network jet propagation) append their own closures via
:meth:`Tape.append`.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tape", "Var", "tanh"]


class Tape:
    """Ordered record of backward closures for one evaluation."""

    __slots__ = ("_backs",)

    def __init__(self):
        self._backs = []

    def append(self, back):
        self._backs.append(back)

    def var(self, value):
        """Wrap ``value`` as a leaf variable on this tape."""
        return Var(value, self)

    def backward(self, root):
        """Seed ``root`` (a scalar Var) with gradient 1 and sweep the tape."""
        if root.value.shape != ():
            raise ValueError("backward root must be a scalar Var")
        root.grad = np.ones((), dtype=np.float64)
        for back in reversed(self._backs):
            back()

    def release(self):
        """Drop the recorded closures.

        Closures hold the only tape-side references to intermediate Vars;
        clearing them breaks the Var -> tape -> closure -> Var cycles so
        graph memory is reclaimed by reference counting instead of
        waiting on the cyclic collector (large arrays contribute no bytes
        to its heuristics).
        """
        self._backs.clear()


def _accumulate(var, grad):
    if var.grad is None:
        # copy: `grad` may alias an upstream gradient buffer
        var.grad = np.array(grad, dtype=np.float64)
    else:
        var.grad += grad


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape``, reversing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(
        i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1
    )
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _split(other):
    """Return (var_or_None, raw_value) for a Var or constant operand."""
    if isinstance(other, Var):
        return other, other.value
    return None, np.asarray(other, dtype=np.float64)


class Var:
    """Node in the tape graph holding a float64 value and its adjoint."""

    __slots__ = ("value", "grad", "tape")

    # force numpy to defer to the reflected Var operators instead of
    # building object arrays elementwise
    __array_ufunc__ = None

    def __init__(self, value, tape):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.tape = tape

    @property
    def shape(self):
        return self.value.shape

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        ov, oval = _split(other)
        out = Var(self.value + oval, self.tape)

        def back():
            if out.grad is None:
                return
            _accumulate(self, _unbroadcast(out.grad, self.value.shape))
            if ov is not None:
                _accumulate(ov, _unbroadcast(out.grad, ov.value.shape))

        self.tape.append(back)
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Var(-self.value, self.tape)

        def back():
            if out.grad is None:
                return
            _accumulate(self, -out.grad)

        self.tape.append(back)
        return out

    def __sub__(self, other):
        ov, oval = _split(other)
        out = Var(self.value - oval, self.tape)

        def back():
            if out.grad is None:
                return
            _accumulate(self, _unbroadcast(out.grad, self.value.shape))
            if ov is not None:
                _accumulate(ov, _unbroadcast(-out.grad, ov.value.shape))

        self.tape.append(back)
        return out

    def __rsub__(self, other):
        _, oval = _split(other)
        out = Var(oval - self.value, self.tape)

        def back():
            if out.grad is None:
                return
            _accumulate(self, _unbroadcast(-out.grad, self.value.shape))

        self.tape.append(back)
        return out

    def __mul__(self, other):
        ov, oval = _split(other)
        out = Var(self.value * oval, self.tape)

        def back():
            if out.grad is None:
                return
            _accumulate(self, _unbroadcast(out.grad * oval, self.value.shape))
            if ov is not None:
                _accumulate(ov, _unbroadcast(out.grad * self.value, ov.value.shape))

        self.tape.append(back)
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        ov, oval = _split(other)
        out = Var(self.value / oval, self.tape)

        def back():
            if out.grad is None:
                return
            _accumulate(self, _unbroadcast(out.grad / oval, self.value.shape))
            if ov is not None:
                g = -out.grad * self.value / (oval * oval)
                _accumulate(ov, _unbroadcast(g, ov.value.shape))

        self.tape.append(back)
        return out

    def __rtruediv__(self, other):
        _, oval = _split(other)
        out = Var(oval / self.value, self.tape)

        def back():
            if out.grad is None:
                return
            g = -out.grad * oval / (self.value * self.value)
            _accumulate(self, _unbroadcast(g, self.value.shape))

        self.tape.append(back)
        return out

    def __pow__(self, exponent):
        if isinstance(exponent, Var):
            raise TypeError("only constant exponents are supported")
        p = float(exponent)
        out = Var(self.value ** p, self.tape)

        def back():
            if out.grad is None:
                return
            _accumulate(self, out.grad * p * self.value ** (p - 1.0))

        self.tape.append(back)
        return out

    # -- indexing and reshaping ---------------------------------------

    def __getitem__(self, index):
        out = Var(self.value[index], self.tape)

        def back():
            if out.grad is None:
                return
            g = np.zeros_like(self.value)
            np.add.at(g, index, out.grad)
            _accumulate(self, g)

        self.tape.append(back)
        return out

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        out = Var(self.value.reshape(shape), self.tape)

        def back():
            if out.grad is None:
                return
            _accumulate(self, out.grad.reshape(self.value.shape))

        self.tape.append(back)
        return out

    # -- reductions and elementwise functions -------------------------

    def sum(self, axis=None):
        out = Var(self.value.sum(axis=axis), self.tape)
        shape = self.value.shape

        def back():
            if out.grad is None:
                return
            g = out.grad
            if axis is not None:
                g = np.expand_dims(g, axis)
            _accumulate(self, np.broadcast_to(g, shape))

        self.tape.append(back)
        return out

    def mean(self, axis=None):
        n = self.value.size if axis is None else self.value.shape[axis]
        return self.sum(axis=axis) / float(n)

    def tanh(self):
        t = np.tanh(self.value)
        out = Var(t, self.tape)

        def back():
            if out.grad is None:
                return
            _accumulate(self, out.grad * (1.0 - t * t))

        self.tape.append(back)
        return out


def tanh(x):
    """Elementwise tanh for Vars and ndarrays alike."""
    if isinstance(x, Var):
        return x.tanh()
    return np.tanh(x)
