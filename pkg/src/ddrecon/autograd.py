"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tape`` records every differentiable operation executed inside its
context, in execution order. ``backward`` replays the tape once, in
reverse, accumulating gradients additively into every tensor that
requires them. Nothing is recorded outside a tape context, so inference
runs at plain-numpy cost.
"""

import numpy as np

from .errors import NonScalarLossError, ShapeMismatchError

_TAPE_STACK = []


class Tensor:
    """Dense N-dimensional float64 array, optionally tracked on a tape."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)


class TapeNode:
    """One recorded operation: output, inputs, and a backward rule."""

    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out, inputs, backward):
        self.out = out
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Ordered record of operations; inputs of a node always precede it."""

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _TAPE_STACK.pop()
        return False

    def __len__(self):
        return len(self.nodes)


def active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def record(data, inputs, backward):
    """Create the output tensor of an op, recording it when a tape is active.

    ``backward`` maps the output gradient to one gradient (or None) per input.
    """
    tape = active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=track)
    if track:
        tape.nodes.append(TapeNode(out, inputs, backward))
    return out


def backward(loss, tape):
    """Populate gradients of every tensor the scalar ``loss`` depends on.

    Visits each tape node exactly once, in reverse execution order, so
    gradients accumulate deterministically across multiple uses.
    """
    if loss.data.size != 1:
        raise NonScalarLossError(
            f"backward requires a scalar loss, got shape {loss.data.shape}"
        )
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes):
        gout = node.out.grad
        if gout is None:
            continue
        grads = node.backward(gout)
        for tensor, g in zip(node.inputs, grads):
            if g is None or not tensor.requires_grad:
                continue
            # First write may alias the closure's buffer; accumulation
            # always allocates so shared buffers are never mutated.
            tensor.grad = g if tensor.grad is None else tensor.grad + g


def add(a, b):
    """Elementwise sum of two tensors of identical shape."""
    if a.data.shape != b.data.shape:
        raise ShapeMismatchError(
            f"add: operand shapes differ: {a.data.shape} vs {b.data.shape}"
        )
    return record(a.data + b.data, (a, b), lambda g: (g, g))


def scale(x, s):
    """Multiply by a python scalar."""
    s = float(s)
    return record(x.data * s, (x,), lambda g: (g * s,))


def mul_const(x, c):
    """Elementwise multiply by a constant array broadcastable to x."""
    c = np.asarray(c, dtype=np.float64)
    data = x.data * c
    if data.shape != x.data.shape:
        raise ShapeMismatchError(
            f"mul_const: broadcast {c.shape} changes shape {x.data.shape}"
        )
    return record(data, (x,), lambda g: (g * c,))


def add_const(x, c):
    """Elementwise add a constant array broadcastable to x."""
    c = np.asarray(c, dtype=np.float64)
    data = x.data + c
    if data.shape != x.data.shape:
        raise ShapeMismatchError(
            f"add_const: broadcast {c.shape} changes shape {x.data.shape}"
        )
    return record(data, (x,), lambda g: (g,))


def tsum(x):
    """Sum of all elements, as a 0-d tensor."""
    shape = x.data.shape

    def bwd(g):
        return (np.broadcast_to(g, shape).copy(),)

    return record(np.asarray(x.data.sum()), (x,), bwd)


def l2_loss(pred, target):
    """Mean squared difference between prediction and a constant target.

    The mean-square convention (squared norm divided by element count)
    keeps the gradient defined at zero error.
    """
    tdata = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)
    if isinstance(target, Tensor) and target.requires_grad:
        raise ShapeMismatchError("l2_loss: target must not require gradients")
    if pred.data.shape != tdata.shape:
        raise ShapeMismatchError(
            f"l2_loss: prediction shape {pred.data.shape} vs target shape {tdata.shape}"
        )
    diff = pred.data - tdata
    n = diff.size

    def bwd(g):
        return (g * (2.0 / n) * diff,)

    return record(np.asarray(np.mean(diff * diff)), (pred,), bwd)
