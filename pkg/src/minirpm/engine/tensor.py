"""Dense float64 tensors with reverse-mode autodiff on an explicit tape.

The tape records operations in execution order (which is already a
topological order), so the backward pass is a single reversed scan that
accumulates gradients additively when a tensor feeds several consumers.
Broadcasting is deliberately unsupported except for scalar scaling: every
elementwise op demands exactly matching shapes, so shape bugs fail loudly.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "tensor",
    "add",
    "sub",
    "scale",
    "relu",
    "sigmoid",
    "mean_over",
    "flatten",
    "reshape",
    "take_rows",
    "repeat_rows",
    "linear",
    "dropout",
    "bce_with_logits",
]

# Stack of active tapes; ops record onto the innermost one.
_TAPES: list["Tape"] = []


class Tensor:
    """An n-dimensional float64 array, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class _Node:
    """One recorded operation: inputs, output, and its backward rule."""

    __slots__ = ("inputs", "output", "backward_fn", "name")

    def __init__(self, inputs, output, backward_fn, name):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn
        self.name = name


class Tape:
    """Records ops executed inside its context; replays them in reverse."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        assert _TAPES.pop() is self

    def backward(self, loss: Tensor) -> None:
        """Populate ``grad`` on every requires_grad leaf reachable from ``loss``.

        ``loss`` must be a scalar produced while this tape was active.
        Repeated calls accumulate into existing leaf gradients.
        """
        if loss.data.size != 1:
            raise ValueError(
                f"backward requires a scalar loss, got shape {loss.data.shape}"
            )
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        produced = {id(n.output) for n in self.nodes}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            input_grads = node.backward_fn(g)
            for t, gi in zip(node.inputs, input_grads):
                if gi is None or not t.requires_grad:
                    continue
                if id(t) in produced:
                    acc = grads.get(id(t))
                    grads[id(t)] = gi if acc is None else acc + gi
                else:
                    # Leaf: accumulate into the tensor itself.
                    t.grad = gi.copy() if t.grad is None else t.grad + gi


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{op} produced non-finite values (overflow?)")


def _record(out_data, inputs, backward_fn, name) -> Tensor:
    _check_finite(out_data, name)
    requires = any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.requires_grad = requires
    out.grad = None
    if requires and _TAPES:
        _TAPES[-1].nodes.append(_Node(tuple(inputs), out, backward_fn, name))
    return out


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(
            f"{op}: shape mismatch {a.data.shape} vs {b.data.shape} "
            "(broadcasting is not supported)"
        )


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    return _record(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    return _record(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return _record(a.data * s, (a,), lambda g: (g * s,), "scale")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0
    return _record(
        np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu"
    )


def sigmoid(x: Tensor) -> Tensor:
    out = _stable_sigmoid(x.data)
    return _record(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    # Branch on sign so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def mean_over(x: Tensor, axis: int) -> Tensor:
    n = x.data.shape[axis]

    def backward(g):
        return (np.repeat(np.expand_dims(g, axis), n, axis=axis) / n,)

    return _record(x.data.mean(axis=axis), (x,), backward, "mean_over")


def flatten(x: Tensor, from_axis: int) -> Tensor:
    shape = x.data.shape
    new_shape = shape[:from_axis] + (-1,)
    return _record(
        x.data.reshape(new_shape), (x,), lambda g: (g.reshape(shape),), "flatten"
    )


def reshape(x: Tensor, shape) -> Tensor:
    old = x.data.shape
    return _record(
        x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape"
    )


def take_rows(x: Tensor, indices: np.ndarray) -> Tensor:
    """Gather rows along axis 0. Indices must be unique."""
    idx = np.asarray(indices, dtype=np.intp)
    if np.unique(idx).size != idx.size:
        raise ValueError("take_rows requires unique indices")

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[idx] = g
        return (gx,)

    return _record(x.data[idx], (x,), backward, "take_rows")


def repeat_rows(x: Tensor, k: int) -> Tensor:
    """Repeat each row k times along axis 0 (explicit stand-in for broadcast)."""

    def backward(g):
        return (g.reshape(x.data.shape[0], k, *x.data.shape[1:]).sum(axis=1),)

    return _record(np.repeat(x.data, k, axis=0), (x,), backward, "repeat_rows")


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map: [N,D] @ [D,K] + [K]."""
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise ValueError(
            f"linear expects 2-d input and weight, got {x.data.shape} and "
            f"{weight.data.shape}"
        )
    n, d = x.data.shape
    dw, k = weight.data.shape
    if d != dw or bias.data.shape != (k,):
        raise ValueError(
            f"linear: incompatible shapes input {x.data.shape}, "
            f"weight {weight.data.shape}, bias {bias.data.shape}"
        )

    def backward(g):
        return (g @ weight.data.T, x.data.T @ g, g.sum(axis=0))

    return _record(x.data @ weight.data + bias.data, (x, weight, bias), backward, "linear")


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: train mode zeroes with probability p, scales by 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout requires an explicit rng")
    keep = (rng.random(x.data.shape) >= p) / (1.0 - p)
    return _record(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


def bce_with_logits(scores: Tensor, targets: Tensor) -> Tensor:
    """Summed binary cross entropy over [N,8] logits against one-hot targets.

    Computed in the log-sum-exp-stable form
    ``max(s,0) - s*y + log(1+exp(-|s|))``, identical to sigmoid-then-BCE.
    """
    s, y = scores.data, targets.data
    if s.shape != y.shape or s.ndim != 2:
        raise ValueError(f"bce_with_logits: bad shapes {s.shape} vs {y.shape}")
    if not np.all((y == 0.0) | (y == 1.0)) or not np.allclose(y.sum(axis=1), 1.0):
        raise ValueError("bce_with_logits targets must be one-hot per row")
    loss = np.maximum(s, 0.0) - s * y + np.log1p(np.exp(-np.abs(s)))

    def backward(g):
        return (float(g) * (_stable_sigmoid(s) - y), None)

    return _record(np.asarray(loss.sum()), (scores, targets), backward, "bce_with_logits")
