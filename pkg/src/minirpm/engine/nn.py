"""Parameters, the Adam optimizer, and the binary checkpoint format."""

from __future__ import annotations

import struct

import numpy as np

from .tensor import Tensor

__all__ = ["Parameter", "adam_step", "save_checkpoint", "load_checkpoint"]

_MAGIC = b"DCN1"


class Parameter:
    """A named trainable tensor with its Adam state.

    ``trainable=False`` marks persistent-but-frozen state (batch-norm running
    buffers) that should ride along in checkpoints without optimizer updates.
    """

    def __init__(self, name: str, data, trainable: bool = True):
        self.name = name
        self.tensor = Tensor(np.asarray(data, dtype=np.float64), requires_grad=trainable)
        self.trainable = trainable
        self.adam_m = np.zeros_like(self.tensor.data)
        self.adam_v = np.zeros_like(self.tensor.data)

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @data.setter
    def data(self, value: np.ndarray) -> None:
        self.tensor.data = np.asarray(value, dtype=np.float64)

    @property
    def grad(self) -> np.ndarray | None:
        return self.tensor.grad

    def zero_grad(self) -> None:
        self.tensor.grad = None

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.tensor.shape})"


def adam_step(
    params: list[Parameter],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    t: int = 1,
) -> None:
    """One bias-corrected Adam update; gradients are zeroed afterwards."""
    if t < 1:
        raise ValueError(f"adam_step: step index must be >= 1, got {t}")
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for p in params:
        if not p.trainable:
            continue
        g = p.tensor.grad
        if g is None:
            continue
        p.adam_m *= beta1
        p.adam_m += (1.0 - beta1) * g
        p.adam_v *= beta2
        p.adam_v += (1.0 - beta2) * g * g
        m_hat = p.adam_m / bc1
        v_hat = p.adam_v / bc2
        p.tensor.data = p.tensor.data - lr * m_hat / (np.sqrt(v_hat) + eps)
        p.tensor.grad = None


def save_checkpoint(params: list[Parameter], step: int, path) -> None:
    """Write parameters to ``path``: magic "DCN1", a count, then per-parameter
    records (name length, UTF-8 name, rank, little-endian u64 dims, float64
    data, adam_m, adam_v, step counter). Round-trips bit-exactly."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(params)))
        for p in params:
            name = p.name.encode("utf-8")
            f.write(struct.pack("<I", len(name)))
            f.write(name)
            shape = p.tensor.data.shape
            f.write(struct.pack("<I", len(shape)))
            for d in shape:
                f.write(struct.pack("<Q", d))
            for arr in (p.tensor.data, p.adam_m, p.adam_v):
                f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
            f.write(struct.pack("<Q", step))


def load_checkpoint(path) -> tuple[dict[str, Parameter], int]:
    """Inverse of :func:`save_checkpoint`; returns (name -> Parameter, step)."""
    with open(path, "rb") as f:
        raw = f.read()
    view = memoryview(raw)
    if raw[:4] != _MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic {raw[:4]!r}")
    pos = 4

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(raw):
            raise ValueError(f"{path}: truncated checkpoint")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<Q", take(8))
    params: dict[str, Parameter] = {}
    step = 0
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = bytes(take(name_len)).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = tuple(struct.unpack("<Q", take(8))[0] for _ in range(rank))
        size = int(np.prod(shape)) if shape else 1
        arrays = []
        for _ in range(3):
            arrays.append(
                np.frombuffer(take(8 * size), dtype="<f8").reshape(shape).copy()
            )
        (step,) = struct.unpack("<Q", take(8))
        if name in params:
            raise ValueError(f"{path}: duplicate parameter name {name!r}")
        p = Parameter(name, arrays[0])
        p.adam_m, p.adam_v = arrays[1], arrays[2]
        params[name] = p
    if pos != len(raw):
        raise ValueError(f"{path}: {len(raw) - pos} trailing bytes after last record")
    return params, step
