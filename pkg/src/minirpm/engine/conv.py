"""Spatial ops: convolution, pooling, batch normalization.

Convolution and pooling are implemented with strided window views feeding
BLAS matmuls; backward passes scatter through a small kernel-offset loop
instead of per-element indexing, which keeps float64 training usable on a
single core.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, _record

__all__ = ["conv2d", "maxpool2d", "avgpool_to", "batchnorm2d"]


def _out_dim(size: int, k: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - k) // stride + 1


def _windows(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    # (N, C, OH, OW, kh, kw) view of the padded input.
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-d cross-correlation: [N,C,H,W] * [O,C,kh,kw] + [O] -> [N,O,H',W']."""
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ValueError(
            f"conv2d expects 4-d input and weight, got {x.data.shape} and "
            f"{weight.data.shape}"
        )
    n, c, h, w = x.data.shape
    o, cw, kh, kw = weight.data.shape
    if cw != c:
        raise ValueError(f"conv2d: input has {c} channels but weight expects {cw}")
    if bias.data.shape != (o,):
        raise ValueError(f"conv2d: bias shape {bias.data.shape} != ({o},)")
    if stride < 1:
        raise ValueError(f"conv2d: stride must be >= 1, got {stride}")
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise ValueError(
            f"conv2d: kernel {kh}x{kw} larger than padded input "
            f"{h + 2 * padding}x{w + 2 * padding}"
        )
    oh, ow = _out_dim(h, kh, stride, padding), _out_dim(w, kw, stride, padding)

    # Channels-last im2col: every bulk copy below is (nearly) contiguous,
    # so the work is one GEMM plus memory passes.
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    xcl = np.ascontiguousarray(xp.transpose(0, 2, 3, 1))  # (N,Hp,Wp,C)
    cols = np.empty((n, oh, ow, kh, kw, c))
    for i in range(kh):
        for j in range(kw):
            cols[:, :, :, i, j, :] = xcl[
                :, i : i + stride * oh : stride, j : j + stride * ow : stride, :
            ]
    cols_mat = cols.reshape(n * oh * ow, kh * kw * c)
    wt = np.ascontiguousarray(weight.data.transpose(2, 3, 1, 0)).reshape(kh * kw * c, o)
    out_cl = cols_mat @ wt
    out_cl += bias.data
    out = np.ascontiguousarray(out_cl.reshape(n, oh, ow, o).transpose(0, 3, 1, 2))

    def backward(g):
        g_cl = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * oh * ow, o)
        gw = np.ascontiguousarray(
            (cols_mat.T @ g_cl).reshape(kh, kw, c, o).transpose(3, 2, 0, 1)
        )
        gb = g_cl.sum(axis=0)
        dcols = (g_cl @ wt.T).reshape(n, oh, ow, kh, kw, c)
        gx_cl = np.zeros_like(xcl)
        for i in range(kh):
            for j in range(kw):
                gx_cl[:, i : i + stride * oh : stride, j : j + stride * ow : stride, :] += (
                    dcols[:, :, :, i, j, :]
                )
        gxp = gx_cl.transpose(0, 3, 1, 2)
        if padding:
            gxp = gxp[:, :, padding : padding + h, padding : padding + w]
        return (np.ascontiguousarray(gxp), gw, gb)

    return _record(out, (x, weight, bias), backward, "conv2d")


def maxpool2d(x: Tensor, kernel: int, stride: int, padding: int = 0) -> Tensor:
    """Windowed max; ties route the gradient to the first (row-major) maximum."""
    if x.data.ndim != 4:
        raise ValueError(f"maxpool2d expects a 4-d input, got {x.data.shape}")
    n, c, h, w = x.data.shape
    if kernel > h + 2 * padding or kernel > w + 2 * padding:
        raise ValueError(
            f"maxpool2d: window {kernel} larger than padded input "
            f"{h + 2 * padding}x{w + 2 * padding}"
        )
    if padding >= kernel:
        raise ValueError("maxpool2d: padding must be smaller than the kernel")
    oh, ow = _out_dim(h, kernel, stride, padding), _out_dim(w, kernel, stride, padding)

    xp = np.pad(
        x.data,
        ((0, 0), (0, 0), (padding, padding), (padding, padding)),
        constant_values=-np.inf,
    )
    win = _windows(xp, kernel, kernel, stride).reshape(n, c, oh, ow, kernel * kernel)
    arg = win.argmax(axis=-1)  # argmax returns the first maximum
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        gxp = np.zeros_like(xp)
        for p in range(kernel * kernel):
            i, j = divmod(p, kernel)
            gxp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += (
                g * (arg == p)
            )
        if padding:
            return (gxp[:, :, padding : padding + h, padding : padding + w],)
        return (gxp,)

    return _record(np.ascontiguousarray(out), (x,), backward, "maxpool2d")


def avgpool_to(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Adaptive average pooling to (out_h, out_w); sizes must divide evenly."""
    n, c, h, w = x.data.shape
    if h % out_h or w % out_w:
        raise ValueError(
            f"avgpool_to: input {h}x{w} not divisible into {out_h}x{out_w} blocks"
        )
    bh, bw = h // out_h, w // out_w
    out = x.data.reshape(n, c, out_h, bh, out_w, bw).mean(axis=(3, 5))

    def backward(g):
        gx = np.broadcast_to(
            g[:, :, :, None, :, None], (n, c, out_h, bh, out_w, bw)
        ) / (bh * bw)
        return (gx.reshape(n, c, h, w),)

    return _record(out, (x,), backward, "avgpool_to")


def batchnorm2d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel batch normalization over (N, H, W).

    Train mode normalizes by biased batch statistics and updates the running
    buffers in place; eval mode is a deterministic affine map using the
    running buffers.
    """
    n, c, h, w = x.data.shape
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise ValueError(
            f"batchnorm2d: gamma/beta must have shape ({c},), got "
            f"{gamma.data.shape} and {beta.data.shape}"
        )
    if training:
        m = n * h * w
        if m < 2:
            raise ValueError("batchnorm2d: train mode needs >= 2 values per channel")
        mean = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))  # biased, by convention
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
        std = np.sqrt(var + eps)
        xhat = (x.data - mean[None, :, None, None]) / std[None, :, None, None]
        out = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]

        def backward(g):
            dgamma = (g * xhat).sum(axis=(0, 2, 3))
            dbeta = g.sum(axis=(0, 2, 3))
            gx = (gamma.data / std)[None, :, None, None] * (
                g
                - (dbeta / m)[None, :, None, None]
                - xhat * (dgamma / m)[None, :, None, None]
            )
            return (gx, dgamma, dbeta)

        return _record(out, (x, gamma, beta), backward, "batchnorm2d")

    inv = 1.0 / np.sqrt(running_var + eps)
    scale_c = gamma.data * inv
    shift_c = beta.data - running_mean * scale_c
    out = x.data * scale_c[None, :, None, None] + shift_c[None, :, None, None]

    def backward(g):
        gx = g * scale_c[None, :, None, None]
        xhat = (x.data - running_mean[None, :, None, None]) * inv[None, :, None, None]
        dgamma = (g * xhat).sum(axis=(0, 2, 3))
        dbeta = g.sum(axis=(0, 2, 3))
        return (gx, dgamma, dbeta)

    return _record(out, (x, gamma, beta), backward, "batchnorm2d")
