"""Naive nested-loop reference implementations.

Deliberately written with explicit Python loops and no vectorization, so
they share no code (and hence no bugs) with the production ops they check.
"""

import numpy as np


def conv2d_ref(x, w, b, stride, padding):
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    xp = np.zeros((n, c, h + 2 * padding, wd + 2 * padding))
    xp[:, :, padding : padding + h, padding : padding + wd] = x
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((n, o, oh, ow))
    for ni in range(n):
        for oi in range(o):
            for y in range(oh):
                for xi in range(ow):
                    acc = b[oi]
                    for ci in range(c):
                        for i in range(kh):
                            for j in range(kw):
                                acc += (
                                    xp[ni, ci, y * stride + i, xi * stride + j]
                                    * w[oi, ci, i, j]
                                )
                    out[ni, oi, y, xi] = acc
    return out


def maxpool2d_ref(x, kernel, stride, padding):
    n, c, h, w = x.shape
    xp = np.full((n, c, h + 2 * padding, w + 2 * padding), -np.inf)
    xp[:, :, padding : padding + h, padding : padding + w] = x
    oh = (h + 2 * padding - kernel) // stride + 1
    ow = (w + 2 * padding - kernel) // stride + 1
    out = np.zeros((n, c, oh, ow))
    for ni in range(n):
        for ci in range(c):
            for y in range(oh):
                for xi in range(ow):
                    best = -np.inf
                    for i in range(kernel):
                        for j in range(kernel):
                            v = xp[ni, ci, y * stride + i, xi * stride + j]
                            if v > best:
                                best = v
                    out[ni, ci, y, xi] = best
    return out


def avgpool_to_ref(x, out_h, out_w):
    n, c, h, w = x.shape
    bh, bw = h // out_h, w // out_w
    out = np.zeros((n, c, out_h, out_w))
    for ni in range(n):
        for ci in range(c):
            for y in range(out_h):
                for xi in range(out_w):
                    acc = 0.0
                    for i in range(bh):
                        for j in range(bw):
                            acc += x[ni, ci, y * bh + i, xi * bw + j]
                    out[ni, ci, y, xi] = acc / (bh * bw)
    return out


def batchnorm2d_ref(x, gamma, beta, mean, var, eps=1e-5):
    """Affine normalization against given per-channel statistics."""
    n, c, h, w = x.shape
    out = np.zeros_like(x)
    for ni in range(n):
        for ci in range(c):
            for y in range(h):
                for xi in range(w):
                    xhat = (x[ni, ci, y, xi] - mean[ci]) / np.sqrt(var[ci] + eps)
                    out[ni, ci, y, xi] = gamma[ci] * xhat + beta[ci]
    return out


def batch_stats_ref(x):
    """Biased per-channel mean and variance over (N, H, W)."""
    n, c, h, w = x.shape
    mean = np.zeros(c)
    var = np.zeros(c)
    m = n * h * w
    for ci in range(c):
        s = 0.0
        for ni in range(n):
            for y in range(h):
                for xi in range(w):
                    s += x[ni, ci, y, xi]
        mean[ci] = s / m
        s2 = 0.0
        for ni in range(n):
            for y in range(h):
                for xi in range(w):
                    s2 += (x[ni, ci, y, xi] - mean[ci]) ** 2
        var[ci] = s2 / m
    return mean, var


def linear_ref(x, w, b):
    n, d = x.shape
    _, k = w.shape
    out = np.zeros((n, k))
    for ni in range(n):
        for ki in range(k):
            acc = b[ki]
            for di in range(d):
                acc += x[ni, di] * w[di, ki]
            out[ni, ki] = acc
    return out


def bce_with_logits_ref(scores, targets):
    total = 0.0
    n, k = scores.shape
    for i in range(n):
        for j in range(k):
            p = 1.0 / (1.0 + np.exp(-scores[i, j]))
            y = targets[i, j]
            total += -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return total
