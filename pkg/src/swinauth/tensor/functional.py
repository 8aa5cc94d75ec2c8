"""Fused neural-network primitives with hand-written backward rules."""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from swinauth.errors import DimensionError, NumericError
from swinauth.tensor.core import Tensor, as_tensor, make_result

LAYER_NORM_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along ``axis``."""
    if not np.all(np.isfinite(x.data)):
        raise NumericError(f"softmax received non-finite input of shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result(out, (x,), backward, "softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalise over the last axis, then scale by ``gamma`` and shift by ``beta``.

    A constant row maps to ``beta`` since its centred values are exactly zero.
    """
    n = x.shape[-1] if x.ndim else 0
    if n == 0:
        raise DimensionError("layer_norm over a zero-length axis")
    if gamma.shape != (n,) or beta.shape != (n,):
        raise DimensionError(f"layer_norm affine shapes {gamma.shape}/{beta.shape} do not match axis of length {n}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centred = x.data - mu
    var = (centred * centred).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = centred * rstd
    out = xhat * gamma.data + beta.data

    def backward(g):
        gx = None
        if x.requires_grad:
            gxhat = g * gamma.data
            gx = rstd * (
                gxhat
                - gxhat.mean(axis=-1, keepdims=True)
                - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
            )
        lead = tuple(range(g.ndim - 1))
        ggamma = (g * xhat).sum(axis=lead) if gamma.requires_grad else None
        gbeta = g.sum(axis=lead) if beta.requires_grad else None
        return gx, ggamma, gbeta

    return make_result(out, (x, gamma, beta), backward, "layer_norm")


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    v = x.data
    v2 = v * v
    t = np.tanh(_GELU_C * v * (1.0 + 0.044715 * v2))
    out = 0.5 * v * (1.0 + t)

    def backward(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * v2)
        return (g * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner),)

    return make_result(out, (x,), backward, "gelu")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` over the last axis; ``weight`` is (d_in, d_out)."""
    x = as_tensor(x)
    d_in, d_out = weight.shape
    if x.shape[-1] != d_in:
        raise DimensionError(f"linear: input {x.shape} does not match weight {weight.shape}")
    if bias is not None and bias.shape != (d_out,):
        raise DimensionError(f"linear: bias {bias.shape} does not match weight {weight.shape}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, d_in)
    out = x2 @ weight.data
    if bias is not None:
        out += bias.data
    out = out.reshape(lead + (d_out,))
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        g2 = g.reshape(-1, d_out)
        gx = (g2 @ weight.data.T).reshape(lead + (d_in,)) if x.requires_grad else None
        gw = x2.T @ g2 if weight.requires_grad else None
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    return make_result(out, parents, backward, "linear")


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation on NHWC input.

    ``kernels`` has shape (kh, kw, c_in, c_out). Zero padding of ``padding``
    pixels is applied on every side.
    """
    n, h, w, c = x.shape
    kh, kw, c_in, c_out = kernels.shape
    if c != c_in:
        raise DimensionError(f"conv2d: input has {c} channels, kernels expect {c_in}")
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise DimensionError(f"conv2d: kernel {kh}x{kw} larger than padded input {hp}x{wp}")
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding), (0, 0))) if padding else x.data
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    # im2col, columns ordered (kh, kw, c) to match the kernel layout
    view = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride][:, :ho, :wo]
    cols = np.ascontiguousarray(view.transpose(0, 1, 2, 4, 5, 3)).reshape(-1, kh * kw * c)
    k2 = kernels.data.reshape(kh * kw * c, c_out)
    out = cols @ k2
    if bias is not None:
        out += bias.data
    out = out.reshape(n, ho, wo, c_out)
    parents = (x, kernels) if bias is None else (x, kernels, bias)

    def backward(g):
        gx = gk = None
        g2 = g.reshape(-1, c_out)
        if kernels.requires_grad:
            gk = (cols.T @ g2).reshape(kh, kw, c, c_out)
        if x.requires_grad:
            gcols = (g2 @ k2.T).reshape(n, ho, wo, kh, kw, c)
            gxp = np.zeros(xp.shape, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, i : i + stride * ho : stride, j : j + stride * wo : stride] += gcols[:, :, :, i, j]
            gx = gxp[:, padding : padding + h, padding : padding + w] if padding else gxp
        if bias is None:
            return gx, gk
        return gx, gk, g2.sum(axis=0)

    return make_result(out, parents, backward, "conv2d")


def channel_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Per-sample, per-channel normalisation over the spatial axes of NHWC input.

    Batch-independent: no running statistics, so a sample's output never
    depends on the other members of its batch.
    """
    n, h, w, c = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(f"channel_norm affine shapes {gamma.shape}/{beta.shape} do not match {c} channels")
    mu = x.data.mean(axis=(1, 2), keepdims=True)
    centred = x.data - mu
    var = (centred * centred).mean(axis=(1, 2), keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = centred * rstd
    out = xhat * gamma.data + beta.data

    def backward(g):
        gxhat = g * gamma.data
        gx = rstd * (
            gxhat
            - gxhat.mean(axis=(1, 2), keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=(1, 2), keepdims=True)
        )
        return gx, (g * xhat).sum(axis=(0, 1, 2)), g.sum(axis=(0, 1, 2))

    return make_result(out, (x, gamma, beta), backward, "channel_norm")
