"""Forward and backward kernels for 3D dense networks.

Convolution lowers sliding windows onto a matrix product (im2col); the
backward pass reuses the same lowering for weight gradients and scatters
per-tap slices for input gradients. Max pooling records argmax indices so
its backward routes gradients to the winning elements only.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .._validation import ValidationError


def _check_tensor(x, name: str) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 5:
        raise ValidationError(f"{name}: expected (n, c, d, h, w), got shape {x.shape}")
    return x


def conv3d_output_dims(in_dims, kernel: int, stride: int, dilation: int,
                       padding: int) -> tuple:
    """Spatial output dims; every axis must stay >= 1."""
    kernel, stride, dilation, padding = map(int, (kernel, stride, dilation, padding))
    if kernel < 1 or stride < 1 or dilation < 1 or padding < 0:
        raise ValidationError(
            f"bad conv geometry: kernel={kernel} stride={stride} "
            f"dilation={dilation} padding={padding}")
    support = dilation * (kernel - 1) + 1
    out = []
    for d in in_dims:
        o = (int(d) + 2 * padding - support) // stride + 1
        if o < 1:
            raise ValidationError(
                f"conv support {support} with padding {padding} exceeds input dim {d}")
        out.append(o)
    return tuple(out)


def _windows(xp: np.ndarray, out_dims, kernel: int, stride: int, dilation: int):
    """View of all sliding windows: (n, c, do, ho, wo, k, k, k)."""
    n, c = xp.shape[:2]
    sd, sh, sw = xp.strides[2:]
    return as_strided(
        xp,
        shape=(n, c, *out_dims, kernel, kernel, kernel),
        strides=(*xp.strides[:2],
                 sd * stride, sh * stride, sw * stride,
                 sd * dilation, sh * dilation, sw * dilation),
        writeable=False,
    )


def _im2col(x: np.ndarray, kernel: int, stride: int, dilation: int, padding: int):
    """Lower input windows to a (n * positions, c * k^3) matrix."""
    out_dims = conv3d_output_dims(x.shape[2:], kernel, stride, dilation, padding)
    if padding:
        xp = np.pad(x, ((0, 0), (0, 0)) + ((padding, padding),) * 3)
    else:
        xp = x
    win = _windows(xp, out_dims, kernel, stride, dilation)
    n, c = x.shape[:2]
    col = win.transpose(0, 2, 3, 4, 1, 5, 6, 7).reshape(
        n * int(np.prod(out_dims)), c * kernel ** 3)
    return col, out_dims


def conv3d_forward(x, weights, bias, stride: int = 1, dilation: int = 1,
                   padding: int = 0) -> np.ndarray:
    """3D convolution (cross-correlation); weights (o, c, k, k, k)."""
    x = _check_tensor(x, "x")
    weights = np.asarray(weights)
    if weights.ndim != 5 or not (weights.shape[2] == weights.shape[3] == weights.shape[4]):
        raise ValidationError(f"weights must be (o, c, k, k, k), got {weights.shape}")
    o, c_w, kernel = weights.shape[0], weights.shape[1], weights.shape[2]
    if x.shape[1] != c_w:
        raise ValidationError(f"input has {x.shape[1]} channels, weights expect {c_w}")
    bias = np.asarray(bias)
    if bias.shape != (o,):
        raise ValidationError(f"bias must be ({o},), got {bias.shape}")

    col, out_dims = _im2col(x, kernel, stride, dilation, padding)
    out = col @ weights.reshape(o, -1).T
    out += bias
    n = x.shape[0]
    return np.ascontiguousarray(
        out.reshape(n, *out_dims, o).transpose(0, 4, 1, 2, 3))


def conv3d_backward(grad_out, x, weights, stride: int = 1, dilation: int = 1,
                    padding: int = 0):
    """Gradients of conv3d_forward; returns (grad_x, grad_weights, grad_bias)."""
    x = _check_tensor(x, "x")
    grad_out = _check_tensor(grad_out, "grad_out")
    weights = np.asarray(weights)
    o, c, kernel = weights.shape[0], weights.shape[1], weights.shape[2]
    out_dims = conv3d_output_dims(x.shape[2:], kernel, stride, dilation, padding)
    if grad_out.shape != (x.shape[0], o, *out_dims):
        raise ValidationError(
            f"grad_out shape {grad_out.shape} does not match "
            f"{(x.shape[0], o, *out_dims)}")

    grad_bias = grad_out.sum(axis=(0, 2, 3, 4))

    col, _ = _im2col(x, kernel, stride, dilation, padding)
    go = np.ascontiguousarray(grad_out.transpose(0, 2, 3, 4, 1)).reshape(-1, o)
    grad_weights = (go.T @ col).reshape(weights.shape)

    gcol = go @ weights.reshape(o, -1)
    n = x.shape[0]
    g = gcol.reshape(n, *out_dims, c, kernel, kernel, kernel)
    g = g.transpose(0, 4, 1, 2, 3, 5, 6, 7)

    do, ho, wo = out_dims
    pd = [dim + 2 * padding for dim in x.shape[2:]]
    gx_pad = np.zeros((n, c, *pd), dtype=np.result_type(grad_out, weights))
    for a in range(kernel):
        za = a * dilation
        for b in range(kernel):
            zb = b * dilation
            for e in range(kernel):
                ze = e * dilation
                gx_pad[:, :,
                       za:za + do * stride:stride,
                       zb:zb + ho * stride:stride,
                       ze:ze + wo * stride:stride] += g[..., a, b, e]
    if padding:
        gx = gx_pad[:, :, padding:pd[0] - padding, padding:pd[1] - padding,
                    padding:pd[2] - padding]
    else:
        gx = gx_pad
    return np.ascontiguousarray(gx), grad_weights, grad_bias


def pool3d_max_forward(x, window: int = 2, stride: int | None = None):
    """Max pooling; returns (out, argmax) where argmax holds flat window offsets.

    Ties resolve to the lowest linear offset within the window.
    """
    x = _check_tensor(x, "x")
    window = int(window)
    stride = window if stride is None else int(stride)
    if window < 1 or stride < 1:
        raise ValidationError(f"bad pool geometry: window={window} stride={stride}")
    for d in x.shape[2:]:
        if d < window:
            raise ValidationError(f"pool window {window} exceeds input dim {d}")
    out_dims = tuple((d - window) // stride + 1 for d in x.shape[2:])
    win = _windows(x, out_dims, window, stride, dilation=1)
    n, c = x.shape[:2]
    flat = win.reshape(n, c, *out_dims, window ** 3)
    argmax = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), argmax


def pool3d_max_backward(grad_out, x, argmax, window: int = 2,
                        stride: int | None = None) -> np.ndarray:
    """Route gradients to winning elements (accumulating across windows)."""
    x = _check_tensor(x, "x")
    grad_out = _check_tensor(grad_out, "grad_out")
    window = int(window)
    stride = window if stride is None else int(stride)
    out_dims = tuple((d - window) // stride + 1 for d in x.shape[2:])
    n, c = x.shape[:2]
    if grad_out.shape != (n, c, *out_dims):
        raise ValidationError(
            f"grad_out shape {grad_out.shape} does not match {(n, c, *out_dims)}")

    # Decompose window offsets, then rebuild absolute input coordinates.
    ad, rem = np.divmod(argmax, window * window)
    ah, aw = np.divmod(rem, window)
    od, oh, ow = np.meshgrid(*(np.arange(d) for d in out_dims), indexing="ij")
    zd = od * stride + ad
    zh = oh * stride + ah
    zw = ow * stride + aw

    gx = np.zeros_like(x, dtype=np.result_type(grad_out))
    ni = np.arange(n)[:, None, None, None, None]
    ci = np.arange(c)[None, :, None, None, None]
    np.add.at(gx, (np.broadcast_to(ni, grad_out.shape),
                   np.broadcast_to(ci, grad_out.shape), zd, zh, zw), grad_out)
    return gx


def relu_forward(x) -> np.ndarray:
    return np.maximum(np.asarray(x), 0)


def relu_backward(grad_out, x) -> np.ndarray:
    x = np.asarray(x)
    return np.asarray(grad_out) * (x > 0)


def concat_forward(tensors) -> np.ndarray:
    """Concatenate along channels; spatial dims must agree."""
    tensors = [_check_tensor(t, f"tensors[{i}]") for i, t in enumerate(tensors)]
    base = tensors[0].shape
    for t in tensors[1:]:
        if t.shape[0] != base[0] or t.shape[2:] != base[2:]:
            raise ValidationError(
                f"concat inputs disagree: {base} vs {t.shape}")
    return np.concatenate(tensors, axis=1)


def concat_backward(grad_out, channel_counts) -> list:
    grad_out = _check_tensor(grad_out, "grad_out")
    if sum(channel_counts) != grad_out.shape[1]:
        raise ValidationError(
            f"channel counts {channel_counts} do not sum to {grad_out.shape[1]}")
    splits = np.cumsum(channel_counts)[:-1]
    return [np.ascontiguousarray(g) for g in np.split(grad_out, splits, axis=1)]


def add_forward(a, b) -> np.ndarray:
    a = _check_tensor(a, "a")
    b = _check_tensor(b, "b")
    if a.shape != b.shape:
        raise ValidationError(f"add inputs disagree: {a.shape} vs {b.shape}")
    return a + b


def add_backward(grad_out):
    return grad_out, grad_out
