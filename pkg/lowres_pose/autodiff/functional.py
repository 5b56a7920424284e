"""Differentiable layer operations: convolutions, rearrangements, activations."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from lowres_pose.autodiff.tensor import Tensor
from lowres_pose.errors import ShapeError


def conv_out_extent(size: int, kernel: int, stride: int, padding: int) -> int:
    """Output extent of a convolution; must be a positive integer."""
    if stride <= 0 or padding < 0 or kernel <= 0:
        raise ShapeError(f"Invalid geometry k={kernel} s={stride} p={padding}")
    span = size + 2 * padding - kernel
    if span < 0 or span % stride != 0:
        raise ShapeError(
            f"Extent {size} with k={kernel} s={stride} p={padding} gives a non-integer output"
        )
    return span // stride + 1


def deconv_out_extent(size: int, kernel: int, stride: int, padding: int) -> int:
    out = (size - 1) * stride + kernel - 2 * padding
    if out <= 0:
        raise ShapeError(f"Transposed convolution of extent {size} is empty")
    return out


def _windows(xp: np.ndarray, k: int, s: int, h_out: int, w_out: int) -> np.ndarray:
    """(B, C, h_out, w_out, k, k) strided view of k x k patches."""
    view = sliding_window_view(xp, (k, k), axis=(2, 3))
    return view[:, :, : (h_out - 1) * s + 1 : s, : (w_out - 1) * s + 1 : s]


def _im2col(xp: np.ndarray, k: int, s: int, h_out: int, w_out: int) -> np.ndarray:
    """(B * h_out * w_out, C * k * k) contiguous patch matrix, rows in (b, i, j) order."""
    b, c = xp.shape[:2]
    win = _windows(xp, k, s, h_out, w_out).transpose(0, 2, 3, 1, 4, 5)
    return np.ascontiguousarray(win).reshape(b * h_out * w_out, c * k * k)


def _to_rows(a: np.ndarray) -> np.ndarray:
    """(B, C, H, W) to (B * H * W, C)."""
    b, c, h, w = a.shape
    return np.ascontiguousarray(a.transpose(0, 2, 3, 1)).reshape(b * h * w, c)


def _from_rows(rows: np.ndarray, b: int, h: int, w: int) -> np.ndarray:
    """Inverse of :func:`_to_rows`."""
    return np.ascontiguousarray(rows.reshape(b, h, w, -1).transpose(0, 3, 1, 2))


def _scatter_windows(cols: np.ndarray, out_shape, s: int) -> np.ndarray:
    """Sum (B, h, w, C, k, k) patches back onto a (B, C, H, W) canvas."""
    out = np.zeros(out_shape, dtype=cols.dtype)
    h, w, k = cols.shape[1], cols.shape[2], cols.shape[4]
    # channels-first view so every tap is one strided add
    cols = cols.transpose(0, 3, 1, 2, 4, 5)
    for p in range(k):
        for q in range(k):
            out[:, :, p : p + (h - 1) * s + 1 : s, q : q + (w - 1) * s + 1 : s] += cols[
                :, :, :, :, p, q
            ]
    return out


def _check_4d(x: Tensor, what: str) -> None:
    if x.ndim != 4:
        raise ShapeError(f"{what} must be rank 4, got shape {x.shape}")


def conv2d(x: Tensor, weight: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of (B, Cin, H, W) with a (Cout, Cin, K, K) kernel.

    Lowered to one matrix product over the patch matrix, which the backward
    pass reuses for the kernel gradient.
    """
    _check_4d(x, "conv2d input")
    _check_4d(weight, "conv2d kernel")
    b, cin, h, w = x.shape
    cout, kcin, k, k2 = weight.shape
    if kcin != cin or k != k2:
        raise ShapeError(f"conv2d kernel {weight.shape} does not fit input {x.shape}")
    h_out = conv_out_extent(h, k, stride, padding)
    w_out = conv_out_extent(w, k, stride, padding)

    pad = ((0, 0), (0, 0), (padding, padding), (padding, padding))
    xp = np.pad(x.data, pad) if padding else x.data
    cols = _im2col(xp, k, stride, h_out, w_out)
    kernel = weight.data.reshape(cout, cin * k * k)
    data = _from_rows(cols @ kernel.T, b, h_out, w_out)
    out = Tensor.from_op(data, (x, weight), "conv2d")

    def _backward():
        g = _to_rows(out.grad)
        if weight.requires_grad:
            weight.accumulate_grad((g.T @ cols).reshape(weight.shape))
        if x.requires_grad:
            dcols = (g @ kernel).reshape(b, h_out, w_out, cin, k, k)
            dxp = _scatter_windows(dcols, xp.shape, stride)
            x.accumulate_grad(dxp[:, :, padding : padding + h, padding : padding + w])

    out.set_backward(_backward)
    return out


def conv_transpose2d(x: Tensor, weight: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed convolution of (B, Cin, H, W) with a (Cin, Cout, K, K) kernel.

    Adjoint of :func:`conv2d` with the same geometry.
    """
    _check_4d(x, "conv_transpose2d input")
    _check_4d(weight, "conv_transpose2d kernel")
    b, cin, h, w = x.shape
    kcin, cout, k, k2 = weight.shape
    if kcin != cin or k != k2:
        raise ShapeError(f"conv_transpose2d kernel {weight.shape} does not fit input {x.shape}")
    if stride <= 0 or padding < 0:
        raise ShapeError(f"Invalid geometry s={stride} p={padding}")
    h_out = deconv_out_extent(h, k, stride, padding)
    w_out = deconv_out_extent(w, k, stride, padding)
    h_full = (h - 1) * stride + k
    w_full = (w - 1) * stride + k

    rows = _to_rows(x.data)
    kernel = weight.data.reshape(cin, cout * k * k)
    cols = (rows @ kernel).reshape(b, h, w, cout, k, k)
    full = _scatter_windows(cols, (b, cout, h_full, w_full), stride)
    data = full[:, :, padding : padding + h_out, padding : padding + w_out]
    out = Tensor.from_op(np.ascontiguousarray(data), (x, weight), "conv_transpose2d")

    def _backward():
        pad = ((0, 0), (0, 0), (padding, padding), (padding, padding))
        gp = np.pad(out.grad, pad) if padding else out.grad
        gcols = _im2col(gp, k, stride, h, w)
        if x.requires_grad:
            x.accumulate_grad(_from_rows(gcols @ kernel.T, b, h, w))
        if weight.requires_grad:
            weight.accumulate_grad((rows.T @ gcols).reshape(weight.shape))

    out.set_backward(_backward)
    return out


def _depth_to_space_array(a: np.ndarray, ratio: int) -> np.ndarray:
    b, c, h, w = a.shape
    n = c // (ratio * ratio)
    return (
        a.reshape(b, n, ratio, ratio, h, w)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(b, n, h * ratio, w * ratio)
    )


def _space_to_depth_array(a: np.ndarray, ratio: int) -> np.ndarray:
    b, c, h, w = a.shape
    hh, ww = h // ratio, w // ratio
    return (
        a.reshape(b, c, hh, ratio, ww, ratio)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(b, c * ratio * ratio, hh, ww)
    )


def depth_to_space(x: Tensor, ratio: int) -> Tensor:
    """(B, C*L^2, H, W) -> (B, C, H*L, W*L).

    ``out[b, c, h*L + i, w*L + j] = in[b, c*L^2 + i*L + j, h, w]``.
    """
    _check_4d(x, "depth_to_space input")
    if ratio <= 0:
        raise ShapeError(f"Ratio must be positive, got {ratio}")
    if x.shape[1] % (ratio * ratio) != 0:
        raise ShapeError(f"{x.shape[1]} channels not divisible by {ratio}^2")
    out = Tensor.from_op(
        np.ascontiguousarray(_depth_to_space_array(x.data, ratio)), (x,), "depth_to_space"
    )
    out.set_backward(lambda: x.accumulate_grad(_space_to_depth_array(out.grad, ratio)))
    return out


def space_to_depth(x: Tensor, ratio: int) -> Tensor:
    """Inverse of :func:`depth_to_space`."""
    _check_4d(x, "space_to_depth input")
    if ratio <= 0:
        raise ShapeError(f"Ratio must be positive, got {ratio}")
    if x.shape[2] % ratio or x.shape[3] % ratio:
        raise ShapeError(f"Extents {x.shape[2:]} not divisible by {ratio}")
    out = Tensor.from_op(
        np.ascontiguousarray(_space_to_depth_array(x.data, ratio)), (x,), "space_to_depth"
    )
    out.set_backward(lambda: x.accumulate_grad(_depth_to_space_array(out.grad, ratio)))
    return out


def sigmoid_array(a: np.ndarray) -> np.ndarray:
    """Overflow-free logistic function."""
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(x: Tensor) -> Tensor:
    out = Tensor.from_op(sigmoid_array(x.data), (x,), "sigmoid")
    out.set_backward(lambda: x.accumulate_grad(out.grad * out.data * (1.0 - out.data)))
    return out


def relu(x: Tensor) -> Tensor:
    out = Tensor.from_op(np.maximum(x.data, 0), (x,), "relu")
    out.set_backward(lambda: x.accumulate_grad(out.grad * (x.data > 0)))
    return out


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Per-channel bias on a (B, C, H, W) tensor."""
    _check_4d(x, "add_bias input")
    if bias.shape != (x.shape[1],):
        raise ShapeError(f"Bias {bias.shape} does not match {x.shape[1]} channels")
    out = Tensor.from_op(x.data + bias.data[None, :, None, None], (x, bias), "add_bias")

    def _backward():
        x.accumulate_grad(out.grad)
        bias.accumulate_grad(out.grad.sum(axis=(0, 2, 3)))

    out.set_backward(_backward)
    return out
