"""Heatmap losses as autodiff operations with closed-form backward passes.

``y`` is the prediction in [0, 1] (post-sigmoid for the probability losses),
``target`` the ground truth and ``e = y - target``. Every loss reduces by the
mean over all elements.
"""

from typing import Optional

import numpy as np

from lowres_pose.autodiff.tensor import Tensor
from lowres_pose.errors import ShapeError

PROB_CLAMP = 1e-12


def _target_array(target: Tensor | np.ndarray, y: Tensor) -> np.ndarray:
    arr = target.data if isinstance(target, Tensor) else np.asarray(target)
    if arr.shape != y.shape:
        raise ShapeError(f"Prediction {y.shape} and target {arr.shape} differ")
    return arr.astype(y.dtype, copy=False)


def _scalar(value: float, y: Tensor, op: str) -> Tensor:
    return Tensor.from_op(np.asarray(value, dtype=y.dtype), (y,), op)


def mse(y: Tensor, target: Tensor | np.ndarray) -> Tensor:
    """Mean squared error."""
    t = _target_array(target, y)
    diff = y.data - t
    out = _scalar(np.mean(diff * diff), y, "mse")
    out.set_backward(lambda: y.accumulate_grad(out.grad * 2.0 * diff / diff.size))
    return out


def ce_binary(y: Tensor, target: Tensor | np.ndarray) -> Tensor:
    """Binary cross-entropy against a strictly binary target."""
    t = _target_array(target, y)
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("Cross-entropy target must be binary")
    p = np.clip(y.data, PROB_CLAMP, 1.0 - PROB_CLAMP)
    pos = t == 1
    losses = np.where(pos, -np.log(p), -np.log(1.0 - p))
    out = _scalar(losses.mean(), y, "ce_binary")

    def _backward():
        inside = (y.data >= PROB_CLAMP) & (y.data <= 1.0 - PROB_CLAMP)
        g = np.where(pos, -1.0 / p, 1.0 / (1.0 - p)) * inside
        y.accumulate_grad(out.grad * g / g.size)

    out.set_backward(_backward)
    return out


def _complement_abs_error(y: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``1 - |y - t|`` and whether it sits above the clamp.

    Written as ``y + (1 - t)`` or ``(1 - y) + t`` so a binary target gives
    exactly the cross-entropy argument.
    """
    q = np.where(y < t, y + (1.0 - t), (1.0 - y) + t)
    return np.maximum(q, PROB_CLAMP), q > PROB_CLAMP


def rce(y: Tensor, target: Tensor | np.ndarray) -> Tensor:
    """Regressive cross-entropy ``-log(1 - |e|)``."""
    t = _target_array(target, y)
    q, inside = _complement_abs_error(y.data, t)
    out = _scalar(np.mean(-np.log(q)), y, "rce")

    def _backward():
        g = np.sign(y.data - t) / q * inside
        y.accumulate_grad(out.grad * g / g.size)

    out.set_backward(_backward)
    return out


def pixel_weights(
    positives: Optional[np.ndarray], alpha: Optional[float], like: np.ndarray
) -> np.ndarray:
    """alpha on positive pixels, 1 - alpha elsewhere; ones when alpha is None."""
    if alpha is None:
        return np.ones_like(like)
    if positives is None:
        raise ValueError("Positive-sample weighting needs a positives mask")
    mask = np.asarray(positives, dtype=bool)
    if mask.shape != like.shape:
        raise ShapeError(f"Positives mask {mask.shape} does not match {like.shape}")
    return np.where(mask, alpha, 1.0 - alpha).astype(like.dtype)


def focal_rce(
    y: Tensor,
    target: Tensor | np.ndarray,
    alpha: Optional[float] = None,
    gamma: float = 1.0,
    positives: Optional[np.ndarray] = None,
) -> Tensor:
    """Focal regressive cross-entropy ``w |e|^gamma (-log(1 - |e|))``."""
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    t = _target_array(target, y)
    w = pixel_weights(positives, alpha, y.data)
    e = y.data - t
    a = np.abs(e)
    q, inside = _complement_abs_error(y.data, t)
    nll = -np.log(q)
    focus = a**gamma
    out = _scalar(np.mean(w * focus * nll), y, "focal_rce")

    def _backward():
        nonzero = a > 0
        if gamma == 0:
            d_focus = np.zeros_like(a)
        else:
            # subgradient 0 at e = 0
            safe = np.where(nonzero, a, 1.0)
            d_focus = np.where(nonzero, gamma * safe ** (gamma - 1.0), 0.0)
        sign = np.sign(e)
        g = w * sign * (d_focus * nll + focus / q * inside)
        y.accumulate_grad(out.grad * g / g.size)

    out.set_backward(_backward)
    return out
