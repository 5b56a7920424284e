"""Map a LossSpec onto the autodiff graph and its closed-form gradient."""

from enum import Enum

import numpy as np

from lowres_pose.autodiff.functional import sigmoid, sigmoid_array
from lowres_pose.autodiff.tensor import Tensor
from lowres_pose.errors import ShapeError
from lowres_pose.heatmaps.codec import HeatmapSet
from lowres_pose.losses.functional import (
    _complement_abs_error,
    ce_binary,
    focal_rce,
    mse,
    pixel_weights,
    rce,
)
from lowres_pose.schemas.specs import LossKind, LossSpec


class BinarizeMode(str, Enum):
    ONEHOT = "onehot"
    MASK = "mask"


def binarize_target(heatmaps: HeatmapSet | np.ndarray, mode: BinarizeMode) -> np.ndarray:
    """Binary cross-entropy target from Gaussian heatmaps.

    ONEHOT keeps only the peak pixel of every non-empty map; MASK keeps every
    positive pixel.
    """
    maps = heatmaps.maps if isinstance(heatmaps, HeatmapSet) else np.asarray(heatmaps)
    if maps.ndim < 2:
        raise ShapeError(f"Heatmaps need at least two axes, got shape {maps.shape}")
    if BinarizeMode(mode) == BinarizeMode.MASK:
        return (maps > 0).astype(maps.dtype)
    h, w = maps.shape[-2:]
    flat = maps.reshape(-1, h * w)
    out = np.zeros_like(flat)
    peaks = np.argmax(flat, axis=1)
    rows = np.flatnonzero(flat.max(axis=1) > 0)
    out[rows, peaks[rows]] = 1.0
    return out.reshape(maps.shape)


def supervision_target(spec: LossSpec, heatmaps: np.ndarray) -> np.ndarray:
    """The target the loss compares against: binarized for the CE kinds."""
    if spec.kind == LossKind.CE_ONEHOT:
        return binarize_target(heatmaps, BinarizeMode.ONEHOT)
    if spec.kind == LossKind.CE_MASK:
        return binarize_target(heatmaps, BinarizeMode.MASK)
    return np.asarray(heatmaps)


def compute_loss(spec: LossSpec, x: Tensor, heatmaps: np.ndarray) -> Tensor:
    """Scalar loss of raw head output ``x`` against Gaussian target heatmaps."""
    heatmaps = np.asarray(heatmaps)
    if heatmaps.shape != x.shape:
        raise ShapeError(f"Output {x.shape} and target {heatmaps.shape} differ")
    y = sigmoid(x) if spec.applies_sigmoid else x
    target = supervision_target(spec, heatmaps)
    if spec.kind == LossKind.MSE:
        return mse(y, target)
    if spec.kind in (LossKind.CE_ONEHOT, LossKind.CE_MASK):
        return ce_binary(y, target)
    if spec.kind == LossKind.RCE and spec.alpha is None:
        return rce(y, target)
    gamma = spec.gamma if spec.kind == LossKind.FOCAL_RCE else 0.0
    return focal_rce(y, target, spec.alpha, gamma, positives=heatmaps > 0)


def loss_gradient(spec: LossSpec, x: np.ndarray | Tensor, heatmaps: np.ndarray) -> np.ndarray:
    """Closed-form gradient of :func:`compute_loss` with respect to ``x``."""
    x = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    heatmaps = np.asarray(heatmaps, dtype=x.dtype)
    if heatmaps.shape != x.shape:
        raise ShapeError(f"Output {x.shape} and target {heatmaps.shape} differ")
    t = supervision_target(spec, heatmaps)
    n = x.size
    if spec.applies_sigmoid:
        y = sigmoid_array(x)
        dy_dx = y * (1.0 - y)
    else:
        y = x
        dy_dx = np.ones_like(x)

    if spec.kind == LossKind.MSE:
        return 2.0 * (y - t) * dy_dx / n
    if spec.kind in (LossKind.CE_ONEHOT, LossKind.CE_MASK):
        # d/dx of sigmoid cross-entropy
        return (y - t) / n

    gamma = spec.gamma if spec.kind == LossKind.FOCAL_RCE else 0.0
    w = pixel_weights(heatmaps > 0, spec.alpha, y)
    a = np.abs(y - t)
    q, inside = _complement_abs_error(y, t)
    # no gradient where 1 - |e| sits at the clamp
    d_abs = a**gamma / q * inside
    if gamma > 0:
        safe = np.where(a > 0, a, 1.0)
        d_abs = d_abs + np.where(a > 0, gamma * safe ** (gamma - 1.0), 0.0) * -np.log(q)
    return w * np.sign(y - t) * d_abs * dy_dx / n
