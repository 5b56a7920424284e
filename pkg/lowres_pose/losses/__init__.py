"""Heatmap supervision: MSE, binary CE, regressive CE and its focal variant."""

from lowres_pose.losses.functional import ce_binary, focal_rce, mse, pixel_weights, rce
from lowres_pose.losses.supervision import (
    BinarizeMode,
    binarize_target,
    compute_loss,
    loss_gradient,
    supervision_target,
)

__all__ = [
    "BinarizeMode",
    "binarize_target",
    "ce_binary",
    "compute_loss",
    "focal_rce",
    "loss_gradient",
    "mse",
    "pixel_weights",
    "rce",
    "supervision_target",
]
