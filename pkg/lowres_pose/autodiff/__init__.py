"""Minimal reverse-mode autodiff on numpy arrays."""

from lowres_pose.autodiff.checkpoint import load_checkpoint, save_checkpoint
from lowres_pose.autodiff.functional import (
    add_bias,
    conv2d,
    conv_transpose2d,
    depth_to_space,
    relu,
    sigmoid,
    space_to_depth,
)
from lowres_pose.autodiff.gradcheck import GradcheckResult, gradcheck, relative_error
from lowres_pose.autodiff.optim import Adam, AdamState, adam_update
from lowres_pose.autodiff.tensor import Tensor, backward, no_grad, topological_order

__all__ = [
    # Graph
    "Tensor",
    "backward",
    "no_grad",
    "topological_order",
    # Layers
    "add_bias",
    "conv2d",
    "conv_transpose2d",
    "depth_to_space",
    "relu",
    "sigmoid",
    "space_to_depth",
    # Optimisation and persistence
    "Adam",
    "AdamState",
    "adam_update",
    "load_checkpoint",
    "save_checkpoint",
    # Verification
    "GradcheckResult",
    "gradcheck",
    "relative_error",
]
