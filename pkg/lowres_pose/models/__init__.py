"""Regressor heads, the toy backbone and the composite network."""

from lowres_pose.models.backbone import PoseNet, ToyBackbone, build_toy_backbone
from lowres_pose.models.base import Module
from lowres_pose.models.heads import (
    DeconvHead,
    LHRHead,
    build_deconv_head,
    build_head,
    build_lhr,
    build_pixelshuffle_head,
    lhr_forward,
)

__all__ = [
    "DeconvHead",
    "LHRHead",
    "Module",
    "PoseNet",
    "ToyBackbone",
    "build_deconv_head",
    "build_head",
    "build_lhr",
    "build_pixelshuffle_head",
    "build_toy_backbone",
    "lhr_forward",
]
