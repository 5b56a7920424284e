"""Toy strided-convolution feature extractor and the full pose network."""

from typing import Optional

import numpy as np

from lowres_pose.autodiff.functional import add_bias, conv2d, relu
from lowres_pose.autodiff.tensor import Tensor
from lowres_pose.errors import ShapeError
from lowres_pose.models.base import Module, init_bound
from lowres_pose.models.heads import build_head
from lowres_pose.schemas.specs import BackboneSpec, HeadSpec


class ToyBackbone(Module):
    """conv + bias + ReLU per stage, padding (K - s) / 2."""

    def __init__(
        self,
        spec: BackboneSpec,
        rng: Optional[np.random.Generator] = None,
        dtype=np.float64,
    ):
        super().__init__()
        self.spec = spec
        rng = rng if rng is not None else np.random.default_rng(0)
        self.stages = []
        cin = spec.in_channels
        for i, stage in enumerate(spec.stages):
            bound = init_bound(cin * stage.kernel * stage.kernel)
            w = self.add_parameter(
                f"stage{i}.weight",
                Tensor.uniform(
                    (stage.channels, cin, stage.kernel, stage.kernel), bound, rng, dtype
                ),
            )
            b = self.add_parameter(
                f"stage{i}.bias", Tensor.uniform((stage.channels,), bound, rng, dtype)
            )
            self.stages.append((stage, w, b))
            cin = stage.channels

    @property
    def total_stride(self) -> int:
        return self.spec.total_stride

    @property
    def out_channels(self) -> int:
        return self.spec.out_channels

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.spec.in_channels:
            raise ShapeError(
                f"Backbone expects {self.spec.in_channels} input channels, got shape {x.shape}"
            )
        stride = self.total_stride
        if x.shape[2] % stride or x.shape[3] % stride:
            raise ShapeError(f"Input extents {x.shape[2:]} not divisible by stride {stride}")
        for stage, w, b in self.stages:
            x = relu(add_bias(conv2d(x, w, stage.stride, stage.padding), b))
        return x


def build_toy_backbone(
    spec: BackboneSpec, rng: Optional[np.random.Generator] = None, dtype=np.float64
) -> ToyBackbone:
    return ToyBackbone(spec, rng, dtype)


class PoseNet(Module):
    """Backbone followed by a regressor head; emits pre-activation heatmaps."""

    def __init__(self, backbone: ToyBackbone, head: Module):
        super().__init__()
        self.backbone = self.add_module("backbone", backbone)
        self.head = self.add_module("head", head)

    def forward(self, images: Tensor) -> Tensor:
        return self.head(self.backbone(images))

    @classmethod
    def build(
        cls,
        backbone: BackboneSpec,
        head: HeadSpec,
        seed: int = 0,
        dtype=np.float64,
    ) -> "PoseNet":
        """Backbone and head draw from separate streams so a head swap leaves the
        backbone initialisation unchanged."""
        if head.in_channels != backbone.out_channels:
            raise ShapeError(
                f"Head expects {head.in_channels} channels, backbone emits {backbone.out_channels}"
            )
        return cls(
            build_toy_backbone(backbone, np.random.default_rng([seed, 0]), dtype),
            build_head(head, np.random.default_rng([seed, 1]), dtype),
        )
