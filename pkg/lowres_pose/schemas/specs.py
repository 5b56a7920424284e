"""Declarative architecture and supervision specs."""

from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import Field, field_validator, model_validator

from lowres_pose.schemas.versioning import VersionedSchema


def deconv_padding(kernel_size: int) -> int:
    """Padding that makes a stride-2 deconvolution exactly double the extent."""
    return (kernel_size - 2) // 2


def prior_logit(prior_prob: float) -> float:
    """Pre-activation whose sigmoid is ``prior_prob``."""
    return float(np.log(prior_prob / (1.0 - prior_prob)))


class HeadKind(str, Enum):
    """Regressor head families."""

    LHR = "lhr"
    DECONV = "deconv"
    PIXELSHUFFLE = "pixelshuffle"


class LossKind(str, Enum):
    """Heatmap supervision families."""

    MSE = "mse"
    CE_ONEHOT = "ce_onehot"
    CE_MASK = "ce_mask"
    RCE = "rce"
    FOCAL_RCE = "focal_rce"


class HeadSpec(VersionedSchema):
    """Regressor head description.

    ``in_channels`` is M, ``num_keypoints`` N, ``upsample_ratio`` L (LHR and
    pixel-shuffle heads), ``filters`` F, ``kernel_size`` K and ``layers`` the
    deconvolution count (deconv head).
    """

    kind: HeadKind = HeadKind.LHR
    in_channels: int = Field(..., gt=0, description="M: channels of the LR feature map")
    num_keypoints: int = Field(..., gt=0, description="N: heatmaps emitted")
    upsample_ratio: int = Field(default=1, ge=1, description="L: upsampling ratio")
    filters: int = Field(default=256, gt=0, description="F: deconvolution filters")
    kernel_size: int = Field(default=4, gt=0, description="K: deconvolution kernel size")
    layers: int = Field(default=3, ge=1, description="Deconvolution layer count")
    bias: bool = False
    prior_prob: Optional[float] = Field(
        default=None,
        gt=0.0,
        lt=1.0,
        description="Initial sigmoid output; gives the output layer a bias at its logit",
    )

    @model_validator(mode="after")
    def check_geometry(self) -> "HeadSpec":
        """Deconv heads must double the extent at every layer."""
        if self.kind == HeadKind.DECONV:
            if self.layers not in (1, 2, 3):
                raise ValueError(f"Deconv head supports 1-3 layers, got {self.layers}")
            if self.kernel_size % 2 != 0 or self.kernel_size < 2:
                raise ValueError(
                    f"Deconv kernel must be even to double the extent, got {self.kernel_size}"
                )
        return self

    @property
    def scale_factor(self) -> int:
        """Ratio of heatmap extent to feature extent."""
        if self.kind == HeadKind.DECONV:
            return 2**self.layers
        return self.upsample_ratio

    @property
    def deconv_padding(self) -> int:
        return deconv_padding(self.kernel_size)

    @property
    def output_bias(self) -> bool:
        """Whether the layer emitting the heatmaps carries a bias."""
        return self.bias or self.prior_prob is not None


class StageSpec(VersionedSchema):
    """One strided convolution stage of the toy backbone."""

    channels: int = Field(..., gt=0)
    kernel: int = Field(default=4, gt=0)
    stride: int = Field(default=2, gt=0)

    @model_validator(mode="after")
    def check_padding(self) -> "StageSpec":
        """Stages use padding (K - s) / 2, which must be a non-negative integer."""
        if self.kernel < self.stride or (self.kernel - self.stride) % 2 != 0:
            raise ValueError(
                f"Stage kernel {self.kernel} and stride {self.stride} give no integral padding"
            )
        return self

    @property
    def padding(self) -> int:
        return (self.kernel - self.stride) // 2


class BackboneSpec(VersionedSchema):
    """Toy feature extractor description."""

    in_channels: int = Field(default=1, gt=0)
    stages: List[StageSpec] = Field(
        default_factory=lambda: [
            StageSpec(channels=16),
            StageSpec(channels=32),
            StageSpec(channels=64),
        ]
    )

    @field_validator("stages")
    @classmethod
    def check_stages(cls, v: List[StageSpec]) -> List[StageSpec]:
        """Stage product must actually downsample."""
        if not v:
            raise ValueError("Backbone needs at least one stage")
        total = 1
        for stage in v:
            total *= stage.stride
        if total < 2:
            raise ValueError(f"Backbone total stride must be >= 2, got {total}")
        return v

    @property
    def total_stride(self) -> int:
        total = 1
        for stage in self.stages:
            total *= stage.stride
        return total

    @property
    def out_channels(self) -> int:
        return self.stages[-1].channels


class LossSpec(VersionedSchema):
    """Supervision selection and hyperparameters.

    ``alpha`` weights positive pixels (negatives get ``1 - alpha``); ``None``
    disables the weighting. ``gamma`` is the focal exponent on ``|e|``.
    """

    kind: LossKind = LossKind.FOCAL_RCE
    alpha: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    gamma: float = Field(default=0.0, ge=0.0)
    applies_sigmoid: Optional[bool] = None

    @model_validator(mode="after")
    def resolve_sigmoid(self) -> "LossSpec":
        """Probability-space losses require the sigmoid mapping."""
        if self.applies_sigmoid is None:
            object.__setattr__(self, "applies_sigmoid", self.kind != LossKind.MSE)
        if self.kind != LossKind.MSE and not self.applies_sigmoid:
            raise ValueError(f"Loss '{self.kind.value}' requires applies_sigmoid")
        return self

    @classmethod
    def focal_default(cls) -> "LossSpec":
        """Focal RCE with the standard alpha=0.7, gamma=1.0."""
        return cls(kind=LossKind.FOCAL_RCE, alpha=0.7, gamma=1.0)
