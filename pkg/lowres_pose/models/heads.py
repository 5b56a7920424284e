"""Regressor heads turning low-resolution features into keypoint heatmaps."""

from typing import Optional

import numpy as np

from lowres_pose.autodiff.functional import (
    add_bias,
    conv2d,
    conv_transpose2d,
    depth_to_space,
    relu,
)
from lowres_pose.autodiff.tensor import Tensor
from lowres_pose.errors import ShapeError
from lowres_pose.models.base import Module, init_bound
from lowres_pose.schemas.specs import HeadKind, HeadSpec, deconv_padding, prior_logit


def _rng(rng: Optional[np.random.Generator]) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(0)


def _check_positive(**values: int) -> None:
    for name, v in values.items():
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")


def _output_bias(
    channels: int,
    bound: float,
    bias: bool,
    prior_prob: Optional[float],
    rng: np.random.Generator,
    dtype,
) -> Optional[Tensor]:
    """Bias of the heatmap-emitting layer.

    A prior probability starts every channel at its logit, so sigmoid outputs
    start near ``prior_prob``; otherwise the bias is drawn like the weights.
    """
    if prior_prob is not None:
        return Tensor.full((channels,), prior_logit(prior_prob), dtype)
    if bias:
        return Tensor.uniform((channels,), bound, rng, dtype)
    return None


class LHRHead(Module):
    """N groups of L^2 kernels; group outputs are rearranged into L x L cells.

    A kernel size of 3 gives the pixel-shuffle style head.
    """

    def __init__(
        self,
        in_channels: int,
        num_keypoints: int,
        ratio: int,
        kernel_size: int = 1,
        bias: bool = False,
        rng: Optional[np.random.Generator] = None,
        dtype=np.float64,
        prior_prob: Optional[float] = None,
    ):
        super().__init__()
        _check_positive(M=in_channels, N=num_keypoints, L=ratio)
        self.in_channels = in_channels
        self.num_keypoints = num_keypoints
        self.ratio = ratio
        self.kernel_size = kernel_size
        self.padding = (kernel_size - 1) // 2
        rng = _rng(rng)
        out = num_keypoints * ratio * ratio
        bound = init_bound(in_channels * kernel_size * kernel_size)
        self.weight = self.add_parameter(
            "weight",
            Tensor.uniform((out, in_channels, kernel_size, kernel_size), bound, rng, dtype),
        )
        b = _output_bias(out, bound, bias, prior_prob, rng, dtype)
        self.bias = self.add_parameter("bias", b) if b is not None else None

    def project(self, features: Tensor) -> Tensor:
        """The N*L^2-channel convolution output, before rearrangement."""
        if features.ndim != 4 or features.shape[1] != self.in_channels:
            raise ShapeError(
                f"Head expects {self.in_channels} input channels, got shape {features.shape}"
            )
        x = conv2d(features, self.weight, stride=1, padding=self.padding)
        if self.bias is not None:
            x = add_bias(x, self.bias)
        return x

    def forward(self, features: Tensor) -> Tensor:
        return depth_to_space(self.project(features), self.ratio)


class DeconvHead(Module):
    """Stride-2 transposed convolutions with ReLU between them, then a 1x1 regressor."""

    def __init__(
        self,
        in_channels: int,
        filters: int,
        kernel_size: int,
        layers: int,
        num_keypoints: int,
        bias: bool = False,
        rng: Optional[np.random.Generator] = None,
        dtype=np.float64,
        prior_prob: Optional[float] = None,
    ):
        super().__init__()
        _check_positive(M=in_channels, F=filters, N=num_keypoints)
        if layers not in (1, 2, 3):
            raise ValueError(f"Deconv head supports 1-3 layers, got {layers}")
        if kernel_size < 2 or kernel_size % 2:
            raise ValueError(f"Deconv kernel must be even, got {kernel_size}")
        self.in_channels = in_channels
        self.layers = layers
        self.padding = deconv_padding(kernel_size)
        rng = _rng(rng)
        self.deconvs = []
        cin = in_channels
        for i in range(layers):
            # each output pixel sees (K/2)^2 taps per input channel at stride 2
            bound = init_bound(cin * (kernel_size // 2) ** 2)
            w = self.add_parameter(
                f"deconv{i}.weight",
                Tensor.uniform((cin, filters, kernel_size, kernel_size), bound, rng, dtype),
            )
            b = (
                self.add_parameter(f"deconv{i}.bias", Tensor.uniform((filters,), bound, rng, dtype))
                if bias
                else None
            )
            self.deconvs.append((w, b))
            cin = filters
        bound = init_bound(filters)
        self.final_weight = self.add_parameter(
            "final.weight", Tensor.uniform((num_keypoints, filters, 1, 1), bound, rng, dtype)
        )
        b = _output_bias(num_keypoints, bound, bias, prior_prob, rng, dtype)
        self.final_bias = self.add_parameter("final.bias", b) if b is not None else None

    def forward(self, features: Tensor) -> Tensor:
        if features.ndim != 4 or features.shape[1] != self.in_channels:
            raise ShapeError(
                f"Head expects {self.in_channels} input channels, got shape {features.shape}"
            )
        x = features
        for i, (w, b) in enumerate(self.deconvs):
            if i > 0:
                x = relu(x)
            x = conv_transpose2d(x, w, stride=2, padding=self.padding)
            if b is not None:
                x = add_bias(x, b)
        x = conv2d(relu(x), self.final_weight)
        if self.final_bias is not None:
            x = add_bias(x, self.final_bias)
        return x


def build_lhr(
    in_channels: int,
    num_keypoints: int,
    ratio: int,
    bias: bool = False,
    rng: Optional[np.random.Generator] = None,
    dtype=np.float64,
    prior_prob: Optional[float] = None,
) -> LHRHead:
    return LHRHead(in_channels, num_keypoints, ratio, 1, bias, rng, dtype, prior_prob)


def lhr_forward(head: LHRHead, features: Tensor) -> Tensor:
    """(B, M, H, W) features to (B, N, H*L, W*L) pre-activation heatmaps."""
    return head(features)


def build_deconv_head(
    in_channels: int,
    filters: int,
    kernel_size: int,
    layers: int,
    num_keypoints: int,
    bias: bool = False,
    rng: Optional[np.random.Generator] = None,
    dtype=np.float64,
    prior_prob: Optional[float] = None,
) -> DeconvHead:
    return DeconvHead(
        in_channels, filters, kernel_size, layers, num_keypoints, bias, rng, dtype, prior_prob
    )


def build_pixelshuffle_head(
    in_channels: int,
    num_keypoints: int,
    ratio: int,
    bias: bool = False,
    rng: Optional[np.random.Generator] = None,
    dtype=np.float64,
    prior_prob: Optional[float] = None,
) -> LHRHead:
    return LHRHead(in_channels, num_keypoints, ratio, 3, bias, rng, dtype, prior_prob)


def build_head(
    spec: HeadSpec, rng: Optional[np.random.Generator] = None, dtype=np.float64
) -> Module:
    """Head described by a HeadSpec."""
    if spec.kind == HeadKind.DECONV:
        return build_deconv_head(
            spec.in_channels,
            spec.filters,
            spec.kernel_size,
            spec.layers,
            spec.num_keypoints,
            spec.bias,
            rng,
            dtype,
            spec.prior_prob,
        )
    if spec.kind == HeadKind.PIXELSHUFFLE:
        return build_pixelshuffle_head(
            spec.in_channels,
            spec.num_keypoints,
            spec.upsample_ratio,
            spec.bias,
            rng,
            dtype,
            spec.prior_prob,
        )
    return build_lhr(
        spec.in_channels,
        spec.num_keypoints,
        spec.upsample_ratio,
        spec.bias,
        rng,
        dtype,
        spec.prior_prob,
    )
