"""Per-layer parameter and multiply-accumulate accounting.

Convention ``mac-output-centric-v1``: a convolution costs
``out_elements * Cin * K^2`` MACs; a transposed convolution is counted the
same way on its output with the full ``K^2`` factor. One MAC is one reported
FLOP. Normalisation layers carry parameters but no MACs.
"""

from typing import Dict, List, Tuple

from lowres_pose.errors import ShapeError
from lowres_pose.schemas.results import LayerCost
from lowres_pose.schemas.specs import BackboneSpec, HeadKind, HeadSpec

CONVENTION = "mac-output-centric-v1"

Extent = Tuple[int, int]


def floor_extent(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv_cost(
    name: str,
    cin: int,
    cout: int,
    kernel: int,
    out_extent: Extent,
    bias: bool = False,
) -> LayerCost:
    h, w = out_extent
    return LayerCost(
        name=name,
        kind="conv",
        in_channels=cin,
        out_channels=cout,
        kernel_size=kernel,
        out_extent=out_extent,
        params=cout * cin * kernel * kernel + (cout if bias else 0),
        macs=h * w * cout * cin * kernel * kernel,
    )


def deconv_cost(
    name: str,
    cin: int,
    cout: int,
    kernel: int,
    out_extent: Extent,
    bias: bool = False,
) -> LayerCost:
    cost = conv_cost(name, cin, cout, kernel, out_extent, bias)
    return cost.model_copy(update={"kind": "deconv"})


def bn_cost(name: str, channels: int, out_extent: Extent) -> LayerCost:
    return LayerCost(
        name=name,
        kind="bn",
        in_channels=channels,
        out_channels=channels,
        kernel_size=1,
        out_extent=out_extent,
        params=2 * channels,
        macs=0,
    )


# Bottleneck blocks per stage
RESNET_BLOCKS: Dict[int, List[int]] = {
    50: [3, 4, 6, 3],
    101: [3, 4, 23, 3],
    152: [3, 8, 36, 3],
}
RESNET_WIDTHS = [64, 128, 256, 512]
RESNET_STRIDE = 32
EXPANSION = 4


def _conv_bn(name: str, cin: int, cout: int, k: int, extent: Extent) -> List[LayerCost]:
    return [conv_cost(name, cin, cout, k, extent), bn_cost(f"{name}.bn", cout, extent)]


def resnet_layers(depth: int, input_extent: Extent = (256, 192)) -> List[LayerCost]:
    """Convolution and batch-norm layers of a bottleneck residual network.

    Classifier excluded; the stride of a downsampling block sits on its 3x3
    convolution.
    """
    if depth not in RESNET_BLOCKS:
        raise ValueError(f"Residual depth must be one of {sorted(RESNET_BLOCKS)}, got {depth}")
    h, w = input_extent
    h, w = floor_extent(h, 7, 2, 3), floor_extent(w, 7, 2, 3)
    layers = _conv_bn("conv1", 3, 64, 7, (h, w))
    h, w = floor_extent(h, 3, 2, 1), floor_extent(w, 3, 2, 1)  # max pool

    cin = 64
    for stage, (blocks, width) in enumerate(zip(RESNET_BLOCKS[depth], RESNET_WIDTHS), start=1):
        cout = width * EXPANSION
        for b in range(blocks):
            stride = 2 if (b == 0 and stage > 1) else 1
            prefix = f"layer{stage}.{b}"
            in_extent = (h, w)
            h, w = floor_extent(h, 3, stride, 1), floor_extent(w, 3, stride, 1)
            layers += _conv_bn(f"{prefix}.conv1", cin, width, 1, in_extent)
            layers += _conv_bn(f"{prefix}.conv2", width, width, 3, (h, w))
            layers += _conv_bn(f"{prefix}.conv3", width, cout, 1, (h, w))
            if b == 0:
                layers += _conv_bn(f"{prefix}.downsample", cin, cout, 1, (h, w))
            cin = cout
    return layers


def toy_backbone_layers(spec: BackboneSpec, input_extent: Extent) -> List[LayerCost]:
    h, w = input_extent
    cin = spec.in_channels
    layers = []
    for i, stage in enumerate(spec.stages):
        h = floor_extent(h, stage.kernel, stage.stride, stage.padding)
        w = floor_extent(w, stage.kernel, stage.stride, stage.padding)
        layers.append(conv_cost(f"stage{i}", cin, stage.channels, stage.kernel, (h, w), bias=True))
        cin = stage.channels
    return layers


def head_layers(spec: HeadSpec, feature_extent: Extent) -> List[LayerCost]:
    """Layers of a head applied to features of the given extent."""
    h, w = feature_extent
    if spec.kind == HeadKind.DECONV:
        layers = []
        cin = spec.in_channels
        for i in range(spec.layers):
            h, w = 2 * h, 2 * w
            layers.append(
                deconv_cost(f"deconv{i}", cin, spec.filters, spec.kernel_size, (h, w), spec.bias)
            )
            cin = spec.filters
        layers.append(conv_cost("final", cin, spec.num_keypoints, 1, (h, w), spec.output_bias))
        return layers
    kernel = 3 if spec.kind == HeadKind.PIXELSHUFFLE else 1
    ratio = spec.upsample_ratio
    return [
        conv_cost(
            "project",
            spec.in_channels,
            spec.num_keypoints * ratio * ratio,
            kernel,
            (h, w),
            spec.output_bias,
        )
    ]


def ablation_head_layers(
    deconv_layers: int,
    feature_extent: Extent,
    in_channels: int = 2048,
    filters: int = 256,
    kernel_size: int = 4,
    num_keypoints: int = 17,
    target_ratio: int = 8,
) -> List[LayerCost]:
    """``deconv_layers`` deconvolutions, then an LHR finishing the upsampling.

    With three deconvolutions the LHR has ratio 1, the plain 1x1 regressor.
    """
    if not 0 <= deconv_layers <= 3:
        raise ValueError(f"Ablation supports 0-3 deconvolutions, got {deconv_layers}")
    if target_ratio % (2**deconv_layers):
        raise ShapeError(f"Ratio {target_ratio} not reachable after {deconv_layers} doublings")
    h, w = feature_extent
    layers: List[LayerCost] = []
    cin = in_channels
    for i in range(deconv_layers):
        h, w = 2 * h, 2 * w
        layers.append(deconv_cost(f"deconv{i}", cin, filters, kernel_size, (h, w)))
        cin = filters
    ratio = target_ratio // (2**deconv_layers)
    layers.append(conv_cost("project", cin, num_keypoints * ratio * ratio, 1, (h, w)))
    return layers
