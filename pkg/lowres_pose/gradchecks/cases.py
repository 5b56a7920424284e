"""Built-in gradcheck cases: every layer, head and loss on random float64 data."""

from typing import List

import numpy as np

from lowres_pose.autodiff import functional as F
from lowres_pose.autodiff.gradcheck import GradcheckResult, gradcheck, gradcheck_parameters
from lowres_pose.autodiff.tensor import Tensor
from lowres_pose.gradchecks.registry import CaseFn, GradcheckRegistry, register_case
from lowres_pose.losses.supervision import compute_loss
from lowres_pose.models.backbone import PoseNet
from lowres_pose.models.heads import build_deconv_head, build_lhr, build_pixelshuffle_head
from lowres_pose.schemas.specs import (
    BackboneSpec,
    HeadKind,
    HeadSpec,
    LossKind,
    LossSpec,
    StageSpec,
)


def _projected(out: Tensor, rng_weights: np.ndarray) -> Tensor:
    """Scalar that weights every output element differently."""
    return (out * Tensor(rng_weights)).mean()


def _away_from_zero(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(0.1, 1.0, size=shape)


def _layer_case(op, in_shapes, out_shape, rng: np.random.Generator, data=None) -> GradcheckResult:
    inputs = data if data is not None else [rng.standard_normal(s) for s in in_shapes]
    r = rng.standard_normal(out_shape)
    return gradcheck(lambda *ts: _projected(op(*ts), r), inputs)


@register_case("layers")
def conv2d(rng):
    return _layer_case(
        lambda x, w: F.conv2d(x, w, stride=1, padding=1), [(2, 3, 5, 5), (4, 3, 3, 3)],
        (2, 4, 5, 5), rng,
    )


@register_case("layers")
def conv2d_strided(rng):
    return _layer_case(
        lambda x, w: F.conv2d(x, w, stride=2, padding=1), [(1, 2, 6, 6), (3, 2, 4, 4)],
        (1, 3, 3, 3), rng,
    )


@register_case("layers")
def conv_transpose2d(rng):
    return _layer_case(
        lambda x, w: F.conv_transpose2d(x, w, stride=2, padding=1),
        [(1, 3, 3, 3), (3, 2, 4, 4)], (1, 2, 6, 6), rng,
    )


@register_case("layers")
def conv_transpose2d_unpadded(rng):
    return _layer_case(
        lambda x, w: F.conv_transpose2d(x, w, stride=1, padding=0),
        [(2, 2, 3, 2), (2, 3, 3, 3)], (2, 3, 5, 4), rng,
    )


@register_case("layers")
def depth_to_space(rng):
    return _layer_case(lambda x: F.depth_to_space(x, 2), [(1, 8, 2, 3)], (1, 2, 4, 6), rng)


@register_case("layers")
def space_to_depth(rng):
    return _layer_case(lambda x: F.space_to_depth(x, 2), [(1, 2, 4, 6)], (1, 8, 2, 3), rng)


@register_case("layers")
def sigmoid(rng):
    data = [3.0 * rng.standard_normal((2, 3, 4, 4))]
    return _layer_case(F.sigmoid, None, (2, 3, 4, 4), rng, data)


@register_case("layers")
def relu(rng):
    data = [_away_from_zero(rng, (2, 3, 4, 4))]
    return _layer_case(F.relu, None, (2, 3, 4, 4), rng, data)


@register_case("layers")
def add_bias(rng):
    return _layer_case(F.add_bias, [(2, 3, 4, 5), (3,)], (2, 3, 4, 5), rng)


@register_case("layers")
def elementwise(rng):
    return _layer_case(lambda a, b, c: a * b - c + a, [(3, 4)] * 3, (3, 4), rng)


@register_case("layers")
def reshape_sum(rng):
    x = rng.standard_normal((2, 3, 4))
    return gradcheck(lambda t: (t.reshape(6, 4) * 0.5).sum(), [x])


def _head_case(head, in_channels: int, extent, rng: np.random.Generator) -> GradcheckResult:
    x = Tensor(rng.standard_normal((2, in_channels, *extent)), requires_grad=True)
    out_shape = head(x).shape
    r = rng.standard_normal(out_shape)
    return gradcheck_parameters(lambda: _projected(head(x), r), [x, *head.parameters()])


def _seed(rng: np.random.Generator) -> np.random.Generator:
    return np.random.default_rng(int(rng.integers(2**31)))


@register_case("heads")
def lhr_head(rng):
    return _head_case(build_lhr(4, 2, 2, rng=_seed(rng)), 4, (3, 3), rng)


@register_case("heads")
def lhr_head_bias(rng):
    return _head_case(build_lhr(3, 2, 3, bias=True, rng=_seed(rng)), 3, (2, 2), rng)


@register_case("heads")
def pixelshuffle_head(rng):
    return _head_case(build_pixelshuffle_head(3, 2, 2, rng=_seed(rng)), 3, (3, 3), rng)


@register_case("heads")
def deconv_head(rng):
    return _head_case(build_deconv_head(3, 4, 4, 2, 2, rng=_seed(rng)), 3, (2, 2), rng)


@register_case("heads")
def deconv_head_bias(rng):
    return _head_case(build_deconv_head(2, 3, 4, 1, 2, bias=True, rng=_seed(rng)), 2, (2, 3), rng)


@register_case("heads")
def backbone_lhr(rng):
    backbone = BackboneSpec(stages=[StageSpec(channels=3), StageSpec(channels=4)])
    head = HeadSpec(kind=HeadKind.LHR, in_channels=4, num_keypoints=2, upsample_ratio=2)
    net = PoseNet.build(backbone, head, seed=int(rng.integers(2**31)))
    x = Tensor(rng.standard_normal((1, 1, 8, 8)), requires_grad=True)
    r = rng.standard_normal(net(x).shape)
    return gradcheck_parameters(lambda: _projected(net(x), r), [x, *net.parameters()])


def _loss_case(spec: LossSpec, rng: np.random.Generator) -> GradcheckResult:
    shape = (2, 3, 4, 4)
    target = rng.uniform(0.05, 1.0, size=shape) * (rng.uniform(size=shape) > 0.5)
    x = 2.0 * rng.standard_normal(shape)
    return gradcheck(lambda t: compute_loss(spec, t, target), [x])


@register_case("losses")
def mse(rng):
    return _loss_case(LossSpec(kind=LossKind.MSE), rng)


@register_case("losses")
def mse_sigmoid(rng):
    return _loss_case(LossSpec(kind=LossKind.MSE, applies_sigmoid=True), rng)


@register_case("losses")
def ce_onehot(rng):
    return _loss_case(LossSpec(kind=LossKind.CE_ONEHOT), rng)


@register_case("losses")
def ce_mask(rng):
    return _loss_case(LossSpec(kind=LossKind.CE_MASK), rng)


@register_case("losses")
def rce(rng):
    return _loss_case(LossSpec(kind=LossKind.RCE), rng)


@register_case("losses")
def rce_weighted(rng):
    return _loss_case(LossSpec(kind=LossKind.RCE, alpha=0.7), rng)


@register_case("losses")
def focal_rce(rng):
    return _loss_case(LossSpec.focal_default(), rng)


@register_case("losses")
def focal_rce_gamma2(rng):
    return _loss_case(LossSpec(kind=LossKind.FOCAL_RCE, alpha=0.25, gamma=2.0), rng)


BUILTIN_CASES: List[CaseFn] = [
    conv2d,
    conv2d_strided,
    conv_transpose2d,
    conv_transpose2d_unpadded,
    depth_to_space,
    space_to_depth,
    sigmoid,
    relu,
    add_bias,
    elementwise,
    reshape_sum,
    lhr_head,
    lhr_head_bias,
    pixelshuffle_head,
    deconv_head,
    deconv_head_bias,
    backbone_lhr,
    mse,
    mse_sigmoid,
    ce_onehot,
    ce_mask,
    rce,
    rce_weighted,
    focal_rce,
    focal_rce_gamma2,
]


def register_builtin_cases(registry: GradcheckRegistry) -> None:
    for func in BUILTIN_CASES:
        metadata = func.gradcheck_metadata  # type: ignore[attr-defined]
        registry.register(func.__name__, func, metadata)
