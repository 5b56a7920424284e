"""Tests for the regressor heads, the toy backbone and the composite network."""

import numpy as np
import pytest

from lowres_pose.autodiff import Tensor, conv2d, depth_to_space
from lowres_pose.autodiff.functional import sigmoid_array
from lowres_pose.autodiff.gradcheck import gradcheck_parameters
from lowres_pose.complexity import count_head_params
from lowres_pose.errors import CheckpointError, ShapeError
from lowres_pose.models import (
    PoseNet,
    build_deconv_head,
    build_head,
    build_lhr,
    build_pixelshuffle_head,
    build_toy_backbone,
    lhr_forward,
)
from lowres_pose.schemas.specs import BackboneSpec, HeadKind, HeadSpec, StageSpec


@pytest.fixture
def rng():
    return np.random.default_rng(7)


class TestLHRHead:
    """Test the low-to-high regressor."""

    def test_output_shape(self, rng):
        """Test (B, M, H, W) maps to (B, N, H*L, W*L)."""
        head = build_lhr(6, 3, 4, rng=rng)
        out = lhr_forward(head, Tensor(rng.standard_normal((2, 6, 3, 5))))
        assert out.shape == (2, 3, 12, 20)

    def test_equals_pointwise_conv_then_rearrangement(self, rng):
        """Test the head is bit-identical to a 1x1 conv followed by depth_to_space."""
        for m, n, ratio in [(4, 2, 2), (5, 3, 3), (2, 1, 1)]:
            head = build_lhr(m, n, ratio, rng=rng)
            x = Tensor(rng.standard_normal((2, m, 3, 4)))
            expected = depth_to_space(conv2d(x, head.weight), ratio)
            assert lhr_forward(head, x).data.tobytes() == expected.data.tobytes()

    def test_group_owns_its_cell(self, rng):
        """Test keypoint k's L x L cell comes only from channels k*L^2 .. (k+1)*L^2 - 1."""
        head = build_lhr(3, 2, 2, rng=rng)
        head.weight.data[:] = 0.0
        head.weight.data[4:8] = 1.0  # keypoint 1 only
        out = lhr_forward(head, Tensor(np.ones((1, 3, 2, 2)))).data
        np.testing.assert_array_equal(out[0, 0], np.zeros((4, 4)))
        np.testing.assert_array_equal(out[0, 1], np.full((4, 4), 3.0))

    def test_parameter_count(self):
        """Test M*N*L^2 parameters without bias."""
        head = build_lhr(8, 3, 2)
        assert head.num_parameters() == 96
        spec = HeadSpec(kind=HeadKind.LHR, in_channels=8, num_keypoints=3, upsample_ratio=2)
        assert count_head_params(spec) == 96

    def test_wrong_channels_rejected(self, rng):
        """Test the head checks its input channel count."""
        head = build_lhr(4, 2, 2, rng=rng)
        with pytest.raises(ShapeError):
            lhr_forward(head, Tensor(rng.standard_normal((1, 3, 2, 2))))

    def test_non_positive_ratio_rejected(self):
        """Test L must be positive."""
        with pytest.raises(ValueError):
            build_lhr(4, 2, 0)


class TestPixelShuffleHead:
    """Test the 3x3 variant."""

    def test_single_channel_has_nine_parameters(self):
        """Test M=N=L=1 gives a single 3x3 kernel."""
        assert build_pixelshuffle_head(1, 1, 1).num_parameters() == 9

    def test_nine_times_lhr(self):
        """Test the parameter ratio to LHR is 9."""
        lhr = build_lhr(6, 4, 2)
        ps = build_pixelshuffle_head(6, 4, 2)
        assert ps.num_parameters() == 9 * lhr.num_parameters()

    def test_same_output_shape(self, rng):
        """Test padding keeps the spatial extent."""
        ps = build_pixelshuffle_head(3, 2, 2, rng=rng)
        assert ps(Tensor(rng.standard_normal((1, 3, 4, 5)))).shape == (1, 2, 8, 10)


class TestDeconvHead:
    """Test the deconvolution baseline head."""

    @pytest.mark.parametrize("layers", [1, 2, 3])
    def test_extent_multiplies_by_power_of_two(self, rng, layers):
        """Test each layer doubles the extent."""
        head = build_deconv_head(4, 3, 4, layers, 2, rng=rng)
        out = head(Tensor(rng.standard_normal((1, 4, 2, 3))))
        assert out.shape == (1, 2, 2 * 2**layers, 3 * 2**layers)

    def test_parameter_count_matches_closed_form(self):
        """Test (M + (layers-1)*F)*F*K^2 + F*N parameters."""
        head = build_deconv_head(8, 4, 4, 2, 3)
        assert head.num_parameters() == (8 + 4) * 4 * 16 + 4 * 3
        spec = HeadSpec(
            kind=HeadKind.DECONV,
            in_channels=8,
            num_keypoints=3,
            filters=4,
            kernel_size=4,
            layers=2,
        )
        assert count_head_params(spec) == head.num_parameters()

    def test_invalid_layer_count(self):
        """Test only 1-3 layers are accepted."""
        with pytest.raises(ValueError):
            build_deconv_head(4, 4, 4, 4, 2)

    def test_bias_toggle_adds_parameters(self):
        """Test bias adds F per deconvolution plus N for the regressor."""
        plain = build_deconv_head(4, 3, 4, 2, 2)
        biased = build_deconv_head(4, 3, 4, 2, 2, bias=True)
        assert biased.num_parameters() - plain.num_parameters() == 3 * 2 + 2


class TestBackbone:
    """Test the toy feature extractor."""

    def test_default_geometry(self, rng):
        """Test 64x64 input gives (B, 64, 8, 8) features at stride 8."""
        spec = BackboneSpec()
        assert spec.total_stride == 8
        backbone = build_toy_backbone(spec, rng)
        assert backbone(Tensor(rng.standard_normal((1, 1, 64, 64)))).shape == (1, 64, 8, 8)

    def test_single_stage(self, rng):
        """Test one stride-2 stage maps 4x4 to 2x2."""
        spec = BackboneSpec(in_channels=1, stages=[StageSpec(channels=3)])
        backbone = build_toy_backbone(spec, rng)
        assert backbone(Tensor(rng.standard_normal((2, 1, 4, 4)))).shape == (2, 3, 2, 2)

    def test_indivisible_input_rejected(self, rng):
        """Test extents must divide by the total stride."""
        backbone = build_toy_backbone(BackboneSpec(), rng)
        with pytest.raises(ShapeError):
            backbone(Tensor(rng.standard_normal((1, 1, 60, 64))))

    def test_composite_gradcheck(self, rng):
        """Test gradients through backbone and LHR match finite differences."""
        backbone_spec = BackboneSpec(in_channels=1, stages=[StageSpec(channels=2)])
        head_spec = HeadSpec(kind=HeadKind.LHR, in_channels=2, num_keypoints=2, upsample_ratio=2)
        net = PoseNet.build(backbone_spec, head_spec, seed=3)
        x = Tensor(rng.standard_normal((1, 1, 4, 4)))
        r = Tensor(rng.standard_normal((1, 2, 4, 4)))
        result = gradcheck_parameters(lambda: (net(x) * r).mean(), net.parameters())
        assert result.passed, result.errors


class TestPoseNet:
    """Test the composite network and its state handling."""

    @pytest.fixture
    def specs(self):
        backbone = BackboneSpec(in_channels=1, stages=[StageSpec(channels=4)])
        lhr = HeadSpec(kind=HeadKind.LHR, in_channels=4, num_keypoints=2, upsample_ratio=2)
        deconv = HeadSpec(
            kind=HeadKind.DECONV, in_channels=4, num_keypoints=2, filters=3, layers=1
        )
        return backbone, lhr, deconv

    def test_backbone_init_independent_of_head(self, specs):
        """Test swapping the head leaves the backbone weights unchanged."""
        backbone, lhr, deconv = specs
        a = PoseNet.build(backbone, lhr, seed=5).backbone.state_dict()
        b = PoseNet.build(backbone, deconv, seed=5).backbone.state_dict()
        assert a.keys() == b.keys()
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])

    def test_same_seed_same_weights(self, specs):
        """Test initialisation is deterministic per seed."""
        backbone, lhr, _ = specs
        a = PoseNet.build(backbone, lhr, seed=1).state_dict()
        b = PoseNet.build(backbone, lhr, seed=1).state_dict()
        c = PoseNet.build(backbone, lhr, seed=2).state_dict()
        assert all(np.array_equal(a[k], b[k]) for k in a)
        assert not all(np.array_equal(a[k], c[k]) for k in a)

    def test_parameter_names(self, specs):
        """Test dotted parameter names."""
        backbone, lhr, _ = specs
        names = [n for n, _ in PoseNet.build(backbone, lhr).named_parameters()]
        assert names == [
            "backbone.stage0.weight",
            "backbone.stage0.bias",
            "head.weight",
        ]

    def test_state_round_trip_keeps_dtype(self, specs):
        """Test load_state_dict copies values and keeps float32 parameters."""
        backbone, lhr, _ = specs
        src = PoseNet.build(backbone, lhr, seed=1, dtype=np.float32)
        dst = PoseNet.build(backbone, lhr, seed=2, dtype=np.float32)
        dst.load_state_dict({k: v.astype(np.float64) for k, v in src.state_dict().items()})
        for (_, p), (_, q) in zip(src.named_parameters(), dst.named_parameters()):
            assert q.data.dtype == np.float32
            np.testing.assert_array_equal(p.data, q.data)

    def test_strict_load_rejects_mismatch(self, specs):
        """Test missing or unexpected entries raise CheckpointError."""
        backbone, lhr, deconv = specs
        state = PoseNet.build(backbone, deconv).state_dict()
        with pytest.raises(CheckpointError):
            PoseNet.build(backbone, lhr).load_state_dict(state)

    def test_channel_mismatch_rejected(self):
        """Test the head must accept the backbone channel count."""
        with pytest.raises(ShapeError):
            PoseNet.build(
                BackboneSpec(),
                HeadSpec(kind=HeadKind.LHR, in_channels=32, num_keypoints=5, upsample_ratio=2),
            )

    def test_build_head_dispatch(self, rng):
        """Test build_head picks the head family from HeadSpec.kind."""
        spec = HeadSpec(
            kind=HeadKind.PIXELSHUFFLE, in_channels=2, num_keypoints=1, upsample_ratio=2
        )
        head = build_head(spec, rng)
        assert head.weight.shape == (4, 2, 3, 3)


class TestPriorBias:
    """Test heads that start from a prior output probability."""

    @pytest.mark.parametrize(
        "spec",
        [
            HeadSpec(kind=HeadKind.LHR, in_channels=4, num_keypoints=2, upsample_ratio=2),
            HeadSpec(
                kind=HeadKind.DECONV,
                in_channels=4,
                num_keypoints=2,
                filters=3,
                kernel_size=4,
                layers=1,
            ),
        ],
        ids=["lhr", "deconv"],
    )
    def test_zero_features_give_prior(self, spec):
        """Test sigmoid of the output equals the prior where features vanish."""
        head = build_head(spec.model_copy(update={"prior_prob": 0.01}))
        out = head(Tensor(np.zeros((1, 4, 2, 2))))
        np.testing.assert_allclose(sigmoid_array(out.data), 0.01, rtol=1e-12)

    def test_prior_adds_output_bias_only(self):
        """Test the prior gives the regressor a bias and leaves the deconvolutions bare."""
        spec = HeadSpec(
            kind=HeadKind.DECONV, in_channels=4, num_keypoints=2, filters=3, layers=2
        )
        prior = spec.model_copy(update={"prior_prob": 0.1})
        names = [n for n, _ in build_head(prior).named_parameters()]
        assert "final.bias" in names
        assert not any(n.startswith("deconv") and n.endswith("bias") for n in names)
        assert build_head(prior).num_parameters() == build_head(spec).num_parameters() + 2
        assert count_head_params(prior) == build_head(prior).num_parameters()

    def test_prior_overrides_random_bias(self, rng):
        """Test a prior pins every bias at its logit even when bias is requested."""
        head = build_lhr(3, 2, 2, bias=True, rng=rng, prior_prob=0.25)
        np.testing.assert_allclose(head.bias.data, np.log(0.25 / 0.75))

    def test_deconv_padding_follows_spec(self):
        """Test the head uses the padding its spec reports."""
        spec = HeadSpec(
            kind=HeadKind.DECONV, in_channels=2, num_keypoints=1, kernel_size=6, layers=1
        )
        assert build_head(spec).padding == spec.deconv_padding == 2
