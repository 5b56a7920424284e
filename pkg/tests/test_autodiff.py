"""Tests for the autodiff engine: layers, backward, Adam and checkpoints."""

import numpy as np
import pytest

from lowres_pose.autodiff import (
    Adam,
    AdamState,
    Tensor,
    adam_update,
    backward,
    conv2d,
    conv_transpose2d,
    depth_to_space,
    gradcheck,
    no_grad,
    relu,
    sigmoid,
    space_to_depth,
)
from lowres_pose.autodiff.checkpoint import (
    MAGIC,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from lowres_pose.autodiff.functional import conv_out_extent
from lowres_pose.autodiff.tensor import is_grad_enabled
from lowres_pose.errors import CheckpointError, GraphError, NonFiniteError, ShapeError


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def _loop_conv(x, w, stride, padding):
    """Direct nested-loop cross-correlation."""
    b, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - k) // stride + 1
    wo = (wd + 2 * padding - k) // stride + 1
    out = np.zeros((b, cout, ho, wo))
    for n in range(b):
        for o in range(cout):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for c in range(cin):
                        for p in range(k):
                            for q in range(k):
                                acc += xp[n, c, i * stride + p, j * stride + q] * w[o, c, p, q]
                    out[n, o, i, j] = acc
    return out


class TestConv2d:
    """Test forward convolution."""

    def test_channel_identity_kernel(self, rng):
        """Test that a 1x1 identity kernel returns the input."""
        x = rng.standard_normal((2, 3, 4, 4))
        w = np.eye(3).reshape(3, 3, 1, 1)
        out = conv2d(Tensor(x), Tensor(w))
        np.testing.assert_array_equal(out.data, x)

    def test_constant_input_all_ones_kernel(self):
        """Test that a constant input under a 3x3 ones kernel sums to 9c."""
        x = np.full((1, 1, 5, 5), 0.5)
        out = conv2d(Tensor(x), Tensor(np.ones((1, 1, 3, 3))))
        assert out.shape == (1, 1, 3, 3)
        np.testing.assert_allclose(out.data, 4.5)

    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 0), (2, 1)])
    def test_matches_nested_loop(self, rng, stride, padding):
        """Test conv2d against a direct summation."""
        x = rng.standard_normal((1, 2, 5, 5))
        w = rng.standard_normal((3, 2, 3, 3))
        out = conv2d(Tensor(x), Tensor(w), stride, padding)
        np.testing.assert_allclose(
            out.data, _loop_conv(x, w, stride, padding), rtol=1e-12, atol=1e-12
        )

    def test_fractional_extent_rejected(self, rng):
        """Test that a non-integer output extent is a shape error."""
        with pytest.raises(ShapeError):
            conv2d(Tensor(rng.standard_normal((1, 1, 4, 4))), Tensor(np.ones((1, 1, 3, 3))), 2)

    def test_channel_mismatch_rejected(self, rng):
        """Test that kernel input channels must match."""
        with pytest.raises(ShapeError):
            conv2d(Tensor(rng.standard_normal((1, 2, 4, 4))), Tensor(np.ones((1, 3, 1, 1))))

    def test_non_finite_input_rejected(self):
        """Test that NaN never enters the graph silently."""
        x = np.zeros((1, 1, 2, 2))
        x[0, 0, 0, 0] = np.nan
        with pytest.raises(NonFiniteError):
            Tensor(x)

    @pytest.mark.parametrize("k,stride,padding", [(4, 2, 1), (3, 1, 1), (1, 1, 0)])
    def test_gradcheck(self, rng, k, stride, padding):
        """Test input and kernel gradients against central differences."""
        x = rng.standard_normal((2, 2, 6, 6))
        w = rng.standard_normal((3, 2, k, k))
        h = conv_out_extent(6, k, stride, padding)
        r = rng.standard_normal((2, 3, h, h))
        result = gradcheck(lambda a, b: (conv2d(a, b, stride, padding) * Tensor(r)).mean(), [x, w])
        assert result.passed, result.errors

    def test_deterministic(self, rng):
        """Test identical inputs give bit-identical outputs."""
        x = rng.standard_normal((2, 3, 6, 6))
        w = rng.standard_normal((4, 3, 3, 3))
        a = conv2d(Tensor(x), Tensor(w), 1, 1).data
        b = conv2d(Tensor(x), Tensor(w), 1, 1).data
        assert a.tobytes() == b.tobytes()


class TestConvTranspose2d:
    """Test transposed convolution."""

    def test_impulse_response(self, rng):
        """Test that a single input impulse stamps the kernel."""
        x = np.zeros((1, 1, 3, 3))
        x[0, 0, 1, 1] = 1.0
        w = rng.standard_normal((1, 1, 3, 3))
        out = conv_transpose2d(Tensor(x), Tensor(w), stride=1, padding=0)
        assert out.shape == (1, 1, 5, 5)
        np.testing.assert_array_equal(out.data[0, 0, 1:4, 1:4], w[0, 0])
        assert np.count_nonzero(out.data) == np.count_nonzero(w)

    def test_baseline_geometry_doubles(self, rng):
        """Test K=4, stride 2, padding 1 doubles the extent."""
        x = Tensor(rng.standard_normal((1, 3, 8, 6)))
        w = Tensor(rng.standard_normal((3, 5, 4, 4)))
        assert conv_transpose2d(x, w, stride=2, padding=1).shape == (1, 5, 16, 12)

    def test_gradcheck(self, rng):
        """Test the doubling geometry against central differences."""
        x = rng.standard_normal((2, 3, 3, 4))
        w = rng.standard_normal((3, 2, 4, 4))
        r = rng.standard_normal((2, 2, 6, 8))
        result = gradcheck(
            lambda a, b: (conv_transpose2d(a, b, stride=2, padding=1) * Tensor(r)).mean(), [x, w]
        )
        assert result.passed, result.errors

    @pytest.mark.parametrize("k,stride,padding", [(4, 2, 1), (3, 1, 1), (3, 2, 0)])
    def test_adjoint_of_conv2d(self, rng, k, stride, padding):
        """Test <conv2d(x), y> == <x, conv_transpose2d(y)>."""
        h = 8 if (8 + 2 * padding - k) % stride == 0 else 7
        x = rng.standard_normal((2, 3, h, h))
        w = rng.standard_normal((4, 3, k, k))
        y_fwd = conv2d(Tensor(x), Tensor(w), stride, padding).data
        y = rng.standard_normal(y_fwd.shape)
        back = conv_transpose2d(Tensor(y), Tensor(w), stride, padding).data
        assert back.shape == x.shape
        lhs = float(np.sum(y_fwd * y))
        rhs = float(np.sum(x * back))
        assert abs(lhs - rhs) / abs(lhs) < 1e-12


class TestRearrangement:
    """Test depth_to_space and its inverse."""

    def test_ratio_one_is_identity(self, rng):
        """Test L=1 leaves the tensor unchanged."""
        x = rng.standard_normal((1, 3, 2, 2))
        np.testing.assert_array_equal(depth_to_space(Tensor(x), 1).data, x)

    def test_four_channels_to_two_by_two(self):
        """Test channel values [a, b, c, d] become [[a, b], [c, d]]."""
        x = np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 4, 1, 1)
        out = depth_to_space(Tensor(x), 2)
        np.testing.assert_array_equal(out.data[0, 0], [[1.0, 2.0], [3.0, 4.0]])

    def test_index_formula(self, rng):
        """Test out[b, c, h*L+i, w*L+j] == in[b, c*L^2 + i*L + j, h, w]."""
        ratio = 3
        x = rng.standard_normal((2, 2 * ratio * ratio, 2, 3))
        out = depth_to_space(Tensor(x), ratio).data
        for c in range(2):
            for i in range(ratio):
                for j in range(ratio):
                    np.testing.assert_array_equal(
                        out[:, c, i::ratio, j::ratio], x[:, c * ratio * ratio + i * ratio + j]
                    )

    def test_round_trip(self, rng):
        """Test space_to_depth inverts depth_to_space bit-exactly."""
        x = rng.standard_normal((2, 8, 3, 3))
        back = space_to_depth(depth_to_space(Tensor(x), 2), 2).data
        assert back.tobytes() == np.ascontiguousarray(x).tobytes()

    def test_indivisible_channels_rejected(self, rng):
        """Test channel count must be divisible by L^2."""
        with pytest.raises(ShapeError):
            depth_to_space(Tensor(rng.standard_normal((1, 6, 2, 2))), 2)


class TestActivations:
    """Test sigmoid and relu."""

    def test_sigmoid_at_zero(self):
        """Test sigmoid(0) = 0.5 and its derivative 0.25."""
        x = Tensor(np.zeros(1), requires_grad=True)
        y = sigmoid(x)
        assert y.item() == 0.5
        y.sum().backward()
        assert x.grad[0] == pytest.approx(0.25)

    def test_sigmoid_symmetry(self, rng):
        """Test sigmoid(-x) = 1 - sigmoid(x)."""
        x = rng.standard_normal(50) * 5
        np.testing.assert_allclose(
            sigmoid(Tensor(-x)).data, 1.0 - sigmoid(Tensor(x)).data, atol=1e-15
        )

    def test_sigmoid_saturates_without_overflow(self):
        """Test extreme inputs give finite 0 and 1."""
        y = sigmoid(Tensor(np.array([-1000.0, 1000.0]))).data
        assert np.all(np.isfinite(y))
        np.testing.assert_array_equal(y, [0.0, 1.0])

    def test_relu_gradient_mask(self):
        """Test relu passes gradient only where the input is positive."""
        x = Tensor(np.array([-1.0, 2.0, -3.0, 4.0]), requires_grad=True)
        relu(x).sum().backward()
        np.testing.assert_array_equal(x.grad, [0.0, 1.0, 0.0, 1.0])


class TestBackward:
    """Test reverse-mode plumbing."""

    def test_mse_of_sigmoid_closed_form(self):
        """Test d/dx (sigmoid(x) - 1)^2 at x = 0 is -0.25."""
        x = Tensor(np.zeros(1), requires_grad=True)
        e = sigmoid(x) - Tensor(np.ones(1))
        (e * e).sum().backward()
        assert x.grad[0] == pytest.approx(-0.25)

    def test_unused_parameter_gets_zeros(self, rng):
        """Test a parameter the loss ignores gets an all-zero gradient."""
        used = Tensor(rng.standard_normal(3), requires_grad=True)
        unused = Tensor(rng.standard_normal((2, 2)), requires_grad=True)
        grads = backward((used * used).sum(), [used, unused])
        np.testing.assert_allclose(grads[0], 2 * used.data)
        np.testing.assert_array_equal(grads[1], np.zeros((2, 2)))

    def test_shared_node_accumulates(self):
        """Test a node used twice receives both contributions."""
        x = Tensor(np.array([3.0]), requires_grad=True)
        (x * x + x).sum().backward()
        assert x.grad[0] == pytest.approx(7.0)

    def test_non_scalar_loss_rejected(self, rng):
        """Test backward refuses a non-scalar root."""
        x = Tensor(rng.standard_normal(3), requires_grad=True)
        with pytest.raises(GraphError):
            (x * 2.0).backward()

    def test_cycle_rejected(self):
        """Test a graph that loops back on itself raises GraphError."""
        a = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        b = a * 2.0
        a._parents = (b,)
        with pytest.raises(GraphError, match="Cycle"):
            b.sum().backward()

    def test_full_constructor(self):
        """Test Tensor.full fills the shape and keeps the dtype."""
        t = Tensor.full((2, 3), -4.5, np.float32, requires_grad=True)
        assert t.dtype == np.float32
        assert t.requires_grad
        np.testing.assert_array_equal(t.data, np.full((2, 3), -4.5))

    def test_no_grad_builds_no_graph(self, rng):
        """Test operations under no_grad do not track gradients."""
        x = Tensor(rng.standard_normal(3), requires_grad=True)
        with no_grad():
            assert not is_grad_enabled()
            y = (x * x).sum()
        assert not y.requires_grad
        assert is_grad_enabled()

    def test_gradcheck_conv_composite(self, rng):
        """Test conv2d + relu + depth_to_space passes a finite-difference check."""
        x = rng.standard_normal((1, 2, 3, 3))
        w = rng.standard_normal((8, 2, 1, 1))
        r = rng.standard_normal((1, 2, 6, 6))
        result = gradcheck(
            lambda a, b: (depth_to_space(conv2d(a, b), 2) * Tensor(r)).mean(), [x, w]
        )
        assert result.passed, result.errors


class TestAdam:
    """Test the Adam update."""

    def test_zero_gradient_leaves_parameter(self):
        """Test a zero first gradient leaves the parameter unchanged."""
        p = np.array([1.5, -2.0])
        adam_update(p, np.zeros(2), AdamState(), lr=0.1)
        np.testing.assert_array_equal(p, [1.5, -2.0])

    def test_first_step_magnitude_is_lr(self):
        """Test the first step moves each element by lr against the gradient sign."""
        p = np.array([1.0, 1.0])
        adam_update(p, np.array([3.0, -0.2]), AdamState(), lr=0.01, eps=1e-12)
        np.testing.assert_allclose(p, [0.99, 1.01], rtol=1e-9)

    def test_three_step_recurrence(self):
        """Test three scalar steps against the hand-written recurrences."""
        lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
        grads = [0.3, -1.2, 0.7]
        p = np.array([0.4])
        state = AdamState()
        ref, m, v = 0.4, 0.0, 0.0
        for t, g in enumerate(grads, start=1):
            adam_update(p, np.array([g]), state, lr, b1, b2, eps)
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            ref -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        assert state.step == 3
        assert p[0] == pytest.approx(ref, rel=1e-12)

    def test_shape_mismatch(self):
        """Test gradient and parameter shapes must agree."""
        with pytest.raises(ShapeError):
            adam_update(np.zeros(2), np.zeros(3), AdamState(), lr=0.1)

    def test_optimizer_skips_parameters_without_gradient(self):
        """Test Adam.step only touches parameters that received gradients."""
        a = Tensor(np.ones(2), requires_grad=True)
        b = Tensor(np.ones(2), requires_grad=True)
        opt = Adam.from_named([("a", a), ("b", b)], lr=0.1)
        (a * a).sum().backward()
        opt.step()
        assert np.all(a.data < 1.0)
        np.testing.assert_array_equal(b.data, [1.0, 1.0])
        opt.zero_grad()
        assert a.grad is None


class TestCheckpoint:
    """Test the binary checkpoint format."""

    @pytest.fixture
    def tensors(self, rng):
        return {
            "head.weight": rng.standard_normal((4, 2, 1, 1)),
            "backbone.stage0.bias": rng.standard_normal(3),
            "scalar": np.array(2.5),
        }

    def test_round_trip_bit_exact(self, tensors, tmp_path):
        """Test save/load reproduces every array bit-exactly."""
        path = save_checkpoint(tensors, tmp_path / "ckpt.bin")
        loaded = load_checkpoint(path)
        assert set(loaded) == set(tensors)
        for name, arr in tensors.items():
            assert loaded[name].shape == arr.shape
            assert loaded[name].tobytes() == arr.astype("<f8").tobytes()

    def test_encoding_is_order_independent(self, tensors):
        """Test insertion order does not change the bytes."""
        reordered = dict(reversed(list(tensors.items())))
        assert encode_checkpoint(tensors) == encode_checkpoint(reordered)

    def test_float32_round_trip(self, rng):
        """Test float32 parameters survive the float64 stream exactly."""
        arr = rng.standard_normal((3, 3)).astype(np.float32)
        back = decode_checkpoint(encode_checkpoint({"w": arr}))["w"]
        np.testing.assert_array_equal(back.astype(np.float32), arr)

    def test_bad_magic(self, tensors):
        """Test a wrong magic string is rejected."""
        blob = encode_checkpoint(tensors)
        with pytest.raises(CheckpointError):
            decode_checkpoint(b"NOTACKPT" + blob[len(MAGIC) :])

    def test_truncated(self, tensors):
        """Test a truncated stream is rejected."""
        blob = encode_checkpoint(tensors)
        with pytest.raises(CheckpointError):
            decode_checkpoint(blob[:-3])

    def test_trailing_bytes(self, tensors):
        """Test bytes after the last entry are rejected."""
        with pytest.raises(CheckpointError):
            decode_checkpoint(encode_checkpoint(tensors) + b"\0")

    def test_missing_file(self, tmp_path):
        """Test a missing file raises CheckpointError."""
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "absent.bin")
