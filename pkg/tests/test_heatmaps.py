"""Tests for Gaussian targets, decoding and flip averaging."""

import numpy as np
import pytest

from lowres_pose.errors import ShapeError
from lowres_pose.heatmaps import (
    HeatmapSet,
    count_pos_neg,
    decode,
    decode_maps,
    flip_average,
    gen_target,
    heatmap_targets,
    instance_score,
    pairs_to_permutation,
    pos_neg_ratio,
)
from lowres_pose.schemas.pose import PoseInstance


def _instance(points, visibility=None):
    coords = np.asarray(points, dtype=np.float64)
    flags = visibility if visibility is not None else [2] * len(coords)
    return PoseInstance.from_arrays(coords, np.asarray(flags))


class TestGenTarget:
    """Test ground-truth heatmap generation."""

    @pytest.mark.parametrize(
        "extent, t, center, positives, zeros, ratio",
        [
            ((64, 48), 2.0, (24.0, 32.0), 113, 2959, 26.2),
            ((96, 72), 3.0, (36.0, 48.0), 261, 6651, 25.5),
        ],
    )
    def test_positive_counts(self, extent, t, center, positives, zeros, ratio):
        """Test the positive and zero pixel counts of an interior keypoint."""
        target = gen_target(_instance([center]), extent, t)
        assert count_pos_neg(target) == [(positives, zeros)]
        assert pos_neg_ratio(positives, zeros) == pytest.approx(ratio, abs=0.05)

    def test_peak_at_grid_center(self):
        """Test the rounded grid centre carries the value 1."""
        target = gen_target(_instance([(10.4, 20.5)]), (40, 40), 1.5)
        assert target.maps[0, 21, 10] == 1.0
        assert target.maps.max() == 1.0

    def test_stride_maps_image_to_grid(self):
        """Test an image coordinate lands at floor(coord / stride + 0.5)."""
        target = gen_target(_instance([(13.0, 6.0)]), (8, 8), 1.0, stride=4.0)
        p, q = np.unravel_index(np.argmax(target.maps[0]), (8, 8))
        assert (q, p) == (3, 2)
        assert target.stride == 4.0

    def test_border_keypoint_is_clipped(self):
        """Test a corner keypoint keeps fewer positives, all in bounds."""
        target = gen_target(_instance([(0.0, 0.0)]), (64, 48), 2.0)
        [(pos, neg)] = count_pos_neg(target)
        assert 0 < pos < 113
        assert pos + neg == 64 * 48
        assert target.maps[0, 0, 0] == 1.0

    def test_unlabeled_and_off_grid_give_zero_maps(self):
        """Test invisible keypoints and off-grid centres produce empty maps."""
        target = gen_target(
            _instance([(5.0, 5.0), (-4.0, 5.0), (5.0, 5.0)], [0, 2, 1]), (10, 10), 1.0
        )
        assert target.maps[0].sum() == 0.0
        assert target.maps[1].sum() == 0.0
        assert target.maps[2].max() == 1.0

    def test_values_below_cutoff_are_zeroed(self):
        """Test every non-zero value is at least 0.01."""
        maps = gen_target(_instance([(20.0, 20.0)]), (40, 40), 2.5).maps
        nonzero = maps[maps > 0]
        assert nonzero.min() >= 0.01

    def test_invalid_spread(self):
        """Test t must be positive."""
        with pytest.raises(ValueError):
            gen_target(_instance([(1.0, 1.0)]), (4, 4), 0.0)

    def test_invalid_extent(self):
        """Test heatmap extents must be positive."""
        with pytest.raises(ValueError):
            gen_target(_instance([(1.0, 1.0)]), (0, 4), 1.0)

    def test_batch_targets(self):
        """Test heatmap_targets stacks one target per instance."""
        batch = heatmap_targets(
            [_instance([(4.0, 4.0), (8.0, 0.0)]), _instance([(0.0, 0.0), (12.0, 12.0)])],
            (4, 4),
            1.0,
            4.0,
        )
        assert batch.shape == (2, 2, 4, 4)
        assert batch[0, 1, 0, 2] == 1.0
        assert batch[1, 1, 3, 3] == 1.0


class TestDecode:
    """Test peak decoding with the quarter-pixel rule."""

    def test_quarter_shift_toward_larger_neighbour(self):
        """Test the shift follows the sign of each neighbour difference."""
        m = np.zeros((1, 5, 6))
        m[0, 2, 3] = 1.0
        m[0, 2, 4] = 0.5  # right > left
        m[0, 1, 3] = 0.4  # up > down
        coords, conf = decode_maps(m)
        np.testing.assert_allclose(coords[0], [3.25, 1.75])
        assert conf[0] == 1.0

    def test_equal_neighbours_give_no_shift(self):
        """Test a symmetric peak decodes onto its pixel."""
        m = np.zeros((1, 5, 5))
        m[0, 2, 2] = 1.0
        m[0, 2, [1, 3]] = 0.3
        coords, _ = decode_maps(m)
        np.testing.assert_array_equal(coords[0], [2.0, 2.0])

    def test_border_peak_gets_no_shift_on_that_axis(self):
        """Test a peak in column 0 is not shifted horizontally."""
        m = np.zeros((1, 4, 4))
        m[0, 1, 0] = 1.0
        m[0, 1, 1] = 0.9
        m[0, 2, 0] = 0.5
        coords, _ = decode_maps(m)
        np.testing.assert_allclose(coords[0], [0.0, 1.25])

    def test_stride_and_origin(self):
        """Test image coordinates scale by stride and add the origin offset."""
        m = np.zeros((1, 4, 4))
        m[0, 2, 1] = 1.0
        coords, _ = decode_maps(m, stride=4.0, origin_offset=1.5)
        np.testing.assert_allclose(coords[0], [5.5, 9.5])

    def test_empty_map_rejected(self):
        """Test a zero-extent map cannot be decoded."""
        with pytest.raises(ShapeError):
            decode_maps(np.zeros((1, 0, 4)))

    def test_decode_instance_scores(self):
        """Test decode returns confidences and their mean as score."""
        m = np.zeros((2, 4, 4))
        m[0, 1, 1] = 0.8
        m[1, 2, 2] = 0.4
        inst = decode(HeatmapSet(m))
        assert inst.confidences == [0.8, 0.4]
        assert inst.score == pytest.approx(0.6)
        assert inst.visibility == [2, 2]

    def test_integer_keypoints_decode_exactly(self):
        """Test grid-aligned keypoints survive encode and decode unchanged."""
        points = np.array([[3.0, 4.0], [10.0, 2.0], [0.0, 11.0]])
        decoded = decode(gen_target(_instance(points), (12, 12), 1.5)).coords()
        np.testing.assert_array_equal(decoded, points)

    def test_half_pixel_keypoints_within_half_pixel(self):
        """Test keypoints halfway between grid points decode within 0.5 pixels."""
        points = np.array([[3.5, 4.0], [6.0, 7.5], [2.5, 8.5]])
        decoded = decode(gen_target(_instance(points), (12, 12), 1.5)).coords()
        assert np.all(np.abs(decoded - points) <= 0.5)

    def test_round_trip_within_half_heatmap_pixel(self):
        """Test encode then decode lands within half a heatmap pixel per axis."""
        rng = np.random.default_rng(3)
        stride = 4.0
        points = rng.uniform(0.0, 61.5, size=(5, 2))
        target = gen_target(_instance(points), (16, 16), 1.0, stride=stride)
        decoded = decode(target).coords()
        assert np.all(np.abs(decoded - points) <= 0.5 * stride + 1e-9)


class TestFlipAverage:
    """Test flip-test fusion."""

    def _oracle(self, original, flipped, perm, shift):
        n, h, w = original.shape
        out = np.empty_like(original)
        for k in range(n):
            for i in range(h):
                for j in range(w):
                    src = j - 1 if shift and j > 0 else j
                    out[k, i, j] = (original[k, i, j] + flipped[perm[k], i, w - 1 - src]) / 2.0
        return out

    @pytest.mark.parametrize("shift", [True, False])
    def test_matches_elementwise_oracle(self, shift):
        """Test mirroring, channel swapping and the one-pixel shift."""
        rng = np.random.default_rng(5)
        original = rng.random((5, 3, 6))
        flipped = rng.random((5, 3, 6))
        pairs = [(1, 2), (3, 4)]
        fused = flip_average(HeatmapSet(original), HeatmapSet(flipped), pairs, shift=shift)
        expected = self._oracle(original, flipped, [0, 2, 1, 4, 3], shift)
        np.testing.assert_allclose(fused.maps, expected, rtol=0, atol=1e-15)

    def test_symmetric_input_is_fixed_point(self):
        """Test averaging a mirrored map with itself, unshifted, returns it."""
        m = np.zeros((1, 3, 5))
        m[0, 1, 2] = 1.0
        fused = flip_average(HeatmapSet(m), HeatmapSet(m), [], shift=False)
        np.testing.assert_array_equal(fused.maps, m)

    def test_extent_mismatch(self):
        """Test both predictions must share a shape."""
        with pytest.raises(ShapeError):
            flip_average(HeatmapSet(np.zeros((2, 4, 4))), HeatmapSet(np.zeros((2, 4, 5))), [])

    def test_keeps_stride_and_offset(self):
        """Test the fused set inherits the original geometry."""
        a = HeatmapSet(np.zeros((1, 2, 2)), stride=4.0, origin_offset=1.5)
        fused = flip_average(a, HeatmapSet(np.zeros((1, 2, 2))), [])
        assert (fused.stride, fused.origin_offset) == (4.0, 1.5)


class TestPairsAndScores:
    """Test flip pairing and instance scoring."""

    def test_permutation(self):
        """Test pairs swap both ways and leave the rest in place."""
        assert pairs_to_permutation([(1, 2), (3, 4)], 5) == [0, 2, 1, 4, 3]

    @pytest.mark.parametrize("pairs", [[(1, 1)], [(0, 1), (1, 2)], [(0, 5)]])
    def test_invalid_pairings(self, pairs):
        """Test self-pairs, repeated indices and out-of-range indices raise."""
        with pytest.raises(ValueError):
            pairs_to_permutation(pairs, 3)

    def test_instance_score(self):
        """Test mean confidence times box score."""
        assert instance_score([0.2, 0.4, 0.9], 0.5) == pytest.approx(0.25)

    def test_instance_score_empty(self):
        """Test an empty confidence list raises."""
        with pytest.raises(ValueError):
            instance_score([], 1.0)

    def test_activated_range_checked(self):
        """Test activated heatmaps must lie in [0, 1]."""
        with pytest.raises(ValueError):
            HeatmapSet(np.full((1, 2, 2), 1.5))
        assert HeatmapSet(np.full((1, 2, 2), 1.5), activated=False).maps.max() == 1.5

    def test_heatmaps_must_be_three_dimensional(self):
        """Test (N, H, W) is required."""
        with pytest.raises(ShapeError):
            HeatmapSet(np.zeros((4, 4)))
