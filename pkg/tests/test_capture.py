import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recapaug.capture import (
    BlurDirection,
    BlurSpec,
    ResolutionSpec,
    hand_trembling,
    low_resolution,
    motion_kernel,
)
from recapaug.errors import RangeError
from recapaug.image import ColorMode, ImageBuffer

DIRECTIONS = list(BlurDirection)


def rand_rgb(seed, h=12, w=12):
    return ImageBuffer(np.random.default_rng(seed).random((h, w, 3)), ColorMode.RGB)


class TestMotionKernel:
    @pytest.mark.parametrize("direction", DIRECTIONS)
    def test_k1_is_identity(self, direction):
        k = motion_kernel(BlurSpec(1, direction))
        assert np.array_equal(k.weights, [[1.0]])

    def test_k3_horizontal_middle_row(self):
        k = motion_kernel(BlurSpec(3, BlurDirection.HORIZONTAL))
        expected = np.zeros((3, 3))
        expected[1, :] = 1 / 3
        assert np.allclose(k.weights, expected)

    def test_k3_vertical_middle_column(self):
        k = motion_kernel(BlurSpec(3, BlurDirection.VERTICAL))
        expected = np.zeros((3, 3))
        expected[:, 1] = 1 / 3
        assert np.allclose(k.weights, expected)

    def test_k4_diagonals(self):
        diag = motion_kernel(BlurSpec(4, BlurDirection.DIAGONAL)).weights
        anti = motion_kernel(BlurSpec(4, BlurDirection.ANTI_DIAGONAL)).weights
        assert np.allclose(np.diag(diag), 0.25) and diag.sum() == pytest.approx(1.0)
        assert np.allclose(np.diag(np.fliplr(anti)), 0.25)

    @pytest.mark.parametrize("k", range(1, 17))
    @pytest.mark.parametrize("direction", DIRECTIONS)
    def test_all_kernels_normalized_with_k_taps(self, k, direction):
        kern = motion_kernel(BlurSpec(k, direction))
        assert kern.weights.sum() == pytest.approx(1.0)
        assert np.count_nonzero(kern.weights) == k
        assert np.allclose(kern.weights[kern.weights > 0], 1 / k)

    @pytest.mark.parametrize("k", [0, 17, -3])
    def test_out_of_range_k(self, k):
        with pytest.raises(RangeError):
            BlurSpec(k, BlurDirection.HORIZONTAL)


class TestHandTrembling:
    def test_k1_identity(self):
        img = rand_rgb(0)
        out = hand_trembling(img, BlurSpec(1, BlurDirection.DIAGONAL))
        assert np.array_equal(out.data, img.data)

    def test_constant_unchanged_k14(self):
        img = ImageBuffer.full(10, 10, 0.37)
        out = hand_trembling(img, BlurSpec(14, BlurDirection.HORIZONTAL))
        assert np.allclose(out.data, 0.37, atol=1e-12)

    def test_vertical_edge_spread_matches_oracle(self):
        data = np.zeros((7, 8, 3))
        data[:, 4:, :] = 1.0  # vertical edge
        img = ImageBuffer(data, ColorMode.RGB)
        out = hand_trembling(img, BlurSpec(5, BlurDirection.HORIZONTAL))
        # nested-loop oracle with replicate borders
        w = np.zeros((5, 5))
        w[2, :] = 1 / 5
        expected = np.zeros_like(data)
        for y in range(7):
            for x in range(8):
                for dy in range(5):
                    for dx in range(5):
                        sy = min(max(y + dy - 2, 0), 6)
                        sx = min(max(x + dx - 2, 0), 7)
                        expected[y, x] += w[dy, dx] * data[sy, sx]
        assert np.allclose(out.data, expected, atol=1e-12)

    def test_mean_preserved_within_border_bias(self):
        # replicate-border bias bound at the 224px working size
        img = rand_rgb(3, 224, 224)
        for k in (5, 16):
            out = hand_trembling(img, BlurSpec(k, BlurDirection.VERTICAL))
            assert abs(out.data.mean() - img.data.mean()) < 1e-3

    def test_shape_and_mode_preserved(self):
        img = rand_rgb(4, 9, 13)
        out = hand_trembling(img, BlurSpec(7, BlurDirection.ANTI_DIAGONAL))
        assert out.data.shape == img.data.shape and out.mode == img.mode


class TestLowResolution:
    def test_s1_identity(self):
        img = rand_rgb(5)
        out = low_resolution(img, ResolutionSpec(1.0))
        assert np.array_equal(out.data, img.data)

    def test_blocky_output_reduces_distinct_values(self):
        img = rand_rgb(6, 24, 24)
        out = low_resolution(img, ResolutionSpec(1 / 3))
        assert len(np.unique(out.data)) <= 8 * 8 * 3

    def test_gradient_matches_index_oracle(self):
        data = np.linspace(0, 1, 8 * 8 * 3).reshape(8, 8, 3)
        img = ImageBuffer(data, ColorMode.RGB)
        out = low_resolution(img, ResolutionSpec(0.5))
        expected = np.zeros_like(data)
        for y in range(8):
            for x in range(8):
                dy, dx = (y * 4) // 8, (x * 4) // 8
                sy, sx = (dy * 8) // 4, (dx * 8) // 4
                expected[y, x] = data[sy, sx]
        assert np.array_equal(out.data, expected)

    def test_collapse_to_zero_rejected(self):
        img = rand_rgb(7, 4, 4)
        with pytest.raises(RangeError):
            low_resolution(img, ResolutionSpec(0.1))

    @given(seed=st.integers(0, 1000), s=st.sampled_from([0.125, 0.25, 0.5]))
    @settings(max_examples=25, deadline=None)
    def test_idempotent_on_decimated(self, seed, s):
        # holds when the decimated grid divides the image size; the floor
        # index mapping shifts blocks for non-aligned scales
        img = rand_rgb(seed, 16, 16)
        once = low_resolution(img, ResolutionSpec(s))
        twice = low_resolution(once, ResolutionSpec(s))
        assert np.array_equal(once.data, twice.data)

    def test_spec_range_validation(self):
        with pytest.raises(RangeError):
            ResolutionSpec(0.0)
        with pytest.raises(RangeError):
            ResolutionSpec(1.2)
