import math

import numpy as np
import pytest

from volsr import (CharbonnierParams, MotionField, UsageError, backward_warp,
                   bicubic_upsample, charbonnier_loss, psnr, scale_motion, ssim,
                   zero_upsample)


def ssim_oracle(a, b, peak=1.0, size=11, sigma=1.5):
    """Brute-force windowed SSIM: explicit loops over every valid window."""
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    r = np.arange(size) - (size - 1) / 2
    k = np.exp(-(r * r) / (2 * sigma * sigma))
    win = np.outer(k, k)
    win /= win.sum()
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    h, w, c = a.shape
    chans = []
    for ch in range(c):
        vals = []
        for y in range(h - size + 1):
            for x in range(w - size + 1):
                pa = a[y:y + size, x:x + size, ch]
                pb = b[y:y + size, x:x + size, ch]
                mu_a = (win * pa).sum()
                mu_b = (win * pb).sum()
                va = (win * pa * pa).sum() - mu_a ** 2
                vb = (win * pb * pb).sum() - mu_b ** 2
                cov = (win * pa * pb).sum() - mu_a * mu_b
                vals.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                            / ((mu_a ** 2 + mu_b ** 2 + c1) * (va + vb + c2)))
        chans.append(np.mean(vals))
    return float(np.mean(chans))


class TestZeroUpsample:
    def test_unit_factor_identity(self, rng):
        img = rng.random((3, 4, 2)).astype(np.float32)
        out = zero_upsample(img, 1)
        assert np.array_equal(out, img)
        assert out is not img

    def test_single_pixel(self):
        img = np.full((1, 1, 1), 0.7, np.float32)
        out = zero_upsample(img, 2)
        expected = np.zeros((2, 2, 1), np.float32)
        expected[0, 0, 0] = 0.7
        assert np.array_equal(out, expected)

    def test_mass_conservation(self, rng):
        img = rng.random((5, 7, 3)).astype(np.float32)
        out = zero_upsample(img, 4)
        assert out.shape == (20, 28, 3)
        assert np.sum(out, dtype=np.float64) == pytest.approx(
            np.sum(img, dtype=np.float64), rel=1e-12)

    def test_subsample_round_trip_bit_exact(self, rng):
        img = rng.random((6, 5, 4)).astype(np.float32)
        for s in (2, 3, 4):
            assert np.array_equal(zero_upsample(img, s)[::s, ::s], img)

    def test_bad_factor(self, rng):
        with pytest.raises(UsageError):
            zero_upsample(rng.random((2, 2, 1)).astype(np.float32), 0)


class TestBackwardWarp:
    def test_zero_motion_identity_bit_exact(self, rng):
        img = rng.random((6, 8, 3)).astype(np.float32)
        out = backward_warp(img, MotionField.zero(8, 6))
        assert np.array_equal(out, img)

    def test_integer_shift(self, rng):
        img = rng.random((4, 6, 2)).astype(np.float32)
        motion = np.zeros((4, 6, 2), np.float32)
        motion[..., 0] = 1.0
        out = backward_warp(img, MotionField(motion, np.ones((4, 6, 1), np.float32)))
        assert np.array_equal(out[:, :-1], img[:, 1:])
        assert np.all(out[:, -1] == 0.0)

    def test_half_pixel_averages_neighbors(self):
        img = np.arange(12, dtype=np.float32).reshape(3, 4, 1) / 12
        motion = np.zeros((3, 4, 2), np.float32)
        motion[..., 0] = 0.5
        out = backward_warp(img, MotionField(motion, np.ones((3, 4, 1), np.float32)))
        expected = (img[:, :-1] + img[:, 1:]) / 2
        assert np.allclose(out[:, :-1], expected, atol=1e-7)
        assert np.all(out[:, -1] == 0.0)  # footprint leaves the image

    def test_all_invalid_motion_yields_zero_image(self, rng):
        img = rng.random((5, 5, 3)).astype(np.float32)
        mf = MotionField(np.zeros((5, 5, 2), np.float32),
                         np.zeros((5, 5, 1), np.float32))
        assert np.all(backward_warp(img, mf) == 0.0)

    def test_shape_mismatch(self, rng):
        with pytest.raises(UsageError):
            backward_warp(rng.random((4, 4, 1)).astype(np.float32),
                          MotionField.zero(5, 4))


class TestScaleMotion:
    def test_zero_field(self):
        out = scale_motion(MotionField.zero(3, 2), 4)
        assert out.resolution == (12, 8)
        assert np.all(out.motion == 0.0)

    def test_uniform_field_scales_linearly(self):
        m = np.zeros((2, 3, 2), np.float32)
        m[..., 0] = 1.0
        out = scale_motion(MotionField(m, np.ones((2, 3, 1), np.float32)), 4)
        assert np.all(out.motion[..., 0] == 4.0)
        assert np.all(out.motion[..., 1] == 0.0)

    def test_round_trip_recovers_values(self, rng):
        m = (rng.random((3, 4, 2)) * 6 - 3).astype(np.float32)
        v = (rng.random((3, 4, 1)) > 0.5).astype(np.float32)
        s = 4
        up = scale_motion(MotionField(m, v), s)
        assert np.array_equal(up.motion[::s, ::s] / s, m)
        assert np.array_equal(up.validity[::s, ::s], v)


class TestCharbonnier:
    def test_identical_inputs_give_epsilon(self, rng):
        img = rng.random((4, 4, 3)).astype(np.float32)
        assert charbonnier_loss(img, img) == pytest.approx(1e-8, abs=1e-12)

    def test_single_element_large_diff(self):
        a = np.array([[[3.0]]], np.float32)
        b = np.array([[[0.0]]], np.float32)
        assert charbonnier_loss(a, b) == pytest.approx(3.0, abs=1e-12)

    def test_symmetry_exact(self, rng):
        a = rng.random((5, 5, 3)).astype(np.float32)
        b = rng.random((5, 5, 3)).astype(np.float32)
        assert charbonnier_loss(a, b) == charbonnier_loss(b, a)

    def test_lower_bound_and_smoothed_l1(self, rng):
        eps = 1e-8
        x = rng.normal(size=1000)
        rho = np.sqrt(x * x + eps * eps)
        assert np.all(rho >= eps)
        assert np.all(np.abs(rho - np.abs(x)) <= eps)

    def test_monotone_along_segment(self, rng):
        gt = rng.random((4, 4, 1)).astype(np.float64)
        diff = rng.random((4, 4, 1)) + 0.1
        losses = [charbonnier_loss(gt + t * diff, gt) for t in (1.0, 0.5, 0.25, 0.1)]
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_epsilon_validation(self):
        with pytest.raises(UsageError):
            CharbonnierParams(epsilon=0.0)

    def test_shape_mismatch(self, rng):
        with pytest.raises(UsageError):
            charbonnier_loss(np.zeros((2, 2, 1)), np.zeros((2, 2, 2)))


class TestPsnr:
    def test_identical_is_infinite(self, rng):
        img = rng.random((4, 4, 3)).astype(np.float32)
        assert psnr(img, img) == math.inf

    def test_uniform_diff(self):
        gt = np.full((8, 8, 1), 0.4, np.float64)
        assert psnr(gt + 0.1, gt, peak=1.0) == pytest.approx(20.0, abs=1e-9)

    def test_doubling_diff_costs_six_db(self):
        gt = np.full((8, 8, 1), 0.3, np.float64)
        drop = psnr(gt + 0.1, gt) - psnr(gt + 0.2, gt)
        assert drop == pytest.approx(20 * math.log10(2), abs=1e-9)

    def test_validation(self):
        with pytest.raises(UsageError):
            psnr(np.zeros((2, 2, 1)), np.zeros((2, 3, 1)))
        with pytest.raises(UsageError):
            psnr(np.zeros((2, 2, 1)), np.zeros((2, 2, 1)), peak=0.0)


class TestSsim:
    def test_identical_is_one(self, rng):
        img = rng.random((16, 16, 3)).astype(np.float32)
        assert ssim(img, img) == pytest.approx(1.0, abs=1e-9)

    def test_large_offset_penalized(self, rng):
        img = rng.random((16, 16, 1)).astype(np.float32)
        assert ssim(img + 10.0, img) < 0.5

    def test_matches_brute_force_oracle(self, rng):
        a = rng.random((16, 16, 2))
        b = np.clip(a + rng.normal(scale=0.1, size=a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(ssim_oracle(a, b), abs=1e-6)

    def test_too_small_image_rejected(self, rng):
        img = rng.random((8, 8, 1))
        with pytest.raises(UsageError):
            ssim(img, img)


class TestBicubic:
    def test_constant_preserved(self):
        img = np.full((4, 5, 3), 0.37, np.float32)
        out = bicubic_upsample(img, 3)
        assert out.shape == (12, 15, 3)
        assert np.allclose(out, 0.37, atol=1e-6)

    def test_unit_factor_identity(self, rng):
        img = rng.random((4, 4, 1)).astype(np.float32)
        assert np.array_equal(bicubic_upsample(img, 1), img)

    def test_linear_ramp_reproduced_in_interior(self):
        w = 8
        img = np.tile(np.arange(w, dtype=np.float32) / (w - 1), (4, 1))[..., None]
        out = bicubic_upsample(img, 2)
        x_in = (np.arange(2 * w) + 0.5) / 2 - 0.5
        expected = x_in / (w - 1)
        interior = slice(3, 2 * w - 3)
        assert np.allclose(out[2, interior, 0], expected[interior], atol=1e-5)

    def test_bad_factor(self, rng):
        with pytest.raises(UsageError):
            bicubic_upsample(rng.random((2, 2, 1)), 0)
