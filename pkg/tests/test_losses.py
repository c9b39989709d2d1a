import math

import numpy as np
import pytest

from tubelink.losses import (
    LossConfig,
    PatchGrid,
    bce_loss,
    build_pyramid,
    dice_loss,
    downsample_mask,
    multiscale_loss,
    patch_dice_gradient,
    patch_dice_loss,
)


def fd_gradient(truth, pred, grid, h=1e-5, **kw):
    """Central finite differences on patch_dice_loss, one pixel at a time."""
    grad = np.zeros_like(pred)
    for idx in np.ndindex(pred.shape):
        hi = pred.copy()
        hi[idx] += h
        lo = pred.copy()
        lo[idx] -= h
        grad[idx] = (
            patch_dice_loss(truth, hi, grid, **kw) - patch_dice_loss(truth, lo, grid, **kw)
        ) / (2 * h)
    return grad


class TestBce:
    def test_perfect_prediction_is_tiny(self):
        ones = np.ones((2, 4, 4))
        assert bce_loss(ones, ones) <= 2e-7

    def test_uniform_half_gives_ln2(self):
        truth = np.ones((2, 4, 4))
        pred = np.full((2, 4, 4), 0.5)
        assert bce_loss(truth, pred) == pytest.approx(math.log(2), abs=1e-12)

    def test_direct_two_pixel_case(self):
        truth = np.array([1.0, 0.0]).reshape(1, 1, 2)
        pred = np.array([0.9, 0.1]).reshape(1, 1, 2)
        assert bce_loss(truth, pred) == pytest.approx(-math.log(0.9), abs=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            bce_loss(np.zeros((1, 2, 2)), np.zeros((1, 2, 3)))


class TestDice:
    def test_perfect_binary_prediction(self, rng):
        truth = (rng.random((3, 8, 8)) < 0.3).astype(float)
        truth[0, 0, 0] = 1.0  # nonempty
        assert dice_loss(truth, truth) <= 1e-6

    def test_empty_empty_is_zero(self):
        zeros = np.zeros((2, 4, 4))
        assert dice_loss(zeros, zeros) == pytest.approx(0.0, abs=1e-6)

    def test_half_recall_case(self):
        # 4 foreground voxels, 2 predicted: 1 - 4/6
        truth = np.zeros((1, 4, 4))
        truth[0, 0, :4] = 1.0
        pred = np.zeros((1, 4, 4))
        pred[0, 0, :2] = 1.0
        assert dice_loss(truth, pred) == pytest.approx(1 / 3, abs=1e-6)


class TestPatchDice:
    def test_perfect_prediction(self, rng):
        truth = (rng.random((2, 32, 32)) < 0.2).astype(float)
        loss = patch_dice_loss(truth, truth, PatchGrid(16, 16))
        assert loss == pytest.approx(0.0, abs=1e-5)

    def test_single_patch_equals_global_dice(self, rng):
        grid = PatchGrid(16, 16)
        for _ in range(100):
            truth = (rng.random((1, 16, 16)) < 0.3).astype(float)
            pred = rng.random((1, 16, 16))
            assert patch_dice_loss(truth, pred, grid) == pytest.approx(
                dice_loss(truth, pred), abs=1e-12
            )

    def test_volume_patch_equals_global_dice_on_clips(self, rng):
        grid = PatchGrid(16, 16, patch_t=None)
        for _ in range(100):
            truth = (rng.random((4, 16, 16)) < 0.3).astype(float)
            pred = rng.random((4, 16, 16))
            assert patch_dice_loss(truth, pred, grid) == pytest.approx(
                dice_loss(truth, pred), abs=1e-12
            )

    def test_temporal_blocks_tile_time(self, rng):
        truth = (rng.random((4, 8, 8)) < 0.3).astype(float)
        pred = rng.random((4, 8, 8))
        per_frame = patch_dice_loss(truth, pred, PatchGrid(8, 8, patch_t=1))
        by_hand = sum(
            dice_loss(truth[k : k + 1], pred[k : k + 1]) for k in range(4)
        )
        assert per_frame == pytest.approx(by_hand, abs=1e-12)

    def test_missed_small_object_costs_a_full_patch(self):
        # patch A: perfect nonempty; patch B: empty truth, one spurious pixel
        truth = np.zeros((1, 4, 8))
        truth[0, :2, :2] = 1.0
        pred = truth.copy()
        pred[0, 0, 6] = 1.0
        terms = patch_dice_loss(truth, pred, PatchGrid(4, 4))
        assert terms == pytest.approx(1.0, abs=1e-5)

    def test_strict_mode_charges_empty_patches(self):
        zeros = np.zeros((1, 4, 4))
        strict = patch_dice_loss(zeros, zeros, PatchGrid(4, 4), smooth_numerator=False)
        assert strict == pytest.approx(1.0, abs=1e-6)
        smoothed = patch_dice_loss(zeros, zeros, PatchGrid(4, 4))
        assert smoothed == pytest.approx(0.0, abs=1e-6)

    def test_mean_reduction(self, rng):
        truth = (rng.random((2, 8, 8)) < 0.3).astype(float)
        pred = rng.random((2, 8, 8))
        grid = PatchGrid(4, 4)
        total = patch_dice_loss(truth, pred, grid, reduction="sum")
        mean = patch_dice_loss(truth, pred, grid, reduction="mean")
        assert mean == pytest.approx(total / 8, abs=1e-12)

    def test_ragged_edges_not_padded(self):
        # 8x10 frame with 8x8 patches: the 8x2 edge patch stands alone
        truth = np.zeros((1, 8, 10))
        truth[0, :, 8:] = 1.0
        pred = np.zeros((1, 8, 10))
        loss = patch_dice_loss(truth, pred, PatchGrid(8, 8))
        assert loss == pytest.approx(1.0, abs=1e-6)

    def test_permutation_equivariance(self, rng):
        # shuffling pixels the same way inside one patch keeps the loss
        truth = (rng.random((1, 8, 8)) < 0.4).astype(float)
        pred = rng.random((1, 8, 8))
        grid = PatchGrid(8, 8)
        perm = rng.permutation(64)
        t_shuf = truth.reshape(1, -1)[:, perm].reshape(1, 8, 8)
        p_shuf = pred.reshape(1, -1)[:, perm].reshape(1, 8, 8)
        assert patch_dice_loss(t_shuf, p_shuf, grid) == pytest.approx(
            patch_dice_loss(truth, pred, grid), abs=1e-12
        )


class TestPatchDiceGradient:
    def test_matches_finite_differences(self, rng):
        grid = PatchGrid(4, 4)
        worst = 0.0
        for _ in range(10):
            truth = (rng.random((2, 8, 8)) < 0.4).astype(float)
            pred = rng.uniform(0.1, 0.9, (2, 8, 8))
            analytic = patch_dice_gradient(truth, pred, grid)
            numeric = fd_gradient(truth, pred, grid)
            worst = max(worst, np.abs(analytic - numeric).max() / np.abs(numeric).max())
        assert worst < 1e-4

    def test_mean_reduction_scales_gradient(self, rng):
        truth = (rng.random((1, 8, 8)) < 0.4).astype(float)
        pred = rng.uniform(0.1, 0.9, (1, 8, 8))
        grid = PatchGrid(4, 4)
        g_sum = patch_dice_gradient(truth, pred, grid, reduction="sum")
        g_mean = patch_dice_gradient(truth, pred, grid, reduction="mean")
        assert np.allclose(g_mean, g_sum / 4, atol=1e-15)

    def test_zero_at_binary_optimum(self, rng):
        truth = (rng.random((1, 8, 8)) < 0.4).astype(float)
        grid = PatchGrid(4, 4)
        at_optimum = np.abs(patch_dice_gradient(truth, truth, grid)).max()
        perturbed = np.abs(
            patch_dice_gradient(truth, np.clip(truth * 0.6 + 0.2, 0, 1), grid)
        ).max()
        assert at_optimum < 1e-9
        assert perturbed > 1e-3

    def test_background_patch_pushes_predictions_down(self, rng):
        truth = np.zeros((1, 4, 4))
        pred = rng.uniform(0.1, 0.9, (1, 4, 4))
        grad = patch_dice_gradient(truth, pred, PatchGrid(4, 4))
        assert (grad > 0).all()


class TestDownsample:
    def test_all_zero_stays_zero(self):
        mask = np.zeros((2, 16, 16))
        for factor in (1, 2, 4):
            assert downsample_mask(mask, factor).sum() == 0

    def test_single_pixel_survives(self):
        mask = np.zeros((1, 16, 16))
        mask[0, 9, 6] = 1.0
        pooled = downsample_mask(mask, 4)
        assert pooled.shape == (1, 4, 4)
        assert pooled.sum() == 1.0
        assert pooled[0, 2, 1] == 1.0

    def test_checkerboard_becomes_ones(self):
        idx = np.indices((8, 8)).sum(axis=0) % 2
        mask = idx[None].astype(float)
        assert (downsample_mask(mask, 2) == 1.0).all()

    def test_ceiling_semantics_on_odd_sizes(self):
        mask = np.zeros((1, 5, 5))
        mask[0, 4, 4] = 1.0
        pooled = downsample_mask(mask, 2)
        assert pooled.shape == (1, 3, 3)
        assert pooled[0, 2, 2] == 1.0

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            downsample_mask(np.zeros((1, 4, 4)), 3)


class TestMultiscale:
    def test_single_scale_reduction(self, rng):
        truth = (rng.random((1, 16, 16)) < 0.3).astype(float)
        pred = rng.random((1, 16, 16))
        cfg = LossConfig(num_scales=1, grid=PatchGrid(8, 8))
        expected = bce_loss(truth, pred) + patch_dice_loss(truth, pred, cfg.grid)
        assert multiscale_loss([truth], [pred], cfg) == pytest.approx(expected, abs=1e-12)

    def test_zero_patch_weight_leaves_pure_bce(self, rng):
        truth = (rng.random((1, 16, 16)) < 0.3).astype(float)
        pred = rng.random((1, 16, 16))
        cfg = LossConfig(lambda_patch_dice=0.0, num_scales=2)
        t_pyr = build_pyramid(truth, 2)
        p_pyr = build_pyramid(pred, 2)
        expected = sum(bce_loss(t, p) for t, p in zip(t_pyr, p_pyr))
        assert multiscale_loss(t_pyr, p_pyr, cfg) == pytest.approx(expected, abs=1e-12)

    def test_perfect_prediction_near_zero(self, rng):
        truth = (rng.random((1, 32, 32)) < 0.2).astype(float)
        pyr = build_pyramid(truth, 2)
        cfg = LossConfig(num_scales=2)
        assert multiscale_loss(pyr, pyr, cfg) == pytest.approx(0.0, abs=1e-4)

    def test_linear_in_weights(self, rng):
        truth = (rng.random((1, 16, 16)) < 0.3).astype(float)
        pred = rng.random((1, 16, 16))
        t_pyr = build_pyramid(truth, 2)
        p_pyr = build_pyramid(pred, 2)

        def loss(l1, l2):
            return multiscale_loss(
                t_pyr, p_pyr, LossConfig(lambda_bce=l1, lambda_patch_dice=l2, num_scales=2)
            )

        assert loss(2.0, 3.0) == pytest.approx(2 * loss(1.0, 0.0) + 3 * loss(0.0, 1.0), rel=1e-12)

    def test_level_count_mismatch(self):
        truth = np.zeros((1, 8, 8))
        with pytest.raises(ValueError):
            multiscale_loss([truth], [truth], LossConfig(num_scales=2))
