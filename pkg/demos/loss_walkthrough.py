#!/usr/bin/env python3
"""Why patch Dice: a tiny actor that global losses barely notice.

Builds a frame with one large and one small actor, removes the small one
from the prediction, and compares how much each loss moves. Also runs a
quick finite-difference check of the analytic patch-Dice gradient.
"""

import numpy as np

from tubelink.losses import (
    PatchGrid,
    bce_loss,
    build_pyramid,
    dice_loss,
    multiscale_loss,
    patch_dice_gradient,
    patch_dice_loss,
    LossConfig,
)

truth = np.zeros((1, 64, 64))
truth[0, 4:24, 4:24] = 1.0    # a 20x20 actor
truth[0, 40:42, 40:42] = 1.0  # ... and a 2x2 one

pred = truth.copy()
pred[0, 40:42, 40:42] = 0.0   # the network missed the small actor

grid = PatchGrid(16, 16)
print("prediction misses only the 2x2 actor:")
print(f"  bce            {bce_loss(truth, pred):10.6f}")
print(f"  dice           {dice_loss(truth, pred):10.6f}")
print(f"  patch dice sum {patch_dice_loss(truth, pred, grid):10.6f}")
print(f"  patch dice mean{patch_dice_loss(truth, pred, grid, reduction='mean'):10.6f}")

ratio = patch_dice_loss(truth, pred, grid, reduction="mean") / dice_loss(truth, pred)
print(f"\nmean patch dice penalizes the miss {ratio:.1f}x harder than global dice")

# gradient sanity: analytic vs central finite differences on a random volume
rng = np.random.default_rng(0)
t = (rng.random((2, 8, 8)) < 0.4).astype(float)
p = rng.uniform(0.1, 0.9, (2, 8, 8))
analytic = patch_dice_gradient(t, p, PatchGrid(4, 4))
h = 1e-5
numeric = np.zeros_like(p)
for idx in np.ndindex(p.shape):
    hi, lo = p.copy(), p.copy()
    hi[idx] += h
    lo[idx] -= h
    numeric[idx] = (
        patch_dice_loss(t, hi, PatchGrid(4, 4)) - patch_dice_loss(t, lo, PatchGrid(4, 4))
    ) / (2 * h)
rel = np.abs(analytic - numeric).max() / np.abs(numeric).max()
print(f"\ngradient check: max relative error vs finite differences = {rel:.2e}")

# the combined multi-scale objective
cfg = LossConfig(num_scales=3)
ms = multiscale_loss(build_pyramid(truth, 3), build_pyramid(pred, 3), cfg)
print(f"multi-scale bce + patch dice over 3 scales = {ms:.6f}")
