"""Localization losses for foreground-probability volumes.

All functions take (T, H, W) float volumes with values in [0, 1]: `truth`
is the binary ground-truth mask, `pred` the predicted probabilities. The
patch variant tiles every frame into small 2-D neighborhoods and scores
each patch independently, so missing a tiny actor costs a whole patch
term instead of a rounding error on the global overlap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CLIP_EPS = 1e-7  # probability clamp before logs, avoids log(0)


def _check_dims(truth: np.ndarray, pred: np.ndarray) -> None:
    if truth.shape != pred.shape:
        raise ValueError(f"mask shapes differ: {truth.shape} vs {pred.shape}")
    if truth.ndim != 3:
        raise ValueError(f"expected (T, H, W) volume, got shape {truth.shape}")


def bce_loss(truth: np.ndarray, pred: np.ndarray, clip_eps: float = CLIP_EPS) -> float:
    """Binary cross-entropy averaged over all T*H*W values.

    Predictions are clamped into [clip_eps, 1 - clip_eps] so saturated
    outputs do not produce infinities.
    """
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    _check_dims(truth, pred)
    p = np.clip(pred, clip_eps, 1.0 - clip_eps)
    ll = truth * np.log(p) + (1.0 - truth) * np.log1p(-p)
    return float(-ll.mean())


def dice_loss(truth: np.ndarray, pred: np.ndarray, eps: float = CLIP_EPS) -> float:
    """Global soft Dice loss, 1 - (2*overlap + eps) / (self-overlaps + eps).

    eps appears in the numerator as well, so an all-background volume
    predicted as all-background scores ~0 instead of 1.
    """
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    _check_dims(truth, pred)
    num = 2.0 * float((truth * pred).sum()) + eps
    den = float((truth * truth).sum() + (pred * pred).sum()) + eps
    return 1.0 - num / den


@dataclass(frozen=True)
class PatchGrid:
    """Tiling of the volume into patches; edge patches are ragged, never padded.

    Patches are 2-D neighborhoods of each frame (patch_t=1, the default).
    patch_t=None puts all frames in one temporal block, so a grid at least
    as large as the frame degenerates to a single patch over the volume,
    where the patch loss coincides with the global Dice loss.
    """

    patch_h: int = 16
    patch_w: int = 16
    patch_t: int | None = 1

    def __post_init__(self):
        if self.patch_h < 1 or self.patch_w < 1:
            raise ValueError(f"patch dims must be >= 1, got {self.patch_h}x{self.patch_w}")
        if self.patch_t is not None and self.patch_t < 1:
            raise ValueError(f"patch_t must be >= 1 or None, got {self.patch_t}")

    def num_patches(self, dims: tuple[int, int, int]) -> int:
        t, h, w = dims
        pt = t if self.patch_t is None else self.patch_t
        return -(-t // pt) * -(-h // self.patch_h) * -(-w // self.patch_w)

    def _starts(self, dims) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        t, h, w = dims
        pt = t if self.patch_t is None else self.patch_t
        return (
            np.arange(0, t, pt),
            np.arange(0, h, self.patch_h),
            np.arange(0, w, self.patch_w),
        )


def _patch_sums(x: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """Per-patch sums of x, shape (ceil(T/pt), ceil(H/ph), ceil(W/pw))."""
    ts, hs, ws = grid._starts(x.shape)
    out = np.add.reduceat(np.add.reduceat(x, hs, axis=1), ws, axis=2)
    if len(ts) != x.shape[0]:
        out = np.add.reduceat(out, ts, axis=0)
    return out


def _patch_expand(per_patch: np.ndarray, shape, grid: PatchGrid) -> np.ndarray:
    """Broadcast per-patch values back onto the pixel grid."""
    t, h, w = shape
    ts, hs, ws = grid._starts(shape)
    t_sizes = np.diff(np.append(ts, t))
    h_sizes = np.diff(np.append(hs, h))
    w_sizes = np.diff(np.append(ws, w))
    out = np.repeat(np.repeat(per_patch, h_sizes, axis=1), w_sizes, axis=2)
    if len(ts) != t:
        out = np.repeat(out, t_sizes, axis=0)
    return out


def patch_dice_terms(
    truth: np.ndarray,
    pred: np.ndarray,
    grid: PatchGrid = PatchGrid(),
    eps: float = CLIP_EPS,
    smooth_numerator: bool = True,
) -> np.ndarray:
    """Per-patch Dice terms, shape (T, ceil(H/ph), ceil(W/pw)).

    smooth_numerator=True adds eps to the numerator as well, so an empty
    patch predicted empty scores ~0. The strict form (eps in the
    denominator only) charges such patches a full unit of loss; it is kept
    for comparison behind smooth_numerator=False.
    """
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    _check_dims(truth, pred)
    num = 2.0 * _patch_sums(truth * pred, grid)
    if smooth_numerator:
        num = num + eps
    den = _patch_sums(truth * truth, grid) + _patch_sums(pred * pred, grid) + eps
    return 1.0 - num / den


def patch_dice_loss(
    truth: np.ndarray,
    pred: np.ndarray,
    grid: PatchGrid = PatchGrid(),
    eps: float = CLIP_EPS,
    reduction: str = "sum",
    smooth_numerator: bool = True,
) -> float:
    """Patch Dice loss: sum (default) or mean of the per-patch terms.

    The sum scales with resolution (K patches); the mean is reported for
    scale stability when comparing across resolutions.
    """
    terms = patch_dice_terms(truth, pred, grid, eps, smooth_numerator)
    if reduction == "sum":
        return float(terms.sum())
    if reduction == "mean":
        return float(terms.mean())
    raise ValueError(f"unknown reduction {reduction!r}")


def patch_dice_gradient(
    truth: np.ndarray,
    pred: np.ndarray,
    grid: PatchGrid = PatchGrid(),
    eps: float = CLIP_EPS,
    reduction: str = "sum",
    smooth_numerator: bool = True,
) -> np.ndarray:
    """Analytic d(patch_dice_loss)/d(pred), same shape as pred.

    Each pixel belongs to exactly one patch with term 1 - N/D,
    N = 2*sum(p*q) (+eps), D = sum(p^2) + sum(q^2) + eps, hence
    d/dq_i = 2*(q_i*N - p_i*D) / D^2.
    """
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    _check_dims(truth, pred)
    num = 2.0 * _patch_sums(truth * pred, grid)
    if smooth_numerator:
        num = num + eps
    den = _patch_sums(truth * truth, grid) + _patch_sums(pred * pred, grid) + eps
    n_px = _patch_expand(num, pred.shape, grid)
    d_px = _patch_expand(den, pred.shape, grid)
    grad = 2.0 * (pred * n_px - truth * d_px) / (d_px * d_px)
    if reduction == "mean":
        grad /= grid.num_patches(pred.shape)
    elif reduction != "sum":
        raise ValueError(f"unknown reduction {reduction!r}")
    return grad


def downsample_mask(mask: np.ndarray, factor: int) -> np.ndarray:
    """Spatial max-pool by `factor`: a cell is foreground iff any covered
    pixel is. Edge cells cover whatever remains (ceiling semantics)."""
    mask = np.asarray(mask)
    if factor < 1 or factor & (factor - 1):
        raise ValueError(f"factor must be a power of 2, got {factor}")
    if factor == 1:
        return mask.copy()
    _, h, w = mask.shape
    hs = np.arange(0, h, factor)
    ws = np.arange(0, w, factor)
    return np.maximum.reduceat(np.maximum.reduceat(mask, hs, axis=1), ws, axis=2)


def build_pyramid(mask: np.ndarray, num_scales: int, factor: int = 2) -> list[np.ndarray]:
    """Max-pool pyramid: level 0 is the input, each level halves H and W."""
    if num_scales < 1:
        raise ValueError(f"num_scales must be >= 1, got {num_scales}")
    levels = [np.asarray(mask)]
    for _ in range(num_scales - 1):
        levels.append(downsample_mask(levels[-1], factor))
    return levels


@dataclass(frozen=True)
class LossConfig:
    """Weights and layout of the combined multi-scale loss."""

    lambda_bce: float = 1.0
    lambda_patch_dice: float = 1.0
    eps: float = CLIP_EPS
    num_scales: int = 3
    grid: PatchGrid = field(default_factory=PatchGrid)
    reduction: str = "sum"
    smooth_numerator: bool = True

    def __post_init__(self):
        if self.lambda_bce < 0 or self.lambda_patch_dice < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.eps <= 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.num_scales < 1:
            raise ValueError(f"num_scales must be >= 1, got {self.num_scales}")


def multiscale_loss(
    truth_pyramid: list[np.ndarray],
    pred_pyramid: list[np.ndarray],
    cfg: LossConfig = LossConfig(),
) -> float:
    """Weighted BCE + patch-Dice summed over pyramid levels."""
    if len(truth_pyramid) != cfg.num_scales or len(pred_pyramid) != cfg.num_scales:
        raise ValueError(
            f"pyramid levels ({len(truth_pyramid)}, {len(pred_pyramid)}) "
            f"!= configured num_scales {cfg.num_scales}"
        )
    total = 0.0
    for truth, pred in zip(truth_pyramid, pred_pyramid):
        _check_dims(np.asarray(truth), np.asarray(pred))
        total += cfg.lambda_bce * bce_loss(truth, pred, cfg.eps)
        total += cfg.lambda_patch_dice * patch_dice_loss(
            truth, pred, cfg.grid, cfg.eps, cfg.reduction, cfg.smooth_numerator
        )
    return total
