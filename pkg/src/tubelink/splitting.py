"""Splitting action-agnostic tubes into class-specific instances.

Per-frame class scores are smoothed with a truncated moving average, then
each class is scanned for runs of frames above a threshold. Short dips
(at most beta consecutive low frames) do not break a run, so one tube can
yield several instances of the same class with other activities in
between. Runs shorter than a minimum length are discarded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ActionInstance, ActionTube
from .classify import ClassCatalog


@dataclass(frozen=True)
class SplitConfig:
    kappa: int = 8      # smoothing half-window, frames
    alpha: float = 0.5  # per-frame score threshold
    beta: int = 16      # max in-run gap, frames
    gamma: int = 16     # min instance length, frames

    def __post_init__(self):
        if self.kappa < 0 or self.beta < 0:
            raise ValueError("kappa and beta must be >= 0")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.gamma < 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")


def smooth_scores(scores: np.ndarray, kappa: int) -> np.ndarray:
    """Moving average with window 2*kappa+1 along axis 0.

    At the ends the window truncates to the valid frames and divides by
    the truncated count, so constant score runs pass through unchanged.
    """
    if kappa == 0:
        return np.array(scores, copy=True)
    n = scores.shape[0]
    csum = np.zeros((n + 1,) + scores.shape[1:])
    np.cumsum(scores, axis=0, out=csum[1:])
    idx = np.arange(n)
    lo = np.maximum(idx - kappa, 0)
    hi = np.minimum(idx + kappa + 1, n)
    counts = (hi - lo).reshape((n,) + (1,) * (scores.ndim - 1))
    return (csum[hi] - csum[lo]) / counts


def smooth(tube: ActionTube, kappa: int) -> ActionTube:
    """Tube with smoothed per-frame scores; identity at kappa=0."""
    return ActionTube(
        tube.start_frame,
        tube.end_frame,
        tube.boxes,
        smooth_scores(tube.frame_scores, kappa),
        uid=tube.uid,
    )


def extract_actions(
    tube: ActionTube,
    class_id: int,
    cfg: SplitConfig = SplitConfig(),
    video_id: str | None = None,
) -> list[ActionInstance]:
    """Runs of frames with class score strictly above alpha become instances.

    A run survives up to beta consecutive below-threshold frames; a longer
    dip closes it. The instance spans from its first to its last
    above-threshold frame, carries the tube's boxes over that span, and
    its confidence is the mean smoothed class score over the span.
    Expects an already smoothed tube.
    """
    scores = tube.frame_scores[:, class_id]
    runs: list[tuple[int, int]] = []  # (first, last) offsets into the tube
    first = last = -1
    gap = 0
    for k, value in enumerate(scores):
        if value > cfg.alpha:
            if first < 0:
                first = k
            last = k
            gap = 0
        elif first >= 0:
            gap += 1
            if gap > cfg.beta:
                runs.append((first, last))
                first = last = -1
                gap = 0
    if first >= 0:
        runs.append((first, last))

    vid = video_id if video_id is not None else (tube.video_id or "")
    instances = []
    for first, last in runs:
        if last - first + 1 < cfg.gamma:
            continue
        instances.append(
            ActionInstance(
                video_id=vid,
                class_id=class_id,
                start_frame=tube.start_frame + first,
                end_frame=tube.start_frame + last,
                boxes=tube.boxes[first : last + 1],
                confidence=float(scores[first : last + 1].mean()),
            )
        )
    return instances


def action_split(
    tubes,
    catalog: ClassCatalog,
    cfg: SplitConfig = SplitConfig(),
    video_id: str | None = None,
) -> list[ActionInstance]:
    """Smooth every tube, then extract instances for every class 1..C."""
    instances = []
    for tube in tubes:
        smoothed = smooth(tube, cfg.kappa)
        for class_id in range(1, catalog.num_classes + 1):
            instances.extend(extract_actions(smoothed, class_id, cfg, video_id))
    return instances


def split_tubelets_directly(
    tubelets,
    catalog: ClassCatalog,
    alpha: float = 0.5,
    video_id: str | None = None,
) -> list[ActionInstance]:
    """Fragment-level baseline: no merging, every scored tubelet becomes one
    instance per class whose mean score exceeds alpha. Used to measure what
    the merge/split stage buys on long activities."""
    instances = []
    for tubelet in tubelets:
        vid = video_id if video_id is not None else (tubelet.video_id or "")
        means = tubelet.frame_scores.mean(axis=0)
        for class_id in range(1, catalog.num_classes + 1):
            if means[class_id] > alpha:
                instances.append(
                    ActionInstance(
                        video_id=vid,
                        class_id=class_id,
                        start_frame=tubelet.start_frame,
                        end_frame=tubelet.end_frame,
                        boxes=tubelet.boxes,
                        confidence=float(means[class_id]),
                    )
                )
    return instances
