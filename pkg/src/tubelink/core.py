"""Geometry and detection primitives shared by the whole pipeline.

Boxes use half-open pixel intervals [x1, x2) x [y1, y2) so areas are
integer-exact. Frame indices are absolute (video timeline, 0-based) and
tubelet spans are inclusive on both ends.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FrameBox:
    """Axis-aligned box on one frame, half-open pixel intervals."""

    frame: int
    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        if self.frame < 0:
            raise ValueError(f"negative frame index {self.frame}")
        if self.x1 < 0 or self.y1 < 0:
            raise ValueError(f"negative box origin ({self.x1},{self.y1})")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(
                f"degenerate box ({self.x1},{self.y1},{self.x2},{self.y2})"
            )

    @property
    def area(self) -> int:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=np.int64)


def validate_scores(scores: np.ndarray, num_classes: int | None = None) -> None:
    """Check a score vector/matrix: values in [0,1], row length C+1.

    Rows are multi-label sigmoid outputs, index 0 is background; entries
    need not sum to 1.
    """
    scores = np.asarray(scores)
    if scores.ndim not in (1, 2):
        raise ValueError(f"scores must be 1-D or 2-D, got shape {scores.shape}")
    if num_classes is not None and scores.shape[-1] != num_classes + 1:
        raise ValueError(
            f"score vector length {scores.shape[-1]} != C+1 = {num_classes + 1}"
        )
    if scores.size and (scores.min() < 0.0 or scores.max() > 1.0):
        raise ValueError("scores outside [0, 1]")


@dataclass(frozen=True, eq=False)
class Tubelet:
    """A short spatio-temporal track: one box and one score row per frame.

    boxes is (length, 4) int64 rows [x1, y1, x2, y2]; frame k of the arrays
    corresponds to absolute frame start_frame + k. frame_scores is
    (length, C+1) float64 with background at column 0. Instances are
    immutable after construction and safe to share between workers.
    """

    start_frame: int
    end_frame: int
    boxes: np.ndarray
    frame_scores: np.ndarray
    uid: str | None = None

    def __post_init__(self):
        if self.start_frame < 0:
            raise ValueError(f"negative start frame {self.start_frame}")
        if self.end_frame < self.start_frame:
            raise ValueError(
                f"end frame {self.end_frame} before start frame {self.start_frame}"
            )
        boxes = _readonly(np.asarray(self.boxes, dtype=np.int64))
        scores = _readonly(np.asarray(self.frame_scores, dtype=np.float64))
        n = self.length
        if boxes.shape != (n, 4):
            raise ValueError(f"boxes shape {boxes.shape} != ({n}, 4)")
        if scores.ndim != 2 or scores.shape[0] != n:
            raise ValueError(f"frame_scores shape {scores.shape} != ({n}, C+1)")
        if np.any(boxes[:, 0] >= boxes[:, 2]) or np.any(boxes[:, 1] >= boxes[:, 3]):
            raise ValueError("degenerate box in tubelet")
        if np.any(boxes[:, :2] < 0):
            raise ValueError("negative box origin in tubelet")
        validate_scores(scores)
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "frame_scores", scores)

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1

    @property
    def video_id(self) -> str | None:
        """Video prefix of the uid ("<video>/<clip>/<component>"), if set."""
        if self.uid is None:
            return None
        return self.uid.split("/")[0]

    def box_at(self, frame: int) -> FrameBox:
        if not self.start_frame <= frame <= self.end_frame:
            raise IndexError(f"frame {frame} outside [{self.start_frame}, {self.end_frame}]")
        x1, y1, x2, y2 = self.boxes[frame - self.start_frame]
        return FrameBox(frame, int(x1), int(y1), int(x2), int(y2))

    def with_scores(self, frame_scores: np.ndarray) -> "Tubelet":
        return dataclasses.replace(self, frame_scores=frame_scores)


@dataclass(frozen=True, eq=False)
class ActionTube(Tubelet):
    """Action-agnostic tube: merged tubelets, same per-frame layout."""


@dataclass(frozen=True, eq=False)
class ActionInstance:
    """Final class-specific detection with a frame span and confidence."""

    video_id: str
    class_id: int
    start_frame: int
    end_frame: int
    boxes: np.ndarray
    confidence: float

    def __post_init__(self):
        if self.class_id < 1:
            raise ValueError(f"class_id {self.class_id} must be >= 1 (0 is background)")
        if self.end_frame < self.start_frame:
            raise ValueError(
                f"end frame {self.end_frame} before start frame {self.start_frame}"
            )
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        boxes = _readonly(np.asarray(self.boxes, dtype=np.int64))
        if boxes.shape != (self.length, 4):
            raise ValueError(f"boxes shape {boxes.shape} != ({self.length}, 4)")
        object.__setattr__(self, "boxes", boxes)

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1


def box_iou(a: FrameBox, b: FrameBox) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint."""
    return iou_xyxy((a.x1, a.y1, a.x2, a.y2), (b.x1, b.y1, b.x2, b.y2))


def iou_xyxy(a, b) -> float:
    """IoU of two (x1, y1, x2, y2) sequences, half-open intervals."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return float(inter / union)


def _rows_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise IoU of two (n, 4) box arrays."""
    iw = np.minimum(a[:, 2], b[:, 2]) - np.maximum(a[:, 0], b[:, 0])
    ih = np.minimum(a[:, 3], b[:, 3]) - np.maximum(a[:, 1], b[:, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    return inter / (area_a + area_b - inter)


def temporal_intersection(a, b) -> int:
    """Number of frames shared by two spans (inclusive ends), >= 0."""
    lo = max(a.start_frame, b.start_frame)
    hi = min(a.end_frame, b.end_frame)
    return max(0, hi - lo + 1)


def _shared_frame_rows(p, c):
    lo = max(p.start_frame, c.start_frame)
    hi = min(p.end_frame, c.end_frame)
    rows_p = p.boxes[lo - p.start_frame : hi - p.start_frame + 1]
    rows_c = c.boxes[lo - c.start_frame : hi - c.start_frame + 1]
    return rows_p, rows_c


def tube_link_score(p, c, gap_tolerance: int, spatial_mode: str = "frame_mean") -> float:
    """Spatio-temporal link strength between a candidate tube and a tubelet.

    With temporal overlap: mean per-frame box IoU over the shared frames
    ("frame_mean", default) or voxel-volume IoU over the union span
    ("volumetric"). Clip-sequential tubelets never share frames, so a
    temporal gap of at most gap_tolerance frames is bridged by the IoU of
    the facing boundary boxes. Everything else scores 0.

    Expects c to start no earlier than p (stream order).
    """
    if temporal_intersection(p, c) > 0:
        rows_p, rows_c = _shared_frame_rows(p, c)
        if spatial_mode == "frame_mean":
            return float(_rows_iou(rows_p, rows_c).mean())
        if spatial_mode == "volumetric":
            return _volumetric_iou(p, c)
        raise ValueError(f"unknown spatial_mode {spatial_mode!r}")
    gap = c.start_frame - p.end_frame
    if 0 < gap <= gap_tolerance:
        return box_iou(p.box_at(p.end_frame), c.box_at(c.start_frame))
    return 0.0


def _volumetric_iou(p, c) -> float:
    """Voxel IoU across the union span: frames covered by one tube only
    contribute their full box area to the union."""
    rows_p, rows_c = _shared_frame_rows(p, c)
    iw = np.minimum(rows_p[:, 2], rows_c[:, 2]) - np.maximum(rows_p[:, 0], rows_c[:, 0])
    ih = np.minimum(rows_p[:, 3], rows_c[:, 3]) - np.maximum(rows_p[:, 1], rows_c[:, 1])
    inter = (np.clip(iw, 0, None) * np.clip(ih, 0, None)).sum()

    def total_area(t):
        b = t.boxes
        return int(((b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])).sum())

    union = total_area(p) + total_area(c) - inter
    return float(inter / union) if union else 0.0
