"""Pluggable tubelet scoring: the boundary where a clip classifier would sit.

A ScoreSource attaches a (C+1)-wide multi-label score vector to each
tubelet; index 0 is background, classes are 1..C, and entries are
independent sigmoid-style probabilities (they need not sum to 1). Clip
level sources broadcast one vector to every frame of the tubelet; the
oracle source scores each frame against ground-truth boxes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import Tubelet, iou_xyxy, validate_scores
from .losses import CLIP_EPS
from .metrics import GroundTruthInstance


@dataclass(frozen=True)
class ClassCatalog:
    """Names for activity classes 1..C; index 0 is reserved for background."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 1:
            raise ValueError("catalog needs at least one activity class")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate class names")
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def num_classes(self) -> int:
        return len(self.names)

    def class_name(self, class_id: int) -> str:
        if class_id == 0:
            return "background"
        return self.names[class_id - 1]

    def class_id(self, name: str) -> int:
        return self.names.index(name) + 1


@dataclass(frozen=True)
class ConstantScoreSource:
    """Fixed clip-level vector broadcast to every frame."""

    vector: np.ndarray

    def clip_scores(self, tubelet: Tubelet) -> np.ndarray:
        return np.asarray(self.vector, dtype=np.float64)

    def frame_scores(self, tubelet: Tubelet) -> np.ndarray:
        return np.tile(self.clip_scores(tubelet), (tubelet.length, 1))


@dataclass(frozen=True)
class TableScoreSource:
    """Clip-level vectors keyed by tubelet uid ("<video>/<clip>/<component>")."""

    table: dict[str, np.ndarray]

    def clip_scores(self, tubelet: Tubelet) -> np.ndarray:
        if tubelet.uid is None or tubelet.uid not in self.table:
            raise KeyError(f"no score-table entry for tubelet id {tubelet.uid!r}")
        return np.asarray(self.table[tubelet.uid], dtype=np.float64)

    def frame_scores(self, tubelet: Tubelet) -> np.ndarray:
        return np.tile(self.clip_scores(tubelet), (tubelet.length, 1))


@dataclass(frozen=True)
class OracleScoreSource:
    """Per-frame scores derived from ground truth.

    Class c scores 1 on frames where the tubelet box overlaps a class-c
    ground-truth box with IoU >= iou_threshold, else 0; background is
    1 - max over classes. Ground-truth instances without per-frame boxes
    are ignored.
    """

    instances: tuple[GroundTruthInstance, ...]
    num_classes: int
    iou_threshold: float = 0.5
    _by_video: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        by_video: dict[str | None, list[GroundTruthInstance]] = {}
        for inst in self.instances:
            if inst.boxes is None:
                continue
            by_video.setdefault(inst.video_id, []).append(inst)
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "_by_video", by_video)

    def _gt_for(self, tubelet: Tubelet) -> list[GroundTruthInstance]:
        video = tubelet.video_id
        if video is None:
            if len(self._by_video) > 1:
                raise ValueError(
                    "tubelet has no uid; oracle cannot pick among multiple videos"
                )
            return next(iter(self._by_video.values()), [])
        return self._by_video.get(video, [])

    def frame_scores(self, tubelet: Tubelet) -> np.ndarray:
        scores = np.zeros((tubelet.length, self.num_classes + 1))
        for gt in self._gt_for(tubelet):
            lo = max(tubelet.start_frame, gt.start_frame)
            hi = min(tubelet.end_frame, gt.end_frame)
            for f in range(lo, hi + 1):
                tube_box = tubelet.boxes[f - tubelet.start_frame]
                if iou_xyxy(tube_box, gt.box_at(f)) >= self.iou_threshold:
                    scores[f - tubelet.start_frame, gt.class_id] = 1.0
        scores[:, 0] = 1.0 - scores[:, 1:].max(axis=1, initial=0.0)
        return scores


ScoreSource = ConstantScoreSource | TableScoreSource | OracleScoreSource


def score_tubelet(tubelet: Tubelet, source, catalog: ClassCatalog) -> Tubelet:
    """Return a copy of the tubelet with its score rows filled in.

    Never touches the span or the boxes; scoring the result again yields
    the same vectors.
    """
    scores = np.asarray(source.frame_scores(tubelet), dtype=np.float64)
    if scores.ndim == 1:
        scores = np.tile(scores, (tubelet.length, 1))
    validate_scores(scores, catalog.num_classes)
    return tubelet.with_scores(scores)


def multilabel_bce(target, predicted, clip_eps: float = CLIP_EPS) -> float:
    """Binary cross-entropy summed over all C+1 outputs of one vector."""
    target = np.asarray(target, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if target.shape != predicted.shape:
        raise ValueError(f"score lengths differ: {target.shape} vs {predicted.shape}")
    p = np.clip(predicted, clip_eps, 1.0 - clip_eps)
    return float(-(target * np.log(p) + (1.0 - target) * np.log1p(-p)).sum())


def load_score_table(path) -> dict[str, np.ndarray]:
    """Read a clip-level score table CSV: header tubelet_id,score_0,...,score_C."""
    table: dict[str, np.ndarray] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "tubelet_id":
            raise ValueError(f"bad score-table header in {path}: {header!r}")
        width = len(header) - 1
        for row in reader:
            if not row:
                continue
            if len(row) != width + 1:
                raise ValueError(f"score row for {row[0]!r} has {len(row) - 1} values, expected {width}")
            table[row[0]] = np.array([float(v) for v in row[1:]])
    return table


def save_score_table(path, table: dict[str, np.ndarray]) -> None:
    ids = list(table)
    width = len(table[ids[0]]) if ids else 2
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tubelet_id"] + [f"score_{i}" for i in range(width)])
        for uid in ids:
            writer.writerow([uid] + [repr(float(v)) for v in table[uid]])
