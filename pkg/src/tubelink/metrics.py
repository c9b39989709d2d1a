"""Detection scoring: alignment, DET curves, and (normalized) AUDC.

Detections and ground truth are aligned one-to-one per video and class by
greedy descending-confidence matching on temporal IoU. A DET curve sweeps
the confidence threshold and reports miss probability against either a
count-based false-alarm rate (false alarms per minute) or a time-based
one (fraction of ground-truth-free time that is falsely detected). Lower
is better everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ActionInstance, _readonly, _rows_iou


@dataclass(frozen=True, eq=False)
class GroundTruthInstance:
    video_id: str
    class_id: int
    start_frame: int
    end_frame: int
    boxes: np.ndarray | None = None  # (length, 4), optional

    def __post_init__(self):
        if self.end_frame < self.start_frame:
            raise ValueError(
                f"end frame {self.end_frame} before start frame {self.start_frame}"
            )
        if self.boxes is not None:
            boxes = _readonly(np.asarray(self.boxes, dtype=np.int64))
            if boxes.shape != (self.length, 4):
                raise ValueError(f"boxes shape {boxes.shape} != ({self.length}, 4)")
            object.__setattr__(self, "boxes", boxes)

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1

    def box_at(self, frame: int) -> np.ndarray:
        return self.boxes[frame - self.start_frame]


def temporal_iou(a_start: int, a_end: int, b_start: int, b_end: int) -> float:
    """IoU of two inclusive frame spans, counted in frames."""
    inter = min(a_end, b_end) - max(a_start, b_start) + 1
    if inter <= 0:
        return 0.0
    union = (a_end - a_start + 1) + (b_end - b_start + 1) - inter
    return inter / union


def _mean_box_iou(det: ActionInstance, gt: GroundTruthInstance) -> float:
    lo = max(det.start_frame, gt.start_frame)
    hi = min(det.end_frame, gt.end_frame)
    rows_d = det.boxes[lo - det.start_frame : hi - det.start_frame + 1]
    rows_g = gt.boxes[lo - gt.start_frame : hi - gt.start_frame + 1]
    return float(_rows_iou(rows_d, rows_g).mean())


@dataclass(frozen=True)
class ScoringConfig:
    t_iou_min: float = 0.2
    spatial: bool = False          # additionally require spatial overlap
    spatial_iou_min: float = 0.1
    fa_limit_rate: float = 0.2
    fa_limit_time: float = 0.2
    fps: float = 30.0
    operating_points: tuple[float, ...] = (0.15, 0.04)


@dataclass(frozen=True)
class Matching:
    """Result of one-to-one alignment, all indices into the input lists."""

    pairs: tuple[tuple[int, int], ...]      # (det index, gt index)
    unmatched_dets: tuple[int, ...]         # false alarms
    unmatched_gts: tuple[int, ...]          # missed detections


def _det_order(dets: list[ActionInstance]) -> list[int]:
    # descending confidence; remaining keys only break ties deterministically
    return sorted(
        range(len(dets)),
        key=lambda i: (
            -dets[i].confidence,
            dets[i].video_id,
            dets[i].class_id,
            dets[i].start_frame,
            dets[i].end_frame,
        ),
    )


def align(
    dets: list[ActionInstance],
    gts: list[GroundTruthInstance],
    t_iou_min: float = 0.2,
    spatial: bool = False,
    spatial_iou_min: float = 0.1,
) -> Matching:
    """Greedy one-to-one matching, never across videos or classes.

    Detections are visited in descending confidence; each takes the still
    unmatched same-video same-class ground truth with the highest temporal
    IoU, provided it reaches t_iou_min. With spatial=True a candidate must
    also reach spatial_iou_min mean per-frame box IoU whenever the ground
    truth carries boxes.
    """
    open_gts: dict[tuple[str, int], list[int]] = {}
    for j, gt in enumerate(gts):
        open_gts.setdefault((gt.video_id, gt.class_id), []).append(j)
    pairs = []
    unmatched_dets = []
    for i in _det_order(dets):
        det = dets[i]
        best_j, best_iou = None, 0.0
        for j in open_gts.get((det.video_id, det.class_id), []):
            gt = gts[j]
            tiou = temporal_iou(det.start_frame, det.end_frame, gt.start_frame, gt.end_frame)
            if tiou < t_iou_min or tiou <= best_iou:
                continue
            if spatial and gt.boxes is not None and _mean_box_iou(det, gt) < spatial_iou_min:
                continue
            best_j, best_iou = j, tiou
        if best_j is None:
            unmatched_dets.append(i)
        else:
            pairs.append((i, best_j))
            open_gts[(det.video_id, det.class_id)].remove(best_j)
    matched_gts = {j for _, j in pairs}
    unmatched_gts = tuple(j for j in range(len(gts)) if j not in matched_gts)
    return Matching(tuple(pairs), tuple(unmatched_dets), unmatched_gts)


@dataclass(frozen=True, eq=False)
class DetCurve:
    """Operating points (false-alarm level, miss probability), fa ascending."""

    fa: np.ndarray
    pmiss: np.ndarray
    axis: str  # "rate_based" | "time_based"

    def __post_init__(self):
        fa = _readonly(np.asarray(self.fa, dtype=np.float64))
        pmiss = _readonly(np.asarray(self.pmiss, dtype=np.float64))
        if fa.shape != pmiss.shape or fa.ndim != 1:
            raise ValueError("fa and pmiss must be matching 1-D arrays")
        if np.any(np.diff(fa) < 0):
            raise ValueError("fa values must be nondecreasing")
        if pmiss.size and (pmiss.min() < 0 or pmiss.max() > 1):
            raise ValueError("pmiss outside [0, 1]")
        object.__setattr__(self, "fa", fa)
        object.__setattr__(self, "pmiss", pmiss)

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fa.tolist(), self.pmiss.tolist()))


def derive_video_frames(
    dets: list[ActionInstance], gts: list[GroundTruthInstance]
) -> dict[str, int]:
    """Fallback video lengths when none are supplied: max end frame + 1."""
    frames: dict[str, int] = {}
    for item in [*dets, *gts]:
        frames[item.video_id] = max(frames.get(item.video_id, 0), item.end_frame + 1)
    return frames


def det_curve(
    dets: list[ActionInstance],
    gts: list[GroundTruthInstance],
    axis: str = "rate_based",
    t_iou_min: float = 0.2,
    video_frames: dict[str, int] | None = None,
    fps: float = 30.0,
    spatial: bool = False,
    spatial_iou_min: float = 0.1,
) -> DetCurve:
    """Sweep the confidence threshold and collect (fa, pmiss) points.

    Greedy matching has a prefix property: the matches among detections
    with confidence >= theta do not depend on lower-confidence detections,
    so a single full alignment yields the entire curve. rate_based counts
    unmatched detections per minute of video; time_based measures detected
    frames outside any same-class ground truth as a fraction of the
    ground-truth-free frames, accumulated per (video, class).
    """
    if not gts:
        raise ValueError("empty ground-truth set: miss probability is undefined")
    if axis not in ("rate_based", "time_based"):
        raise ValueError(f"unknown DET axis {axis!r}")
    if video_frames is None:
        video_frames = derive_video_frames(dets, gts)

    matching = align(dets, gts, t_iou_min, spatial, spatial_iou_min)
    gt_match_conf = {j: dets[i].confidence for i, j in matching.pairs}
    false_alarm = set(matching.unmatched_dets)

    if axis == "time_based":
        channels: dict[tuple[str, int], dict] = {}
        keys = {(gt.video_id, gt.class_id) for gt in gts}
        keys |= {(d.video_id, d.class_id) for d in dets}
        for video, cid in keys:
            gt_mask = np.zeros(video_frames[video], dtype=bool)
            for gt in gts:
                if (gt.video_id, gt.class_id) == (video, cid):
                    gt_mask[gt.start_frame : gt.end_frame + 1] = True
            channels[(video, cid)] = {
                "gt": gt_mask,
                "cover": np.zeros(video_frames[video], dtype=np.int32),
            }
        denom = float(sum(c["gt"].size - c["gt"].sum() for c in channels.values()))
    else:
        total_minutes = sum(video_frames.values()) / fps / 60.0

    levels = sorted({d.confidence for d in dets}, reverse=True)
    by_level: dict[float, list[int]] = {}
    for i, det in enumerate(dets):
        by_level.setdefault(det.confidence, []).append(i)

    fa_points = [0.0]
    pmiss_points = [1.0]
    misses = len(gts)
    fa_count = 0
    fa_frames = 0
    for theta in levels:
        for i in by_level[theta]:
            det = dets[i]
            if i in false_alarm:
                fa_count += 1
            if axis == "time_based":
                ch = channels[(det.video_id, det.class_id)]
                sl = slice(det.start_frame, det.end_frame + 1)
                newly = (ch["cover"][sl] == 0) & ~ch["gt"][sl]
                fa_frames += int(newly.sum())
                ch["cover"][sl] += 1
        misses = sum(1 for j in range(len(gts)) if gt_match_conf.get(j, -1.0) < theta)
        if axis == "time_based":
            fa_points.append(fa_frames / denom if denom else 0.0)
        else:
            fa_points.append(fa_count / total_minutes)
        pmiss_points.append(misses / len(gts))

    # keep one point per distinct fa: the lowest pmiss reached there
    fa_arr, pm_arr = [], []
    for f, p in zip(fa_points, pmiss_points):
        if fa_arr and f == fa_arr[-1]:
            pm_arr[-1] = p
        else:
            fa_arr.append(f)
            pm_arr.append(p)
    return DetCurve(np.array(fa_arr), np.array(pm_arr), axis)


def pmiss_at_fa(curve: DetCurve, fa_target: float) -> float:
    """Step lookup: pmiss at the largest curve fa <= fa_target (1.0 if none)."""
    idx = int(np.searchsorted(curve.fa, fa_target, side="right")) - 1
    if idx < 0:
        return 1.0
    return float(curve.pmiss[idx])


def audc(curve: DetCurve, fa_limit: float) -> float:
    """Normalized area under the right-continuous step curve on [0, fa_limit].

    Before the first operating point the curve is taken at pmiss = 1.
    """
    if fa_limit <= 0:
        raise ValueError(f"fa_limit must be > 0, got {fa_limit}")
    area = 0.0
    prev_x, prev_y = 0.0, 1.0
    for x, y in zip(curve.fa, curve.pmiss):
        if x >= fa_limit:
            break
        if x > prev_x:
            area += prev_y * (x - prev_x)
            prev_x = x
        prev_y = y
    area += prev_y * (fa_limit - prev_x)
    return area / fa_limit


def per_class_curves(
    dets: list[ActionInstance],
    gts: list[GroundTruthInstance],
    cfg: ScoringConfig = ScoringConfig(),
    video_frames: dict[str, int] | None = None,
) -> dict[int, dict[str, DetCurve]]:
    """rate_based and time_based curves for every class present in the GT."""
    if video_frames is None:
        video_frames = derive_video_frames(dets, gts)
    curves: dict[int, dict[str, DetCurve]] = {}
    for cid in sorted({gt.class_id for gt in gts}):
        cls_dets = [d for d in dets if d.class_id == cid]
        cls_gts = [g for g in gts if g.class_id == cid]
        curves[cid] = {
            axis: det_curve(
                cls_dets, cls_gts, axis, cfg.t_iou_min, video_frames, cfg.fps,
                cfg.spatial, cfg.spatial_iou_min,
            )
            for axis in ("rate_based", "time_based")
        }
    return curves


def per_class_report(
    dets: list[ActionInstance],
    gts: list[GroundTruthInstance],
    cfg: ScoringConfig = ScoringConfig(),
    video_frames: dict[str, int] | None = None,
    class_names: dict[int, str] | None = None,
) -> dict:
    """Per-class n-AUDC and fixed operating points, plus macro averages."""
    curves = per_class_curves(dets, gts, cfg, video_frames)
    classes = {}
    for cid, pair in curves.items():
        rate, time = pair["rate_based"], pair["time_based"]
        row = {
            "n_gt": sum(1 for g in gts if g.class_id == cid),
            "n_det": sum(1 for d in dets if d.class_id == cid),
            "n_audc_rate": audc(rate, cfg.fa_limit_rate),
            "n_audc_time": audc(time, cfg.fa_limit_time),
            "pmiss_at_rfa": {str(p): pmiss_at_fa(rate, p) for p in cfg.operating_points},
            "pmiss_at_tfa": {str(p): pmiss_at_fa(time, p) for p in cfg.operating_points},
        }
        if class_names:
            row["name"] = class_names.get(cid, str(cid))
        classes[cid] = row
    macro = {
        "n_audc_rate": float(np.mean([r["n_audc_rate"] for r in classes.values()])),
        "n_audc_time": float(np.mean([r["n_audc_time"] for r in classes.values()])),
    }
    return {"classes": classes, "macro": macro}
