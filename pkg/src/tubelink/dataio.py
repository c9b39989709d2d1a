"""JSON/CSV interchange for tubelets, detections, ground truth and curves.

Tubelets and detections travel as JSON Lines (one object per record, all
frame indices absolute); ground truth is a single JSON array. Output is
written with sorted keys and fixed separators so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import ActionInstance, Tubelet
from .metrics import DetCurve
from .classify import ClassCatalog


def _np_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_np_default)


def tubelet_to_dict(tubelet: Tubelet) -> dict:
    return {
        "uid": tubelet.uid,
        "start_frame": tubelet.start_frame,
        "end_frame": tubelet.end_frame,
        "boxes": tubelet.boxes.tolist(),
        "frame_scores": tubelet.frame_scores.tolist(),
    }


def tubelet_from_dict(rec: dict) -> Tubelet:
    return Tubelet(
        start_frame=rec["start_frame"],
        end_frame=rec["end_frame"],
        boxes=np.array(rec["boxes"], dtype=np.int64),
        frame_scores=np.array(rec["frame_scores"], dtype=np.float64),
        uid=rec.get("uid"),
    )


def instance_to_dict(inst: ActionInstance, catalog: ClassCatalog | None = None) -> dict:
    rec = {
        "video_id": inst.video_id,
        "class_id": inst.class_id,
        "start_frame": inst.start_frame,
        "end_frame": inst.end_frame,
        "confidence": inst.confidence,
        "boxes": inst.boxes.tolist(),
    }
    if catalog is not None:
        rec["class_name"] = catalog.class_name(inst.class_id)
    return rec


def instance_from_dict(rec: dict) -> ActionInstance:
    return ActionInstance(
        video_id=rec["video_id"],
        class_id=rec["class_id"],
        start_frame=rec["start_frame"],
        end_frame=rec["end_frame"],
        boxes=np.array(rec["boxes"], dtype=np.int64),
        confidence=rec["confidence"],
    )


def write_jsonl(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(_dumps(rec) + "\n")


def read_jsonl(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def write_tubelets(path, tubelets) -> None:
    write_jsonl(path, (tubelet_to_dict(t) for t in tubelets))


def read_tubelets(path) -> list[Tubelet]:
    return [tubelet_from_dict(rec) for rec in read_jsonl(path)]


def write_instances(path, instances, catalog: ClassCatalog | None = None) -> None:
    write_jsonl(path, (instance_to_dict(i, catalog) for i in instances))


def read_instances(path) -> list[ActionInstance]:
    return [instance_from_dict(rec) for rec in read_jsonl(path)]


# -- ground truth ---------------------------------------------------------

def gt_to_dict(gt) -> dict:
    rec = {
        "video_id": gt.video_id,
        "class_id": gt.class_id,
        "start_frame": gt.start_frame,
        "end_frame": gt.end_frame,
    }
    if gt.boxes is not None:
        rec["boxes"] = gt.boxes.tolist()
    return rec


def write_ground_truth(path, instances) -> None:
    Path(path).write_text(
        json.dumps(
            [gt_to_dict(g) for g in instances],
            sort_keys=True,
            indent=1,
            default=_np_default,
        )
        + "\n"
    )


def read_ground_truth(path):
    from .metrics import GroundTruthInstance

    records = json.loads(Path(path).read_text())
    if not isinstance(records, list):
        raise ValueError(f"ground-truth file {path} must hold a JSON array")
    return [
        GroundTruthInstance(
            video_id=rec["video_id"],
            class_id=rec["class_id"],
            start_frame=rec["start_frame"],
            end_frame=rec["end_frame"],
            boxes=np.array(rec["boxes"], dtype=np.int64) if "boxes" in rec else None,
        )
        for rec in records
    ]


def write_video_frames(path, frames: dict[str, int]) -> None:
    Path(path).write_text(json.dumps(frames, sort_keys=True, indent=1) + "\n")


def read_video_frames(path) -> dict[str, int]:
    return {k: int(v) for k, v in json.loads(Path(path).read_text()).items()}


# -- DET curve export -----------------------------------------------------

def write_det_csv(path, curves: dict[int, dict[str, DetCurve]]) -> None:
    """Plot-ready CSV: one row per operating point of every class curve."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class_id", "axis", "fa", "pmiss"])
        for class_id in sorted(curves):
            for axis in sorted(curves[class_id]):
                curve = curves[class_id][axis]
                for fa, pmiss in curve.points():
                    writer.writerow([class_id, axis, repr(fa), repr(pmiss)])


def write_report(path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
