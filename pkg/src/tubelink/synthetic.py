"""Synthetic scenario generation: masks, ground truth and score tables.

Actors are axis-aligned rectangles moving linearly across the frame, each
with a class timeline tiling its lifetime. Rendered clip masks put the
foreground level on actor footprints and the background level elsewhere,
optionally perturbed with Gaussian noise, then quantize to mask-file
bytes. Everything is deterministic given the scenario seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import maskio
from .classify import ClassCatalog, OracleScoreSource, save_score_table
from .dataio import write_ground_truth, write_video_frames
from .extraction import ExtractionConfig, extract
from .metrics import GroundTruthInstance


@dataclass(frozen=True)
class ActorSpec:
    spawn_frame: int
    lifetime: int
    x: float
    y: float
    vx: float
    vy: float
    width: int
    height: int
    timeline: tuple[tuple[int, int, int], ...]  # (start, end, class_id), inclusive

    def __post_init__(self):
        if self.lifetime < 1:
            raise ValueError(f"lifetime must be >= 1, got {self.lifetime}")
        if self.width < 1 or self.height < 1:
            raise ValueError("actor size must be at least 1x1")
        segs = sorted((int(s), int(e), int(c)) for s, e, c in self.timeline)
        if not segs:
            raise ValueError("class timeline is empty")
        if segs[0][0] != self.spawn_frame or segs[-1][1] != self.last_frame:
            raise ValueError("class timeline does not cover the actor lifetime")
        for (s1, e1, _), (s2, _, _) in zip(segs, segs[1:]):
            if s2 != e1 + 1:
                raise ValueError("class timeline has gaps or overlaps")
        object.__setattr__(self, "timeline", tuple(segs))

    @property
    def last_frame(self) -> int:
        return self.spawn_frame + self.lifetime - 1

    def box_at(self, frame: int) -> tuple[int, int, int, int]:
        dt = frame - self.spawn_frame
        x1 = int(round(self.x + self.vx * dt))
        y1 = int(round(self.y + self.vy * dt))
        return x1, y1, x1 + self.width, y1 + self.height


@dataclass(frozen=True)
class SyntheticScenario:
    video_id: str
    seed: int
    num_frames: int
    height: int
    width: int
    actors: tuple[ActorSpec, ...]
    noise: float = 0.0
    fg_level: float = 0.9
    bg_level: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "actors", tuple(self.actors))
        for i, actor in enumerate(self.actors):
            if actor.spawn_frame < 0 or actor.last_frame >= self.num_frames:
                raise ValueError(f"actor {i} lives outside the video span")
            # linear motion: endpoint boxes bound the whole trajectory
            for frame in (actor.spawn_frame, actor.last_frame):
                x1, y1, x2, y2 = actor.box_at(frame)
                if x1 < 0 or y1 < 0 or x2 > self.width or y2 > self.height:
                    raise ValueError(
                        f"actor {i} leaves the {self.width}x{self.height} frame "
                        f"at frame {frame}"
                    )

    def num_clips(self, clip_stride: int) -> int:
        return -(-self.num_frames // clip_stride)


def ground_truth(scenario: SyntheticScenario) -> list[GroundTruthInstance]:
    """One instance per class-timeline segment, with per-frame boxes."""
    instances = []
    for actor in scenario.actors:
        for start, end, class_id in actor.timeline:
            boxes = np.array([actor.box_at(f) for f in range(start, end + 1)])
            instances.append(
                GroundTruthInstance(scenario.video_id, class_id, start, end, boxes)
            )
    return instances


def render_clip(
    scenario: SyntheticScenario,
    clip_start: int,
    clip_length: int,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Probability volume for one clip; frames past the video end stay
    background. Pass the per-video rng to get reproducible noise."""
    vol = np.full((clip_length, scenario.height, scenario.width), scenario.bg_level)
    for k in range(clip_length):
        frame = clip_start + k
        if frame >= scenario.num_frames:
            continue
        for actor in scenario.actors:
            if actor.spawn_frame <= frame <= actor.last_frame:
                x1, y1, x2, y2 = actor.box_at(frame)
                vol[k, y1:y2, x1:x2] = scenario.fg_level
    if scenario.noise > 0.0 and rng is not None:
        vol += rng.normal(0.0, scenario.noise, vol.shape)
    return np.clip(vol, 0.0, 1.0)


def _scenario_to_dict(scn: SyntheticScenario) -> dict:
    rec = {k: getattr(scn, k) for k in (
        "video_id", "seed", "num_frames", "height", "width",
        "noise", "fg_level", "bg_level",
    )}
    rec["actors"] = [
        {
            "spawn_frame": a.spawn_frame, "lifetime": a.lifetime,
            "x": a.x, "y": a.y, "vx": a.vx, "vy": a.vy,
            "width": a.width, "height": a.height,
            "timeline": [list(seg) for seg in a.timeline],
        }
        for a in scn.actors
    ]
    return rec


def generate_dataset(
    scenarios,
    out_dir,
    catalog: ClassCatalog,
    clip_length: int = 16,
    clip_stride: int = 16,
    extraction: ExtractionConfig = ExtractionConfig(),
    oracle_iou: float = 0.5,
    write_scores: bool = True,
) -> dict:
    """Write mask files, ground truth, video lengths and a clip-level score
    table for one or more scenarios.

    The score table is produced by running the same extraction that the
    pipeline will run on the stored (quantized) masks and scoring each
    tubelet against the ground truth, so every id the pipeline asks about
    is present. Returns the paths written.
    """
    out_dir = Path(out_dir)
    mask_root = out_dir / "masks"
    all_gt = []
    frames = {}
    table = {}
    extraction = replace(extraction, num_classes=catalog.num_classes)
    for scenario in scenarios:
        gts = ground_truth(scenario)
        all_gt.extend(gts)
        frames[scenario.video_id] = scenario.num_frames
        oracle = OracleScoreSource(tuple(gts), catalog.num_classes, oracle_iou)
        video_dir = mask_root / scenario.video_id
        video_dir.mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(scenario.seed)
        for clip_index in range(scenario.num_clips(clip_stride)):
            clip_start = clip_index * clip_stride
            vol = render_clip(scenario, clip_start, clip_length, rng)
            data = maskio.encode_mask(vol)
            maskio.clip_path(mask_root, scenario.video_id, clip_index).write_bytes(data)
            if write_scores:
                stored = maskio.decode_mask(data)
                for comp, tubelet in enumerate(extract(stored, clip_start, extraction)):
                    uid = f"{scenario.video_id}/{clip_index}/{comp}"
                    tubelet = replace(tubelet, uid=uid)
                    table[uid] = oracle.frame_scores(tubelet).mean(axis=0)
    paths = {
        "masks": mask_root,
        "ground_truth": out_dir / "gt.json",
        "video_frames": out_dir / "videos.json",
        "scenarios": out_dir / "scenarios.json",
    }
    write_ground_truth(paths["ground_truth"], all_gt)
    write_video_frames(paths["video_frames"], frames)
    paths["scenarios"].write_text(
        json.dumps([_scenario_to_dict(s) for s in scenarios], sort_keys=True, indent=1)
        + "\n"
    )
    if write_scores:
        paths["score_table"] = out_dir / "scores.csv"
        save_score_table(paths["score_table"], table)
    return paths


# -- ready-made scenarios ---------------------------------------------------

def walker_scenario(
    video_id: str = "walker",
    seed: int = 7,
    num_frames: int = 1024,
    height: int = 112,
    width: int = 112,
    noise: float = 0.0,
) -> SyntheticScenario:
    """One actor crossing the frame slowly, class 1 for its whole life."""
    actor = ActorSpec(
        spawn_frame=0,
        lifetime=num_frames,
        x=4.0,
        y=48.0,
        vx=(width - 20.0) / num_frames,
        vy=0.0,
        width=10,
        height=10,
        timeline=((0, num_frames - 1, 1),),
    )
    return SyntheticScenario(video_id, seed, num_frames, height, width, (actor,), noise)


def random_scenario(
    video_id: str,
    seed: int,
    num_actors: int,
    num_frames: int,
    num_classes: int,
    height: int = 112,
    width: int = 112,
    noise: float = 0.0,
    min_segment: int = 250,
    actor_size: tuple[int, int] = (8, 14),
) -> SyntheticScenario:
    """Actors in separated horizontal lanes with random slow motion and
    random class timelines; lanes never touch, so components stay apart."""
    rng = np.random.default_rng(seed)
    lane_h = height // num_actors
    actors = []
    for i in range(num_actors):
        size = int(rng.integers(actor_size[0], actor_size[1] + 1))
        if size > lane_h - 4:
            size = max(4, lane_h - 4)
        shortest = max(min(2 * min_segment, num_frames), num_frames // 2)
        lifetime = int(rng.integers(shortest, num_frames + 1))
        spawn = int(rng.integers(0, num_frames - lifetime + 1))
        y = i * lane_h + 2.0
        x = float(rng.uniform(2, width - size - 2))
        direction = 1.0 if rng.random() < 0.5 else -1.0
        room = (width - size - 3 - x) if direction > 0 else (x - 3)
        vx = direction * float(rng.uniform(0.0, max(room, 0.0) / lifetime))
        # timeline: 1-4 segments of at least min_segment frames; with a
        # single class there is nothing to alternate, keep one segment
        max_segs = max(1, min(4, lifetime // min_segment))
        n_segs = int(rng.integers(1, max_segs + 1)) if num_classes > 1 else 1
        cuts = sorted(rng.choice(
            np.arange(1, lifetime // min_segment), size=n_segs - 1, replace=False
        )) if n_segs > 1 else []
        bounds = [0] + [c * min_segment for c in cuts] + [lifetime]
        timeline = []
        prev_class = 0
        for s, e in zip(bounds, bounds[1:]):
            cid = int(rng.integers(1, num_classes + 1))
            if cid == prev_class:  # force a visible class change
                cid = cid % num_classes + 1
            prev_class = cid
            timeline.append((spawn + s, spawn + e - 1, cid))
        actors.append(
            ActorSpec(spawn, lifetime, x, y, vx, 0.0, size, size, tuple(timeline))
        )
    return SyntheticScenario(video_id, seed, num_frames, height, width, tuple(actors), noise)


def long_short_scenario(
    video_id: str,
    seed: int,
    num_frames: int = 1024,
    height: int = 112,
    width: int = 112,
) -> SyntheticScenario:
    """Mixes long activities (class 1, >= 300 frames) with short atomic
    ones (class 2, <= 32 frames) for merge-vs-no-merge comparisons."""
    rng = np.random.default_rng(seed)
    actors = []
    # two long performers in the top lanes
    for i in range(2):
        span = int(rng.integers(300, min(600, num_frames)))
        spawn = int(rng.integers(0, num_frames - span + 1))
        actors.append(
            ActorSpec(
                spawn, span, float(rng.uniform(4, width - 16)), 4.0 + 26.0 * i,
                0.0, 0.0, 10, 10, ((spawn, spawn + span - 1, 1),),
            )
        )
    # several short performers in the lower lanes
    for i in range(3):
        span = int(rng.integers(24, 33))
        spawn = int(rng.integers(0, num_frames - span + 1))
        actors.append(
            ActorSpec(
                spawn, span, float(rng.uniform(4, width - 16)), 60.0 + 16.0 * i,
                0.0, 0.0, 10, 10, ((spawn, spawn + span - 1, 2),),
            )
        )
    return SyntheticScenario(video_id, seed, num_frames, height, width, tuple(actors))
