"""End-to-end streaming driver: masks in, action instances out.

Each video is processed clip by clip: extract tubelets, attach scores,
advance the online merger, and split whatever tubes it finalizes. Tubes
are therefore emitted while the stream is still running, with a bounded
delay, and are never retracted. Videos are independent units of
parallelism; output across videos is sorted by video id so results do not
depend on the worker count.
"""

from __future__ import annotations

import heapq
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from . import maskio
from .classify import ClassCatalog, score_tubelet
from .core import ActionInstance
from .extraction import ExtractionConfig, extract
from .merging import LinkConfig, TubeletMerger
from .metrics import ScoringConfig
from .splitting import SplitConfig, action_split

STAGES = ("extract", "classify", "merge", "split")


@dataclass(frozen=True)
class PipelineConfig:
    clip_length: int = 16
    clip_stride: int = 16
    height: int = 448
    width: int = 800
    workers: int = 1
    catalog: ClassCatalog = field(default_factory=lambda: ClassCatalog(("activity",)))
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)

    def __post_init__(self):
        if self.clip_length < 1:
            raise ValueError(f"clip_length must be >= 1, got {self.clip_length}")
        if not 1 <= self.clip_stride <= self.clip_length:
            raise ValueError(
                f"clip_stride must be in [1, clip_length], got {self.clip_stride}"
            )
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass
class ThroughputReport:
    frames: int
    wall_time: float
    fps: float
    stages: dict[str, float]

    def as_dict(self) -> dict:
        return {
            "frames": self.frames,
            "wall_time_s": self.wall_time,
            "fps": self.fps,
            "stage_seconds": dict(self.stages),
        }


def stream_video(cfg: PipelineConfig, mask_root, video_id: str, source):
    """Yield (clip_index, instances emitted after that clip) online.

    With overlapping strides a clip may contain tubelets that start before
    a tubelet of the previous clip, so tubelets are released through a
    small reorder buffer once no future clip can start earlier. The final
    yield carries clip_index = None with everything left at end of stream.
    """
    extraction = replace(cfg.extraction, num_classes=cfg.catalog.num_classes)
    merger = TubeletMerger(cfg.link)
    stages = dict.fromkeys(STAGES, 0.0)
    pending: list = []  # (start_frame, insertion order, tubelet)
    counter = 0
    clip_paths = maskio.list_clips(mask_root, video_id)

    def advance(tubelets):
        done = []
        for tubelet in tubelets:
            done.extend(merger.merge_step(tubelet))
        return done

    for clip_index, path in enumerate(clip_paths):
        clip_start = clip_index * cfg.clip_stride
        mask = maskio.read_mask(path)

        t0 = time.perf_counter()
        tubelets = extract(mask, clip_start, extraction)
        stages["extract"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        scored = []
        for comp, tubelet in enumerate(tubelets):
            tubelet = replace(tubelet, uid=f"{video_id}/{clip_index}/{comp}")
            scored.append(score_tubelet(tubelet, source, cfg.catalog))
        stages["classify"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        done = merger.advance_time(clip_start)
        for tubelet in scored:
            heapq.heappush(pending, (tubelet.start_frame, counter, tubelet))
            counter += 1
        # anything starting before the next clip can be streamed now
        release_before = (clip_index + 1) * cfg.clip_stride
        ready = []
        while pending and pending[0][0] < release_before:
            ready.append(heapq.heappop(pending)[2])
        done.extend(advance(ready))
        stages["merge"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        emitted = action_split(done, cfg.catalog, cfg.split, video_id)
        stages["split"] += time.perf_counter() - t0
        yield clip_index, emitted, stages

    t0 = time.perf_counter()
    done = advance(t for _, _, t in sorted(pending))
    done.extend(merger.finalize())
    stages["merge"] += time.perf_counter() - t0
    t0 = time.perf_counter()
    emitted = action_split(done, cfg.catalog, cfg.split, video_id)
    stages["split"] += time.perf_counter() - t0
    yield None, emitted, stages


def run_video(cfg: PipelineConfig, mask_root, video_id: str, source):
    """Process one video start to finish; returns (instances, frames, stages)."""
    instances: list[ActionInstance] = []
    stages = dict.fromkeys(STAGES, 0.0)
    clips = 0
    for clip_index, emitted, stage_times in stream_video(cfg, mask_root, video_id, source):
        instances.extend(emitted)
        if clip_index is not None:
            clips = clip_index + 1
        stages = stage_times
    frames = (clips - 1) * cfg.clip_stride + cfg.clip_length if clips else 0
    return instances, frames, stages


def _video_worker(args):
    cfg, mask_root, video_id, source = args
    instances, frames, stages = run_video(cfg, mask_root, video_id, source)
    return video_id, instances, frames, stages


def discover_videos(mask_root) -> list[str]:
    from pathlib import Path

    root = Path(mask_root)
    if not root.is_dir():
        raise FileNotFoundError(f"mask directory {mask_root} does not exist")
    return sorted(p.name for p in root.iterdir() if p.is_dir())


def run_stream(
    cfg: PipelineConfig,
    mask_root,
    videos: list[str] | None,
    source,
) -> tuple[list[ActionInstance], ThroughputReport]:
    """Run the pipeline over one or more videos.

    With workers > 1 videos are distributed over processes; the combined
    output is sorted by video id (per-video order preserved), so the
    result is identical for any worker count.
    """
    if videos is None:
        videos = discover_videos(mask_root)
    wall_start = time.perf_counter()
    results = []
    if cfg.workers > 1 and len(videos) > 1:
        jobs = [(cfg, mask_root, v, source) for v in videos]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_video_worker, jobs))
    else:
        for video_id in videos:
            instances, frames, stages = run_video(cfg, mask_root, video_id, source)
            results.append((video_id, instances, frames, stages))
    wall = time.perf_counter() - wall_start

    results.sort(key=lambda r: r[0])
    instances = [inst for _, batch, _, _ in results for inst in batch]
    frames = sum(f for _, _, f, _ in results)
    stages = dict.fromkeys(STAGES, 0.0)
    for _, _, _, stage_times in results:
        for name, seconds in stage_times.items():
            stages[name] += seconds
    report = ThroughputReport(
        frames=frames,
        wall_time=wall,
        fps=frames / wall if wall > 0 else 0.0,
        stages=stages,
    )
    return instances, report
