"""Online merging of streamed tubelets into action-agnostic tubes.

Tubelets arrive in nondecreasing start-frame order. Each incoming tubelet
is linked against the live candidate tubes (link = spatio-temporal
overlap score at or above a threshold) and becomes a candidate itself.
Candidates that can no longer link anything in the future are resolved:

  1. no link               -> the candidate is finalized (emitted)
  2. one link, unambiguous -> merged with its successor
  3. several predecessors
     link one tubelet      -> every predecessor finalizes; the contested
                              tubelet starts a fresh tube
  4. one predecessor links
     several tubelets      -> the highest-scoring link merges, the other
                              tubelets stay separate candidates

Finalized tubes are emitted immediately and never modified afterwards,
which is what makes downstream consumption streamable. The link table
only ever holds pairs inside the gap horizon, so the candidate set stays
small and the sweep cost is near-linear in practice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ActionTube, Tubelet, tube_link_score


@dataclass(frozen=True)
class LinkConfig:
    theta_link: float = 0.2
    delta_t: int = 16
    spatial_mode: str = "frame_mean"  # or "volumetric"

    def __post_init__(self):
        if not 0.0 < self.theta_link <= 1.0:
            raise ValueError(f"theta_link must be in (0, 1], got {self.theta_link}")
        if self.delta_t < 0:
            raise ValueError(f"delta_t must be >= 0, got {self.delta_t}")
        if self.spatial_mode not in ("frame_mean", "volumetric"):
            raise ValueError(f"unknown spatial_mode {self.spatial_mode!r}")


def merge_tubes(a: Tubelet, b: Tubelet) -> ActionTube:
    """Concatenate two tubes; a must start no later than b.

    Disjoint adjacent spans are concatenated directly. A temporal gap is
    filled by linear interpolation between the facing boxes (mins floored,
    maxes ceiled) and score vectors. Where the spans overlap, each frame
    keeps the larger-area box and the elementwise maximum of the scores.
    """
    if b.start_frame < a.start_frame:
        raise ValueError(
            f"merge order violated: {b.start_frame} before {a.start_frame}"
        )
    f1 = a.start_frame
    f2 = max(a.end_frame, b.end_frame)
    n = f2 - f1 + 1
    width = a.frame_scores.shape[1]
    boxes = np.zeros((n, 4), dtype=np.int64)
    scores = np.zeros((n, width))
    a_sl = slice(0, a.length)
    boxes[a_sl] = a.boxes
    scores[a_sl] = a.frame_scores

    if b.start_frame > a.end_frame + 1:
        # bridge the gap between a's last and b's first frame
        lo, hi = a.end_frame, b.start_frame
        box_lo, box_hi = a.boxes[-1].astype(float), b.boxes[0].astype(float)
        sc_lo, sc_hi = a.frame_scores[-1], b.frame_scores[0]
        for f in range(lo + 1, hi):
            w = (f - lo) / (hi - lo)
            blend = (1.0 - w) * box_lo + w * box_hi
            k = f - f1
            boxes[k, 0] = np.floor(blend[0])
            boxes[k, 1] = np.floor(blend[1])
            boxes[k, 2] = np.ceil(blend[2])
            boxes[k, 3] = np.ceil(blend[3])
            scores[k] = (1.0 - w) * sc_lo + w * sc_hi

    for k in range(b.length):
        f = b.start_frame + k
        i = f - f1
        if f <= a.end_frame:
            # overlapping frame: larger box wins, scores take the max
            area_a = (boxes[i, 2] - boxes[i, 0]) * (boxes[i, 3] - boxes[i, 1])
            area_b = (b.boxes[k, 2] - b.boxes[k, 0]) * (b.boxes[k, 3] - b.boxes[k, 1])
            if area_b > area_a:
                boxes[i] = b.boxes[k]
            scores[i] = np.maximum(scores[i], b.frame_scores[k])
        else:
            boxes[i] = b.boxes[k]
            scores[i] = b.frame_scores[k]
    return ActionTube(f1, f2, boxes, scores, uid=a.uid)


class TubeletMerger:
    """Single-owner online merger for one video's tubelet stream.

    merge_step() consumes the next tubelet and returns the tubes finalized
    by that step; finalize() drains the rest. finished_tubes accumulates
    everything emitted so far and is never rewritten.
    """

    def __init__(self, cfg: LinkConfig = LinkConfig()):
        self.cfg = cfg
        self.candidates: dict[int, Tubelet] = {}  # seq -> tube, insertion order
        self.finished_tubes: list[ActionTube] = []
        self.current_time = -1
        self._next_seq = 0
        self._emitted: list[ActionTube] = []
        # the link table, kept as both directions of M:
        self._outbound: dict[int, dict[int, float]] = {}  # src -> {dst: score}
        self._inbound: dict[int, set[int]] = {}           # dst -> {src}

    # -- link bookkeeping -------------------------------------------------

    def _move(self, seq: int) -> None:
        # finalize: nobody may merge with this tube anymore, so erase it as
        # a target; its own outbound entries stay behind so contested
        # successors still see the competition (outcome 3).
        for src in self._inbound.pop(seq, ()):
            self._outbound.get(src, {}).pop(seq, None)
        tube = self.candidates.pop(seq)
        if not isinstance(tube, ActionTube):
            tube = ActionTube(
                tube.start_frame, tube.end_frame, tube.boxes, tube.frame_scores, tube.uid
            )
        self.finished_tubes.append(tube)
        self._emitted.append(tube)

    def _merge(self, src: int, dst: int) -> None:
        merged = merge_tubes(self.candidates[src], self.candidates[dst])
        # the survivor commits to this continuation: its other forward
        # links referred to the span just consumed and are dropped
        for tgt in self._outbound.pop(src, {}):
            self._inbound.get(tgt, set()).discard(src)
        # the absorbed tubelet disappears as a target everywhere
        for other in self._inbound.pop(dst, ()):
            self._outbound.get(other, {}).pop(dst, None)
        # and its forward links carry over to the survivor
        row = self._outbound.pop(dst, {})
        self._outbound[src] = row
        for tgt in row:
            self._inbound[tgt].discard(dst)
            self._inbound[tgt].add(src)
        self.candidates[src] = merged
        del self.candidates[dst]

    # -- the algorithm ----------------------------------------------------

    def check_end(self, seq: int) -> None:
        """Resolve one candidate: finalize it or merge it with a successor."""
        if seq not in self.candidates:
            raise ValueError(f"candidate {seq} is not live")
        row = self._outbound.get(seq) or {}
        if not row:
            self._move(seq)
            return
        if len(row) == 1:
            (dst,) = row
            if len(self._inbound[dst]) == 1:
                self._merge(seq, dst)
            else:
                self._move(seq)  # successor is contested: restart there
            return
        best = max(row.items(), key=lambda kv: (kv[1], -kv[0]))[0]
        self._merge(seq, best)

    def _sweep(self) -> None:
        # resolve candidates that cannot link anything in the future,
        # oldest first; a merge may extend a candidate past the horizon
        while True:
            stale = next(
                (
                    s
                    for s, tube in self.candidates.items()
                    if self.current_time - tube.end_frame > self.cfg.delta_t
                ),
                None,
            )
            if stale is None:
                return
            self.check_end(stale)

    def advance_time(self, frame: int) -> list[ActionTube]:
        """Move the stream clock to a clip start with no tubelets of its own.

        Clips without foreground still age the candidates; without this, a
        quiet stretch of video would delay finalization indefinitely.
        """
        self._emitted = []
        if frame > self.current_time:
            self.current_time = frame
            self._sweep()
        return self._emitted

    def merge_step(self, tubelet: Tubelet) -> list[ActionTube]:
        """Consume the next tubelet; returns tubes finalized by this step."""
        if tubelet.start_frame < self.current_time:
            raise ValueError(
                f"tubelet out of order: starts at frame {tubelet.start_frame} "
                f"but the stream is already at frame {self.current_time}"
            )
        self._emitted = []
        self.current_time = tubelet.start_frame
        self._sweep()
        seq = self._next_seq
        self._next_seq += 1
        self._inbound[seq] = set()
        for cand_seq, cand in self.candidates.items():
            score = tube_link_score(
                cand, tubelet, self.cfg.delta_t, self.cfg.spatial_mode
            )
            if score >= self.cfg.theta_link:
                self._outbound.setdefault(cand_seq, {})[seq] = score
                self._inbound[seq].add(cand_seq)
        self.candidates[seq] = tubelet
        return self._emitted

    def finalize(self) -> list[ActionTube]:
        """End of stream: drain remaining candidates, oldest first."""
        self._emitted = []
        while self.candidates:
            self.check_end(next(iter(self.candidates)))
        return self._emitted


def merge_tubelets(
    stream, cfg: LinkConfig = LinkConfig()
) -> list[ActionTube]:
    """Run the whole stream offline and return the complete tube set."""
    merger = TubeletMerger(cfg)
    for tubelet in stream:
        merger.merge_step(tubelet)
    merger.finalize()
    return merger.finished_tubes
