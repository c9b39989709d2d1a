import numpy as np
import pytest

from tubelink.core import Tubelet


def make_tubelet(start, end, box=(0, 0, 10, 10), scores=None, num_classes=1, uid=None):
    """Tubelet with a constant (or per-frame) box and broadcast scores."""
    n = end - start + 1
    box = np.asarray(box)
    boxes = np.tile(box, (n, 1)) if box.ndim == 1 else np.asarray(box)
    if scores is None:
        scores = np.zeros((n, num_classes + 1))
    else:
        scores = np.asarray(scores, dtype=float)
        if scores.ndim == 1:
            scores = np.tile(scores, (n, 1))
    return Tubelet(start, end, boxes, scores, uid=uid)


def moving_box(frame, x0=0.0, y0=0.0, vx=0.0, vy=0.0, size=10):
    x1 = int(round(x0 + vx * frame))
    y1 = int(round(y0 + vy * frame))
    return (x1, y1, x1 + size, y1 + size)


def track_tubelets(
    start,
    end,
    clip_length=16,
    x0=0.0,
    y0=0.0,
    vx=0.0,
    vy=0.0,
    size=10,
    scores=None,
    num_classes=1,
):
    """Clip-aligned tubelets of one moving actor, the canonical chain stream."""
    tubelets = []
    clip0 = start // clip_length
    clip1 = end // clip_length
    for clip in range(clip0, clip1 + 1):
        f1 = max(start, clip * clip_length)
        f2 = min(end, (clip + 1) * clip_length - 1)
        boxes = np.array([moving_box(f, x0, y0, vx, vy, size) for f in range(f1, f2 + 1)])
        tubelets.append(
            make_tubelet(f1, f2, boxes, scores=scores, num_classes=num_classes)
        )
    return tubelets


def chain_streams_case(seed, num_frames=320, clip_length=16, num_classes=1):
    """Several far-apart actors: links form clains only within each actor.

    Returns (stream sorted by start frame, list of per-actor tubelet groups).
    """
    rng = np.random.default_rng(seed)
    n_actors = int(rng.integers(1, 5))
    groups = []
    for i in range(n_actors):
        # lanes 40 px apart, far beyond any accidental overlap
        y0 = 40.0 * i
        x0 = float(rng.uniform(0, 20))
        vx = float(rng.uniform(0.0, 0.5))
        life0 = int(rng.integers(0, num_frames // 2))
        life1 = int(rng.integers(life0 + clip_length, num_frames))
        groups.append(
            track_tubelets(
                life0, life1, clip_length, x0, y0, vx, 0.0, 10, num_classes=num_classes
            )
        )
    stream = sorted(
        (t for group in groups for t in group), key=lambda t: t.start_frame
    )
    return stream, groups


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
