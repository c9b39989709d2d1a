"""Acceptance suite: one test per criterion, one printed line per criterion.

Run with `pytest tests/test_acceptance.py -v -s` (or -rA) to see the lines.
Property checks are seeded, quantitative checks are pinned to fixed
tolerances, and the timed criteria assert their runtime budgets.
"""

import math
import time

import numpy as np
import pytest

from tubelink.classify import ClassCatalog, OracleScoreSource, TableScoreSource, load_score_table, multilabel_bce
from tubelink.core import ActionInstance
from tubelink.dataio import read_ground_truth, write_instances
from tubelink.extraction import ExtractionConfig, extract, label_components
from tubelink.losses import PatchGrid, bce_loss, dice_loss, patch_dice_gradient, patch_dice_loss
from tubelink.merging import LinkConfig, TubeletMerger, merge_tubelets
from tubelink.metrics import (
    DetCurve,
    GroundTruthInstance,
    ScoringConfig,
    align,
    audc,
    det_curve,
    per_class_report,
    pmiss_at_fa,
    temporal_iou,
)
from tubelink.pipeline import PipelineConfig, run_stream
from tubelink.splitting import SplitConfig, action_split, smooth_scores, split_tubelets_directly
from tubelink.synthetic import generate_dataset, long_short_scenario, random_scenario

from conftest import chain_streams_case, make_tubelet
from oracles import flood_fill_label, offline_transitive_groups, partitions_equal
from test_losses import fd_gradient

CFG_LINK = LinkConfig(theta_link=0.2, delta_t=16)
CATALOG3 = ClassCatalog(("class_1", "class_2", "class_3"))


def announce(number, ok, detail):
    print(f"\nACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'} - {detail}", flush=True)
    assert ok, f"criterion {number} failed: {detail}"


def pipeline_cfg(catalog, workers=1):
    return PipelineConfig(
        clip_length=16,
        clip_stride=16,
        height=112,
        width=112,
        workers=workers,
        catalog=catalog,
        extraction=ExtractionConfig(num_classes=catalog.num_classes),
    )


# -- shared synthetic datasets (built once) ---------------------------------

@pytest.fixture(scope="module")
def recovery_data(tmp_path_factory):
    """Noiseless and noisy variants of the 1/3/5-actor scenarios."""
    datasets = {}
    for tag, noise in (("clean", 0.0), ("noisy", 0.2)):
        scenarios = [
            random_scenario("a1", 201, 1, 1024, 3, noise=noise),
            random_scenario("b3", 202, 3, 2048, 3, noise=noise),
            random_scenario("c5", 203, 5, 2944, 3, noise=noise),
        ]
        out = tmp_path_factory.mktemp(f"recovery_{tag}")
        paths = generate_dataset(scenarios, out, CATALOG3, write_scores=False)
        datasets[tag] = (paths, {s.video_id: s.num_frames for s in scenarios})
    return datasets


@pytest.fixture(scope="module")
def bench_data(tmp_path_factory):
    """Four 2048-frame videos with a clip-level score table."""
    scenarios = [
        random_scenario(f"bench_{i}", 300 + i, 3, 2048, 3) for i in range(4)
    ]
    out = tmp_path_factory.mktemp("bench")
    paths = generate_dataset(scenarios, out, CATALOG3)
    return paths, [s.video_id for s in scenarios]


# -- criteria ----------------------------------------------------------------

def test_criterion_01_connected_components_oracle(rng):
    flood_fill_label(np.zeros((2, 2, 2), bool), 6)  # numba warm-up
    flood_fill_label(np.zeros((2, 2, 2), bool), 26)
    t0 = time.perf_counter()
    for _ in range(200):
        vol = rng.random((8, 32, 32)) < rng.uniform(0.05, 0.6)
        for connectivity in (6, 26):
            labels, count = label_components(vol, connectivity)
            oracle, oracle_count = flood_fill_label(vol, connectivity)
            assert count == oracle_count
            assert partitions_equal(labels, oracle)
    elapsed = time.perf_counter() - t0
    announce(
        1,
        elapsed < 10.0,
        f"label_components == BFS flood fill on 200 volumes x 2 connectivities "
        f"({elapsed:.1f}s < 10s)",
    )


def test_criterion_02_patch_dice_correctness(rng):
    t0 = time.perf_counter()
    # (a) one patch covering the volume reduces to global Dice
    grid_volume = PatchGrid(16, 16, patch_t=None)
    worst_gap = 0.0
    for _ in range(1000):
        truth = (rng.random((4, 16, 16)) < rng.uniform(0.1, 0.5)).astype(float)
        pred = rng.random((4, 16, 16))
        gap = abs(
            patch_dice_loss(truth, pred, grid_volume) - dice_loss(truth, pred)
        )
        worst_gap = max(worst_gap, gap)
    assert worst_gap < 1e-12

    # (b) analytic gradient vs central finite differences (h = 1e-5)
    grid = PatchGrid(4, 4)
    worst_rel = 0.0
    for _ in range(50):
        truth = (rng.random((4, 8, 8)) < 0.4).astype(float)
        pred = rng.uniform(0.1, 0.9, (4, 8, 8))
        analytic = patch_dice_gradient(truth, pred, grid)
        numeric = fd_gradient(truth, pred, grid, h=1e-5)
        worst_rel = max(
            worst_rel, np.abs(analytic - numeric).max() / np.abs(numeric).max()
        )
    assert worst_rel < 1e-4

    # (c) a missed 2x2 actor hurts mean patch Dice >5x more than global Dice
    truth = np.zeros((1, 64, 64))
    truth[0, 4:24, 4:24] = 1.0   # 20x20 blob
    truth[0, 40:42, 40:42] = 1.0  # 2x2 blob
    pred = truth.copy()
    pred[0, 40:42, 40:42] = 0.0
    grid16 = PatchGrid(16, 16)
    delta_pdl = patch_dice_loss(truth, pred, grid16, reduction="mean") - patch_dice_loss(
        truth, truth, grid16, reduction="mean"
    )
    delta_dice = dice_loss(truth, pred) - dice_loss(truth, truth)
    ratio = delta_pdl / delta_dice
    assert ratio > 5.0

    elapsed = time.perf_counter() - t0
    announce(
        2,
        elapsed < 30.0,
        f"patch Dice: volume-patch==Dice (gap {worst_gap:.1e}), gradient vs FD "
        f"(rel {worst_rel:.1e}), small-object ratio {ratio:.1f} > 5 ({elapsed:.1f}s < 30s)",
    )


def test_criterion_03_bce_closed_forms():
    truth = np.ones((2, 8, 8))
    pred = np.full((2, 8, 8), 0.5)
    per_pixel = bce_loss(truth, pred)
    assert abs(per_pixel - math.log(2)) < 1e-12
    for num_classes in (1, 7):
        target = np.zeros(num_classes + 1)
        target[1] = 1.0
        value = multilabel_bce(target, np.full(num_classes + 1, 0.5))
        assert abs(value - (num_classes + 1) * math.log(2)) < 1e-12
    announce(3, True, "uniform-0.5 BCE = ln 2 per pixel; multilabel = (C+1) ln 2 (1e-12)")


def test_criterion_04_online_offline_equivalence():
    t0 = time.perf_counter()
    for seed in range(100):
        stream, _ = chain_streams_case(seed=seed)
        tubes = merge_tubelets(stream, CFG_LINK)
        groups = offline_transitive_groups(stream, CFG_LINK.theta_link, CFG_LINK.delta_t)
        produced = sorted(
            (t.start_frame, t.end_frame, t.boxes.tobytes()) for t in tubes
        )
        expected = sorted(
            (
                min(stream[i].start_frame for i in g),
                max(stream[i].end_frame for i in g),
                np.vstack(
                    [stream[i].boxes for i in sorted(g, key=lambda i: stream[i].start_frame)]
                ).tobytes(),
            )
            for g in groups
        )
        assert produced == expected
    elapsed = time.perf_counter() - t0
    announce(
        4,
        elapsed < 10.0,
        f"online merge == offline transitive grouping on 100 chain streams "
        f"({elapsed:.1f}s < 10s)",
    )


def test_criterion_05_four_merge_outcomes():
    # 1: no link -> new candidate
    near = make_tubelet(0, 15, (0, 0, 10, 10))
    far = make_tubelet(16, 31, (80, 80, 90, 90))
    assert len(merge_tubelets([near, far], CFG_LINK)) == 2

    # 2: one mutual link -> merge with concatenated boxes and scores
    a = make_tubelet(0, 15, (0, 0, 10, 10), scores=np.array([0.0, 0.7]))
    b = make_tubelet(16, 31, (0, 0, 10, 10), scores=np.array([0.0, 0.4]))
    (tube,) = merge_tubelets([a, b], CFG_LINK)
    assert (tube.start_frame, tube.end_frame) == (0, 31)
    assert (tube.frame_scores[:16, 1] == 0.7).all()
    assert (tube.frame_scores[16:, 1] == 0.4).all()

    # 3: one tubelet linking two candidates -> everyone stays separate
    left = make_tubelet(0, 15, (0, 0, 10, 10))
    right = make_tubelet(0, 15, (12, 0, 22, 10))
    wide = make_tubelet(16, 31, (2, 0, 20, 10))
    spans = sorted(
        (t.start_frame, t.end_frame) for t in merge_tubelets([left, right, wide], CFG_LINK)
    )
    assert spans == [(0, 15), (0, 15), (16, 31)]

    # 4: two tubelets linking one candidate -> argmax merges, other restarts
    cand = make_tubelet(0, 15, (10, 0, 20, 10))
    strong = make_tubelet(16, 31, (12, 0, 22, 10))
    weak = make_tubelet(16, 31, (4, 0, 14, 10))
    tubes = merge_tubelets([cand, strong, weak], CFG_LINK)
    assert len(tubes) == 2
    merged = next(t for t in tubes if t.length == 32)
    assert (merged.boxes[16:] == strong.boxes).all()

    # the CheckEnd argmax rule directly: links {0.25, 2/3} merge the stronger
    merger = TubeletMerger(CFG_LINK)
    merger.merge_step(make_tubelet(0, 15, (0, 0, 10, 10)))
    merger.merge_step(make_tubelet(16, 31, (6, 0, 16, 10)))
    merger.merge_step(make_tubelet(16, 31, (2, 0, 12, 10)))
    merger.check_end(0)
    assert (merger.candidates[0].boxes[16:] == [2, 0, 12, 10]).all()

    announce(5, True, "all four merge outcomes and the CheckEnd argmax rule conform")


def test_criterion_06_action_split_narrative():
    walking = np.full(300, 0.05)
    walking[:100] = 0.9
    walking[200:] = 0.9
    standing = np.full(300, 0.05)
    standing[100:200] = 0.9
    scores = np.zeros((300, 3))
    scores[:, 1] = walking
    scores[:, 2] = standing
    scores[:, 0] = 1.0 - scores[:, 1:].max(axis=1)
    tube = make_tubelet(0, 299, (0, 0, 10, 10), scores=scores, num_classes=2)
    catalog = ClassCatalog(("walking", "standing"))
    instances = action_split(
        [merge_tubelets([tube], CFG_LINK)[0]], catalog, SplitConfig()
    )
    n_walking = sum(1 for i in instances if i.class_id == 1)
    n_standing = sum(1 for i in instances if i.class_id == 2)
    assert (n_walking, n_standing) == (2, 1)

    smoothed = smooth_scores(np.array([0.0, 0.0, 1.0, 0.0, 0.0]).reshape(-1, 1), 1)
    expected = np.array([0.0, 1 / 3, 1 / 3, 1 / 3, 0.0]).reshape(-1, 1)
    gap = np.abs(smoothed - expected).max()
    assert gap < 1e-12

    announce(
        6,
        True,
        f"walk/stand/walk tube -> 2 + 1 instances; smoothing fixture exact (gap {gap:.1e})",
    )


def test_criterion_07_scorer_fixtures(rng):
    def det(video, cls, start, end, conf):
        boxes = np.tile([0, 0, 10, 10], (end - start + 1, 1))
        return ActionInstance(video, cls, start, end, boxes, conf)

    gts = [GroundTruthInstance("v", 1, 0, 99), GroundTruthInstance("v", 1, 300, 399)]
    frames = {"v": 1800}
    perfect = [det("v", 1, 0, 99, 0.9), det("v", 1, 300, 399, 0.8)]
    curve = det_curve(perfect, gts, video_frames=frames)
    assert pmiss_at_fa(curve, 0.15) == 0.0
    assert audc(curve, 0.2) == 0.0

    empty_curve = det_curve([], gts, video_frames=frames)
    assert pmiss_at_fa(empty_curve, 0.15) == 1.0
    assert audc(empty_curve, 0.2) == 1.0

    fixture = DetCurve(np.array([0.0, 0.1, 0.3]), np.array([1.0, 0.5, 0.2]), "rate_based")
    assert pmiss_at_fa(fixture, 0.15) == 0.5
    # by hand on [0, 0.2]: 1.0 over [0, 0.1) plus 0.5 over [0.1, 0.2), / 0.2
    assert abs(audc(fixture, 0.2) - 0.75) < 1e-12

    for trial in range(100):
        n_gt = int(rng.integers(1, 10))
        gts_r = [
            GroundTruthInstance(
                "v", int(rng.integers(1, 3)), s := int(rng.integers(0, 900)),
                s + int(rng.integers(10, 120)),
            )
            for _ in range(n_gt)
        ]
        dets_r = [
            det("v", int(rng.integers(1, 3)), s := int(rng.integers(0, 900)),
                s + int(rng.integers(10, 120)), float(rng.random()))
            for _ in range(int(rng.integers(0, 25)))
        ]
        for axis in ("rate_based", "time_based"):
            c = det_curve(dets_r, gts_r, axis=axis, video_frames={"v": 1024})
            assert (np.diff(c.fa) >= 0).all()
            assert (np.diff(c.pmiss) <= 0).all()

    announce(
        7,
        True,
        "scorer fixtures exact (perfect=0, empty=1, step curve pmiss@0.15=0.5, "
        "AUDC=0.75) and DET monotone on 100 random sets",
    )


def test_criterion_08_end_to_end_recovery(recovery_data):
    cfg = pipeline_cfg(CATALOG3)

    paths, frames = recovery_data["clean"]
    gts = read_ground_truth(paths["ground_truth"])
    source = OracleScoreSource(tuple(gts), CATALOG3.num_classes)
    dets, _ = run_stream(cfg, paths["masks"], None, source)
    worst_iou = 1.0
    for gt in gts:
        best = max(
            (
                temporal_iou(d.start_frame, d.end_frame, gt.start_frame, gt.end_frame)
                for d in dets
                if d.video_id == gt.video_id and d.class_id == gt.class_id
            ),
            default=0.0,
        )
        worst_iou = min(worst_iou, best)
    assert worst_iou >= 0.9
    confident = [d for d in dets if d.confidence >= 0.5]
    false_alarms = len(align(confident, gts, t_iou_min=0.2).unmatched_dets)
    assert false_alarms == 0

    paths_n, frames_n = recovery_data["noisy"]
    gts_n = read_ground_truth(paths_n["ground_truth"])
    source_n = OracleScoreSource(tuple(gts_n), CATALOG3.num_classes)
    dets_n, _ = run_stream(cfg, paths_n["masks"], None, source_n)
    report = per_class_report(dets_n, gts_n, ScoringConfig(), frames_n)
    macro = report["macro"]["n_audc_rate"]
    assert macro <= 0.25

    announce(
        8,
        True,
        f"noiseless recovery: worst IoU {worst_iou:.3f} >= 0.9, 0 false alarms; "
        f"noise 0.2: macro n-AUDC {macro:.3f} <= 0.25",
    )


def test_criterion_09_merge_helps_long_activities(tmp_path):
    catalog = ClassCatalog(("long_activity", "short_activity"))
    scenarios = [long_short_scenario(f"mix{i}", 400 + i) for i in range(3)]
    paths = generate_dataset(scenarios, tmp_path, catalog, write_scores=False)
    gts = read_ground_truth(paths["ground_truth"])
    frames = {s.video_id: s.num_frames for s in scenarios}
    source = OracleScoreSource(tuple(gts), catalog.num_classes)
    cfg = pipeline_cfg(catalog)

    with_merge, _ = run_stream(cfg, paths["masks"], None, source)

    # baseline: tubelets scored independently, no merge/split stage
    from dataclasses import replace as dc_replace

    from tubelink.maskio import list_clips, read_mask

    scored = []
    for video_id in sorted(frames):
        for clip_index, clip in enumerate(list_clips(paths["masks"], video_id)):
            for comp, tubelet in enumerate(
                extract(read_mask(clip), clip_index * 16, cfg.extraction)
            ):
                tubelet = dc_replace(tubelet, uid=f"{video_id}/{clip_index}/{comp}")
                scored.append(tubelet.with_scores(source.frame_scores(tubelet)))
    without_merge = split_tubelets_directly(scored, catalog, alpha=0.5)

    scoring = ScoringConfig()
    on = per_class_report(with_merge, gts, scoring, frames)["classes"]
    off = per_class_report(without_merge, gts, scoring, frames)["classes"]
    long_on = on[1]["n_audc_rate"]
    long_off = off[1]["n_audc_rate"]
    assert long_on <= long_off

    announce(
        9,
        True,
        f"long-activity n-AUDC with merge {long_on:.3f} <= without {long_off:.3f} "
        f"(short class: {on[2]['n_audc_rate']:.3f} vs {off[2]['n_audc_rate']:.3f})",
    )


def test_criterion_10a_single_thread_throughput(bench_data):
    paths, videos = bench_data
    source = TableScoreSource(load_score_table(paths["score_table"]))
    cfg = pipeline_cfg(CATALOG3, workers=1)
    _, report = run_stream(cfg, paths["masks"], videos, source)
    breakdown = ", ".join(f"{k}={v:.2f}s" for k, v in report.stages.items())
    announce(
        "10a",
        report.fps >= 300.0,
        f"single-threaded {report.fps:.0f} fps >= 300 on {report.frames} frames "
        f"of 16x112x112 clips [{breakdown}]",
    )


def test_criterion_10b_parallel_scaling(bench_data):
    paths, videos = bench_data
    source = TableScoreSource(load_score_table(paths["score_table"]))
    single_cfg = pipeline_cfg(CATALOG3, workers=1)
    _, single = run_stream(single_cfg, paths["masks"], videos, source)
    multi_cfg = pipeline_cfg(CATALOG3, workers=4)
    _, multi = run_stream(multi_cfg, paths["masks"], videos, source)
    speedup = multi.fps / single.fps
    import os

    announce(
        "10b",
        speedup >= 2.0,
        f"4-worker speedup {speedup:.2f}x on 4 videos "
        f"(single {single.fps:.0f} fps, parallel {multi.fps:.0f} fps, "
        f"{os.cpu_count()} CPU core(s) available)",
    )


def test_criterion_11_determinism(recovery_data, tmp_path):
    paths, _ = recovery_data["clean"]
    gts = read_ground_truth(paths["ground_truth"])
    source = OracleScoreSource(tuple(gts), CATALOG3.num_classes)
    cfg = pipeline_cfg(CATALOG3)
    blobs = []
    for run in range(2):
        dets, _ = run_stream(cfg, paths["masks"], None, source)
        out = tmp_path / f"run{run}.jsonl"
        write_instances(out, dets, CATALOG3)
        blobs.append(out.read_bytes())
    announce(
        11,
        blobs[0] == blobs[1],
        f"two identical runs produced byte-identical detections "
        f"({len(blobs[0])} bytes)",
    )
