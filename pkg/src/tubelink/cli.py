"""Command-line interface.

Subcommands mirror the pipeline stages: extract masks to tubelets, run
the merge/split post-processing, score detections, run everything end to
end, generate synthetic datasets, benchmark throughput, and evaluate the
localization losses on a pair of mask files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataio, maskio, synthetic
from .classify import (
    ClassCatalog,
    OracleScoreSource,
    TableScoreSource,
    load_score_table,
    score_tubelet,
)
from .config import load_config
from .extraction import extract
from .losses import (
    LossConfig,
    PatchGrid,
    bce_loss,
    build_pyramid,
    dice_loss,
    multiscale_loss,
    patch_dice_loss,
)
from .merging import LinkConfig, TubeletMerger
from .metrics import per_class_curves, per_class_report
from .pipeline import run_stream
from .splitting import SplitConfig, action_split


def _add_common(parser):
    parser.add_argument("--config", help="config file (flat key = value)")
    parser.add_argument("--seed", type=int, default=0, help="RNG seed where applicable")
    parser.add_argument("--workers", type=int, help="parallel video workers")


def _load_cfg(args, extra: dict | None = None):
    overrides = dict(extra or {})
    if args.workers is not None:
        overrides["workers"] = args.workers
    return load_config(args.config, overrides)


def _fit_catalog(catalog, width):
    """Fall back to generic class names when the data disagrees on C."""
    if width is not None and catalog.num_classes != width - 1:
        return ClassCatalog(tuple(f"class_{i}" for i in range(1, width)))
    return catalog


def _score_source(args, catalog):
    if getattr(args, "scores", None):
        table = load_score_table(args.scores)
        width = len(next(iter(table.values()))) if table else None
        return TableScoreSource(table), _fit_catalog(catalog, width)
    if getattr(args, "oracle", None):
        gts = dataio.read_ground_truth(args.oracle)
        return OracleScoreSource(tuple(gts), catalog.num_classes), catalog
    raise SystemExit("either --scores or --oracle is required")


def cmd_extract(args):
    cfg = _load_cfg(args)
    source, catalog = (None, cfg.catalog)
    if args.scores or args.oracle:
        source, catalog = _score_source(args, cfg.catalog)
    extraction = replace(cfg.extraction, num_classes=catalog.num_classes)
    tubelets = []
    for video_id in args.video:
        for clip_index, path in enumerate(maskio.list_clips(args.masks, video_id)):
            mask = maskio.read_mask(path)
            clip_start = clip_index * cfg.clip_stride
            for comp, tubelet in enumerate(extract(mask, clip_start, extraction)):
                tubelet = replace(tubelet, uid=f"{video_id}/{clip_index}/{comp}")
                if source is not None:
                    tubelet = score_tubelet(tubelet, source, catalog)
                tubelets.append(tubelet)
    dataio.write_tubelets(args.out, tubelets)
    print(f"wrote {len(tubelets)} tubelets to {args.out}")


def cmd_tmas(args):
    overrides = {}
    for key, flag in (
        ("link.theta_link", args.theta_link),
        ("link.delta_t", args.delta_t),
        ("split.kappa", args.kappa),
        ("split.alpha", args.alpha),
        ("split.beta", args.beta),
        ("split.gamma", args.gamma),
    ):
        if flag is not None:
            overrides[key] = flag
    cfg = _load_cfg(args, overrides)
    tubelets = dataio.read_tubelets(args.input)
    width = tubelets[0].frame_scores.shape[1] if tubelets else 2
    catalog = cfg.catalog
    if catalog.num_classes != width - 1:
        catalog = ClassCatalog(tuple(f"class_{i}" for i in range(1, width)))
    by_video: dict[str, list] = {}
    for tubelet in tubelets:
        by_video.setdefault(tubelet.video_id or "", []).append(tubelet)
    instances = []
    for video_id in sorted(by_video):
        merger = TubeletMerger(cfg.link)
        stream = sorted(by_video[video_id], key=lambda t: t.start_frame)
        tubes = []
        for tubelet in stream:
            tubes.extend(merger.merge_step(tubelet))
        tubes.extend(merger.finalize())
        instances.extend(action_split(tubes, catalog, cfg.split, video_id))
    dataio.write_instances(args.out, instances, catalog)
    print(f"wrote {len(instances)} instances to {args.out}")


def cmd_score(args):
    cfg = _load_cfg(args)
    dets = dataio.read_instances(args.dets)
    gts = dataio.read_ground_truth(args.gt)
    video_frames = dataio.read_video_frames(args.durations) if args.durations else None
    names = {i + 1: n for i, n in enumerate(cfg.catalog.names)}
    report = per_class_report(dets, gts, cfg.scoring, video_frames, names)
    report["n_detections"] = len(dets)
    report["n_ground_truth"] = len(gts)
    dataio.write_report(args.out, report)
    if args.det_csv:
        curves = per_class_curves(dets, gts, cfg.scoring, video_frames)
        dataio.write_det_csv(args.det_csv, curves)
    print(json.dumps(report["macro"], sort_keys=True))


def cmd_run(args):
    cfg = _load_cfg(args)
    videos = args.videos.split(",") if args.videos else None
    source, catalog = _score_source(args, cfg.catalog)
    cfg = replace(cfg, catalog=catalog)
    instances, report = run_stream(cfg, args.masks, videos, source)
    dataio.write_instances(args.out, instances, cfg.catalog)
    if args.report:
        Path(args.report).write_text(
            json.dumps(report.as_dict(), sort_keys=True, indent=1) + "\n"
        )
    print(
        f"wrote {len(instances)} instances to {args.out} "
        f"({report.frames} frames at {report.fps:.0f} fps)"
    )


def cmd_synth(args):
    classes = tuple(args.classes.split(",")) if args.classes else None
    if args.preset == "walker":
        scenarios = [
            synthetic.walker_scenario(
                f"walker_{i:02d}", args.seed + i, args.frames, noise=args.noise
            )
            for i in range(args.videos)
        ]
        catalog = ClassCatalog(classes or ("walking",))
    elif args.preset == "long-short":
        scenarios = [
            synthetic.long_short_scenario(f"mix_{i:02d}", args.seed + i, args.frames)
            for i in range(args.videos)
        ]
        catalog = ClassCatalog(classes or ("long_activity", "short_activity"))
    else:
        catalog = ClassCatalog(
            classes or tuple(f"class_{i}" for i in range(1, args.num_classes + 1))
        )
        scenarios = [
            synthetic.random_scenario(
                f"video_{i:02d}",
                args.seed + i,
                args.actors,
                args.frames,
                catalog.num_classes,
                noise=args.noise,
            )
            for i in range(args.videos)
        ]
    cfg = _load_cfg(args)
    paths = synthetic.generate_dataset(
        scenarios,
        args.out,
        catalog,
        cfg.clip_length,
        cfg.clip_stride,
        cfg.extraction,
    )
    print(json.dumps({k: str(v) for k, v in paths.items()}, sort_keys=True, indent=1))


def cmd_bench(args):
    import tempfile

    cfg = _load_cfg(args)
    workdir = args.workdir or tempfile.mkdtemp(prefix="tubelink_bench_")
    catalog = ClassCatalog(("class_1", "class_2", "class_3"))
    n_videos = max(4, cfg.workers)
    scenarios = [
        synthetic.random_scenario(
            f"bench_{i:02d}", args.seed + i, 3, args.frames, catalog.num_classes
        )
        for i in range(n_videos)
    ]
    paths = synthetic.generate_dataset(
        scenarios, workdir, catalog, cfg.clip_length, cfg.clip_stride, cfg.extraction
    )
    source = TableScoreSource(load_score_table(paths["score_table"]))
    base = replace(cfg, catalog=catalog, workers=1)
    _, single = run_stream(base, paths["masks"], [scenarios[0].video_id], source)
    multi_cfg = replace(base, workers=max(cfg.workers, 4))
    _, multi = run_stream(
        multi_cfg, paths["masks"], [s.video_id for s in scenarios], source
    )
    result = {
        "single_threaded": single.as_dict(),
        "parallel": multi.as_dict(),
        "parallel_workers": multi_cfg.workers,
        "speedup": multi.fps / single.fps if single.fps else 0.0,
    }
    out = json.dumps(result, sort_keys=True, indent=1)
    if args.out:
        Path(args.out).write_text(out + "\n")
    print(out)


def cmd_loss_eval(args):
    truth = maskio.read_mask(args.truth)
    pred = maskio.read_mask(args.pred)
    ph, pw = (int(v) for v in args.patch.split("x"))
    grid = PatchGrid(ph, pw)
    cfg = LossConfig(
        lambda_bce=args.lambda_bce,
        lambda_patch_dice=args.lambda_patch_dice,
        num_scales=args.scales,
        grid=grid,
    )
    truth_pyr = build_pyramid(truth, args.scales)
    pred_pyr = build_pyramid(pred, args.scales)
    result = {
        "bce": bce_loss(truth, pred),
        "dice": dice_loss(truth, pred),
        "patch_dice_sum": patch_dice_loss(truth, pred, grid, reduction="sum"),
        "patch_dice_mean": patch_dice_loss(truth, pred, grid, reduction="mean"),
        "multiscale": multiscale_loss(truth_pyr, pred_pyr, cfg),
    }
    print(json.dumps(result, sort_keys=True, indent=1))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tubelink",
        description="online tube-linking post-processing for activity detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="masks -> tubelet JSON Lines")
    _add_common(p)
    p.add_argument("--masks", required=True, help="mask root directory")
    p.add_argument("--video", required=True, nargs="+", help="video id(s)")
    p.add_argument("--out", required=True)
    p.add_argument("--scores", help="clip-level score table CSV")
    p.add_argument("--oracle", help="ground-truth JSON for oracle scoring")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("tmas", help="tubelet JSON Lines -> instance JSON Lines")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--theta-link", type=float)
    p.add_argument("--delta-t", type=int)
    p.add_argument("--kappa", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=int)
    p.add_argument("--gamma", type=int)
    p.set_defaults(func=cmd_tmas)

    p = sub.add_parser("score", help="detections vs ground truth -> report")
    _add_common(p)
    p.add_argument("--dets", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--durations", help="video frame counts JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--det-csv", help="write DET-curve points CSV")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("run", help="masks -> instances, end to end")
    _add_common(p)
    p.add_argument("--masks", required=True)
    p.add_argument("--videos", help="comma list; default: every video found")
    p.add_argument("--scores", help="clip-level score table CSV")
    p.add_argument("--oracle", help="ground-truth JSON for oracle scoring")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="write throughput report JSON")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--preset", choices=("walker", "random", "long-short"), default="random")
    p.add_argument("--videos", type=int, default=1)
    p.add_argument("--actors", type=int, default=3)
    p.add_argument("--frames", type=int, default=1024)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--num-classes", type=int, default=3)
    p.add_argument("--classes", help="comma list of class names")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="throughput benchmark on synthetic data")
    _add_common(p)
    p.add_argument("--frames", type=int, default=2048)
    p.add_argument("--out", help="write benchmark JSON")
    p.add_argument("--workdir", help="where to generate the benchmark dataset")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("loss-eval", help="losses between two mask files")
    _add_common(p)
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--patch", default="16x16")
    p.add_argument("--scales", type=int, default=3)
    p.add_argument("--lambda-bce", type=float, default=1.0)
    p.add_argument("--lambda-patch-dice", type=float, default=1.0)
    p.set_defaults(func=cmd_loss_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
