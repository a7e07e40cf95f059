"""``acciturn`` command line interface.

Angles on the command line are degrees; everything inside the library is
radians. Exit codes: 0 success, 1 contract/assertion failure, 2 input error.
"""

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import calibration, colmap_io, evaluation, pipeline, synth, targets
from .calibration import PosePairSet
from .colmap_io import ColmapImageRecord, CameraRecord, VideoPoses
from .errors import AcciturnError, InputError, NonFiniteLoss, PipelineFailure
from .rotations import rotation_to_euler, rotation_to_quaternion

log = logging.getLogger("acciturn")


class ContractFailure(AcciturnError):
    pass


# -- file helpers ---------------------------------------------------------------


def write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    write_atomic(path, json.dumps(obj, indent=2) + "\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"{path}: file not found") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def read_videoposes(path):
    return VideoPoses.from_dict(read_json(path))


def read_rotations(path):
    """Rotations plus names from a VideoPoses file or ``{"rotations": [[9], ...]}``."""
    d = read_json(path)
    if "frames" in d:
        vp = VideoPoses.from_dict(d)
        return vp.names, vp.rotations
    try:
        R = np.asarray(d["rotations"], dtype=float).reshape(-1, 3, 3)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: expected 'frames' or 'rotations'") from exc
    return [str(i) for i in range(len(R))], R


# -- commands -------------------------------------------------------------------


def cmd_ingest(args):
    _, records = colmap_io.load_model(args.model_dir)
    video = colmap_io.extract_video_poses(records, args.video_id)
    if args.rebase:
        video = colmap_io.rebase_to_first_frame(video)
    write_json(args.out, video.to_dict())
    print(f"{args.video_id}: {len(video)} frames, mean adjacent rotation "
          f"{np.rad2deg(colmap_io.mean_adjacent_angle(video)):.3f} deg")


def _load_pair_sets(args):
    sets = {}
    for path in args.pairs or []:
        d = read_json(path)
        vid = str(d.get("video_id", os.path.splitext(os.path.basename(path))[0]))
        sets[vid] = PosePairSet.from_dict(d)
    if args.poses:
        if not args.pred or len(args.pred) != len(args.poses):
            raise InputError("--poses needs one --pred file per poses file")
        for ap, pp in zip(args.poses, args.pred):
            anno, pred = read_videoposes(ap), read_videoposes(pp)
            sets[anno.video_id] = PosePairSet.from_videos(anno, pred)
    if not sets:
        raise InputError("nothing to calibrate: pass --pairs or --poses/--pred")
    return sets


def cmd_calibrate(args):
    sets = _load_pair_sets(args)
    results = {vid: calibration.calibrate(p, side=args.side, refine=not args.no_refine) for vid, p in sets.items()}
    write_json(args.out, {vid: r.to_dict() for vid, r in sorted(results.items())})
    threshold = np.deg2rad(args.threshold_deg)
    if args.report:
        write_atomic(args.report, calibration.report_csv(results, threshold))
    if args.calibrated_out:
        if not args.poses:
            raise InputError("--calibrated-out needs --poses")
        cal = []
        for path in args.poses:
            video = read_videoposes(path)
            cal.append(calibration.apply_calibration(video, results[video.video_id]).to_dict())
        write_json(args.calibrated_out, cal[0] if len(cal) == 1 else cal)
    for vid, r in sorted(results.items()):
        print(f"{vid}: error {np.rad2deg(r.error):.3f} deg ({r.side}, candidate {r.argmin_id})")


def cmd_filter(args):
    d = read_json(args.results)
    try:
        errors = {vid: float(entry["error"]) for vid, entry in d.items()}
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise InputError(f"{args.results}: expected {{video_id: {{'error': radians, ...}}}}") from exc
    kept, dropped = calibration.filter_videos(errors, np.deg2rad(args.threshold_deg))
    write_json(args.out, {"threshold_deg": args.threshold_deg, "kept": sorted(kept), "dropped": sorted(dropped)})
    print(f"kept {len(kept)}, dropped {len(dropped)} at {args.threshold_deg:g} deg")


def cmd_encode(args):
    spec = targets.BinSpec.from_degrees(args.bin_size_deg)
    video = read_videoposes(args.poses)
    frames = []
    for f in video.frames:
        t = targets.encode_pose(rotation_to_euler(f.rotation), spec)
        frames.append({"name": f.name, **t.to_dict()})
    write_json(args.out, {"video_id": video.video_id, "bin_size_deg": args.bin_size_deg, "frames": frames})
    print(f"encoded {len(frames)} frames with {args.bin_size_deg:g} deg bins {spec.counts}")


def cmd_eval(args):
    pred_names, pred = read_rotations(args.pred)
    gt_names, gt = read_rotations(args.gt)
    if set(pred_names) == set(gt_names) and pred_names != gt_names:
        order = {n: i for i, n in enumerate(pred_names)}
        pred = pred[[order[n] for n in gt_names]]
    if args.calibrate:
        rep = evaluation.evaluate_with_calibration(pred, gt, args.subset, args.seed)
    else:
        rep = evaluation.evaluate(pred, gt)
    write_json(args.out, rep.to_dict())
    print(f"n={rep.n} acc@30deg={rep.acc:.4f} median={rep.median_deg:.3f} deg")


def _synth_config(args):
    return synth.SynthConfig(
        n_videos=args.n_videos,
        frames_per_video=args.frames,
        sfm_noise=float(np.deg2rad(args.sfm_noise_deg)),
        feature_noise=args.feature_noise,
        flip_fraction=args.flip_fraction,
        feature_dim=args.feature_dim,
        seed=args.seed,
    )


def _demo_config(args):
    base = pipeline.DemoConfig()
    return pipeline.DemoConfig(
        synth=_synth_config(args),
        stage1=replace(base.stage1, epochs=args.stage1_epochs, lr=args.stage1_lr, seed=args.seed),
        stage2=replace(base.stage2, epochs=args.stage2_epochs, lr=args.stage2_lr, seed=args.seed, lam=args.lam),
        threshold=float(np.deg2rad(args.threshold_deg)),
        side=args.side,
        bin_size=targets.BinSpec.from_degrees(args.bin_size_deg).bin_size,
    )


def cmd_synth(args):
    cfg = _synth_config(args)
    samples, truth = synth.generate(cfg)
    write_json(os.path.join(args.out_dir, "dataset.json"), [s.to_dict() for s in samples])
    write_json(os.path.join(args.out_dir, "truth.json"), truth.to_dict())
    if args.colmap != "none":
        cams = {1: CameraRecord(1, "SIMPLE_PINHOLE", 640, 480, np.array([500.0, 320.0, 240.0]))}
        by_video = {}
        for s in samples:
            by_video.setdefault(s.video_id, []).append(s)
        for vid, ss in by_video.items():
            records = [
                ColmapImageRecord(k + 1, rotation_to_quaternion(s.rotation), np.zeros(3), 1, f"frame_{k:04d}.png")
                for k, s in enumerate(ss)
            ]
            colmap_io.write_model(os.path.join(args.out_dir, "colmap", vid), cams, records, binary=args.colmap == "bin")
    print(f"wrote {len(samples)} samples from {cfg.n_videos} videos to {args.out_dir}")


def cmd_demo_train(args):
    report = pipeline.run_demo(_demo_config(args))
    write_json(args.out, report)
    s1, s2 = report["stage1"], report["stage2"]
    print(f"stage 1: acc {s1['acc']:.4f}, median {s1['median_deg']:.3f} deg")
    print(f"stage 2: acc {s2['acc']:.4f}, median {s2['median_deg']:.3f} deg")
    print(f"kept {len(report['kept'])} / dropped {len(report['dropped'])} videos; "
          f"emergence spread {report['emergence_spread_deg']:.3f} deg")
    if not report["stage2_beats_stage1"]:
        raise ContractFailure(
            f"stage-2 median {s2['median_deg']:.4f} deg is not below stage-1 median {s1['median_deg']:.4f} deg"
        )


def cmd_sweep(args):
    thresholds = sorted(np.deg2rad(args.thresholds_deg))
    rows = pipeline.run_sweep(_demo_config(args), thresholds)
    write_atomic(args.out, evaluation.sweep_csv(rows))
    for row in rows:
        print(",".join("" if v is None else f"{v:g}" if isinstance(v, float) else str(v) for v in row))


def cmd_hist(args):
    poses = []
    for path in args.poses:
        _, R = read_rotations(path)
        poses.extend(rotation_to_euler(r) for r in R)
    rows = evaluation.pose_histogram(poses, args.bins)
    write_atomic(args.out, evaluation.histogram_csv(rows))
    print(f"histogram of {len(poses)} poses with {args.bins} bins per angle")


# -- parser ---------------------------------------------------------------------


def _add_synth_flags(p):
    d = synth.SynthConfig()
    p.add_argument("--n-videos", type=int, default=d.n_videos)
    p.add_argument("--frames", type=int, default=d.frames_per_video, help="frames per video")
    p.add_argument("--sfm-noise-deg", type=float, default=float(np.rad2deg(d.sfm_noise)))
    p.add_argument("--feature-noise", type=float, default=d.feature_noise)
    p.add_argument("--flip-fraction", type=float, default=d.flip_fraction)
    p.add_argument("--feature-dim", type=int, default=d.feature_dim)
    p.add_argument("--seed", type=int, default=0)


def _add_pipeline_flags(p):
    _add_synth_flags(p)
    d = pipeline.DemoConfig()
    p.add_argument("--stage1-epochs", type=int, default=d.stage1.epochs)
    p.add_argument("--stage1-lr", type=float, default=d.stage1.lr)
    p.add_argument("--stage2-epochs", type=int, default=d.stage2.epochs)
    p.add_argument("--stage2-lr", type=float, default=d.stage2.lr)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="offset loss weight")
    p.add_argument("--threshold-deg", type=float, default=7.0)
    p.add_argument("--side", choices=("left", "right", "auto"), default="auto")
    p.add_argument("--bin-size-deg", type=float, default=15.0)


def build_parser():
    parser = argparse.ArgumentParser(prog="acciturn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="COLMAP sparse model -> VideoPoses JSON")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--video-id", required=True)
    p.add_argument("--rebase", action="store_true", help="make the first frame the identity")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("calibrate", help="per-video global rotation between annotations and predictions")
    p.add_argument("--pairs", nargs="+", help="PosePairSet JSON files")
    p.add_argument("--poses", nargs="+", help="annotation VideoPoses JSON files")
    p.add_argument("--pred", nargs="+", help="prediction VideoPoses JSON files, matched by frame name")
    p.add_argument("--side", choices=("left", "right", "auto"), default="auto")
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--threshold-deg", type=float, default=7.0)
    p.add_argument("--report", help="calibration report CSV")
    p.add_argument("--calibrated-out", help="write calibrated VideoPoses here")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; calibration is deterministic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("filter", help="split videos by calibration error")
    p.add_argument("--results", required=True)
    p.add_argument("--threshold-deg", type=float, default=7.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("encode", help="VideoPoses -> bin/offset targets")
    p.add_argument("--poses", required=True)
    p.add_argument("--bin-size-deg", type=float, default=15.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("eval", help="median geodesic error and accuracy below 30 deg")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--calibrate", action="store_true", help="align predictions with one global rotation first")
    p.add_argument("--subset", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="stage-two performance vs calibration-error threshold (synthetic)")
    _add_pipeline_flags(p)
    p.add_argument("--thresholds-deg", type=float, nargs="+", default=[3.0, 7.0, 15.0, 45.0, 180.0])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("hist", help="per-angle pose histogram CSV")
    p.add_argument("--poses", nargs="+", required=True)
    p.add_argument("--bins", type=int, default=24)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("synth", help="write a synthetic turntable dataset")
    _add_synth_flags(p)
    p.add_argument("--colmap", choices=("none", "bin", "txt"), default="none",
                   help="also export each video as a COLMAP sparse model")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("demo-train", help="full two-stage pipeline on synthetic data")
    _add_pipeline_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_demo_train)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ContractFailure, PipelineFailure, NonFiniteLoss, AssertionError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
