"""End-to-end two-stage workflow on synthetic turntable data.

relative training -> per-video calibration -> filtering -> absolute training,
with both stages scored on clean held-out videos against canonical truth.
"""

import itertools
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .calibration import DEFAULT_THRESHOLD, PosePairSet, align, calibrate, filter_videos
from .errors import PipelineFailure
from .evaluation import threshold_sweep
from .learning import (
    Sample,
    ToyPredictor,
    TrainConfig,
    make_pairs,
    predict_rotations,
    relative_loss,
    stack_samples,
    train,
)
from .rotations import geodesic_distance
from .synth import SynthConfig, generate, held_out_config, oracle_eval
from .targets import BinSpec

log = logging.getLogger(__name__)


@dataclass
class DemoConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    stage1: TrainConfig = field(default_factory=lambda: TrainConfig(lr=0.5, epochs=100, batch=64))
    stage2: TrainConfig = field(default_factory=lambda: TrainConfig(lr=2.0, epochs=1000, batch=64))
    threshold: float = DEFAULT_THRESHOLD
    side: str = "auto"
    held_out_videos: int = 5
    bin_size: float = np.pi / 12

    def with_seed(self, seed):
        return replace(
            self,
            synth=replace(self.synth, seed=seed),
            stage1=replace(self.stage1, seed=seed),
            stage2=replace(self.stage2, seed=seed),
        )


def group_by_video(samples):
    out = {}
    for i, s in enumerate(samples):
        out.setdefault(s.video_id, []).append(i)
    return out


def train_stage1(samples, config: DemoConfig):
    dim = len(samples[0].features)
    init = ToyPredictor.init_relative(dim, np.random.default_rng(config.stage1.seed))
    return train(init, samples, "relative", config.stage1)


def calibrate_videos(samples, predictions, side="auto", refine=True):
    """Per-video calibration of annotations against stage-one predictions."""
    results = {}
    for vid, idx in group_by_video(samples).items():
        pairs = PosePairSet(
            [samples[i].frame_id for i in idx],
            np.stack([samples[i].rotation for i in idx]),
            predictions[idx],
        )
        results[vid] = calibrate(pairs, side=side, refine=refine)
    return results


def calibrated_samples(samples, results, keep=None):
    """Samples of the kept videos with annotations moved into the predictor's frame."""
    out = []
    for s in samples:
        if keep is not None and s.video_id not in keep:
            continue
        r = results[s.video_id]
        out.append(Sample(s.video_id, s.frame_id, s.features, align(s.rotation, r.delta, r.side)))
    return out


def train_stage2(cal_samples, config: DemoConfig):
    spec = BinSpec(config.bin_size)
    dim = len(cal_samples[0].features)
    init = ToyPredictor.init_absolute(dim, np.random.default_rng(config.stage2.seed), spec)
    return train(init, cal_samples, "absolute", config.stage2)


def canonical_frame_spread(results, gauges, videos):
    """Median pairwise geodesic distance between gauge-corrected aligners ``Q_v @ D_v``.

    Right-side aligners satisfy ``G_i Q_v D_v ~ P_i``, so ``Q_v D_v`` is the
    predictor's canonical frame as seen from video ``v``; agreement across
    videos means one frame emerged.
    """
    frames = [gauges[v] @ results[v].delta for v in sorted(videos)]
    if len(frames) < 2:
        return 0.0
    d = [geodesic_distance(a, b) for a, b in itertools.combinations(frames, 2)]
    return float(np.median(d))


def run_demo(config: DemoConfig = None):
    """Run the full synthetic two-stage pipeline and return a JSON-ready report."""
    config = config or DemoConfig()
    samples, truth = generate(config.synth)
    test, test_truth = generate(held_out_config(config.synth, config.held_out_videos))

    stage1 = train_stage1(samples, config)
    P_train = predict_rotations(stage1.predictor, samples)
    results = calibrate_videos(samples, P_train, side=config.side)
    kept, dropped = filter_videos(results, config.threshold)
    if not kept:
        raise PipelineFailure("no video passed the calibration-error filter")

    stage2 = train_stage2(calibrated_samples(samples, results, kept), config)

    rep1 = oracle_eval(predict_rotations(stage1.predictor, test), test_truth)
    rep2 = oracle_eval(predict_rotations(stage2.predictor, test), test_truth)

    X, R, vids = stack_samples(samples)
    flipped = truth.flipped_videos
    clean = [v for v in results if v not in flipped]
    clean_err = [results[v].error for v in clean]
    flip_err = [results[v].error for v in flipped]
    pairs = make_pairs(vids, np.random.default_rng(config.stage1.seed), config.stage1.pair_cap)
    report = {
        "config": {
            "synth": asdict(config.synth),
            "stage1": asdict(config.stage1),
            "stage2": asdict(config.stage2),
            "threshold_deg": float(np.rad2deg(config.threshold)),
            "side": config.side,
            "held_out_videos": config.held_out_videos,
            "bin_size_deg": float(np.rad2deg(config.bin_size)),
        },
        "stage1": {
            "acc": rep1.acc,
            "median_deg": rep1.median_deg,
            "final_loss": stage1.trace[-1],
            "relative_loss_geodesic_deg": float(np.rad2deg(relative_loss(P_train, R, pairs, "geodesic"))),
        },
        "stage2": {"acc": rep2.acc, "median_deg": rep2.median_deg, "final_loss": stage2.trace[-1]},
        "calibration": {
            v: {
                "error_deg": float(np.rad2deg(r.error)),
                "side": r.side,
                "argmin_id": r.argmin_id,
                "flipped": v in flipped,
                "kept": v in kept,
            }
            for v, r in sorted(results.items())
        },
        "kept": sorted(kept),
        "dropped": sorted(dropped),
        "emergence_spread_deg": float(np.rad2deg(canonical_frame_spread(results, truth.gauges, clean))),
        "max_clean_error_deg": float(np.rad2deg(max(clean_err))) if clean_err else None,
        "min_flipped_error_deg": float(np.rad2deg(min(flip_err))) if flip_err else None,
        "median_error_gap_deg": float(np.rad2deg(np.median(flip_err) - np.median(clean_err)))
        if flip_err and clean_err
        else None,
        "n_train_stage2": sum(1 for s in samples if s.video_id in kept),
        "n_held_out": len(test),
    }
    report["stage2_beats_stage1"] = bool(rep2.median_err < rep1.median_err)
    return report


def run_sweep(config: DemoConfig, thresholds):
    """Stage-two accuracy as a function of the calibration-error threshold (radians).

    Stage one and calibration run once; every threshold retrains stage two on
    the videos it keeps and scores it on the held-out set.
    """
    samples, _ = generate(config.synth)
    test, test_truth = generate(held_out_config(config.synth, config.held_out_videos))
    stage1 = train_stage1(samples, config)
    results = calibrate_videos(samples, predict_rotations(stage1.predictor, samples), side=config.side)
    by_video = group_by_video(samples)
    videos = {v: (results[v], [samples[i] for i in idx]) for v, idx in by_video.items()}

    def eval_fn(kept):
        cal = calibrated_samples([s for data in kept.values() for s in data], results)
        model = train_stage2(cal, config).predictor
        return oracle_eval(predict_rotations(model, test), test_truth)

    return threshold_sweep(videos, sorted(thresholds), eval_fn)
