from dataclasses import replace

import numpy as np
import pytest

from acciturn.learning import TrainConfig
from acciturn.pipeline import DemoConfig, canonical_frame_spread, run_demo, run_sweep
from acciturn.calibration import CalibrationResult
from acciturn.synth import SynthConfig

FAST_STAGE2 = TrainConfig(lr=2.0, epochs=50, batch=64)


def test_zero_noise_no_flip():
    cfg = DemoConfig(
        synth=SynthConfig(n_videos=8, frames_per_video=40, sfm_noise=0.0, feature_noise=0.0, flip_fraction=0.0),
        stage2=FAST_STAGE2,
    )
    rep = run_demo(cfg)
    assert rep["stage1"]["final_loss"] < 1e-3
    assert max(c["error_deg"] for c in rep["calibration"].values()) < 1.0
    assert rep["dropped"] == []


def test_flipped_videos_dropped():
    cfg = DemoConfig(synth=SynthConfig(flip_fraction=0.3), stage2=FAST_STAGE2)
    rep = run_demo(cfg)
    flipped = {v for v, c in rep["calibration"].items() if c["flipped"]}
    assert len(flipped) == 6
    assert flipped == set(rep["dropped"])


def test_canonical_frame_spread_of_consistent_gauges(rng):
    from acciturn.rotations import random_rotation

    Q = random_rotation(rng, 4)
    common = random_rotation(rng)
    gauges = {f"v{k}": Q[k] for k in range(4)}
    results = {f"v{k}": CalibrationResult(Q[k].T @ common, 0.0, "right", "x") for k in range(4)}
    assert canonical_frame_spread(results, gauges, list(gauges)) < 1e-12
    assert canonical_frame_spread(results, gauges, ["v0"]) == 0.0


def test_seeded_demo_config():
    cfg = DemoConfig().with_seed(5)
    assert cfg.synth.seed == cfg.stage1.seed == cfg.stage2.seed == 5


def test_sweep_image_counts_are_monotone():
    cfg = DemoConfig(synth=SynthConfig(n_videos=10, frames_per_video=30), stage2=replace(FAST_STAGE2, epochs=20))
    rows = run_sweep(cfg, np.deg2rad([3, 7, 15, 45, 180]))
    n = [r[1] for r in rows]
    assert n == sorted(n) and n[-1] == 300
    assert [r[0] for r in rows] == pytest.approx([3, 7, 15, 45, 180])
