"""Synthetic turntable videos with known ground truth.

Every frame has a canonical pose ``G`` from a smooth azimuth sweep. Its SfM
annotation is ``N @ G @ Q_v`` with a small noise rotation ``N`` and a Haar-random
per-video gauge ``Q_v`` acting on the right. Features are ``vec(G) + noise``,
except on "flipped" frames where the appearance is that of the car turned by
180 degrees in azimuth (front/rear confusion); annotations there keep the truth.

Randomness comes from numpy's PCG64 generator. Video ``v`` draws from
``SeedSequence(seed, spawn_key=(v,))``, so videos can be generated in any order
or in parallel with identical results.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .calibration import PosePairSet, align, calibrate
from .errors import BadConfig, LengthMismatch
from .evaluation import evaluate
from .learning import Sample
from .rotations import (
    euler_to_rotation,
    random_rotation,
    rot_y,
    small_random_rotation,
    wrap_angle,
)

FLIP = rot_y(np.pi)
_SHARED_KEY = 2**31 - 1  # spawn key for draws shared across videos (flip choice, projection)


@dataclass(frozen=True)
class SynthConfig:
    n_videos: int = 20
    frames_per_video: int = 60
    azimuth_sweep: float = 4 * np.pi
    elevation_base: float = float(np.deg2rad(10.0))
    elevation_jitter: float = float(np.deg2rad(3.0))
    roll_jitter: float = float(np.deg2rad(2.0))
    sfm_noise: float = float(np.deg2rad(3.0))
    feature_noise: float = 0.02
    flip_fraction: float = 0.2
    feature_dim: int = 9
    seed: int = 0
    identity_gauge: bool = False  # test hook: Q_v = I for every video

    def validate(self):
        if self.n_videos < 1:
            raise BadConfig("n_videos must be >= 1")
        if self.frames_per_video < 2:
            raise BadConfig("frames_per_video must be >= 2")
        sigmas = (self.elevation_jitter, self.roll_jitter, self.sfm_noise, self.feature_noise)
        if min(sigmas) < 0:
            raise BadConfig("noise levels must be non-negative")
        if not 0.0 <= self.flip_fraction <= 1.0:
            raise BadConfig("flip_fraction must lie in [0, 1]")
        if self.feature_dim < 1:
            raise BadConfig("feature_dim must be >= 1")
        if abs(self.elevation_base) + 4 * self.elevation_jitter >= np.pi / 2:
            raise BadConfig("elevation too close to +-pi/2")
        return self


@dataclass
class SynthTruth:
    canonical: dict  # frame_id -> G
    gauges: dict  # video_id -> Q_v
    flipped: set = field(default_factory=set)
    frame_ids: list = field(default_factory=list)  # generation order
    flipped_videos: set = field(default_factory=set)

    def canonical_stack(self, frame_ids=None):
        ids = self.frame_ids if frame_ids is None else frame_ids
        return np.stack([self.canonical[f] for f in ids])

    def to_dict(self):
        return {
            "gauges": {v: q.ravel().tolist() for v, q in self.gauges.items()},
            "canonical": {f: self.canonical[f].ravel().tolist() for f in self.frame_ids},
            "flipped": [f for f in self.frame_ids if f in self.flipped],
        }

    @classmethod
    def from_dict(cls, d):
        canonical = {f: np.asarray(v, dtype=float).reshape(3, 3) for f, v in d["canonical"].items()}
        gauges = {v: np.asarray(q, dtype=float).reshape(3, 3) for v, q in d["gauges"].items()}
        flipped = set(d.get("flipped", []))
        flipped_videos = {f.split("/")[0] for f in flipped}
        return cls(canonical, gauges, flipped, list(canonical), flipped_videos)


def video_id(v):
    return f"vid_{v:03d}"


def _projection(config):
    if config.feature_dim == 9:
        return None
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(_SHARED_KEY, 1)))
    M = rng.standard_normal((max(config.feature_dim, 9), 9))
    Q, _ = np.linalg.qr(M)
    return Q[: config.feature_dim]


def flipped_video_indices(config):
    n = int(round(config.flip_fraction * config.n_videos))
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(_SHARED_KEY, 0)))
    return set(rng.choice(config.n_videos, size=n, replace=False).tolist())


def generate_video(config, v, flipped=False):
    """Samples plus per-frame truth for video ``v``."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(v,)))
    K = config.frames_per_video
    vid = video_id(v)
    start = rng.uniform(-np.pi, np.pi)
    direction = rng.choice([-1.0, 1.0])
    azimuths = wrap_angle(start + direction * config.azimuth_sweep * np.arange(K) / K)
    elevations = config.elevation_base + config.elevation_jitter * rng.standard_normal(K)
    rolls = config.roll_jitter * rng.standard_normal(K)
    Q = np.eye(3) if config.identity_gauge else random_rotation(rng)
    noise = small_random_rotation(config.sfm_noise, rng, size=K)
    feat_noise = config.feature_noise * rng.standard_normal((K, config.feature_dim))
    flip_mask = np.zeros(K, dtype=bool)
    if flipped:
        half = K // 2
        s = int(rng.integers(0, K - half + 1))
        flip_mask[s : s + half] = True

    proj = _projection(config)
    samples, canonical, flipped_ids = [], {}, set()
    for k in range(K):
        fid = f"{vid}/frame_{k:04d}"
        G = euler_to_rotation((azimuths[k], elevations[k], rolls[k]))
        seen = G @ FLIP if flip_mask[k] else G
        x = seen.ravel() if proj is None else proj @ seen.ravel()
        samples.append(Sample(vid, fid, x + feat_noise[k], noise[k] @ G @ Q))
        canonical[fid] = G
        if flip_mask[k]:
            flipped_ids.add(fid)
    return samples, canonical, Q, flipped_ids


def generate(config=SynthConfig()):
    """``(samples, truth)`` for a whole synthetic dataset."""
    config.validate()
    flip_videos = flipped_video_indices(config)
    samples, truth = [], SynthTruth({}, {})
    for v in range(config.n_videos):
        s, canon, Q, fl = generate_video(config, v, v in flip_videos)
        samples.extend(s)
        truth.canonical.update(canon)
        truth.gauges[video_id(v)] = Q
        truth.flipped |= fl
        truth.frame_ids.extend(canon)
        if v in flip_videos:
            truth.flipped_videos.add(video_id(v))
    return samples, truth


def held_out_config(config, n_videos=5):
    """Clean test videos from the same distribution with a disjoint seed."""
    return replace(config, n_videos=n_videos, flip_fraction=0.0, seed=config.seed + 10_007)


def oracle_eval(predictions, truth: SynthTruth, frame_ids=None, refine=True):
    """Align predictions to canonical truth with one global rotation, then score them.

    Returns an :class:`acciturn.evaluation.EvalReport`.
    """
    ids = truth.frame_ids if frame_ids is None else list(frame_ids)
    predictions = np.asarray(predictions, dtype=float)
    if len(predictions) != len(ids):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(ids)} frames")
    gt = truth.canonical_stack(ids)
    result = calibrate(PosePairSet(ids, predictions, gt), side="auto", refine=refine)
    report = evaluate(align(predictions, result.delta, result.side), gt)
    report.calibration_used = result
    return report
