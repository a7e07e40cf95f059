"""Bin + offset encoding of Euler poses.

Each angle is shifted by its range minimum and cut into bins of width
``bin_size``. Bin indices are zero-based; offsets live in ``[0, 1)``. Angles
exactly on a range's upper endpoint fall into the last bin.
"""

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, OutOfRange
from .rotations import EulerPose

ANGLES = ("azimuth", "elevation", "roll")
RANGES = {
    "azimuth": (-np.pi, np.pi),
    "elevation": (-np.pi / 2, np.pi / 2),
    "roll": (-np.pi, np.pi),
}
ONE_MINUS_ULP = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class BinSpec:
    bin_size: float = np.pi / 12

    def __post_init__(self):
        if not self.bin_size > 0:
            raise ValueError("bin_size must be positive")
        for name in ANGLES:
            lo, hi = RANGES[name]
            z = (hi - lo) / self.bin_size
            if abs(z - round(z)) > 1e-9:
                raise ValueError(f"{name} range is not an integer multiple of bin_size {self.bin_size!r}")

    @classmethod
    def from_degrees(cls, deg):
        return cls(float(np.deg2rad(deg)))

    def count(self, name):
        lo, hi = RANGES[name]
        return int(round((hi - lo) / self.bin_size))

    @property
    def counts(self):
        return tuple(self.count(a) for a in ANGLES)

    @property
    def total_bins(self):
        return sum(self.counts)


DEFAULT_SPEC = BinSpec()


@dataclass(frozen=True)
class PoseTarget:
    bins: tuple  # (azimuth, elevation, roll), zero-based
    offsets: tuple

    def to_dict(self):
        return {a: {"bin": int(b), "offset": float(o)} for a, b, o in zip(ANGLES, self.bins, self.offsets)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(int(d[a]["bin"]) for a in ANGLES), tuple(float(d[a]["offset"]) for a in ANGLES))


def encode_angle(theta, name, spec=DEFAULT_SPEC):
    lo, hi = RANGES[name]
    if not lo <= theta <= hi:
        raise OutOfRange(name, theta)
    scaled = (theta - lo) / spec.bin_size
    z = spec.count(name)
    y = min(int(np.floor(scaled)), z - 1)
    delta = min(scaled - y, ONE_MINUS_ULP)
    return y, delta


def encode_pose(pose, spec=DEFAULT_SPEC):
    enc = [encode_angle(float(theta), name, spec) for theta, name in zip(pose, ANGLES)]
    return PoseTarget(tuple(y for y, _ in enc), tuple(d for _, d in enc))


def decode_pose(target: PoseTarget, spec=DEFAULT_SPEC):
    return EulerPose(
        *(RANGES[name][0] + (y + d) * spec.bin_size for name, y, d in zip(ANGLES, target.bins, target.offsets))
    )


def split_head(vector, spec=DEFAULT_SPEC):
    """Split a flat per-angle-concatenated vector into azimuth/elevation/roll parts."""
    vector = np.asarray(vector, dtype=float)
    bounds = np.cumsum(spec.counts)[:-1]
    return np.split(vector, bounds, axis=-1)


def decode_prediction(logits, offsets, spec=DEFAULT_SPEC):
    """Argmax bin per angle (ties to the lowest index) plus that bin's clamped offset."""
    if len(logits) != 3 or len(offsets) != 3:
        raise LengthMismatch("expected one logit and one offset vector per angle")
    bins, offs = [], []
    for name, lg, of in zip(ANGLES, logits, offsets):
        lg = np.asarray(lg, dtype=float)
        of = np.asarray(of, dtype=float)
        z = spec.count(name)
        if lg.shape != (z,) or of.shape != (z,):
            raise LengthMismatch(f"{name}: expected vectors of length {z}, got {lg.shape} and {of.shape}")
        j = int(np.argmax(lg))
        bins.append(j)
        offs.append(float(np.clip(of[j], 0.0, ONE_MINUS_ULP)))
    return decode_pose(PoseTarget(tuple(bins), tuple(offs)), spec)
