"""Benchmark metrics: median geodesic error and accuracy below pi/6."""

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .calibration import CalibrationResult, PosePairSet, align, auto_calibrate, calibrate
from .errors import EmptyInput, LengthMismatch
from .rotations import geodesic_distance
from .targets import ANGLES, RANGES

ACC_THRESHOLD = np.pi / 6


@dataclass
class EvalReport:
    acc: float
    median_err: float
    n: int
    per_item_err: np.ndarray = field(repr=False)
    calibration_used: Optional[CalibrationResult] = None

    @property
    def median_deg(self):
        return float(np.rad2deg(self.median_err))

    def to_dict(self, per_item=True):
        d = {
            "acc": self.acc,
            "median_err": self.median_err,
            "median_deg": self.median_deg,
            "n": self.n,
            "calibration_used": None if self.calibration_used is None else self.calibration_used.to_dict(),
        }
        if per_item:
            d["per_item_err"] = np.asarray(self.per_item_err).tolist()
        return d


def report_from_errors(errors):
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise EmptyInput("nothing to evaluate")
    # np.median averages the two middle order statistics for even n
    return EvalReport(float(np.mean(errors < ACC_THRESHOLD)), float(np.median(errors)), len(errors), errors)


def evaluate(pred, gt):
    pred = np.asarray(pred, dtype=float).reshape(-1, 3, 3)
    gt = np.asarray(gt, dtype=float).reshape(-1, 3, 3)
    if len(pred) != len(gt):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(gt)} ground-truth rotations")
    if len(pred) == 0:
        raise EmptyInput("nothing to evaluate")
    return report_from_errors(np.atleast_1d(geodesic_distance(gt, pred)))


def evaluate_with_calibration(pred, gt, calib_subset_size=100, seed=0, refine=False):
    """Fit one global rotation on a random subset, apply it to every prediction, evaluate all.

    The subset stays inside the evaluated set.
    """
    pred = np.asarray(pred, dtype=float).reshape(-1, 3, 3)
    gt = np.asarray(gt, dtype=float).reshape(-1, 3, 3)
    if len(pred) != len(gt):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(gt)} ground-truth rotations")
    if len(pred) == 0:
        raise EmptyInput("nothing to evaluate")
    n_sub = min(calib_subset_size, len(pred))
    idx = np.sort(np.random.default_rng(seed).choice(len(pred), size=n_sub, replace=False))
    pairs = PosePairSet([str(i) for i in idx], pred[idx], gt[idx])
    result = calibrate(pairs, "auto", refine=True) if refine else auto_calibrate(pairs)
    report = evaluate(align(pred, result.delta, result.side), gt)
    report.calibration_used = result
    return report


def _write_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


SWEEP_HEADER = ("threshold_deg", "n_images", "acc", "median_deg")


def threshold_sweep(videos, thresholds, eval_fn):
    """Evaluate ``eval_fn`` on the videos kept at each calibration-error threshold.

    ``videos`` maps video id -> ``(CalibrationResult, data)`` where ``len(data)``
    is the image count; ``eval_fn`` receives ``{video_id: data}`` for the kept
    videos and returns an :class:`EvalReport`. Thresholds are radians, ascending.
    Rows with no kept images carry ``None`` for acc and median.
    """
    thresholds = [float(t) for t in thresholds]
    if thresholds != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    rows = []
    for t in thresholds:
        kept = {vid: data for vid, (res, data) in videos.items() if res.error <= t}
        n_images = sum(len(d) for d in kept.values())
        if n_images == 0:
            rows.append((float(np.rad2deg(t)), 0, None, None))
            continue
        rep = eval_fn(kept)
        rows.append((float(np.rad2deg(t)), n_images, rep.acc, rep.median_deg))
    return rows


def sweep_csv(rows):
    fmt = lambda x: "" if x is None else (f"{x:.6f}" if isinstance(x, float) else str(x))  # noqa: E731
    return _write_csv(SWEEP_HEADER, [[fmt(v) for v in row] for row in rows])


def pose_histogram(poses, bins=24):
    """Per-angle counts over uniform bins spanning each angle's declared range.

    Returns rows ``(angle, bin, lo_deg, hi_deg, count)``.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    rows = []
    for a, name in enumerate(ANGLES):
        lo, hi = RANGES[name]
        width = (hi - lo) / bins
        idx = np.clip(np.floor((poses[:, a] - lo) / width).astype(int), 0, bins - 1)
        counts = np.bincount(idx, minlength=bins)
        for k in range(bins):
            rows.append((name, k, float(np.rad2deg(lo + k * width)), float(np.rad2deg(lo + (k + 1) * width)), int(counts[k])))
    return rows


def histogram_csv(rows):
    return _write_csv(
        ("angle", "bin", "lo_deg", "hi_deg", "count"),
        [(a, k, f"{lo:.6f}", f"{hi:.6f}", c) for a, k, lo, hi, c in rows],
    )
