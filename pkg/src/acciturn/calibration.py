"""Global-rotation calibration of per-video SfM annotations against predictions.

For one video with annotations ``R_i`` and predictions ``P_i`` we look for a
single rotation ``D`` minimizing the mean geodesic distance between ``P_i``
and ``D @ R_i`` (``side="left"``) or ``R_i @ D`` (``side="right"``). Under the
world-to-camera convention used by :mod:`acciturn.colmap_io`, a change of SfM
world frame acts on the right, so ``"right"`` is the natural side; both are
supported and :func:`auto_calibrate` picks whichever fits better.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .colmap_io import Frame, VideoPoses
from .errors import InputError, SingularMass
from .rotations import geodesic_distance

SIDES = ("left", "right")
DEFAULT_THRESHOLD = float(np.deg2rad(7.0))
SINGULAR_TOL = 1e-9


@dataclass
class PosePairSet:
    ids: list
    annotated: np.ndarray  # (K, 3, 3)
    predicted: np.ndarray  # (K, 3, 3)

    def __post_init__(self):
        self.annotated = np.asarray(self.annotated, dtype=float).reshape(-1, 3, 3)
        self.predicted = np.asarray(self.predicted, dtype=float).reshape(-1, 3, 3)
        self.ids = [str(i) for i in self.ids]
        if not (len(self.ids) == len(self.annotated) == len(self.predicted)):
            raise InputError("ids, annotated and predicted must have equal length")
        if len(self.ids) < 1:
            raise InputError("a PosePairSet needs at least one item")
        if len(set(self.ids)) != len(self.ids):
            raise InputError("PosePairSet ids must be unique")

    def __len__(self):
        return len(self.ids)

    def subset(self, index):
        index = np.asarray(index)
        return PosePairSet([self.ids[i] for i in index], self.annotated[index], self.predicted[index])

    def to_dict(self):
        return {
            "items": [
                {"id": i, "annotated": a.ravel().tolist(), "predicted": p.ravel().tolist()}
                for i, a, p in zip(self.ids, self.annotated, self.predicted)
            ]
        }

    @classmethod
    def from_dict(cls, d):
        try:
            items = d["items"]
            return cls(
                [it["id"] for it in items],
                np.array([it["annotated"] for it in items], dtype=float),
                np.array([it["predicted"] for it in items], dtype=float),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed PosePairSet JSON: {exc}") from exc

    @classmethod
    def from_videos(cls, annotations: VideoPoses, predictions: VideoPoses):
        """Pair frames of two VideoPoses by name (annotation order is kept)."""
        pred = {f.name: f.rotation for f in predictions.frames}
        common = [f for f in annotations.frames if f.name in pred]
        if not common:
            raise InputError(f"no frame names shared between annotations and predictions of {annotations.video_id}")
        return cls([f.name for f in common], [f.rotation for f in common], [pred[f.name] for f in common])


@dataclass
class CalibrationResult:
    delta: np.ndarray
    error: float
    side: str
    argmin_id: str
    refined: bool = False

    def to_dict(self):
        return {
            "delta": np.asarray(self.delta).ravel().tolist(),
            "error": float(self.error),
            "side": self.side,
            "argmin_id": self.argmin_id,
            "refined": self.refined,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["delta"], dtype=float).reshape(3, 3),
            float(d["error"]),
            d["side"],
            str(d.get("argmin_id", "")),
            bool(d.get("refined", False)),
        )


def _check_side(side):
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")


def align(rotations, delta, side):
    """Apply ``delta`` to a stack of rotations on the given side."""
    _check_side(side)
    return delta @ rotations if side == "left" else rotations @ delta


def calibration_error(pairs: PosePairSet, delta, side):
    """Mean geodesic distance between predictions and aligned annotations."""
    aligned = align(pairs.annotated, np.asarray(delta, dtype=float), side)
    return float(np.mean(geodesic_distance(pairs.predicted, aligned)))


def candidates(pairs: PosePairSet, side):
    """One aligner per item: ``P_j R_j^T`` (left) or ``R_j^T P_j`` (right)."""
    _check_side(side)
    A, P = pairs.annotated, pairs.predicted
    At = np.swapaxes(A, -1, -2)
    return P @ At if side == "left" else At @ P


def search_calibrate(pairs: PosePairSet, side="right"):
    """Exhaustive search over the per-item candidate aligners; O(K^2) distance evaluations."""
    cands = candidates(pairs, side)
    errors = np.array([calibration_error(pairs, c, side) for c in cands])
    j = int(np.argmin(errors))  # first minimum -> lowest index on ties
    return CalibrationResult(cands[j], float(errors[j]), side, pairs.ids[j])


def auto_calibrate(pairs: PosePairSet):
    right = search_calibrate(pairs, "right")
    left = search_calibrate(pairs, "left")
    return left if left.error < right.error else right


def project_to_so3(M):
    """Closest rotation to ``M`` in Frobenius norm.

    Raises :class:`SingularMass` when the two smallest singular values are
    both below ``SINGULAR_TOL``, since the projection is then not unique.
    """
    U, s, Vt = np.linalg.svd(M)
    if s[1] < SINGULAR_TOL and s[2] < SINGULAR_TOL:
        raise SingularMass(f"singular values {s} leave the projection ambiguous")
    d = np.sign(np.linalg.det(U @ Vt)) or 1.0
    return U @ np.diag([1.0, 1.0, d]) @ Vt


def procrustes_refine(pairs: PosePairSet, init: CalibrationResult):
    """Chordal Procrustes solution, kept only if it lowers the geodesic error."""
    A, P = pairs.annotated, pairs.predicted
    At = np.swapaxes(A, -1, -2)
    M = np.mean(P @ At if init.side == "left" else At @ P, axis=0)
    projected = project_to_so3(M)
    err = calibration_error(pairs, projected, init.side)
    if err < init.error:
        return CalibrationResult(projected, err, init.side, init.argmin_id, refined=True)
    return init


def calibrate(pairs: PosePairSet, side="auto", refine=True):
    """Search (one side or auto) followed by an optional Procrustes refinement.

    A :class:`SingularMass` during refinement falls back to the search result.
    """
    result = auto_calibrate(pairs) if side == "auto" else search_calibrate(pairs, side)
    if refine:
        try:
            result = procrustes_refine(pairs, result)
        except SingularMass:
            pass
    return result


def apply_calibration(video: VideoPoses, result: CalibrationResult):
    frames = [Frame(f.name, align(f.rotation, result.delta, result.side), f.translation) for f in video.frames]
    return VideoPoses(video.video_id, frames)


def filter_videos(results, threshold=DEFAULT_THRESHOLD):
    """Partition video ids into ``(kept, dropped)`` by calibration error <= threshold (radians).

    ``results`` maps video ids to :class:`CalibrationResult` or bare errors.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    kept, dropped = set(), set()
    for vid, res in results.items():
        err = res.error if isinstance(res, CalibrationResult) else float(res)
        (kept if err <= threshold else dropped).add(vid)
    return kept, dropped


def report_csv(results, threshold=DEFAULT_THRESHOLD):
    """Calibration report: ``video_id,error_deg,side,argmin_id,kept``."""
    kept, _ = filter_videos(results, threshold)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["video_id", "error_deg", "side", "argmin_id", "kept"])
    for vid in sorted(results):
        r = results[vid]
        w.writerow([vid, f"{np.rad2deg(r.error):.6f}", r.side, r.argmin_id, int(vid in kept)])
    return buf.getvalue()
