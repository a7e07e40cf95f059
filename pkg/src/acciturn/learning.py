"""Training objectives and a linear toy predictor for the two training stages.

Stage one (``"relative"``) maps features to a 6D rotation and is supervised only
through relative rotations of same-video frame pairs. Stage two
(``"absolute"``) maps features to per-angle bin logits and per-bin offsets and
is supervised with calibrated absolute poses. All gradients are analytic.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CrossVideoPair, IndexOutOfRange, LengthMismatch, NonFiniteLoss
from .rotations import (
    chordal_distance_sq,
    euler_to_rotation,
    geodesic_distance,
    relative_rotation,
    rotation_to_euler,
    sixd_to_rotation,
)
from .targets import DEFAULT_SPEC, BinSpec, PoseTarget, decode_prediction, encode_pose, split_head

log = logging.getLogger(__name__)

STAGES = ("relative", "absolute")
IDENTITY_6D = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


@dataclass
class Sample:
    video_id: str
    frame_id: str
    features: np.ndarray
    rotation: np.ndarray

    def to_dict(self):
        return {
            "video_id": self.video_id,
            "frame_id": self.frame_id,
            "features": np.asarray(self.features).tolist(),
            "rotation": np.asarray(self.rotation).ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            str(d["video_id"]),
            str(d["frame_id"]),
            np.asarray(d["features"], dtype=float),
            np.asarray(d["rotation"], dtype=float).reshape(3, 3),
        )


def stack_samples(samples):
    """``(X, R, video_ids)`` arrays from a list of samples."""
    X = np.stack([np.asarray(s.features, dtype=float) for s in samples])
    R = np.stack([np.asarray(s.rotation, dtype=float) for s in samples])
    return X, R, np.array([s.video_id for s in samples])


@dataclass
class ToyPredictor:
    stage: str
    W: np.ndarray
    b: np.ndarray
    spec: BinSpec = DEFAULT_SPEC

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"stage must be one of {STAGES}")
        self.W = np.asarray(self.W, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        expected = 6 if self.stage == "relative" else 2 * self.spec.total_bins
        if self.W.shape[0] != expected or self.b.shape != (expected,):
            raise LengthMismatch(f"{self.stage} head needs {expected} outputs, got W{self.W.shape} b{self.b.shape}")

    @classmethod
    def init_relative(cls, dim, rng, scale=0.01):
        return cls("relative", scale * rng.standard_normal((6, dim)), IDENTITY_6D.copy())

    @classmethod
    def init_absolute(cls, dim, rng, spec=DEFAULT_SPEC, scale=0.01):
        n = 2 * spec.total_bins
        b = np.zeros(n)
        b[spec.total_bins :] = 0.5
        return cls("absolute", scale * rng.standard_normal((n, dim)), b, spec)

    @property
    def dim(self):
        return self.W.shape[1]

    def forward(self, X):
        return np.asarray(X, dtype=float) @ self.W.T + self.b

    def copy(self):
        return ToyPredictor(self.stage, self.W.copy(), self.b.copy(), self.spec)

    def to_dict(self):
        return {"stage": self.stage, "W": self.W.tolist(), "b": self.b.tolist(), "bin_size": self.spec.bin_size}

    @classmethod
    def from_dict(cls, d):
        return cls(d["stage"], np.array(d["W"]), np.array(d["b"]), BinSpec(float(d.get("bin_size", np.pi / 12))))


# -- stage one: relative loss ---------------------------------------------------


def make_pairs(video_ids, rng, cap_factor=4):
    """All adjacent same-video pairs, topped up with random same-video pairs to ``cap_factor * K`` per video."""
    video_ids = np.asarray(video_ids)
    pairs = []
    for vid in dict.fromkeys(video_ids.tolist()):
        idx = np.flatnonzero(video_ids == vid)
        k = len(idx)
        if k < 2:
            continue
        adj = np.stack([idx[:-1], idx[1:]], axis=1)
        n_extra = max(cap_factor * k - len(adj), 0)
        a = rng.integers(0, k, n_extra)
        b = (a + rng.integers(1, k, n_extra)) % k  # uniform over j != i
        pairs.append(np.concatenate([adj, np.stack([idx[a], idx[b]], axis=1)]))
    if not pairs:
        return np.zeros((0, 2), dtype=int)
    return np.concatenate(pairs)


def _check_pairs(pairs, n, video_ids=None):
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
        raise IndexOutOfRange(f"pair index outside [0, {n})")
    if video_ids is not None:
        video_ids = np.asarray(video_ids)
        if np.any(video_ids[pairs[:, 0]] != video_ids[pairs[:, 1]]):
            raise CrossVideoPair("pairs must come from the same video")
    return pairs


def relative_loss(pred, anno, pairs, metric="chordal_sq", video_ids=None):
    """Mean over pairs of ``metric(R_i R_j^T, P_i P_j^T)``."""
    pred = np.asarray(pred, dtype=float)
    anno = np.asarray(anno, dtype=float)
    if pred.shape != anno.shape:
        raise LengthMismatch("predictions and annotations differ in shape")
    pairs = _check_pairs(pairs, len(pred), video_ids)
    i, j = pairs[:, 0], pairs[:, 1]
    A = relative_rotation(anno[i], anno[j])
    B = relative_rotation(pred[i], pred[j])
    if metric == "chordal_sq":
        d = chordal_distance_sq(A, B)
    elif metric == "geodesic":
        d = geodesic_distance(A, B)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return float(np.mean(d))


def gram_schmidt_backward(v, R, grad_R):
    """Pull a gradient w.r.t. ``sixd_to_rotation(v)`` back to ``v``; all batched ``(N, ...)``."""
    a1, a2 = v[:, :3], v[:, 3:]
    b1, b2 = R[:, :, 0], R[:, :, 1]
    g1, g2, g3 = grad_R[:, :, 0], grad_R[:, :, 1], grad_R[:, :, 2]
    # b3 = b1 x b2
    g1 = g1 + np.cross(b2, g3)
    g2 = g2 + np.cross(g3, b1)
    # b2 = u / |u|, u = a2 - (a2.b1) b1
    dot = np.sum(a2 * b1, axis=1, keepdims=True)
    u_norm = np.linalg.norm(a2 - dot * b1, axis=1, keepdims=True)
    g_u = (g2 - b2 * np.sum(b2 * g2, axis=1, keepdims=True)) / u_norm
    b1_gu = np.sum(b1 * g_u, axis=1, keepdims=True)
    g_a2 = g_u - b1 * b1_gu
    g1 = g1 - dot * g_u - b1_gu * a2
    # b1 = a1 / |a1|
    g_a1 = (g1 - b1 * np.sum(b1 * g1, axis=1, keepdims=True)) / np.linalg.norm(a1, axis=1, keepdims=True)
    return np.concatenate([g_a1, g_a2], axis=1)


def relative_objective(predictor, X, R, pairs):
    """Mean chordal-squared relative loss and its gradient ``(loss, dW, db)``."""
    out = predictor.forward(X)
    P = sixd_to_rotation(out)
    i, j = pairs[:, 0], pairs[:, 1]
    A = relative_rotation(R[i], R[j])
    B = relative_rotation(P[i], P[j])
    diff = A - B
    loss = float(np.mean(np.sum(diff * diff, axis=(1, 2))))
    G = -2.0 * diff / len(pairs)  # dL/dB
    grad_P = np.zeros_like(P)
    np.add.at(grad_P, i, G @ P[j])
    np.add.at(grad_P, j, np.swapaxes(G, 1, 2) @ P[i])
    g_out = gram_schmidt_backward(out, P, grad_P)
    return loss, g_out.T @ X, g_out.sum(axis=0)


def relative_loss_grad(predictor, samples, pairs, metric="chordal_sq"):
    """Gradient ``(dW, db)`` of the mean relative loss for a relative-stage predictor."""
    if predictor.stage != "relative":
        raise ValueError("relative_loss_grad needs a relative-stage predictor")
    if metric != "chordal_sq":
        raise ValueError("analytic gradients are provided for the chordal_sq metric only")
    X, R, vids = stack_samples(samples)
    pairs = _check_pairs(pairs, len(X), vids)
    _, gW, gb = relative_objective(predictor, X, R, pairs)
    return gW, gb


# -- stage two: absolute loss ---------------------------------------------------


def smooth_l1(x):
    ax = np.abs(x)
    return np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)


def smooth_l1_grad(x):
    return np.where(np.abs(x) < 1.0, x, np.sign(x))


def _log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def absolute_loss(logits, offsets, target: PoseTarget, lam=1.0, spec=DEFAULT_SPEC):
    """Cross-entropy on the bin plus ``lam`` times smooth-L1 on the true bin's offset, summed over angles."""
    if len(logits) != 3 or len(offsets) != 3:
        raise LengthMismatch("expected one logit and one offset vector per angle")
    total = 0.0
    for a, (lg, of) in enumerate(zip(logits, offsets)):
        lg = np.asarray(lg, dtype=float)
        of = np.asarray(of, dtype=float)
        z = spec.counts[a]
        if lg.shape != (z,) or of.shape != (z,):
            raise LengthMismatch(f"angle {a}: expected length {z}")
        y = target.bins[a]
        total += -_log_softmax(lg)[y] + lam * float(smooth_l1(of[y] - target.offsets[a]))
    return float(total)


def encode_targets(rotations, spec=DEFAULT_SPEC):
    """``(bins, offsets)`` arrays of shape ``(N, 3)`` from calibrated rotations."""
    targets = [encode_pose(rotation_to_euler(R), spec) for R in rotations]
    return np.array([t.bins for t in targets], dtype=int), np.array([t.offsets for t in targets])


def absolute_objective(predictor, X, bins, offsets, lam=1.0):
    """Mean absolute loss over samples and its gradient ``(loss, dW, db)``."""
    spec = predictor.spec
    out = predictor.forward(X)
    n, T = len(out), spec.total_bins
    rows = np.arange(n)
    g = np.zeros_like(out)
    loss = np.zeros(n)
    start = 0
    for a, z in enumerate(spec.counts):
        y = bins[:, a]
        logp = _log_softmax(out[:, start : start + z])
        loss -= logp[rows, y]
        p = np.exp(logp)
        p[rows, y] -= 1.0
        g[:, start : start + z] = p
        r = out[rows, T + start + y] - offsets[:, a]
        loss += lam * smooth_l1(r)
        g[rows, T + start + y] = lam * smooth_l1_grad(r)
        start += z
    g /= n
    return float(loss.mean()), g.T @ X, g.sum(axis=0)


def absolute_loss_grad(predictor, sample, target: PoseTarget, lam=1.0):
    """Gradient ``(dW, db)`` of the absolute loss of one sample."""
    if predictor.stage != "absolute":
        raise ValueError("absolute_loss_grad needs an absolute-stage predictor")
    X = np.asarray(sample.features if isinstance(sample, Sample) else sample, dtype=float)[None, :]
    _, gW, gb = absolute_objective(predictor, X, np.array([target.bins]), np.array([target.offsets]), lam)
    return gW, gb


# -- training -------------------------------------------------------------------


@dataclass
class TrainConfig:
    lr: float = 0.5
    epochs: int = 200
    batch: int = 0  # 0 -> full batch
    seed: int = 0
    decay_at: tuple = (0.5, 0.8)  # fractions of ``epochs`` where lr is multiplied by 0.1
    lam: float = 1.0
    pair_cap: int = 4


@dataclass
class TrainResult:
    predictor: ToyPredictor
    trace: list  # full-dataset loss before training and after every epoch
    boundaries: list = field(default_factory=list)  # epochs after which lr decayed


def _decay_epochs(config):
    return sorted({int(round(f * config.epochs)) for f in config.decay_at if 0 < f < 1})


def train(predictor, samples, objective, config=TrainConfig()):
    """Plain (mini-batch) gradient descent, deterministic given ``config.seed``.

    ``objective`` is ``"relative"`` (pairs drawn per video) or ``"absolute"``
    (targets encoded from each sample's rotation).
    """
    if objective != predictor.stage:
        raise ValueError(f"objective {objective!r} does not match predictor stage {predictor.stage!r}")
    rng = np.random.default_rng(config.seed)
    X, R, vids = stack_samples(samples)
    if X.shape[1] != predictor.dim:
        raise LengthMismatch(f"features have dim {X.shape[1]}, predictor expects {predictor.dim}")

    if objective == "relative":
        items = make_pairs(vids, rng, config.pair_cap)

        def full(p, idx=None):
            return relative_objective(p, X, R, items if idx is None else items[idx])
    else:
        bins, offs = encode_targets(R, predictor.spec)
        items = np.arange(len(X))

        def full(p, idx=None):
            if idx is None:
                return absolute_objective(p, X, bins, offs, config.lam)
            return absolute_objective(p, X[idx], bins[idx], offs[idx], config.lam)

    p = predictor.copy()
    decays = _decay_epochs(config)
    lr = config.lr
    trace = [full(p)[0]]
    step = 0
    batch = config.batch if config.batch > 0 else len(items)
    for epoch in range(config.epochs):
        if epoch in decays:
            lr *= 0.1
        order = rng.permutation(len(items)) if batch < len(items) else None
        for s in range(0, len(items), batch):
            idx = None if order is None else order[s : s + batch]
            loss, gW, gb = full(p, idx)
            if not np.isfinite(loss):
                raise NonFiniteLoss(step)
            p.W -= lr * gW
            p.b -= lr * gb
            step += 1
        epoch_loss = full(p)[0]
        if not np.isfinite(epoch_loss):
            raise NonFiniteLoss(step)
        trace.append(epoch_loss)
    log.debug("%s training: loss %.6g -> %.6g over %d steps", objective, trace[0], trace[-1], step)
    return TrainResult(p, trace, decays)


def predict_rotations(predictor, data):
    """Rotations predicted for a list of samples or a feature matrix."""
    if isinstance(data, (list, tuple)) and data and isinstance(data[0], Sample):
        X = stack_samples(data)[0]
    else:
        X = np.atleast_2d(np.asarray(data, dtype=float))
    out = predictor.forward(X)
    if predictor.stage == "relative":
        return sixd_to_rotation(out)
    spec = predictor.spec
    T = spec.total_bins
    rots = []
    for row in out:
        pose = decode_prediction(split_head(row[:T], spec), split_head(row[T:], spec), spec)
        rots.append(euler_to_rotation(pose))
    return np.stack(rots)
