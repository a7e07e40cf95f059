"""Shared fixture builders: small COLMAP models with known poses."""

import numpy as np

from acciturn.colmap_io import CameraRecord, ColmapImageRecord
from acciturn.rotations import random_rotation, rotation_to_quaternion

SENTINEL = b"SENTINEL-DO-NOT-READ"


def known_records(n=5, seed=7, names=None):
    """``n`` image records with Haar-random poses; returns (records, rotations)."""
    rng = np.random.default_rng(seed)
    R = random_rotation(rng, n)
    names = names or [f"frame_{k + 1}.png" for k in range(n)]
    records = [
        ColmapImageRecord(k + 1, rotation_to_quaternion(R[k]), rng.standard_normal(3), 1, names[k]) for k in range(n)
    ]
    return records, R


def simple_camera():
    return {1: CameraRecord(1, "SIMPLE_PINHOLE", 640, 480, np.array([500.0, 320.0, 240.0]))}


def central_difference(f, params, h=1e-6):
    """Central finite-difference gradients of scalar ``f()`` w.r.t. each array in ``params`` (mutated in place)."""
    grads = []
    for P in params:
        g = np.zeros_like(P)
        flat, gflat = P.reshape(-1), g.reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + h
            up = f()
            flat[k] = old - h
            down = f()
            flat[k] = old
            gflat[k] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric):
    """Largest absolute deviation relative to the largest numeric gradient entry."""
    a = np.concatenate([np.ravel(x) for x in analytic])
    n = np.concatenate([np.ravel(x) for x in numeric])
    return float(np.abs(a - n).max() / max(np.abs(n).max(), 1e-12))


def relative_fd_point(rng, n_videos=2, per_video=4, dim=5):
    """A random relative-stage predictor, samples and same-video pairs."""
    from acciturn.learning import Sample, ToyPredictor, make_pairs, stack_samples

    R = random_rotation(rng, n_videos * per_video)
    samples = [
        Sample(f"v{k // per_video}", f"f{k}", rng.standard_normal(dim), R[k]) for k in range(n_videos * per_video)
    ]
    pred = ToyPredictor("relative", rng.standard_normal((6, dim)), rng.standard_normal(6))
    pairs = make_pairs(stack_samples(samples)[2], rng, cap_factor=2)
    return pred, samples, pairs


def absolute_fd_point(rng, dim=4):
    from acciturn.learning import Sample, ToyPredictor
    from acciturn.rotations import euler_to_rotation
    from acciturn.targets import encode_pose

    pose = (rng.uniform(-np.pi, np.pi), rng.uniform(-1.4, 1.4), rng.uniform(-np.pi, np.pi))
    n = 120
    pred = ToyPredictor("absolute", rng.standard_normal((n, dim)), rng.standard_normal(n))
    sample = Sample("v", "f", rng.standard_normal(dim), euler_to_rotation(pose))
    return pred, sample, encode_pose(pose)
