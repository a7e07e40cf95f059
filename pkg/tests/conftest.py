import numpy as np
import pytest
from hypothesis import strategies as st
from scipy.linalg import expm

ACCEPTANCE_LINES = []


def rodrigues_oracle(axis, angle):
    """Rotation by matrix exponential of the skew matrix; independent of the library's Rodrigues."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return expm(angle * K)


def trace_angle(R, S):
    """Arccos-of-trace geodesic distance, used as an independent reference."""
    c = (np.trace(np.swapaxes(R, -1, -2) @ S, axis1=-2, axis2=-1) - 1) / 2
    return np.arccos(np.clip(c, -1, 1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def rotations(draw):
    q = draw(
        st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4).filter(
            lambda v: np.linalg.norm(v) > 1e-3
        )
    )
    from acciturn.rotations import quaternion_to_rotation

    return quaternion_to_rotation(np.array(q))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def brute_force_min(annotated, predicted, side, samples):
    """Exhaustive minimum of the mean arccos-trace error over a fixed set of rotations.

    Every D with d(D, C0) > 2 err(C0) has err(D) > err(C0) by the triangle
    inequality, so only samples inside that ball are scored; the result equals
    the minimum over all of ``samples``.
    """
    At = np.swapaxes(annotated, -1, -2)
    C = predicted @ At if side == "left" else At @ predicted
    # tr(P^T A D) for right side = <A^T P, D>_F; for left tr(P^T D A) = <P A^T, D>_F
    Cf = C.reshape(len(C), 9)
    flat = samples.reshape(len(samples), 9)

    def errors(D):
        c = (Cf @ D.reshape(-1, 9).T - 1) / 2
        return np.arccos(np.clip(c, -1, 1)).mean(axis=0)

    e0 = errors(C[0])[0]
    near = np.arccos(np.clip((flat @ C[0].ravel() - 1) / 2, -1, 1)) <= 2 * e0 + 1e-12
    cand = samples[near]
    if len(cand) == 0:
        return np.inf
    return float(errors(cand).min())
