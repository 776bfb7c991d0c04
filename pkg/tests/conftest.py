import numpy as np
import pytest

from iclap.dataset import generate_object_suite, simulate_exploration


def random_rotation(dim, rng):
    """Random proper rotation (det=+1) via QR of a Gaussian matrix."""
    A = rng.normal(size=(dim, dim))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, -1] *= -1
    return Q


def rotation_about_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle_rotation(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    return np.array([
        [c + x * x * (1 - c), x * y * (1 - c) - z * s, x * z * (1 - c) + y * s],
        [y * x * (1 - c) + z * s, c + y * y * (1 - c), y * z * (1 - c) - x * s],
        [z * x * (1 - c) - y * s, z * y * (1 - c) + x * s, c + z * z * (1 - c)],
    ])


def brute_force_nearest(points, query):
    """Linear-scan oracle with the smallest-ordinal tie break."""
    d = np.linalg.norm(points - query, axis=1)
    best = int(np.argmin(d))  # argmin returns the first (smallest) index on ties
    return best, float(d[best])


@pytest.fixture(scope="session")
def tiny_traces():
    """Small dataset for evaluation tests: 4 objects x 3 trials x 12 frames."""
    traces = []
    for obj in generate_object_suite(4, seed=5):
        traces.extend(simulate_exploration(obj, trials=3, frames_per_trial=12,
                                           noise_sigma=0.05, seed=5))
    return traces
