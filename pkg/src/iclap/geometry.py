"""Dimension-generic geometric primitives.

Point clouds are plain (n, D) float arrays with D in {3, 4}. The fourth
coordinate, when present, carries the tactile word label as a real value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionError, EmptyCloud, NumericalFailure

SUPPORTED_DIMS = (3, 4)
ORTHOGONALITY_TOL = 1e-9


def as_cloud(points, dim: int | None = None) -> np.ndarray:
    """Validate and return a (n, D) float64 cloud.

    Rejects non-finite coordinates and unsupported dimensions. If ``dim``
    is given the cloud must match it.
    """
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, dim if dim is not None else 3)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2D (n, D) array, got shape {arr.shape}")
    d = arr.shape[1]
    if d not in SUPPORTED_DIMS:
        raise DimensionError(f"unsupported dimension {d}; expected one of {SUPPORTED_DIMS}")
    if dim is not None and d != dim:
        raise DimensionError(f"dimension mismatch: expected {dim}, got {d}")
    if arr.size and not np.isfinite(arr).all():
        raise DimensionError("cloud contains non-finite coordinates")
    return arr


def centroid(points) -> np.ndarray:
    """Componentwise arithmetic mean of a non-empty cloud."""
    cloud = as_cloud(points)
    if cloud.shape[0] == 0:
        raise EmptyCloud("centroid of an empty cloud")
    return cloud.mean(axis=0)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RigidTransform:
    """A proper rigid transform x -> R @ x + t in D dimensions."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _frozen(self.rotation)
        t = _frozen(self.translation)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise DimensionError(f"rotation must be square, got shape {R.shape}")
        d = R.shape[0]
        if d not in SUPPORTED_DIMS:
            raise DimensionError(f"unsupported transform dimension {d}")
        if t.shape != (d,):
            raise DimensionError(f"translation shape {t.shape} does not match rotation {R.shape}")
        if not np.allclose(R @ R.T, np.eye(d), atol=ORTHOGONALITY_TOL, rtol=0):
            raise NumericalFailure("rotation is not orthogonal within tolerance")
        if abs(np.linalg.det(R) - 1.0) > ORTHOGONALITY_TOL:
            raise NumericalFailure("rotation is not proper (det != +1)")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @property
    def dim(self) -> int:
        return self.rotation.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "RigidTransform":
        return cls(np.eye(dim), np.zeros(dim))

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def apply(self, cloud) -> np.ndarray:
        return apply_transform(self, cloud)


def apply_transform(tf: RigidTransform, cloud) -> np.ndarray:
    """Apply R @ p + t to every point, preserving order."""
    pts = as_cloud(cloud, dim=tf.dim)
    return pts @ tf.rotation.T + tf.translation


def optimal_rigid_alignment(source, target) -> RigidTransform:
    """Least-squares rigid alignment of matched point pairs.

    Given matched pairs (source[i], target[i]), returns the proper rigid
    transform minimizing sum ||R p_i + t - q_i||^2. Solved in closed form
    from the SVD of the cross-covariance of centered point sets, with the
    sign correction that keeps det(R) = +1 for reflection-prone inputs.
    """
    src = as_cloud(source)
    tgt = as_cloud(target, dim=src.shape[1])
    n = src.shape[0]
    if n == 0 or tgt.shape[0] == 0:
        raise EmptyCloud("alignment requires at least one matched pair")
    if tgt.shape[0] != n:
        raise DimensionError(f"pair count mismatch: {n} source vs {tgt.shape[0]} target")

    c_p = src.mean(axis=0)
    c_q = tgt.mean(axis=0)
    H = (src - c_p).T @ (tgt - c_q)
    try:
        U, _, Vt = np.linalg.svd(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    V = Vt.T
    R = V @ U.T
    if np.linalg.det(R) < 0:
        V = V.copy()
        V[:, -1] = -V[:, -1]
        R = V @ U.T
    t = c_q - R @ c_p
    return RigidTransform(R, t)


class KdIndex:
    """Immutable nearest-neighbor index over a fixed cloud.

    Queries return exactly what a brute-force linear scan would, with ties
    broken by the smallest ordinal (original insertion index).
    """

    def __init__(self, points):
        cloud = as_cloud(points)
        if cloud.shape[0] == 0:
            raise EmptyCloud("cannot index an empty cloud")
        self._points = _frozen(cloud)
        self._tree = cKDTree(self._points)

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    def __len__(self) -> int:
        return self._points.shape[0]

    @property
    def points(self) -> np.ndarray:
        return self._points

    def nearest(self, query) -> tuple[int, float]:
        """Ordinal and Euclidean distance of the nearest indexed point."""
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.dim,):
            raise DimensionError(f"query shape {q.shape} does not match index dim {self.dim}")
        if not np.isfinite(q).all():
            raise DimensionError("query contains non-finite coordinates")
        ordinals, distances = self.nearest_many(q.reshape(1, -1))
        return int(ordinals[0]), float(distances[0])

    def nearest_many(self, queries) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized nearest() over (m, D) queries."""
        q = as_cloud(queries, dim=self.dim)
        if len(self) == 1:
            dist = np.linalg.norm(q - self._points[0], axis=1)
            return np.zeros(len(q), dtype=np.intp), dist
        # k=2 exposes exact distance ties, which are re-resolved by ordinal
        dist2, idx2 = self._tree.query(q, k=2)
        ordinals = idx2[:, 0].astype(np.intp)
        distances = dist2[:, 0]
        tied = dist2[:, 0] == dist2[:, 1]
        if np.any(tied):
            for row in np.nonzero(tied)[0]:
                within = self._tree.query_ball_point(q[row], r=distances[row])
                if within:
                    ordinals[row] = min(within)
        return ordinals, distances
