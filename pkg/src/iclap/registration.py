"""Iterative closest point loops: classic 3D ICP and 4D labeled-point matching.

Both run the same loop: match every transformed source point to its nearest
target point through a k-d tree, re-solve the closed-form rigid alignment on
the matched pairs, repeat until one of three termination conditions fires.
The error metric is the sum of squared matched-pair distances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, EmptyCloud
from .geometry import KdIndex, RigidTransform, as_cloud, optimal_rigid_alignment

TERMINATION_TOLERANCE = "tolerance"
TERMINATION_MAX_ITERATIONS = "max_iterations"
TERMINATION_STALLED = "stalled"


@dataclass(frozen=True)
class RegistrationConfig:
    max_iterations: int = 50
    error_tolerance: float = 1e-6
    relative_change_threshold: float = 1e-4
    # scale applied to the label axis before 4D matching; 1.0 keeps the raw
    # integer label as the fourth coordinate
    label_scale: float = 1.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be positive")
        if self.error_tolerance <= 0 or self.relative_change_threshold <= 0:
            raise ConfigError("tolerances must be positive")
        if self.label_scale <= 0:
            raise ConfigError("label_scale must be positive")


@dataclass(frozen=True)
class RegistrationResult:
    final_error: float
    transform: RigidTransform
    iterations_used: int
    termination_reason: str
    error_history: tuple = field(default=())


def _scale_labels(cloud: np.ndarray, scale: float) -> np.ndarray:
    if cloud.shape[1] == 4 and scale != 1.0:
        scaled = cloud.copy()
        scaled[:, 3] *= scale
        return scaled
    return cloud


def register(source, target, config: RegistrationConfig | None = None,
             target_index: KdIndex | None = None) -> RegistrationResult:
    """Register source onto target, returning the cumulative rigid transform.

    Initialization is the identity rotation with the source centroid moved
    onto the target centroid. Matching is one-directional (every source
    point is matched; target points may be reused). A prebuilt ``target_index``
    may be passed to amortize k-d tree construction across calls; it must
    index ``target`` with label scaling already applied.
    """
    if config is None:
        config = RegistrationConfig()
    src = as_cloud(source)
    tgt = as_cloud(target, dim=src.shape[1])
    d = src.shape[1]
    if src.shape[0] == 0 or tgt.shape[0] == 0:
        raise EmptyCloud("registration requires non-empty clouds")
    src = _scale_labels(src, config.label_scale)
    if target_index is None:
        target_index = KdIndex(_scale_labels(tgt, config.label_scale))
    elif target_index.dim != d:
        raise DimensionError("target_index dimension does not match the clouds")
    tgt_pts = target_index.points

    R = np.eye(d)
    t = tgt_pts.mean(axis=0) - src.mean(axis=0)

    history = []
    reason = TERMINATION_MAX_ITERATIONS
    iterations = 0
    err = np.inf
    for iterations in range(1, config.max_iterations + 1):
        transformed = src @ R.T + t
        idx, dist = target_index.nearest_many(transformed)
        err = float(np.dot(dist, dist))
        history.append(err)
        if err < config.error_tolerance:
            reason = TERMINATION_TOLERANCE
            break
        if len(history) > 1:
            prev = history[-2]
            if prev > 0 and abs(prev - err) <= config.relative_change_threshold * prev:
                reason = TERMINATION_STALLED
                break
        tf = optimal_rigid_alignment(src, tgt_pts[idx])
        R, t = tf.rotation, tf.translation

    transform = RigidTransform(R, t)
    if reason == TERMINATION_MAX_ITERATIONS:
        # the loop ended on an alignment step; report the error under the
        # final transform
        transformed = src @ R.T + t
        _, dist = target_index.nearest_many(transformed)
        err = float(np.dot(dist, dist))
    return RegistrationResult(
        final_error=err,
        transform=transform,
        iterations_used=iterations,
        termination_reason=reason,
        error_history=tuple(history),
    )


def residual_error(source, target, tf: RigidTransform,
                   target_index: KdIndex | None = None) -> float:
    """Sum over source points of squared distance to the nearest target point."""
    src = as_cloud(source)
    tgt = as_cloud(target, dim=src.shape[1])
    if src.shape[0] == 0 or tgt.shape[0] == 0:
        raise EmptyCloud("residual_error requires non-empty clouds")
    if target_index is None:
        target_index = KdIndex(tgt)
    transformed = src @ tf.rotation.T + tf.translation
    _, dist = target_index.nearest_many(transformed)
    return float(np.dot(dist, dist))
