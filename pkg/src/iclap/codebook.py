"""Tactile feature extraction, k-means dictionary learning and word histograms.

Word labels are 1-based cluster indices, matching the convention that a
labeled 4D point stores the raw label value as its fourth coordinate.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, EmptyCloud, FormatError, InsufficientData

FRAME_SHAPE = (14, 6)

CODEBOOK_MAGIC = "ICLAP-CB-1"

KMEANS_MAX_ITER = 300


def _extract_raw_patch(pressures: np.ndarray) -> np.ndarray:
    flat = pressures.reshape(-1).astype(np.float64)
    peak = flat.max()
    if peak > 0:
        flat = flat / peak
    return flat


def _extract_moments(pressures: np.ndarray) -> np.ndarray:
    """Centroid plus mass-normalized central moments of the pressure grid.

    Descriptor layout: (xbar, ybar, mu20, mu11, mu02, mu30, mu03) where x is
    the row axis and y the column axis, in cell units. An all-zero frame maps
    to the zero descriptor.
    """
    p = pressures.astype(np.float64)
    m00 = p.sum()
    if m00 == 0:
        return np.zeros(7)
    rows = np.arange(p.shape[0], dtype=np.float64)[:, None]
    cols = np.arange(p.shape[1], dtype=np.float64)[None, :]
    xbar = (p * rows).sum() / m00
    ybar = (p * cols).sum() / m00
    dx = rows - xbar
    dy = cols - ybar

    def mu(a, b):
        return (p * dx**a * dy**b).sum() / m00

    return np.array([xbar, ybar, mu(2, 0), mu(1, 1), mu(0, 2), mu(3, 0), mu(0, 3)])


EXTRACTORS = {
    "raw_patch": (_extract_raw_patch, 84),
    "moments": (_extract_moments, 7),
}


def extractor_dim(extractor_id: str) -> int:
    try:
        return EXTRACTORS[extractor_id][1]
    except KeyError:
        raise ConfigError(
            f"unknown extractor {extractor_id!r}; valid: {sorted(EXTRACTORS)}"
        ) from None


def extract_features(pressures, extractor_id: str) -> np.ndarray:
    """Descriptor for one 14x6 pressure grid."""
    if extractor_id not in EXTRACTORS:
        raise ConfigError(f"unknown extractor {extractor_id!r}; valid: {sorted(EXTRACTORS)}")
    p = np.asarray(pressures, dtype=np.float64)
    if p.shape != FRAME_SHAPE:
        raise DimensionError(f"expected {FRAME_SHAPE} pressure grid, got {p.shape}")
    if not np.isfinite(p).all() or (p < 0).any():
        raise DimensionError("pressures must be finite and non-negative")
    fn, _ = EXTRACTORS[extractor_id]
    return fn(p)


@dataclass(frozen=True)
class Codebook:
    """k cluster centers over feature descriptors."""

    centers: np.ndarray  # (k, d)
    extractor_id: str

    def __post_init__(self):
        centers = np.array(self.centers, dtype=np.float64)
        if centers.ndim != 2:
            raise DimensionError(f"centers must be (k, d), got shape {centers.shape}")
        if not np.isfinite(centers).all():
            raise DimensionError("centers contain non-finite values")
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def _descriptor_matrix(descriptors) -> np.ndarray:
    X = np.asarray(descriptors, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    return X


def _assign(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """0-based nearest-center index per row; ties go to the smallest index."""
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def fit_codebook(descriptors, k: int, seed, extractor_id: str = "raw_patch",
                 max_iter: int = KMEANS_MAX_ITER) -> Codebook:
    """Seeded k-means++ / Lloyd clustering of descriptors into k centers.

    Deterministic given (descriptors, k, seed). Converges when assignments
    stop changing or after 300 iterations. Empty clusters are reseeded to
    the descriptor farthest from that cluster's current center.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    X = _descriptor_matrix(descriptors)
    n = X.shape[0]
    if n < k:
        raise InsufficientData(f"need at least k={k} descriptors, got {n}")
    if extractor_id not in EXTRACTORS:
        raise ConfigError(f"unknown extractor {extractor_id!r}; valid: {sorted(EXTRACTORS)}")

    rng = np.random.default_rng(seed)

    # k-means++ seeding
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    if k > 1:
        d2 = ((X - centers[0]) ** 2).sum(axis=1)
        for j in range(1, k):
            total = d2.sum()
            if total > 0:
                probs = d2 / total
                centers[j] = X[rng.choice(n, p=probs)]
            else:
                centers[j] = X[rng.integers(n)]
            d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))

    labels = _assign(X, centers)
    for _ in range(max_iter):
        for j in range(k):
            mask = labels == j
            if mask.any():
                centers[j] = X[mask].mean(axis=0)
            else:
                far = np.argmax(((X - centers[j]) ** 2).sum(axis=1))
                centers[j] = X[far]
        new_labels = _assign(X, centers)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    return Codebook(centers=centers, extractor_id=extractor_id)


def assign_label(codebook: Codebook, descriptor) -> int:
    """1-based word label of the nearest center in Euclidean distance."""
    return int(assign_labels(codebook, _descriptor_matrix(descriptor))[0])


def assign_labels(codebook: Codebook, descriptors) -> np.ndarray:
    """Vectorized assign_label over a (n, d) descriptor matrix."""
    X = _descriptor_matrix(descriptors)
    if X.shape[1] != codebook.dim:
        raise DimensionError(
            f"descriptor length {X.shape[1]} does not match codebook dim {codebook.dim}"
        )
    return _assign(X, codebook.centers) + 1


@dataclass(frozen=True)
class WordHistogram:
    """Normalized word-occurrence frequencies plus the raw counts."""

    bins: np.ndarray
    raw_counts: np.ndarray

    def __post_init__(self):
        bins = np.array(self.bins, dtype=np.float64)
        counts = np.array(self.raw_counts, dtype=np.int64)
        if bins.shape != counts.shape or bins.ndim != 1:
            raise DimensionError("bins and raw_counts must be 1D arrays of equal length")
        if (counts < 0).any() or (bins < 0).any():
            raise DimensionError("histogram entries must be non-negative")
        if counts.sum() > 0 and abs(bins.sum() - 1.0) > 1e-9:
            raise DimensionError("bins must sum to 1")
        bins.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "raw_counts", counts)

    @property
    def k(self) -> int:
        return self.bins.shape[0]


def build_histogram(codebook: Codebook, descriptors) -> WordHistogram:
    """Histogram of word occurrences over a non-empty descriptor set."""
    X = _descriptor_matrix(descriptors)
    if X.shape[0] == 0:
        raise EmptyCloud("cannot build a histogram from zero descriptors")
    labels = assign_labels(codebook, X)
    counts = np.bincount(labels - 1, minlength=codebook.k).astype(np.int64)
    return WordHistogram(bins=counts / counts.sum(), raw_counts=counts)


def histogram_from_labels(labels, k: int) -> WordHistogram:
    """Histogram from precomputed 1-based labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise EmptyCloud("cannot build a histogram from zero labels")
    counts = np.bincount(labels - 1, minlength=k).astype(np.int64)
    return WordHistogram(bins=counts / counts.sum(), raw_counts=counts)


def histogram_intersection_distance(a: WordHistogram, b: WordHistogram) -> float:
    """1 - sum_i min(a_i, b_i) over normalized bins; symmetric, in [0, 1]."""
    if a.k != b.k:
        raise DimensionError(f"histogram size mismatch: {a.k} vs {b.k}")
    return float(1.0 - np.minimum(a.bins, b.bins).sum())


def save_codebook(codebook: Codebook, path) -> None:
    """Write a codebook as a versioned text file (magic header ICLAP-CB-1)."""
    lines = [CODEBOOK_MAGIC, codebook.extractor_id, f"{codebook.k} {codebook.dim}"]
    for row in codebook.centers:
        lines.append(" ".join(repr(float(v)) for v in row))
    payload = "\n".join(lines) + "\n"
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_codebook(path) -> Codebook:
    """Inverse of save_codebook; bitwise round-trip of the centers."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read codebook {path}: {exc}") from exc
    if not lines or lines[0] != CODEBOOK_MAGIC:
        raise FormatError(f"{path}: missing {CODEBOOK_MAGIC} header")
    if len(lines) < 3:
        raise FormatError(f"{path}: truncated codebook file")
    extractor_id = lines[1]
    try:
        k, dim = (int(v) for v in lines[2].split())
    except ValueError as exc:
        raise FormatError(f"{path}: bad size line {lines[2]!r}") from exc
    rows = [ln for ln in lines[3:] if ln.strip()]
    if len(rows) != k:
        raise FormatError(f"{path}: expected {k} center rows, found {len(rows)}")
    try:
        centers = np.array([[float(v) for v in row.split()] for row in rows])
    except ValueError as exc:
        raise FormatError(f"{path}: bad center value: {exc}") from exc
    if centers.shape != (k, dim):
        raise FormatError(f"{path}: center block shape {centers.shape} != ({k}, {dim})")
    return Codebook(centers=centers, extractor_id=extractor_id)
