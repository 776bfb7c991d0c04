"""Reference-model library and the three per-method classification pipelines.

Each classifier produces one non-negative distance per reference model and
L2-normalizes the vector; the decision is the argmin.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .codebook import Codebook, WordHistogram, histogram_intersection_distance, load_codebook, save_codebook
from .errors import ClassificationError, DimensionError, EmptyCloud, FormatError
from .geometry import KdIndex, as_cloud
from .registration import RegistrationConfig, register

LIBRARY_MAGIC = "ICLAP-ML-1"

METHOD_ICP = "ICP"
METHOD_BOW = "BoW"
METHOD_ICLAP = "iCLAP"
BASE_METHODS = (METHOD_ICP, METHOD_BOW, METHOD_ICLAP)


@dataclass(frozen=True)
class ObjectModel:
    """One reference object: 3D cloud, 4D labeled cloud and word histogram."""

    object_id: str
    spatial_cloud: np.ndarray  # (n, 3)
    labeled_cloud: np.ndarray  # (n, 4)
    histogram: WordHistogram

    def __post_init__(self):
        spatial = as_cloud(self.spatial_cloud, dim=3)
        labeled = as_cloud(self.labeled_cloud, dim=4)
        if spatial.shape[0] != labeled.shape[0]:
            raise DimensionError("spatial and labeled clouds must have equal point counts")
        if spatial.shape[0] and not np.array_equal(spatial, labeled[:, :3]):
            raise DimensionError("labeled cloud spatial coordinates must match the 3D cloud")
        spatial.setflags(write=False)
        labeled.setflags(write=False)
        object.__setattr__(self, "spatial_cloud", spatial)
        object.__setattr__(self, "labeled_cloud", labeled)
        object.__setattr__(self, "object_id", str(self.object_id))


@dataclass
class ModelLibrary:
    """All reference models plus the shared codebook."""

    models: list
    codebook: Codebook
    _spatial_indexes: list = field(default=None, repr=False, compare=False)
    _labeled_indexes: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        ids = [m.object_id for m in self.models]
        if len(set(ids)) != len(ids):
            raise DimensionError("object_ids must be unique")
        for m in self.models:
            if m.histogram.k != self.codebook.k:
                raise DimensionError(
                    f"model {m.object_id} histogram k={m.histogram.k} "
                    f"!= codebook k={self.codebook.k}"
                )
        self._spatial_indexes = None
        self._labeled_indexes = None

    @property
    def object_ids(self) -> list:
        return [m.object_id for m in self.models]

    def spatial_index(self, i: int) -> KdIndex:
        if self._spatial_indexes is None:
            self._spatial_indexes = [None] * len(self.models)
        if self._spatial_indexes[i] is None:
            self._spatial_indexes[i] = KdIndex(self.models[i].spatial_cloud)
        return self._spatial_indexes[i]

    def labeled_index(self, i: int) -> KdIndex:
        if self._labeled_indexes is None:
            self._labeled_indexes = [None] * len(self.models)
        if self._labeled_indexes[i] is None:
            self._labeled_indexes[i] = KdIndex(self.models[i].labeled_cloud)
        return self._labeled_indexes[i]


def l2_normalize(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ClassificationError("all-zero distance vector cannot be normalized")
    return v / norm


@dataclass(frozen=True)
class DistanceVector:
    """L2-normalized per-model distances under one method."""

    method: str
    model_ids: tuple
    distances: np.ndarray

    def __post_init__(self):
        d = l2_normalize(self.distances)
        if (np.asarray(self.distances) < 0).any():
            raise ClassificationError("distances must be non-negative")
        if len(self.model_ids) != d.shape[0]:
            raise DimensionError("one distance per model required")
        d.setflags(write=False)
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "model_ids", tuple(self.model_ids))


def classify_icp(test, library: ModelLibrary,
                 config: RegistrationConfig | None = None) -> DistanceVector:
    """Final 3D registration errors of the test cloud against every model."""
    test = as_cloud(test, dim=3)
    if not library.models:
        raise EmptyCloud("empty model library")
    errors = [
        register(test, m.spatial_cloud, config, target_index=library.spatial_index(i)).final_error
        for i, m in enumerate(library.models)
    ]
    return DistanceVector(METHOD_ICP, library.object_ids, errors)


def classify_iclap(test, library: ModelLibrary,
                   config: RegistrationConfig | None = None) -> DistanceVector:
    """Final 4D labeled registration errors against every model."""
    test = as_cloud(test, dim=4)
    if not library.models:
        raise EmptyCloud("empty model library")
    if config is not None and config.label_scale != 1.0:
        # prebuilt indexes hold unscaled labels; rebuild per call
        errors = [
            register(test, m.labeled_cloud, config).final_error for m in library.models
        ]
    else:
        errors = [
            register(test, m.labeled_cloud, config, target_index=library.labeled_index(i)).final_error
            for i, m in enumerate(library.models)
        ]
    return DistanceVector(METHOD_ICLAP, library.object_ids, errors)


def classify_bow(test_histogram: WordHistogram, library: ModelLibrary) -> DistanceVector:
    """Histogram-intersection distances against every model histogram."""
    if not library.models:
        raise EmptyCloud("empty model library")
    if test_histogram.k != library.codebook.k:
        raise DimensionError(
            f"test histogram k={test_histogram.k} != library k={library.codebook.k}"
        )
    errors = [
        histogram_intersection_distance(test_histogram, m.histogram)
        for m in library.models
    ]
    return DistanceVector(METHOD_BOW, library.object_ids, errors)


def decide(vector: DistanceVector) -> str:
    """object_id at the argmin distance; ties go to the smallest object_id."""
    if len(vector.model_ids) == 0:
        raise EmptyCloud("cannot decide over an empty distance vector")
    best = min(zip(vector.distances, vector.model_ids), key=lambda p: (p[0], p[1]))
    return best[1]


# --- library serialization (directory of CSV model files + manifest) ---


def _atomic_write(path: str, payload: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_library(library: ModelLibrary, path) -> None:
    """Write a model library: manifest.json, codebook.txt, model_<id>.csv."""
    os.makedirs(path, exist_ok=True)
    save_codebook(library.codebook, os.path.join(path, "codebook.txt"))
    model_files = {}
    for m in library.models:
        fname = f"model_{m.object_id}.csv"
        model_files[m.object_id] = fname
        lines = [f"object_id,{m.object_id}"]
        lines.append("histogram," + ",".join(repr(float(v)) for v in m.histogram.bins))
        lines.append("raw_counts," + ",".join(str(int(v)) for v in m.histogram.raw_counts))
        lines.append("x,y,z,mu")
        for row in m.labeled_cloud:
            lines.append(",".join(repr(float(v)) for v in row))
        _atomic_write(os.path.join(path, fname), "\n".join(lines) + "\n")
    manifest = {
        "format": LIBRARY_MAGIC,
        "codebook": "codebook.txt",
        "models": [{"object_id": oid, "file": model_files[oid]} for oid in library.object_ids],
    }
    _atomic_write(os.path.join(path, "manifest.json"),
                  json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_library(path) -> ModelLibrary:
    manifest_path = os.path.join(path, "manifest.json")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read library manifest {manifest_path}: {exc}") from exc
    if manifest.get("format") != LIBRARY_MAGIC:
        raise FormatError(f"{manifest_path}: missing {LIBRARY_MAGIC} format tag")
    codebook = load_codebook(os.path.join(path, manifest["codebook"]))
    models = []
    for entry in manifest["models"]:
        fpath = os.path.join(path, entry["file"])
        models.append(_load_model(fpath, entry["object_id"]))
    return ModelLibrary(models=models, codebook=codebook)


def _load_model(fpath: str, expected_id) -> ObjectModel:
    try:
        with open(fpath, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FormatError(f"cannot read model file {fpath}: {exc}") from exc
    try:
        if rows[0][0] != "object_id" or rows[0][1] != str(expected_id):
            raise FormatError(f"{fpath}: object_id mismatch")
        if rows[1][0] != "histogram" or rows[2][0] != "raw_counts":
            raise FormatError(f"{fpath}: missing histogram rows")
        bins = np.array([float(v) for v in rows[1][1:]])
        counts = np.array([int(v) for v in rows[2][1:]])
        if rows[3] != ["x", "y", "z", "mu"]:
            raise FormatError(f"{fpath}: missing point header row")
        points = np.array([[float(v) for v in row] for row in rows[4:] if row])
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{fpath}: malformed model record: {exc}") from exc
    if points.ndim != 2 or points.shape[1] != 4:
        raise FormatError(f"{fpath}: point rows must have 4 columns")
    return ObjectModel(
        object_id=str(expected_id),
        spatial_cloud=points[:, :3],
        labeled_cloud=points,
        histogram=WordHistogram(bins=bins, raw_counts=counts),
    )
