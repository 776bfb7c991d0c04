"""Leave-one-out cross-validation, accuracy-vs-touch curves and weight sweeps.

Folds hold out one exploration trial per object simultaneously; the codebook
and the model library are rebuilt per fold from training trials only, so no
test frame ever enters dictionary learning. For each touch count t the test
trace is truncated to its first t frames before classification.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .codebook import extract_features, fit_codebook, assign_labels, histogram_from_labels
from .errors import ClassificationError, ConfigError, InsufficientData
from .fusion import FusionSpec, fuse
from .recognition import (
    BASE_METHODS,
    METHOD_BOW,
    METHOD_ICLAP,
    METHOD_ICP,
    DistanceVector,
    ModelLibrary,
    ObjectModel,
    classify_bow,
    classify_icp,
    classify_iclap,
    decide,
)
from .registration import RegistrationConfig


@dataclass(frozen=True)
class EvalReport:
    """Accuracy per touch count for one method, plus per-fold confusion counts.

    ``confusion`` maps (fold, touch_count) to a dict {(true_id, predicted_id):
    count}.
    """

    method: str
    touch_counts: tuple
    accuracies: tuple
    confusion: dict

    def accuracy_at(self, touch_count: int) -> float:
        try:
            return self.accuracies[self.touch_counts.index(touch_count)]
        except ValueError:
            raise ConfigError(f"touch count {touch_count} was not evaluated") from None


@dataclass(frozen=True)
class TestCase:
    """Context handed to callable classifiers (used for oracle baselines)."""

    fold: int
    true_id: str
    touch_count: int
    model_ids: tuple
    vectors: dict


def method_name(spec) -> str:
    if isinstance(spec, str):
        return spec
    if isinstance(spec, FusionSpec):
        return spec.name
    return getattr(spec, "__name__", repr(spec))


def _base_methods_needed(specs) -> set:
    needed = set()
    for spec in specs:
        if isinstance(spec, str):
            if spec not in BASE_METHODS:
                raise ConfigError(f"unknown method {spec!r}; valid: {list(BASE_METHODS)}")
            needed.add(spec)
        elif isinstance(spec, FusionSpec):
            needed.update(spec.inputs)
    return needed


def group_by_object(traces) -> dict:
    grouped = {}
    for trace in traces:
        grouped.setdefault(trace.object_id, {})[trace.trial_index] = trace
    return grouped


def _uniform_vector(method: str, model_ids) -> DistanceVector:
    return DistanceVector(method, model_ids, np.ones(len(model_ids)))


def run_loo(traces, methods, touch_counts, k: int = 50, extractor_id: str = "moments",
            config: RegistrationConfig | None = None, seed: int = 0,
            jobs: int = 1) -> dict:
    """Leave-one-out evaluation of several methods over one pass of the data.

    ``methods`` is a list of base method names ("ICP", "BoW", "iCLAP"),
    FusionSpec instances, or callables TestCase -> predicted object_id.
    Returns {method name: EvalReport}. Base distance vectors are computed
    once per (fold, test object, touch count) and shared across all fusion
    specs, so sweeping many weight combinations costs little extra.

    A classifier that yields an all-zero distance vector (possible for
    degenerate single-point registrations) is replaced by a uniform vector,
    which resolves to the smallest object_id downstream.
    """
    methods = list(methods)
    if not methods:
        raise ConfigError("no methods requested")
    touch_counts = tuple(int(t) for t in touch_counts)
    if not touch_counts or any(t < 1 for t in touch_counts):
        raise ConfigError("touch counts must be positive")
    if config is None:
        config = RegistrationConfig()

    grouped = group_by_object(traces)
    if not grouped:
        raise InsufficientData("no traces supplied")
    trial_sets = {oid: frozenset(trials) for oid, trials in grouped.items()}
    common = frozenset.intersection(*trial_sets.values())
    if len(common) < 2:
        raise InsufficientData("leave-one-out needs at least 2 trials per object")
    folds = sorted(common)
    object_ids = sorted(grouped)
    min_frames = min(len(grouped[oid][f].frames) for oid in object_ids for f in folds)
    if max(touch_counts) > min_frames:
        raise ConfigError(
            f"touch count {max(touch_counts)} exceeds shortest trace ({min_frames} frames)"
        )

    needed = _base_methods_needed(methods)
    names = [method_name(m) for m in methods]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate method names requested")

    total_per_t = len(folds) * len(object_ids)

    def run_fold(fold):
        fold_correct = {name: {t: 0 for t in touch_counts} for name in names}
        fold_confusion = {name: {} for name in names}
        fold_seed = int(np.random.SeedSequence([int(seed), int(fold)]).generate_state(1)[0])
        library = _build_library(grouped, object_ids, fold, k, extractor_id, fold_seed)

        for oid in object_ids:
            test_trace = grouped[oid][fold]
            positions = test_trace.positions()
            descriptors = np.array([
                extract_features(f.pressures, extractor_id) for f in test_trace.frames
            ])
            labels = assign_labels(library.codebook, descriptors)
            labeled = np.hstack([positions, labels[:, None].astype(np.float64)])

            for t in touch_counts:
                vectors = {}
                if METHOD_ICP in needed:
                    vectors[METHOD_ICP] = _safe(
                        classify_icp, positions[:t], library, config,
                        method=METHOD_ICP, model_ids=library.object_ids)
                if METHOD_BOW in needed:
                    hist = histogram_from_labels(labels[:t], library.codebook.k)
                    vectors[METHOD_BOW] = _safe(
                        classify_bow, hist, library,
                        method=METHOD_BOW, model_ids=library.object_ids)
                if METHOD_ICLAP in needed:
                    vectors[METHOD_ICLAP] = _safe(
                        classify_iclap, labeled[:t], library, config,
                        method=METHOD_ICLAP, model_ids=library.object_ids)

                case = TestCase(fold=fold, true_id=oid, touch_count=t,
                                model_ids=tuple(library.object_ids), vectors=vectors)
                for spec, name in zip(methods, names):
                    predicted = _predict(spec, vectors, case)
                    if predicted == oid:
                        fold_correct[name][t] += 1
                    cell = fold_confusion[name].setdefault((fold, t), {})
                    cell[(oid, predicted)] = cell.get((oid, predicted), 0) + 1
        return fold_correct, fold_confusion

    # folds are independent jobs; results are merged in fold order so the
    # output never depends on completion order
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fold_results = list(pool.map(run_fold, folds))
    else:
        fold_results = [run_fold(fold) for fold in folds]

    correct = {name: {t: 0 for t in touch_counts} for name in names}
    confusion = {name: {} for name in names}
    for fold_correct, fold_confusion in fold_results:
        for name in names:
            for t in touch_counts:
                correct[name][t] += fold_correct[name][t]
            confusion[name].update(fold_confusion[name])

    reports = {}
    for spec, name in zip(methods, names):
        accuracies = tuple(correct[name][t] / total_per_t for t in touch_counts)
        reports[name] = EvalReport(method=name, touch_counts=touch_counts,
                                   accuracies=accuracies, confusion=confusion[name])
    return reports


def _safe(classifier, *args, method: str, model_ids) -> DistanceVector:
    try:
        return classifier(*args)
    except ClassificationError:
        return _uniform_vector(method, model_ids)


def _predict(spec, vectors, case: TestCase):
    if callable(spec) and not isinstance(spec, (str, FusionSpec)):
        return spec(case)
    if isinstance(spec, str):
        return decide(vectors[spec])
    try:
        return decide(fuse(spec, vectors))
    except ClassificationError:
        # all-zero product: fall back to the smallest object_id
        return min(case.model_ids)


def _build_library(grouped, object_ids, fold, k, extractor_id, fold_seed) -> ModelLibrary:
    train_descriptors = []
    per_object = {}
    for oid in object_ids:
        frames = []
        for trial, trace in sorted(grouped[oid].items()):
            if trial == fold:
                continue
            frames.extend(trace.frames)
        desc = np.array([extract_features(f.pressures, extractor_id) for f in frames])
        positions = np.array([f.position for f in frames])
        per_object[oid] = (desc, positions)
        train_descriptors.append(desc)

    codebook = fit_codebook(np.vstack(train_descriptors), k, fold_seed,
                            extractor_id=extractor_id)
    models = []
    for oid in object_ids:
        desc, positions = per_object[oid]
        labels = assign_labels(codebook, desc)
        labeled = np.hstack([positions, labels[:, None].astype(np.float64)])
        models.append(ObjectModel(
            object_id=oid,
            spatial_cloud=positions,
            labeled_cloud=labeled,
            histogram=histogram_from_labels(labels, codebook.k),
        ))
    return ModelLibrary(models=models, codebook=codebook)


def leave_one_out(traces, method, touch_counts, k: int = 50,
                  extractor_id: str = "moments",
                  config: RegistrationConfig | None = None, seed: int = 0,
                  jobs: int = 1) -> EvalReport:
    """Single-method leave-one-out evaluation; see run_loo."""
    name = method_name(method)
    return run_loo(traces, [method], touch_counts, k=k, extractor_id=extractor_id,
                   config=config, seed=seed, jobs=jobs)[name]


def weight_grid(n_inputs: int, grid_step: float) -> list:
    """All weight tuples on the step lattice with every weight >= grid_step.

    Two inputs at step 0.1 give the 9 points 0.1..0.9; three inputs at step
    0.1 give the 36 simplex points with each weight in {0.1..0.8}.
    """
    if not 0 < grid_step < 1:
        raise ConfigError(f"grid_step must be in (0, 1), got {grid_step}")
    n = round(1.0 / grid_step)
    if abs(n * grid_step - 1.0) > 1e-9:
        raise ConfigError(f"grid_step {grid_step} must evenly divide 1")
    if n < n_inputs:
        raise ConfigError(f"grid_step {grid_step} leaves no interior grid for {n_inputs} inputs")

    grids = []

    def extend(prefix, remaining):
        slots = n_inputs - len(prefix) - 1
        if slots == 0:
            grids.append(prefix + (remaining,))
            return
        for i in range(1, remaining - slots + 1):
            extend(prefix + (i,), remaining - i)

    extend((), n)
    if not grids:
        raise ConfigError(f"grid_step {grid_step} leaves no interior grid for {n_inputs} inputs")
    out = []
    for ints in grids:
        ws = [i * grid_step for i in ints[:-1]]
        ws.append(1.0 - sum(ws))  # exact unit sum
        out.append(tuple(ws))
    return out


@dataclass(frozen=True)
class SweepResult:
    inputs: tuple
    grid_step: float
    designated_touch: int
    rows: tuple  # of (weights, EvalReport)
    best_weights: tuple
    best_accuracy: float


def weight_sweep(traces, inputs, grid_step: float = 0.1, touch_counts=(15,),
                 designated_touch: int | None = None, k: int = 50,
                 extractor_id: str = "moments",
                 config: RegistrationConfig | None = None, seed: int = 0,
                 jobs: int = 1) -> SweepResult:
    """Exhaustive weighted-sum sweep over the weight lattice for ``inputs``.

    Reports the best weights by accuracy at the designated touch count
    (default 15 when evaluated, otherwise the largest touch count); ties go
    to the earliest grid point.
    """
    inputs = tuple(inputs)
    touch_counts = tuple(int(t) for t in touch_counts)
    if designated_touch is None:
        designated_touch = 15 if 15 in touch_counts else max(touch_counts)
    if designated_touch not in touch_counts:
        raise ConfigError(
            f"designated touch count {designated_touch} not in evaluated counts {touch_counts}"
        )
    grids = weight_grid(len(inputs), grid_step)
    specs = [FusionSpec(mode="weighted_sum", inputs=inputs, weights=w) for w in grids]
    reports = run_loo(traces, specs, touch_counts, k=k, extractor_id=extractor_id,
                      config=config, seed=seed, jobs=jobs)

    rows = tuple((w, reports[spec.name]) for w, spec in zip(grids, specs))
    best_weights, best_acc = None, -1.0
    for w, report in rows:
        acc = report.accuracy_at(designated_touch)
        if acc > best_acc:
            best_weights, best_acc = w, acc
    return SweepResult(inputs=inputs, grid_step=grid_step,
                       designated_touch=designated_touch, rows=rows,
                       best_weights=best_weights, best_accuracy=best_acc)
