import numpy as np
import pytest

from iclap.codebook import Codebook, WordHistogram, assign_labels, histogram_from_labels
from iclap.errors import ClassificationError, DimensionError, EmptyCloud
from iclap.recognition import (
    DistanceVector,
    ModelLibrary,
    ObjectModel,
    classify_bow,
    classify_icp,
    classify_iclap,
    decide,
    l2_normalize,
    load_library,
    save_library,
)


def make_model(object_id, positions, labels, k):
    positions = np.asarray(positions, dtype=float)
    labels = np.asarray(labels)
    labeled = np.hstack([positions, labels[:, None].astype(float)])
    return ObjectModel(
        object_id=object_id,
        spatial_cloud=positions,
        labeled_cloud=labeled,
        histogram=histogram_from_labels(labels, k),
    )


def random_library(n_models, seed, k=5, n_points=25):
    rng = np.random.default_rng(seed)
    models = []
    for i in range(n_models):
        positions = rng.uniform(-10, 10, size=(n_points, 3)) + 30 * i
        labels = rng.integers(1, k + 1, size=n_points)
        models.append(make_model(str(i + 1), positions, labels, k))
    codebook = Codebook(centers=rng.normal(size=(k, 7)), extractor_id="moments")
    return ModelLibrary(models=models, codebook=codebook)


class TestDistanceVector:
    def test_l2_example(self):
        v = DistanceVector("ICP", ("a", "b"), [3.0, 4.0])
        np.testing.assert_allclose(v.distances, [0.6, 0.8])

    def test_unit_norm(self):
        rng = np.random.default_rng(0)
        v = DistanceVector("BoW", tuple("abcde"), rng.uniform(0.1, 5, size=5))
        assert abs(np.linalg.norm(v.distances) - 1.0) < 1e-9

    def test_all_zero_is_error(self):
        with pytest.raises(ClassificationError):
            DistanceVector("ICP", ("a", "b"), [0.0, 0.0])

    def test_normalization_preserves_ranking(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            raw = rng.uniform(0.01, 10, size=rng.integers(2, 12))
            normalized = l2_normalize(raw)
            np.testing.assert_array_equal(np.argsort(raw), np.argsort(normalized))


class TestDecide:
    def test_argmin(self):
        assert decide(DistanceVector("ICP", ("A", "B"), [0.1, 0.9])) == "A"

    def test_tie_breaks_lexicographically(self):
        assert decide(DistanceVector("ICP", ("B", "A"), [0.5, 0.5])) == "A"

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            ids = tuple(f"m{i}" for i in range(rng.integers(2, 10)))
            d = rng.uniform(0.01, 1, size=len(ids))
            v = DistanceVector("BoW", ids, d)
            assert decide(v) == ids[int(np.argmin(v.distances))]


class TestClassifyIcp:
    def test_exact_copy_is_strict_minimum(self):
        library = random_library(8, seed=3)
        test = library.models[6].spatial_cloud
        v = classify_icp(test, library)
        d = v.distances
        assert d[6] < d[np.arange(len(d)) != 6].min()
        assert decide(v) == "7"

    def test_argmin_equals_unnormalized(self):
        library = random_library(20, seed=4)
        rng = np.random.default_rng(5)
        test = rng.uniform(-10, 10, size=(15, 3)) + 30 * 11
        from iclap.registration import register
        raw = [register(test, m.spatial_cloud).final_error for m in library.models]
        v = classify_icp(test, library)
        assert int(np.argmin(v.distances)) == int(np.argmin(raw))

    def test_empty_library(self):
        library = random_library(2, seed=6)
        empty = ModelLibrary(models=[], codebook=library.codebook)
        with pytest.raises(EmptyCloud):
            classify_icp(np.zeros((5, 3)), empty)


class TestClassifyBow:
    def h(self, bins):
        bins = np.asarray(bins, dtype=float)
        return WordHistogram(bins=bins, raw_counts=(bins * 100).round().astype(int))

    def test_matching_histogram_minimal(self):
        library = random_library(5, seed=7)
        test = library.models[3].histogram
        v = classify_bow(test, library)
        assert decide(v) == "4"

    def test_hand_built_three_models(self):
        k = 3
        hists = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.25, 0.25]]
        models = []
        rng = np.random.default_rng(8)
        for i, bins in enumerate(hists):
            positions = rng.uniform(0, 10, size=(4, 3))
            # labels only used for the cloud; override histogram directly
            m = make_model(str(i + 1), positions, np.ones(4, dtype=int), k)
            object.__setattr__(m, "histogram", self.h(bins))
            models.append(m)
        library = ModelLibrary(models=models, codebook=Codebook(
            centers=rng.normal(size=(k, 7)), extractor_id="moments"))
        test = self.h([0.5, 0.5, 0.0])
        v = classify_bow(test, library)
        expected = np.array([0.5, 0.5, 0.25])  # hand-evaluated intersection distances
        np.testing.assert_allclose(v.distances, expected / np.linalg.norm(expected))

    def test_k_mismatch(self):
        library = random_library(3, seed=9)
        with pytest.raises(DimensionError):
            classify_bow(self.h([0.5, 0.5]), library)


class TestClassifyIclap:
    def test_exact_copy_minimal(self):
        library = random_library(6, seed=10)
        v = classify_iclap(library.models[2].labeled_cloud, library)
        assert decide(v) == "3"

    def test_labels_discriminate_shared_spatial_clouds(self):
        # two models share the spatial cloud and differ only in labels
        rng = np.random.default_rng(11)
        k = 6
        positions = rng.uniform(-10, 10, size=(30, 3))
        labels_a = rng.integers(1, k + 1, size=30)
        labels_b = rng.integers(1, k + 1, size=30)
        while np.mean(labels_a != labels_b) < 0.5:
            labels_b = rng.integers(1, k + 1, size=30)
        models = [make_model("A", positions, labels_a, k),
                  make_model("B", positions, labels_b, k)]
        library = ModelLibrary(models=models, codebook=Codebook(
            centers=rng.normal(size=(k, 7)), extractor_id="moments"))
        jittered = positions + rng.normal(0, 1e-3, size=positions.shape)
        test = np.hstack([jittered, labels_a[:, None].astype(float)])
        v = classify_iclap(test, library)
        assert v.distances[0] < v.distances[1]
        # the spatial-only pipeline cannot separate them
        v3 = classify_icp(jittered, library)
        assert v3.distances[0] == v3.distances[1]

    def test_constant_labels_match_icp_ranking(self):
        rng = np.random.default_rng(12)
        k = 4
        models = []
        for i in range(5):
            positions = rng.uniform(-10, 10, size=(20, 3)) + 25 * i
            models.append(make_model(str(i + 1), positions, np.full(20, 2), k))
        library = ModelLibrary(models=models, codebook=Codebook(
            centers=rng.normal(size=(k, 7)), extractor_id="moments"))
        test3 = rng.uniform(-10, 10, size=(12, 3)) + 25 * 3
        test4 = np.hstack([test3, np.full((12, 1), 2.0)])
        rank3 = np.argsort(classify_icp(test3, library).distances)
        rank4 = np.argsort(classify_iclap(test4, library).distances)
        np.testing.assert_array_equal(rank3, rank4)


class TestSelfClassification:
    def test_all_methods_recall_own_model(self):
        library = random_library(6, seed=13)
        for m in library.models:
            assert decide(classify_icp(m.spatial_cloud, library)) == m.object_id
            assert decide(classify_iclap(m.labeled_cloud, library)) == m.object_id
            assert decide(classify_bow(m.histogram, library)) == m.object_id


class TestLibrarySerialization:
    def test_roundtrip(self, tmp_path):
        library = random_library(4, seed=14)
        path = tmp_path / "library"
        save_library(library, path)
        loaded = load_library(path)
        assert loaded.object_ids == library.object_ids
        assert loaded.codebook.extractor_id == library.codebook.extractor_id
        for a, b in zip(loaded.models, library.models):
            np.testing.assert_array_equal(a.labeled_cloud, b.labeled_cloud)
            np.testing.assert_array_equal(a.spatial_cloud, b.spatial_cloud)
            np.testing.assert_array_equal(a.histogram.bins, b.histogram.bins)
            np.testing.assert_array_equal(a.histogram.raw_counts, b.histogram.raw_counts)

    def test_duplicate_ids_rejected(self):
        library = random_library(2, seed=15)
        models = [library.models[0], library.models[0]]
        with pytest.raises(DimensionError):
            ModelLibrary(models=models, codebook=library.codebook)

    def test_mismatched_clouds_rejected(self):
        rng = np.random.default_rng(16)
        positions = rng.uniform(0, 1, size=(5, 3))
        labeled = np.hstack([positions + 1.0, np.ones((5, 1))])
        with pytest.raises(DimensionError):
            ObjectModel(object_id="x", spatial_cloud=positions, labeled_cloud=labeled,
                        histogram=histogram_from_labels(np.ones(5, dtype=int), 3))
