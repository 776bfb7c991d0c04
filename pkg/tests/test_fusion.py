import numpy as np
import pytest

from iclap.errors import ClassificationError, ConfigError, DimensionError
from iclap.fusion import FusionSpec, fuse
from iclap.recognition import DistanceVector


def dv(method, values, ids=None):
    ids = ids or tuple(f"m{i}" for i in range(len(values)))
    return DistanceVector(method, ids, values)


class TestFusionSpec:
    def test_typical_weight_combinations_constructible(self):
        # representative weight combinations for each fusion family
        FusionSpec("weighted_sum", ("ICP", "BoW"), (0.7, 0.3))
        FusionSpec("weighted_sum", ("ICP", "iCLAP"), (0.1, 0.9))
        FusionSpec("weighted_sum", ("BoW", "iCLAP"), (0.2, 0.8))
        FusionSpec("weighted_sum", ("ICP", "BoW", "iCLAP"), (0.2, 0.2, 0.6))

    def test_rejects_single_input(self):
        with pytest.raises(ConfigError):
            FusionSpec("product", ("ICP",))

    def test_rejects_duplicate_inputs(self):
        with pytest.raises(ConfigError):
            FusionSpec("product", ("ICP", "ICP"))

    def test_rejects_unknown_method(self):
        with pytest.raises(ConfigError):
            FusionSpec("product", ("ICP", "SIFT"))

    def test_rejects_bad_weights(self):
        with pytest.raises(ConfigError):
            FusionSpec("weighted_sum", ("ICP", "BoW"), (0.7, 0.7))
        with pytest.raises(ConfigError):
            FusionSpec("weighted_sum", ("ICP", "BoW"), (-0.5, 1.5))
        with pytest.raises(ConfigError):
            FusionSpec("weighted_sum", ("ICP", "BoW"))

    def test_rejects_weights_on_product(self):
        with pytest.raises(ConfigError):
            FusionSpec("product", ("ICP", "BoW"), (0.5, 0.5))

    def test_rejects_unknown_mode(self):
        with pytest.raises(ConfigError):
            FusionSpec("max", ("ICP", "BoW"))


class TestFuse:
    def test_degenerate_weight_reproduces_input_ranking(self):
        rng = np.random.default_rng(0)
        a = dv("ICP", rng.uniform(0.1, 1, size=6))
        b = dv("BoW", rng.uniform(0.1, 1, size=6))
        spec = FusionSpec("weighted_sum", ("ICP", "BoW"), (1.0, 0.0))
        fused = fuse(spec, {"ICP": a, "BoW": b})
        np.testing.assert_array_equal(np.argsort(fused.distances), np.argsort(a.distances))
        assert int(np.argmin(fused.distances)) == int(np.argmin(a.distances))

    def test_product_symmetry_example(self):
        a = dv("ICP", [0.6, 0.8])
        b = dv("BoW", [0.8, 0.6])
        fused = fuse(FusionSpec("product", ("ICP", "BoW")), {"ICP": a, "BoW": b})
        # componentwise (0.48, 0.48) is uniform after normalization
        np.testing.assert_allclose(fused.distances, [1 / np.sqrt(2)] * 2)

    def test_product_permutation_invariant(self):
        rng = np.random.default_rng(1)
        vecs = {
            "ICP": dv("ICP", rng.uniform(0.1, 1, size=5)),
            "BoW": dv("BoW", rng.uniform(0.1, 1, size=5)),
            "iCLAP": dv("iCLAP", rng.uniform(0.1, 1, size=5)),
        }
        f1 = fuse(FusionSpec("product", ("ICP", "BoW", "iCLAP")), vecs)
        f2 = fuse(FusionSpec("product", ("iCLAP", "ICP", "BoW")), vecs)
        np.testing.assert_allclose(f1.distances, f2.distances, atol=1e-15)

    def test_output_unit_norm(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            vecs = {
                "ICP": dv("ICP", rng.uniform(0.1, 1, size=8)),
                "BoW": dv("BoW", rng.uniform(0.1, 1, size=8)),
            }
            spec = FusionSpec("weighted_sum", ("ICP", "BoW"), (0.3, 0.7))
            assert abs(np.linalg.norm(fuse(spec, vecs).distances) - 1.0) < 1e-9

    def test_product_zero_distance_wins(self):
        a = dv("ICP", [0.0, 0.5, 0.9])
        b = dv("BoW", [0.4, 0.5, 0.1])
        fused = fuse(FusionSpec("product", ("ICP", "BoW")), {"ICP": a, "BoW": b})
        assert int(np.argmin(fused.distances)) == 0

    def test_product_all_zero_is_error(self):
        a = dv("ICP", [0.0, 1.0])
        b = dv("BoW", [1.0, 0.0])
        with pytest.raises(ClassificationError):
            fuse(FusionSpec("product", ("ICP", "BoW")), {"ICP": a, "BoW": b})

    def test_missing_input(self):
        a = dv("ICP", [0.5, 0.5])
        with pytest.raises(ConfigError):
            fuse(FusionSpec("product", ("ICP", "BoW")), {"ICP": a})

    def test_length_mismatch(self):
        a = dv("ICP", [0.5, 0.5])
        b = dv("BoW", [0.5, 0.5, 0.5])
        with pytest.raises(DimensionError):
            fuse(FusionSpec("product", ("ICP", "BoW")), {"ICP": a, "BoW": b})

    def test_model_order_mismatch(self):
        a = dv("ICP", [0.5, 0.5], ids=("a", "b"))
        b = dv("BoW", [0.5, 0.5], ids=("b", "a"))
        with pytest.raises(DimensionError):
            fuse(FusionSpec("product", ("ICP", "BoW")), {"ICP": a, "BoW": b})

    def test_weighted_sum_componentwise(self):
        a = dv("ICP", [0.6, 0.8])
        b = dv("BoW", [0.8, 0.6])
        spec = FusionSpec("weighted_sum", ("ICP", "BoW"), (0.7, 0.3))
        fused = fuse(spec, {"ICP": a, "BoW": b})
        raw = 0.7 * np.array([0.6, 0.8]) + 0.3 * np.array([0.8, 0.6])
        np.testing.assert_allclose(fused.distances, raw / np.linalg.norm(raw))
