import numpy as np
import pytest

import iclap.evaluation as evaluation
from iclap.errors import ConfigError, InsufficientData
from iclap.evaluation import (
    leave_one_out,
    run_loo,
    weight_grid,
    weight_sweep,
)
from iclap.fusion import FusionSpec


TOUCHES = (1, 3, 6, 10)


class TestRunLoo:
    def test_oracle_callable_is_perfect(self, tiny_traces):
        def oracle(case):
            return case.true_id

        oracle.__name__ = "oracle"
        report = run_loo(tiny_traces, [oracle], TOUCHES, k=8)["oracle"]
        assert report.accuracies == (1.0,) * len(TOUCHES)

    def test_random_baseline_near_chance(self, tiny_traces):
        rng = np.random.default_rng(0)

        def baseline(case):
            return str(rng.choice(case.model_ids))

        baseline.__name__ = "baseline"
        report = run_loo(tiny_traces, [baseline], tuple(range(1, 11)), k=8)["baseline"]
        # 4 objects x 3 folds x 10 touch counts = 120 draws at chance 1/4
        pooled = float(np.mean(report.accuracies))
        assert 0.10 < pooled < 0.40

    def test_accuracy_at_and_confusion_totals(self, tiny_traces):
        report = leave_one_out(tiny_traces, "BoW", TOUCHES, k=8)
        assert report.accuracy_at(6) == report.accuracies[TOUCHES.index(6)]
        with pytest.raises(ConfigError):
            report.accuracy_at(999)
        for (fold, t), cells in report.confusion.items():
            assert sum(cells.values()) == 4  # one decision per object per fold
        # accuracies must equal the diagonal mass of the confusion tables
        for i, t in enumerate(TOUCHES):
            diag = sum(
                count
                for (fold, tc), cells in report.confusion.items()
                if tc == t
                for (true_id, pred_id), count in cells.items()
                if true_id == pred_id
            )
            assert report.accuracies[i] == diag / 12

    def test_deterministic(self, tiny_traces):
        a = leave_one_out(tiny_traces, "iCLAP", (2, 5), k=8, seed=3)
        b = leave_one_out(tiny_traces, "iCLAP", (2, 5), k=8, seed=3)
        assert a.accuracies == b.accuracies
        assert a.confusion == b.confusion

    def test_jobs_do_not_change_results(self, tiny_traces):
        a = run_loo(tiny_traces, ["BoW", "ICP"], (2, 5), k=8, seed=3, jobs=1)
        b = run_loo(tiny_traces, ["BoW", "ICP"], (2, 5), k=8, seed=3, jobs=3)
        for name in a:
            assert a[name].accuracies == b[name].accuracies

    def test_codebook_never_sees_test_frames(self, tiny_traces, monkeypatch):
        # every object contributes 3 trials of 12 frames; the per-fold
        # codebook must be fitted on exactly the 2 training trials
        seen = []
        real = evaluation.fit_codebook

        def spy(descriptors, k, seed, **kwargs):
            seen.append(np.asarray(descriptors).shape[0])
            return real(descriptors, k, seed, **kwargs)

        monkeypatch.setattr(evaluation, "fit_codebook", spy)
        run_loo(tiny_traces, ["BoW"], (3,), k=8)
        assert seen == [4 * 2 * 12] * 3

    def test_degenerate_fusion_weights_match_base_method(self, tiny_traces):
        spec = FusionSpec("weighted_sum", ("BoW", "iCLAP"), (1.0, 0.0))
        reports = run_loo(tiny_traces, ["BoW", spec], TOUCHES, k=8, seed=1)
        assert reports[spec.name].accuracies == reports["BoW"].accuracies

    def test_insufficient_trials(self, tiny_traces):
        single = [t for t in tiny_traces if t.trial_index == 0]
        with pytest.raises(InsufficientData):
            run_loo(single, ["BoW"], (2,), k=8)

    def test_touch_count_exceeds_frames(self, tiny_traces):
        with pytest.raises(ConfigError):
            run_loo(tiny_traces, ["BoW"], (13,), k=8)

    def test_unknown_method(self, tiny_traces):
        with pytest.raises(ConfigError):
            run_loo(tiny_traces, ["SIFT"], (2,), k=8)

    def test_no_methods(self, tiny_traces):
        with pytest.raises(ConfigError):
            run_loo(tiny_traces, [], (2,), k=8)


class TestWeightGrid:
    def test_two_inputs_step_01(self):
        grid = weight_grid(2, 0.1)
        assert len(grid) == 9
        first = [w[0] for w in grid]
        np.testing.assert_allclose(sorted(first), np.arange(1, 10) / 10)
        for w in grid:
            assert sum(w) == 1.0

    def test_three_inputs_step_01(self):
        grid = weight_grid(3, 0.1)
        assert len(grid) == 36
        for w in grid:
            assert all(x >= 0.1 - 1e-12 for x in w)
            assert sum(w) == pytest.approx(1.0, abs=1e-12)

    def test_two_inputs_step_005(self):
        assert len(weight_grid(2, 0.05)) == 19

    def test_degenerate_step(self):
        with pytest.raises(ConfigError):
            weight_grid(2, 1.0)
        with pytest.raises(ConfigError):
            weight_grid(2, 0.0)


class TestWeightSweep:
    def test_rows_and_best(self, tiny_traces):
        sweep = weight_sweep(tiny_traces, ("BoW", "iCLAP"), grid_step=0.2,
                             touch_counts=(6,), k=8, seed=1)
        assert len(sweep.rows) == 4
        assert sweep.designated_touch == 6
        accs = [r.accuracy_at(6) for _, r in sweep.rows]
        assert sweep.best_accuracy == max(accs)
        assert sweep.best_weights == sweep.rows[int(np.argmax(accs))][0]

    def test_designated_touch_must_be_evaluated(self, tiny_traces):
        with pytest.raises(ConfigError):
            weight_sweep(tiny_traces, ("BoW", "iCLAP"), touch_counts=(6,),
                         designated_touch=5, k=8)
