"""Split construction and the recognition-rate metric."""

import numpy as np
import pytest

from eegbbnet.errors import ParameterError
from eegbbnet.experiment import crr, generate_synthetic, stratified_kfold


def dataset(subjects=4, trials=20):
    return generate_synthetic(subjects, trials, 4, 200, seed=9, sessions=("I",))


class TestStratifiedKfold:
    def test_70_10_20_proportions_on_round_counts(self):
        ds = generate_synthetic(2, 100, 4, 200, seed=1, sessions=("I",))
        plans = stratified_kfold(ds, k=5, seed=0)
        for plan in plans:
            for subject in range(2):
                assert len(plan.train[subject]) == 70
                assert len(plan.validation[subject]) == 10
                assert len(plan.test[subject]) == 20

    def test_test_blocks_partition_everything(self):
        ds = dataset(subjects=3, trials=23)  # not divisible by 5
        plans = stratified_kfold(ds, k=5, seed=4)
        all_test = np.concatenate([p.test_indices() for p in plans])
        assert len(all_test) == len(set(all_test.tolist())) == len(ds.trials)

    def test_partitions_disjoint_and_exhaustive_within_fold(self):
        ds = dataset(subjects=3, trials=17)
        for plan in stratified_kfold(ds, k=5, seed=1):
            tr = set(plan.train_indices().tolist())
            va = set(plan.validation_indices().tolist())
            te = set(plan.test_indices().tolist())
            assert not (tr & va) and not (tr & te) and not (va & te)
            assert len(tr | va | te) == len(ds.trials)

    def test_every_subject_in_every_partition(self):
        ds = dataset(subjects=4, trials=11)
        for plan in stratified_kfold(ds, k=5, seed=2):
            for subject in range(4):
                assert len(plan.train[subject]) > 0
                assert len(plan.test[subject]) > 0

    def test_deterministic_per_seed(self):
        ds = dataset()
        a = stratified_kfold(ds, k=5, seed=33)
        b = stratified_kfold(ds, k=5, seed=33)
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.train_indices(), pb.train_indices())
            np.testing.assert_array_equal(pa.test_indices(), pb.test_indices())
        c = stratified_kfold(ds, k=5, seed=34)
        assert any(
            not np.array_equal(pa.test_indices(), pc.test_indices()) for pa, pc in zip(a, c)
        )

    def test_too_few_trials_rejected(self):
        ds = dataset(subjects=2, trials=3)
        with pytest.raises(ParameterError):
            stratified_kfold(ds, k=5, seed=0)


class TestCrr:
    def test_fractions(self):
        assert crr([1] * 8 + [0] * 2, [1] * 10) == 0.8
        assert crr([3, 1, 2], [3, 1, 2]) == 1.0
        assert crr([0, 0, 0], [1, 2, 3]) == 0.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ParameterError):
            crr([1, 2], [1])
        with pytest.raises(ParameterError):
            crr([], [])

    def test_concatenated_folds_equal_weighted_mean(self):
        rng = np.random.default_rng(8)
        folds = [
            (rng.integers(0, 3, size=n), rng.integers(0, 3, size=n)) for n in (20, 17, 33)
        ]
        pooled_pred = np.concatenate([p for p, _ in folds])
        pooled_true = np.concatenate([t for _, t in folds])
        weighted = sum(crr(p, t) * len(p) for p, t in folds) / len(pooled_pred)
        assert abs(crr(pooled_pred, pooled_true) - weighted) <= 1e-12
