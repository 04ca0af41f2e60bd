"""Stratified k-fold splitting and the recognition-rate metric.

Each subject's trials are shuffled once per seed and carved into k
contiguous test blocks; for every fold the held-out block is the test
set and the remaining trials split 70:10 into train and validation
(train first, preserving the shuffled order).  Every subject therefore
appears in every partition of every fold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from .io import Dataset


@dataclass
class SplitPlan:
    """Per-subject train/validation/test trial indices for one fold."""

    fold: int
    train: dict[int, np.ndarray]
    validation: dict[int, np.ndarray]
    test: dict[int, np.ndarray]

    def train_indices(self) -> np.ndarray:
        return _flatten(self.train)

    def validation_indices(self) -> np.ndarray:
        return _flatten(self.validation)

    def test_indices(self) -> np.ndarray:
        return _flatten(self.test)


def _flatten(per_subject: dict[int, np.ndarray]) -> np.ndarray:
    parts = [per_subject[s] for s in sorted(per_subject)]
    return np.concatenate(parts) if parts else np.array([], dtype=np.intp)


def train_validation_split(indices: np.ndarray, validation_fraction: float = 0.125):
    """Split a sequence into leading train and trailing validation parts.

    Validation takes floor(fraction * n) elements but never zero (every
    subject must appear in every partition), leaving at least one element
    for training.
    """
    count = len(indices)
    n_val = int(np.floor(validation_fraction * count))
    if n_val == 0 and count >= 2:
        n_val = 1
    return indices[: count - n_val], indices[count - n_val :]


def stratified_kfold(dataset: Dataset, k: int = 5, seed: int = 0) -> list[SplitPlan]:
    """Build k split plans with per-subject 70:10:20 proportions.

    Deterministic: one shuffle per subject from ``seed``, then contiguous
    test blocks rotate across folds.
    """
    if k < 2:
        raise ParameterError("need at least 2 folds")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    shuffled: dict[int, np.ndarray] = {}
    for subject in range(dataset.n_subjects):
        idx = dataset.subject_trial_indices(subject)
        if len(idx) < k:
            raise ParameterError(
                f"subject {subject} has only {len(idx)} trials; k={k} needs at least {k}"
            )
        shuffled[subject] = rng.permutation(idx)
    plans = []
    for fold in range(k):
        train: dict[int, np.ndarray] = {}
        validation: dict[int, np.ndarray] = {}
        test: dict[int, np.ndarray] = {}
        for subject, idx in shuffled.items():
            blocks = np.array_split(idx, k)
            test[subject] = blocks[fold]
            rest = np.concatenate([b for f, b in enumerate(blocks) if f != fold])
            train[subject], validation[subject] = train_validation_split(rest)
        plans.append(SplitPlan(fold=fold, train=train, validation=validation, test=test))
    return plans


def crr(predictions, truths) -> float:
    """Correct recognition rate: the fraction of exact identity matches."""
    predictions = np.asarray(predictions)
    truths = np.asarray(truths)
    if predictions.shape != truths.shape or predictions.ndim != 1:
        raise ParameterError(
            f"predictions and truths must be equal-length vectors, "
            f"got {predictions.shape} and {truths.shape}"
        )
    if predictions.size == 0:
        raise ParameterError("cannot score an empty prediction list")
    return float(np.mean(predictions == truths))
