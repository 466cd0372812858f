"""Patient-grouped stratified cross-validation folds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FitError


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of instance rows to folds; all rows of a patient share a fold."""

    n_folds: int
    assignments: tuple[int, ...]
    patients: tuple[str, ...]
    labels: tuple[int, ...]
    seed: int

    def val_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) != fold)


def make_folds(labels, patients, n_folds: int, seed: int) -> FoldPlan:
    """Greedy patient-grouped assignment balancing per-fold class counts.

    Groups are placed largest first (order among equals shuffled by seed);
    each goes to the fold that keeps the per-class count spread smallest.
    Requires at least n_folds patients per class.
    """
    y = np.asarray(labels, dtype=np.int64)
    pats = list(patients)
    if len(y) != len(pats):
        raise FitError("labels and patients must align")
    if n_folds < 2:
        raise FitError(f"need at least 2 folds, got {n_folds}")
    if not set(np.unique(y)) <= {0, 1}:
        raise FitError("labels must be binary 0/1")

    for cls in (0, 1):
        owners = {p for p, lab in zip(pats, y) if lab == cls}
        if len(owners) < n_folds:
            raise FitError(
                f"class {cls} is owned by {len(owners)} patients, "
                f"fewer than {n_folds} folds"
            )

    group_counts: dict[str, np.ndarray] = {}
    for p, lab in zip(pats, y):
        group_counts.setdefault(p, np.zeros(2, dtype=np.int64))[lab] += 1

    rng = np.random.default_rng(seed)
    names = sorted(group_counts)
    order = [names[i] for i in rng.permutation(len(names))]
    order.sort(key=lambda p: -int(group_counts[p].sum()))  # stable: keeps shuffle among ties

    fold_counts = np.zeros((n_folds, 2), dtype=np.int64)
    fold_of_patient: dict[str, int] = {}
    for p in order:
        g = group_counts[p]
        best_fold = 0
        best_key = None
        for f in range(n_folds):
            trial = fold_counts.copy()
            trial[f] += g
            spread = int((trial.max(axis=0) - trial.min(axis=0)).sum())
            key = (spread, int(trial[f].sum()), f)
            if best_key is None or key < best_key:
                best_key = key
                best_fold = f
        fold_counts[best_fold] += g
        fold_of_patient[p] = best_fold

    assignments = tuple(fold_of_patient[p] for p in pats)
    for f in range(n_folds):
        rows = [i for i, a in enumerate(assignments) if a == f]
        if not rows:
            raise FitError(f"fold {f} received no instances")
    return FoldPlan(
        n_folds=n_folds,
        assignments=assignments,
        patients=tuple(pats),
        labels=tuple(int(v) for v in y),
        seed=seed,
    )
