"""Model grid search and test evaluation over patient-grouped folds.

Every stage shares one fold plan. Per fold, the normalizer is fit on that
fold's training rows only, selectors fit on normalized training data, and
learners train with class weights. Model selection maximizes mean validation
F1; ties prefer fewer selected features, then lexicographic method order.
Test evaluation scores each fold model on the full test set.
"""

from __future__ import annotations

import hashlib
import pickle
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import FitError
from ..manifest import TaskSpec
from ..stats import Normalizer, zscore_apply, zscore_fit
from ..table import FeatureTable, task_arrays
from .folds import FoldPlan, make_folds
from .learners import ClassWeights, LearnerSpec, fit_learner
from .selectors import SelectorSpec, SelectorState, fit_selector
from .threshold import ThresholdClassifier, fit_threshold

PIPELINE_VERSION = 1
_PIPELINE_MAGIC = b"FIBROMICS-PIPELINE/1\n"


def f1_score(y_true, y_pred) -> float:
    """Positive-class F1; 0 when no true or predicted positives exist."""
    yt = np.asarray(y_true, dtype=np.int64)
    yp = np.asarray(y_pred, dtype=np.int64)
    tp = int(((yt == 1) & (yp == 1)).sum())
    fp = int(((yt == 0) & (yp == 1)).sum())
    fn = int(((yt == 1) & (yp == 0)).sum())
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom > 0 else 0.0


def naive_benchmark(n_positive: int, n_total: int) -> float:
    """F1 of always predicting positive: 2p / (1 + p) at prevalence p."""
    if n_total <= 0 or n_positive > n_total:
        raise FitError(f"invalid counts {n_positive}/{n_total}")
    if n_positive == 0:
        raise FitError("benchmark undefined without positive instances")
    p = n_positive / n_total
    return 2.0 * p / (1.0 + p)


def _mean_ci(values) -> tuple[float, float, float]:
    """Mean with 1.96-sigma interval truncated to [0, 1], like segmetrics."""
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    half = 1.96 * float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return mean, max(0.0, mean - half), min(1.0, mean + half)


def default_grid() -> tuple[tuple[SelectorSpec, ...], tuple[LearnerSpec, ...]]:
    selectors = [SelectorSpec("none")]
    selectors += [SelectorSpec("topk_mi", (("k", k),)) for k in (5, 10, 25)]
    selectors += [SelectorSpec("mrmr", (("k", k),)) for k in (5, 10, 25)]
    selectors += [SelectorSpec("stability")]
    selectors += [SelectorSpec("lasso", (("target_count", t),)) for t in (10, 25)]
    selectors += [SelectorSpec("pca", (("k", k),)) for k in (5, 10, 25)]

    learners = [LearnerSpec("logreg", (("C", c),)) for c in (0.01, 0.1, 1.0, 10.0, 100.0)]
    learners += [LearnerSpec("svm_linear", (("C", c),)) for c in (0.1, 1.0, 10.0, 100.0, 1000.0)]
    learners += [
        LearnerSpec("svm_rbf", (("C", c), ("gamma", g)))
        for c in (0.1, 1.0, 10.0, 100.0, 1000.0)
        for g in (0.001, 0.01, 0.1, 1.0, 10.0)
    ]
    learners += [
        LearnerSpec("random_forest", (("n_trees", n), ("max_depth", d)))
        for n in (100, 500)
        for d in (None, 5)
    ]
    learners += [
        LearnerSpec("grad_boost", (("rounds", r), ("max_depth", d), ("learning_rate", lr)))
        for r in (50, 200)
        for d in (2, 3)
        for lr in (0.1, 0.3)
    ]
    return tuple(selectors), tuple(learners)


def grid_hash(
    selectors: tuple[SelectorSpec, ...], learners: tuple[LearnerSpec, ...], n_folds: int
) -> str:
    lines = [f"folds={n_folds}"]
    lines += [f"selector:{s.name}({s.describe()})" for s in selectors]
    lines += [f"learner:{l.name}({l.describe()})" for l in learners]
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ComboResult:
    selector: SelectorSpec
    learner: LearnerSpec
    train_f1_mean: float
    val_f1_mean: float
    val_ci_low: float
    val_ci_high: float
    val_f1_folds: tuple[float, ...]
    n_selected_mean: float


@dataclass(frozen=True)
class FoldModel:
    fold: int
    normalizer: Normalizer
    selector_state: SelectorState
    estimator: object

    def predict(self, matrix: np.ndarray) -> np.ndarray:
        z = zscore_apply(self.normalizer, matrix)
        return np.asarray(self.estimator.predict(self.selector_state.transform(z)))


def _rank_key(c: ComboResult):
    return (
        -c.val_f1_mean,
        c.n_selected_mean,
        c.selector.name,
        c.selector.describe(),
        c.learner.name,
        c.learner.describe(),
    )


def _fold_seed(seed: int, fold: int) -> int:
    return (seed * 1000003 + fold * 7919) % (2**31 - 1)


def grid_search(
    matrix: np.ndarray,
    labels: np.ndarray,
    feature_names: tuple[str, ...],
    plan: FoldPlan,
    selectors: tuple[SelectorSpec, ...],
    learners: tuple[LearnerSpec, ...],
    seed: int,
    threads: int = 1,
) -> tuple[tuple[ComboResult, ...], int, tuple[FoldModel, ...]]:
    """Evaluate every selector x learner combo across the folds.

    Returns (results in grid order, winning combo index, winner fold models).
    """
    y = np.asarray(labels, dtype=np.int64)
    folds = list(range(plan.n_folds))
    train_rows = [plan.train_rows(f) for f in folds]
    val_rows = [plan.val_rows(f) for f in folds]

    normalizers: list[Normalizer] = []
    x_tr_norm: list[np.ndarray] = []
    x_va_norm: list[np.ndarray] = []
    weights: list[ClassWeights] = []
    for f in folds:
        norm = zscore_fit(matrix[train_rows[f]], feature_names)
        normalizers.append(norm)
        x_tr_norm.append(zscore_apply(norm, matrix[train_rows[f]]))
        x_va_norm.append(zscore_apply(norm, matrix[val_rows[f]]))
        weights.append(ClassWeights.from_labels(y[train_rows[f]]))

    # Selector states are learner-independent; fit each once per fold.
    sel_states: list[list[SelectorState]] = []
    sel_feats_tr: list[list[np.ndarray]] = []
    sel_feats_va: list[list[np.ndarray]] = []
    for si, sel in enumerate(selectors):
        states, feats_tr, feats_va = [], [], []
        for f in folds:
            state = fit_selector(sel, x_tr_norm[f], y[train_rows[f]], seed=_fold_seed(seed, f))
            states.append(state)
            feats_tr.append(state.transform(x_tr_norm[f]))
            feats_va.append(state.transform(x_va_norm[f]))
        sel_states.append(states)
        sel_feats_tr.append(feats_tr)
        sel_feats_va.append(feats_va)

    combo_list = [(si, li) for si in range(len(selectors)) for li in range(len(learners))]

    def eval_combo(pair: tuple[int, int]) -> ComboResult:
        si, li = pair
        train_f1s, val_f1s = [], []
        for f in folds:
            est = fit_learner(
                learners[li],
                sel_feats_tr[si][f],
                y[train_rows[f]],
                weights[f],
                random_state=_fold_seed(seed, f),
            )
            train_f1s.append(f1_score(y[train_rows[f]], est.predict(sel_feats_tr[si][f])))
            val_f1s.append(f1_score(y[val_rows[f]], est.predict(sel_feats_va[si][f])))
        mean, lo, hi = _mean_ci(val_f1s)
        return ComboResult(
            selector=selectors[si],
            learner=learners[li],
            train_f1_mean=float(np.mean(train_f1s)),
            val_f1_mean=mean,
            val_ci_low=lo,
            val_ci_high=hi,
            val_f1_folds=tuple(val_f1s),
            n_selected_mean=float(np.mean([sel_states[si][f].n_selected for f in folds])),
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = tuple(pool.map(eval_combo, combo_list))
    else:
        results = tuple(eval_combo(pair) for pair in combo_list)

    best_idx = min(range(len(results)), key=lambda i: (_rank_key(results[i]), i))

    si, _li = combo_list[best_idx]
    fold_models = tuple(
        FoldModel(
            fold=f,
            normalizer=normalizers[f],
            selector_state=sel_states[si][f],
            estimator=fit_learner(
                results[best_idx].learner,
                sel_feats_tr[si][f],
                y[train_rows[f]],
                weights[f],
                random_state=_fold_seed(seed, f),
            ),
        )
        for f in folds
    )
    return results, best_idx, fold_models


@dataclass(frozen=True)
class SingleFeatureResult:
    feature: str
    train_f1_mean: float
    val_f1_mean: float
    val_ci_low: float
    val_ci_high: float


@dataclass(frozen=True)
class SingleFeatureStudy:
    results: tuple[SingleFeatureResult, ...]  # feature-name order
    best_feature: str
    best_classifiers: tuple[ThresholdClassifier, ...]  # one per fold

    def result_for(self, feature: str) -> SingleFeatureResult:
        for r in self.results:
            if r.feature == feature:
                return r
        raise FitError(f"feature {feature!r} not in the study")


def single_feature_study(
    matrix: np.ndarray,
    labels: np.ndarray,
    feature_names: tuple[str, ...],
    plan: FoldPlan,
) -> SingleFeatureStudy:
    """Cross-validated one-feature threshold classifiers for every feature."""
    y = np.asarray(labels, dtype=np.int64)
    folds = list(range(plan.n_folds))
    train_rows = [plan.train_rows(f) for f in folds]
    val_rows = [plan.val_rows(f) for f in folds]
    results: list[SingleFeatureResult] = []
    classifiers: dict[str, tuple[ThresholdClassifier, ...]] = {}
    for j, name in enumerate(feature_names):
        fold_clfs, tr_f1s, va_f1s = [], [], []
        for f in folds:
            clf = fit_threshold(matrix[train_rows[f], j], y[train_rows[f]], feature=name)
            fold_clfs.append(clf)
            tr_f1s.append(f1_score(y[train_rows[f]], clf.predict(matrix[train_rows[f], j])))
            va_f1s.append(f1_score(y[val_rows[f]], clf.predict(matrix[val_rows[f], j])))
        mean, lo, hi = _mean_ci(va_f1s)
        results.append(
            SingleFeatureResult(name, float(np.mean(tr_f1s)), mean, lo, hi)
        )
        classifiers[name] = tuple(fold_clfs)
    best = min(results, key=lambda r: (-r.val_f1_mean, r.feature))
    return SingleFeatureStudy(
        results=tuple(results),
        best_feature=best.feature,
        best_classifiers=classifiers[best.feature],
    )


@dataclass(frozen=True)
class TrainedPipeline:
    version: int
    seed: int
    task: TaskSpec
    feature_names: tuple[str, ...]
    plan: FoldPlan
    combos: tuple[ComboResult, ...]
    best_index: int
    fold_models: tuple[FoldModel, ...]
    single_feature: SingleFeatureStudy
    grid_digest: str

    @property
    def best(self) -> ComboResult:
        return self.combos[self.best_index]


def train_study(
    table: FeatureTable,
    task: TaskSpec,
    *,
    n_folds: int = 3,
    seed: int,
    selectors: tuple[SelectorSpec, ...] | None = None,
    learners: tuple[LearnerSpec, ...] | None = None,
    threads: int = 1,
) -> TrainedPipeline:
    """Run the full training study on one feature table."""
    if selectors is None or learners is None:
        dsel, dlearn = default_grid()
        selectors = selectors or dsel
        learners = learners or dlearn
    idx, y, patients = task_arrays(table, task)
    x = table.matrix[idx]
    plan = make_folds(y, patients, n_folds, seed)
    study = single_feature_study(x, y, table.feature_names, plan)
    combos, best_idx, fold_models = grid_search(
        x, y, table.feature_names, plan, selectors, learners, seed, threads=threads
    )
    return TrainedPipeline(
        version=PIPELINE_VERSION,
        seed=seed,
        task=task,
        feature_names=tuple(table.feature_names),
        plan=plan,
        combos=combos,
        best_index=best_idx,
        fold_models=fold_models,
        single_feature=study,
        grid_digest=grid_hash(selectors, learners, n_folds),
    )


@dataclass(frozen=True)
class TestEvaluation:
    n_test: int
    n_positive: int
    per_model_f1: tuple[float, ...]
    mean_f1: float
    ci_low: float
    ci_high: float
    vote_f1: float
    benchmark_f1: float
    single_feature: str
    single_feature_f1_mean: float
    single_feature_vote_f1: float


def evaluate_test(pipeline: TrainedPipeline, table: FeatureTable) -> TestEvaluation:
    """Score each fold model (and the best single-feature rule) on the test set."""
    if tuple(table.feature_names) != tuple(pipeline.feature_names):
        missing = set(pipeline.feature_names) - set(table.feature_names)
        extra = set(table.feature_names) - set(pipeline.feature_names)
        raise FitError(
            f"test schema mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}"
        )
    idx, y, _patients = task_arrays(table, pipeline.task)
    x = table.matrix[idx]
    if int((y == 1).sum()) == 0:
        raise FitError("test set holds no positive instances; benchmark undefined")

    preds = [m.predict(x) for m in pipeline.fold_models]
    per_model = tuple(f1_score(y, p) for p in preds)
    mean, lo, hi = _mean_ci(per_model)
    if len(preds) % 2 == 0:
        raise FitError("majority vote needs an odd number of fold models")
    votes = (np.sum(preds, axis=0) * 2 > len(preds)).astype(np.int64)

    feat_col = x[:, pipeline.feature_names.index(pipeline.single_feature.best_feature)]
    sf_preds = [clf.predict(feat_col) for clf in pipeline.single_feature.best_classifiers]
    sf_votes = (np.sum(sf_preds, axis=0) * 2 > len(sf_preds)).astype(np.int64)

    return TestEvaluation(
        n_test=len(y),
        n_positive=int((y == 1).sum()),
        per_model_f1=per_model,
        mean_f1=mean,
        ci_low=lo,
        ci_high=hi,
        vote_f1=f1_score(y, votes),
        benchmark_f1=naive_benchmark(int((y == 1).sum()), len(y)),
        single_feature=pipeline.single_feature.best_feature,
        single_feature_f1_mean=float(np.mean([f1_score(y, p) for p in sf_preds])),
        single_feature_vote_f1=f1_score(y, sf_votes),
    )


def save_pipeline(path: str, pipeline: TrainedPipeline) -> None:
    blob = _PIPELINE_MAGIC + pickle.dumps(pipeline, protocol=4)
    with open(path, "wb") as fh:
        fh.write(blob)


def load_pipeline(path: str) -> TrainedPipeline:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(_PIPELINE_MAGIC):
        raise FitError(f"{path}: not a pipeline artifact")
    obj = pickle.loads(blob[len(_PIPELINE_MAGIC) :])
    if not isinstance(obj, TrainedPipeline) or obj.version != PIPELINE_VERSION:
        raise FitError(f"{path}: unsupported pipeline version")
    return obj
