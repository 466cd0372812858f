"""Patient-grouped model selection for binary radiomic classification."""

from .folds import FoldPlan, make_folds
from .learners import ClassWeights, LearnerSpec, fit_learner
from .selectors import SelectorSpec, SelectorState, fit_selector
from .study import (
    ComboResult,
    FoldModel,
    SingleFeatureResult,
    SingleFeatureStudy,
    TestEvaluation,
    TrainedPipeline,
    default_grid,
    evaluate_test,
    f1_score,
    grid_hash,
    grid_search,
    load_pipeline,
    naive_benchmark,
    save_pipeline,
    single_feature_study,
    train_study,
)
from .threshold import ThresholdClassifier, fit_threshold

__all__ = [
    "ClassWeights",
    "ComboResult",
    "FoldModel",
    "FoldPlan",
    "LearnerSpec",
    "SelectorSpec",
    "SelectorState",
    "SingleFeatureResult",
    "SingleFeatureStudy",
    "TestEvaluation",
    "ThresholdClassifier",
    "TrainedPipeline",
    "default_grid",
    "evaluate_test",
    "f1_score",
    "fit_learner",
    "fit_selector",
    "fit_threshold",
    "grid_hash",
    "grid_search",
    "load_pipeline",
    "make_folds",
    "naive_benchmark",
    "save_pipeline",
    "single_feature_study",
    "train_study",
]
