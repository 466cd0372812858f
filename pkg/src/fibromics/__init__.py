"""Radiomic feature extraction and classification for uterine tumor MRI.

The package covers the full downstream pipeline once segmentations exist:
NIfTI volume handling, stratified patient-grouped dataset splits, 107-feature
radiomic extraction per tumor instance, segmentation agreement metrics,
learning-curve extrapolation, univariate statistics, a selector x learner
model search under grouped cross-validation, and posterior risk updating.
"""

from .bayes import OperatingPoint, format_posterior, one_in_n, posterior_probability
from .config import RunConfig, load_config, parse_config_text
from .errors import (
    ConfigError,
    ExtractionError,
    FibromicsError,
    FitError,
    GeometryError,
    ManifestError,
    NiftiFormatError,
)
from .features import FeatureVector, extract_instance, feature_names
from .learncurve import PlateauModel, fit_plateau, plateau_point
from .manifest import (
    BUILTIN_TASKS,
    CaseRecord,
    Manifest,
    TUMOR_CLASSES,
    TaskSpec,
    apply_split,
    binarize,
    load_manifest,
    stratified_group_split,
    write_manifest,
)
from .nifti import (
    LabelGrid,
    VoxelGrid,
    merge_uterus_and_tumor,
    read_label_nifti,
    read_nifti,
    same_geometry,
    write_label_nifti,
    write_nifti,
)
from .preprocess import DiscretizedRoi, PreprocessConfig, discretize, resample, resample_labels
from .segmetrics import (
    AgreementSummary,
    InstanceMatch,
    connected_components,
    cross_match,
    dice,
    summarize,
)
from .stats import (
    CovariateResult,
    MwuResult,
    Normalizer,
    compare_covariates,
    mann_whitney_u,
    mutual_information,
    zscore_apply,
    zscore_fit,
)
from .table import FeatureTable, RowKey, read_feature_table, task_arrays, write_feature_table

__version__ = "0.1.0"

__all__ = [
    "AgreementSummary",
    "BUILTIN_TASKS",
    "CaseRecord",
    "ConfigError",
    "CovariateResult",
    "DiscretizedRoi",
    "ExtractionError",
    "FeatureTable",
    "FeatureVector",
    "FibromicsError",
    "FitError",
    "GeometryError",
    "InstanceMatch",
    "LabelGrid",
    "Manifest",
    "ManifestError",
    "MwuResult",
    "NiftiFormatError",
    "Normalizer",
    "OperatingPoint",
    "PlateauModel",
    "PreprocessConfig",
    "RowKey",
    "RunConfig",
    "TUMOR_CLASSES",
    "TaskSpec",
    "VoxelGrid",
    "apply_split",
    "binarize",
    "compare_covariates",
    "connected_components",
    "cross_match",
    "dice",
    "discretize",
    "extract_instance",
    "feature_names",
    "fit_plateau",
    "format_posterior",
    "load_config",
    "load_manifest",
    "mann_whitney_u",
    "merge_uterus_and_tumor",
    "mutual_information",
    "one_in_n",
    "parse_config_text",
    "plateau_point",
    "posterior_probability",
    "read_feature_table",
    "read_label_nifti",
    "read_nifti",
    "resample",
    "resample_labels",
    "same_geometry",
    "stratified_group_split",
    "summarize",
    "task_arrays",
    "write_feature_table",
    "write_label_nifti",
    "write_manifest",
    "write_nifti",
    "zscore_apply",
    "zscore_fit",
]
