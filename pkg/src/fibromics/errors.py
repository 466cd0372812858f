"""Exception hierarchy for the fibromics pipeline."""

from __future__ import annotations


class FibromicsError(Exception):
    """Base class for all pipeline errors."""


class NiftiFormatError(FibromicsError):
    """Raised for unreadable, unsupported, or inconsistent NIfTI files."""


class ManifestError(FibromicsError):
    """Raised for malformed or inconsistent cohort manifests."""


class GeometryError(FibromicsError):
    """Raised when paired grids disagree in shape, spacing, or origin."""


class ExtractionError(FibromicsError):
    """Raised when feature extraction fails for a case or instance."""


class FitError(FibromicsError):
    """Raised when a model fit is ill-posed or rejected."""


class ConfigError(FibromicsError):
    """Raised for unreadable or invalid run configuration."""
