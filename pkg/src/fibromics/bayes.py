"""Odds-ratio update of a screening prior through a classifier operating point.

The likelihood ratio tpr/fpr multiplies the prior odds; the posterior is
reported both as a probability (4 significant digits) and in "1 in N" form,
where N is taken from the posterior rounded to 2 significant digits so that
the headline figure matches what a reader computes from the rounded value.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class OperatingPoint:
    """True/false positive rates of a binary classifier."""

    tpr: float
    fpr: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.tpr <= 1.0):
            raise ConfigError(f"tpr {self.tpr} outside [0, 1]")
        if not (0.0 < self.fpr <= 1.0):
            raise ConfigError(f"fpr {self.fpr} outside (0, 1]")

    @classmethod
    def from_counts(cls, tp: int, fn: int, fp: int, tn: int) -> "OperatingPoint":
        """Build from raw confusion counts (rates are not pre-rounded)."""
        for name, v in (("tp", tp), ("fn", fn), ("fp", fp), ("tn", tn)):
            if v < 0:
                raise ConfigError(f"count {name} must be nonnegative, got {v}")
        if tp + fn == 0:
            raise ConfigError("tpr undefined: tp + fn == 0")
        if fp + tn == 0:
            raise ConfigError("fpr undefined: fp + tn == 0")
        return cls(tpr=tp / (tp + fn), fpr=fp / (fp + tn))

    @property
    def likelihood_ratio(self) -> float:
        return self.tpr / self.fpr


def posterior_probability(prior: float, op: OperatingPoint) -> float:
    """Posterior P(disease | positive test) from prior and operating point."""
    if not (0.0 < prior < 1.0):
        raise ConfigError(f"prior {prior} outside (0, 1)")
    odds = prior / (1.0 - prior) * op.likelihood_ratio
    return odds / (1.0 + odds)


def one_in_n(posterior: float) -> int:
    """Headline "1 in N" count for a posterior probability.

    The posterior is first rounded to 2 significant digits, then inverted
    and rounded; this reproduces the count a reader derives from the
    2-digit probability rather than from the unrounded value.
    """
    if not (0.0 < posterior < 1.0):
        raise ConfigError(f"posterior {posterior} outside (0, 1)")
    rounded = float(f"{posterior:.1e}")
    return round(1.0 / rounded)


def format_posterior(posterior: float) -> str:
    """Posterior probability at 4 significant digits."""
    return f"{posterior:.4g}"
