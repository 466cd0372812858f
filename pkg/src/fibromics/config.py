"""Run configuration: flat ``key = value`` files with section prefixes.

Example::

    seed = 7
    threads = 2
    preprocess.bin_width = 25
    grid.selectors = none; topk_mi:k=5
    grid.learners = logreg:C=1.0; svm_rbf:C=10,gamma=0.01
    task.big_vs_small = LMS,STUMP vs NDLM

Unknown keys are rejected so typos fail fast. Values left unset fall back
to the defaults used throughout the package.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .classify.learners import LearnerSpec
from .classify.selectors import SelectorSpec
from .errors import ConfigError
from .manifest import BUILTIN_TASKS, TaskSpec
from .preprocess import PreprocessConfig

_SELECTOR_PARAMS = {
    "none": frozenset(),
    "topk_mi": frozenset({"k"}),
    "mrmr": frozenset({"k"}),
    "stability": frozenset(),
    "lasso": frozenset({"target_count"}),
    "pca": frozenset({"k"}),
}
_LEARNER_PARAMS = {
    "logreg": frozenset({"C"}),
    "svm_linear": frozenset({"C"}),
    "svm_rbf": frozenset({"C", "gamma"}),
    "random_forest": frozenset({"n_trees", "max_depth"}),
    "grad_boost": frozenset({"rounds", "max_depth", "learning_rate"}),
}

_KNOWN_KEYS = frozenset(
    {
        "seed",
        "threads",
        "grid.folds",
        "grid.selectors",
        "grid.learners",
        "split.test_fraction",
        "preprocess.clip_percentile",
        "preprocess.rescale_max",
        "preprocess.target_spacing",
        "preprocess.bin_width",
    }
)

_INT_RE = re.compile(r"^[+-]?\d+$")


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings shared by the CLI commands."""

    seed: int | None = None
    threads: int = 1
    folds: int = 3
    test_fraction: float = 0.25
    preprocess: PreprocessConfig = PreprocessConfig()
    tasks: tuple[TaskSpec, ...] = tuple(BUILTIN_TASKS[k] for k in sorted(BUILTIN_TASKS))
    selectors: tuple[SelectorSpec, ...] | None = None
    learners: tuple[LearnerSpec, ...] | None = None

    def __post_init__(self) -> None:
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.folds < 2:
            raise ConfigError(f"grid.folds must be >= 2, got {self.folds}")
        if not (0.0 < self.test_fraction < 1.0):
            raise ConfigError(f"split.test_fraction must lie in (0, 1), got {self.test_fraction}")

    def task(self, name: str) -> TaskSpec:
        for t in self.tasks:
            if t.name == name:
                return t
        known = ", ".join(t.name for t in self.tasks)
        raise ConfigError(f"unknown task {name!r}; known tasks: {known}")

    def with_overrides(self, seed: int | None = None, threads: int | None = None) -> "RunConfig":
        out = self
        if seed is not None:
            out = replace(out, seed=seed)
        if threads is not None:
            out = replace(out, threads=threads)
        return out


def _parse_scalar(key: str, raw: str):
    text = raw.strip()
    if text.lower() == "none":
        return None
    if _INT_RE.match(text):
        return int(text)
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number or 'none', got {text!r}") from None


def _parse_int(key: str, raw: str) -> int:
    value = _parse_scalar(key, raw)
    if not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {raw.strip()!r}")
    return value


def _parse_float(key: str, raw: str) -> float:
    value = _parse_scalar(key, raw)
    if value is None:
        raise ConfigError(f"{key}: expected a number, got {raw.strip()!r}")
    return float(value)


def _parse_spec(key: str, text: str, allowed: dict[str, frozenset]):
    """Parse ``name`` or ``name:param=value,param=value`` against a registry."""
    head, _sep, tail = text.strip().partition(":")
    name = head.strip()
    if name not in allowed:
        raise ConfigError(f"{key}: unknown method {name!r}; options: {', '.join(sorted(allowed))}")
    params = []
    if tail.strip():
        for item in tail.split(","):
            pname, eq, pval = item.partition("=")
            if not eq:
                raise ConfigError(f"{key}: malformed parameter {item.strip()!r}")
            params.append((pname.strip(), _parse_scalar(key, pval)))
    given = {p for p, _v in params}
    if given != allowed[name]:
        want = ", ".join(sorted(allowed[name])) or "(no parameters)"
        raise ConfigError(f"{key}: method {name!r} takes exactly: {want}")
    return name, tuple(params)


def _parse_spec_list(key: str, raw: str, allowed: dict[str, frozenset], cls):
    items = [s for s in (part.strip() for part in raw.split(";")) if s]
    if not items:
        raise ConfigError(f"{key}: empty method list")
    return tuple(cls(name, params) for name, params in (_parse_spec(key, s, allowed) for s in items))


def _parse_task(key: str, raw: str) -> TaskSpec:
    name = key.split(".", 1)[1]
    if not name:
        raise ConfigError(f"{key}: task name missing")
    sides = re.split(r"\bvs\b", raw)
    if len(sides) != 2:
        raise ConfigError(f"{key}: expected 'POS[,POS...] vs NEG[,NEG...]', got {raw.strip()!r}")
    pos = frozenset(s.strip().upper() for s in sides[0].split(",") if s.strip())
    neg = frozenset(s.strip().upper() for s in sides[1].split(",") if s.strip())
    return TaskSpec(name=name, positive=pos, negative=neg)


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    entries: dict[str, str] = {}
    custom_tasks: list[TaskSpec] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, eq, value = stripped.partition("=")
        key = key.strip()
        if not eq or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {stripped!r}")
        if key.startswith("task."):
            custom_tasks.append(_parse_task(key, value))
            continue
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        entries[key] = value

    pre_kwargs = {}
    if "preprocess.clip_percentile" in entries:
        pre_kwargs["clip_percentile"] = _parse_float(
            "preprocess.clip_percentile", entries["preprocess.clip_percentile"]
        )
    if "preprocess.rescale_max" in entries:
        pre_kwargs["rescale_max"] = _parse_float(
            "preprocess.rescale_max", entries["preprocess.rescale_max"]
        )
    if "preprocess.bin_width" in entries:
        pre_kwargs["bin_width"] = _parse_float("preprocess.bin_width", entries["preprocess.bin_width"])
    if "preprocess.target_spacing" in entries:
        parts = entries["preprocess.target_spacing"].split(",")
        if len(parts) != 3:
            raise ConfigError("preprocess.target_spacing: expected three comma-separated values")
        pre_kwargs["target_spacing"] = tuple(
            _parse_float("preprocess.target_spacing", p) for p in parts
        )

    base_tasks = [BUILTIN_TASKS[k] for k in sorted(BUILTIN_TASKS)]
    names = {t.name for t in base_tasks}
    for task in custom_tasks:
        if task.name in names:
            base_tasks = [task if t.name == task.name else t for t in base_tasks]
        else:
            base_tasks.append(task)
            names.add(task.name)

    return RunConfig(
        seed=_parse_int("seed", entries["seed"]) if "seed" in entries else None,
        threads=_parse_int("threads", entries["threads"]) if "threads" in entries else 1,
        folds=_parse_int("grid.folds", entries["grid.folds"]) if "grid.folds" in entries else 3,
        test_fraction=(
            _parse_float("split.test_fraction", entries["split.test_fraction"])
            if "split.test_fraction" in entries
            else 0.25
        ),
        preprocess=PreprocessConfig(**pre_kwargs),
        tasks=tuple(base_tasks),
        selectors=(
            _parse_spec_list("grid.selectors", entries["grid.selectors"], _SELECTOR_PARAMS, SelectorSpec)
            if "grid.selectors" in entries
            else None
        ),
        learners=(
            _parse_spec_list("grid.learners", entries["grid.learners"], _LEARNER_PARAMS, LearnerSpec)
            if "grid.learners" in entries
            else None
        ),
    )


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, source=path)
