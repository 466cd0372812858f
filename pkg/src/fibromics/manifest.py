"""Cohort manifest loading, validation, patient-grouped splitting, task labels.

The manifest is a CSV with one row per tumor instance:

    patient_id,image_id,image_path,tumor_mask_path,uterus_mask_path,
    instance_label,instance_class,age_years,menstrual_status,adenomyosis,
    fat_saturated,split

Case-level columns (paths, covariates, split) must agree across the rows of
one image. Clinical covariates accept either the integer codes below or
their names.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ManifestError

TUMOR_CLASSES = ("NDLM", "DLM", "CLM", "STUMP", "LMS")

MENSTRUAL_CODES = {"peri": 0, "pre": 1, "post": 2}
ADENOMYOSIS_CODES = {"yes": 1, "no": 2, "possible": 3, "probable": 4, "unknown": 5}
FAT_SAT_CODES = {"no": 0, "yes": 1}

MANIFEST_COLUMNS = [
    "patient_id",
    "image_id",
    "image_path",
    "tumor_mask_path",
    "uterus_mask_path",
    "instance_label",
    "instance_class",
    "age_years",
    "menstrual_status",
    "adenomyosis",
    "fat_saturated",
    "split",
]


def _decode(value: str, codes: dict[str, int], column: str) -> int:
    v = value.strip().lower()
    if v in codes:
        return codes[v]
    try:
        iv = int(v)
    except ValueError:
        raise ManifestError(f"{column}: unknown value {value!r}") from None
    if iv not in codes.values():
        raise ManifestError(f"{column}: code {iv} is not one of {sorted(codes.values())}")
    return iv


@dataclass(frozen=True)
class CaseRecord:
    """One image of one patient, with its masks, covariates, and instances."""

    patient_id: str
    image_id: str
    image_path: str
    tumor_mask_path: str
    uterus_mask_path: str | None
    instance_classes: dict[int, str]  # instance label -> tumor class
    age_years: int
    menstrual_status: int
    adenomyosis: int
    fat_saturated: int
    split: str | None = None

    @property
    def case_key(self) -> tuple[str, str]:
        return (self.patient_id, self.image_id)


@dataclass(frozen=True)
class TaskSpec:
    """A binary task: which tumor classes count positive and negative.

    Instances of other classes are excluded from the task entirely.
    """

    name: str
    positive: frozenset[str]
    negative: frozenset[str]

    def __post_init__(self) -> None:
        for cls in self.positive | self.negative:
            if cls not in TUMOR_CLASSES:
                raise ManifestError(f"task {self.name}: unknown class {cls!r}")
        if self.positive & self.negative:
            raise ManifestError(f"task {self.name}: classes on both sides")
        if not self.positive or not self.negative:
            raise ManifestError(f"task {self.name}: both sides must be non-empty")

    def label_for(self, tumor_class: str) -> int | None:
        if tumor_class in self.positive:
            return 1
        if tumor_class in self.negative:
            return 0
        return None


BUILTIN_TASKS = {
    "benign_vs_malignant": TaskSpec(
        "benign_vs_malignant",
        positive=frozenset({"STUMP", "LMS"}),
        negative=frozenset({"NDLM", "DLM", "CLM"}),
    ),
    "dlm_vs_lms": TaskSpec(
        "dlm_vs_lms", positive=frozenset({"LMS"}), negative=frozenset({"DLM"})
    ),
}


@dataclass
class Manifest:
    """Validated cohort: case records in file order, unique (patient, image)."""

    cases: list[CaseRecord] = field(default_factory=list)

    def __iter__(self):
        return iter(self.cases)

    def __len__(self) -> int:
        return len(self.cases)

    def case(self, patient_id: str, image_id: str) -> CaseRecord:
        for c in self.cases:
            if c.case_key == (patient_id, image_id):
                return c
        raise ManifestError(f"no case ({patient_id}, {image_id}) in manifest")

    def patients(self) -> list[str]:
        seen: dict[str, None] = {}
        for c in self.cases:
            seen.setdefault(c.patient_id, None)
        return list(seen)

    def instances(self) -> list[tuple[str, str, int, str]]:
        """All (patient_id, image_id, instance_label, instance_class)."""
        out = []
        for c in self.cases:
            for label in sorted(c.instance_classes):
                out.append((c.patient_id, c.image_id, label, c.instance_classes[label]))
        return out


def load_manifest(path: str, *, check_files: bool = True) -> Manifest:
    """Load and validate a manifest CSV.

    check_files verifies every referenced image/mask path exists (relative
    paths resolve against the CSV's directory).
    """
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ManifestError(f"{path}: empty manifest")
            missing = [c for c in MANIFEST_COLUMNS if c not in reader.fieldnames]
            if missing:
                raise ManifestError(f"{path}: missing columns {missing}")
            rows = list(reader)
    except OSError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    if not rows:
        raise ManifestError(f"{path}: manifest has a header but no rows")

    def resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base, p)

    grouped: dict[tuple[str, str], list[dict]] = {}
    order: list[tuple[str, str]] = []
    for i, row in enumerate(rows, start=2):
        pid = row["patient_id"].strip()
        iid = row["image_id"].strip()
        if not pid or not iid:
            raise ManifestError(f"{path}:{i}: empty patient_id or image_id")
        key = (pid, iid)
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append(row)

    cases: list[CaseRecord] = []
    for key in order:
        group = grouped[key]
        first = group[0]
        case_cols = [
            "image_path",
            "tumor_mask_path",
            "uterus_mask_path",
            "age_years",
            "menstrual_status",
            "adenomyosis",
            "fat_saturated",
            "split",
        ]
        for row in group[1:]:
            for col in case_cols:
                if row[col].strip() != first[col].strip():
                    raise ManifestError(
                        f"{path}: case {key} rows disagree on {col!r}: "
                        f"{first[col]!r} vs {row[col]!r}"
                    )
        instance_classes: dict[int, str] = {}
        for row in group:
            try:
                label = int(row["instance_label"])
            except ValueError:
                raise ManifestError(
                    f"{path}: case {key}: bad instance_label {row['instance_label']!r}"
                ) from None
            if label <= 0:
                raise ManifestError(f"{path}: case {key}: instance_label must be >= 1")
            if label in instance_classes:
                raise ManifestError(f"{path}: case {key}: duplicate instance_label {label}")
            cls = row["instance_class"].strip().upper()
            if cls not in TUMOR_CLASSES:
                raise ManifestError(
                    f"{path}: case {key}: unknown instance_class {row['instance_class']!r}"
                )
            instance_classes[label] = cls
        try:
            age = int(first["age_years"])
        except ValueError:
            raise ManifestError(
                f"{path}: case {key}: bad age_years {first['age_years']!r}"
            ) from None
        if age < 0:
            raise ManifestError(f"{path}: case {key}: negative age_years")
        split = first["split"].strip().lower() or None
        if split not in (None, "train", "test"):
            raise ManifestError(f"{path}: case {key}: split must be train/test/empty")
        uterus = first["uterus_mask_path"].strip()
        rec = CaseRecord(
            patient_id=key[0],
            image_id=key[1],
            image_path=resolve(first["image_path"].strip()),
            tumor_mask_path=resolve(first["tumor_mask_path"].strip()),
            uterus_mask_path=resolve(uterus) if uterus else None,
            instance_classes=instance_classes,
            age_years=age,
            menstrual_status=_decode(first["menstrual_status"], MENSTRUAL_CODES, "menstrual_status"),
            adenomyosis=_decode(first["adenomyosis"], ADENOMYOSIS_CODES, "adenomyosis"),
            fat_saturated=_decode(first["fat_saturated"], FAT_SAT_CODES, "fat_saturated"),
            split=split,
        )
        if check_files:
            paths = [rec.image_path, rec.tumor_mask_path]
            if rec.uterus_mask_path:
                paths.append(rec.uterus_mask_path)
            for p in paths:
                if not os.path.isfile(p):
                    raise ManifestError(f"{path}: case {key}: file not found: {p}")
        cases.append(rec)
    return Manifest(cases)


def write_manifest(path: str, manifest: Manifest) -> None:
    """Write a manifest CSV (one row per instance, deterministic order)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for c in manifest.cases:
            for label in sorted(c.instance_classes):
                writer.writerow(
                    [
                        c.patient_id,
                        c.image_id,
                        c.image_path,
                        c.tumor_mask_path,
                        c.uterus_mask_path or "",
                        label,
                        c.instance_classes[label],
                        c.age_years,
                        c.menstrual_status,
                        c.adenomyosis,
                        c.fat_saturated,
                        c.split or "",
                    ]
                )


@dataclass(frozen=True)
class SplitResult:
    train: tuple[tuple[str, str], ...]  # case keys
    test: tuple[tuple[str, str], ...]
    warnings: tuple[str, ...] = ()


def _tertile(value: float, edges: tuple[float, float]) -> int:
    return int(value > edges[0]) + int(value > edges[1])


def stratified_group_split(
    manifest: Manifest,
    test_fraction: float,
    volumes_ml: dict[tuple[str, str, int], float],
    seed: int,
) -> SplitResult:
    """Patient-grouped train/test split stratified by tumor class and size.

    Each case's stratum is (class of its largest instance, tertile of its
    total tumor volume); a patient's stratum comes from their largest case.
    All images of a patient land on the same side. Within each stratum the
    test share is round(test_fraction * patients). Strata holding a single
    patient go to train with a warning.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ManifestError(f"test_fraction must be in (0, 1), got {test_fraction}")
    for pid, iid, label, _cls in manifest.instances():
        if (pid, iid, label) not in volumes_ml:
            raise ManifestError(f"missing volume for instance ({pid}, {iid}, {label})")

    case_volume: dict[tuple[str, str], float] = {}
    case_class: dict[tuple[str, str], str] = {}
    for c in manifest.cases:
        vols = {lab: volumes_ml[(c.patient_id, c.image_id, lab)] for lab in c.instance_classes}
        case_volume[c.case_key] = sum(vols.values())
        biggest = max(sorted(vols), key=lambda lab: (vols[lab], -lab))
        case_class[c.case_key] = c.instance_classes[biggest]

    all_vols = np.array([case_volume[c.case_key] for c in manifest.cases])
    edges = (float(np.quantile(all_vols, 1 / 3)), float(np.quantile(all_vols, 2 / 3)))

    patient_cases: dict[str, list[CaseRecord]] = {}
    for c in manifest.cases:
        patient_cases.setdefault(c.patient_id, []).append(c)
    patient_stratum: dict[str, tuple[str, int]] = {}
    for pid, cases in patient_cases.items():
        biggest = max(cases, key=lambda c: (case_volume[c.case_key], c.image_id))
        patient_stratum[pid] = (
            case_class[biggest.case_key],
            _tertile(case_volume[biggest.case_key], edges),
        )

    strata: dict[tuple[str, int], list[str]] = {}
    for pid in manifest.patients():
        strata.setdefault(patient_stratum[pid], []).append(pid)

    rng = np.random.default_rng(seed)
    warnings: list[str] = []
    test_patients: set[str] = set()
    for stratum in sorted(strata):
        pids = sorted(strata[stratum])
        if len(pids) == 1:
            warnings.append(
                f"stratum {stratum} has a single patient {pids[0]}; assigned to train"
            )
            continue
        n_test = int(round(test_fraction * len(pids)))
        n_test = min(max(n_test, 0), len(pids) - 1)
        perm = rng.permutation(len(pids))
        test_patients.update(pids[i] for i in perm[:n_test])

    train_keys: list[tuple[str, str]] = []
    test_keys: list[tuple[str, str]] = []
    for c in manifest.cases:
        (test_keys if c.patient_id in test_patients else train_keys).append(c.case_key)
    return SplitResult(tuple(train_keys), tuple(test_keys), tuple(warnings))


def apply_split(manifest: Manifest, result: SplitResult) -> Manifest:
    """Return a copy of the manifest with the split column filled in."""
    test = set(result.test)
    cases = [
        CaseRecord(
            patient_id=c.patient_id,
            image_id=c.image_id,
            image_path=c.image_path,
            tumor_mask_path=c.tumor_mask_path,
            uterus_mask_path=c.uterus_mask_path,
            instance_classes=dict(c.instance_classes),
            age_years=c.age_years,
            menstrual_status=c.menstrual_status,
            adenomyosis=c.adenomyosis,
            fat_saturated=c.fat_saturated,
            split="test" if c.case_key in test else "train",
        )
        for c in manifest.cases
    ]
    return Manifest(cases)


def binarize(
    manifest: Manifest, task: TaskSpec
) -> list[tuple[tuple[str, str, int], int]]:
    """Map instances to binary task labels; off-task instances are dropped."""
    out: list[tuple[tuple[str, str, int], int]] = []
    for pid, iid, label, cls in manifest.instances():
        y = task.label_for(cls)
        if y is not None:
            out.append(((pid, iid, label), y))
    if not out:
        raise ManifestError(f"task {task.name}: no instances in any task class")
    return out
