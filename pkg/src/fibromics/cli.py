"""Command line pipeline: split, extract, segeval, learncurve, screen,
train, evaluate, and bayes subcommands.

Every command is deterministic given its inputs, config, and seed; reruns
produce byte-identical files. Outputs land in --out-dir and any partially
written files are removed when a command fails, so exit code 0 means all
outputs exist in full.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations

import numpy as np

from .bayes import OperatingPoint, format_posterior, one_in_n, posterior_probability
from .classify.study import (
    TrainedPipeline,
    _rank_key,
    evaluate_test,
    load_pipeline,
    save_pipeline,
    train_study,
)
from .config import RunConfig, load_config
from .errors import ConfigError, ExtractionError, FibromicsError, ManifestError
from .features import extract_instance, feature_names
from .learncurve import fit_plateau, plateau_point
from .manifest import (
    CaseRecord,
    Manifest,
    apply_split,
    load_manifest,
    stratified_group_split,
    write_manifest,
)
from .nifti import LabelGrid, merge_uterus_and_tumor, read_label_nifti, read_nifti
from .segmetrics import connected_components, cross_match, dice, summarize
from .stats import mann_whitney_u
from .svgplot import boxplot, curve_plot
from .table import FeatureTable, RowKey, read_feature_table, task_arrays, write_feature_table

SCREEN_ALPHA = 0.05

_REPORT_HEADER = [
    "selector",
    "selector_params",
    "learner",
    "learner_params",
    "train_f1_mean",
    "val_f1_mean",
    "val_ci_low",
    "val_ci_high",
    "test_f1_mean",
]


def _fmt(value: float) -> str:
    return repr(float(value))


class _Outputs:
    """Tracks files a command writes so failures can clean up after themselves."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.created: list[str] = []

    def claim(self, name: str) -> str:
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, name)
        self.created.append(path)
        return path

    def write_text(self, name: str, text: str) -> str:
        path = self.claim(name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return path

    def discard(self) -> None:
        for path in self.created:
            try:
                os.unlink(path)
            except OSError:
                pass


def _csv_text(rows: list[list[str]], comments: tuple[str, ...] = ()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _require_seed(cfg: RunConfig, command: str) -> int:
    if cfg.seed is None:
        raise ConfigError(f"{command} needs a seed (--seed or 'seed =' in the config)")
    return cfg.seed


def _split_map(manifest_path: str) -> dict[tuple[str, str], str]:
    manifest = load_manifest(manifest_path, check_files=False)
    out = {}
    for case in manifest.cases:
        if case.split is None:
            raise ManifestError(
                f"case {case.patient_id}/{case.image_id} has no split; run 'split' first"
            )
        out[case.case_key] = case.split
    return out


def _filter_table(table: FeatureTable, split_map, wanted: str) -> FeatureTable:
    keep = []
    for i, key in enumerate(table.keys):
        case = (key.patient_id, key.image_id)
        if case not in split_map:
            raise ManifestError(f"feature row {case[0]}/{case[1]} missing from the manifest")
        if split_map[case] == wanted:
            keep.append(i)
    if not keep:
        raise ManifestError(f"no feature rows with split={wanted}")
    return table.subset(keep)


def _instance_volumes(manifest: Manifest) -> dict[tuple[str, str, int], float]:
    """Tumor volume in ml per (patient, image, label), from the mask files."""
    volumes: dict[tuple[str, str, int], float] = {}
    for case in manifest.cases:
        mask = read_label_nifti(case.tumor_mask_path)
        counts = np.bincount(mask.data.ravel())
        for label in case.instance_classes:
            if label >= len(counts) or counts[label] == 0:
                raise ManifestError(
                    f"case {case.patient_id}/{case.image_id}: label {label} "
                    f"not present in {case.tumor_mask_path}"
                )
            volumes[(case.patient_id, case.image_id, label)] = (
                float(counts[label]) * mask.voxel_volume_mm3() / 1000.0
            )
    return volumes


def cmd_split(args, cfg: RunConfig, out: _Outputs) -> None:
    seed = _require_seed(cfg, "split")
    fraction = args.test_fraction if args.test_fraction is not None else cfg.test_fraction
    manifest = load_manifest(args.manifest)
    volumes = _instance_volumes(manifest)
    result = stratified_group_split(manifest, fraction, volumes, seed)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    assigned = apply_split(manifest, result)
    path = out.claim(args.out)
    write_manifest(path, assigned)
    n_test = sum(1 for c in assigned.cases if c.split == "test")
    print(f"split: {len(assigned.cases) - n_test} train / {n_test} test images -> {path}")


def _mask_path(directory: str, patient_id: str, image_id: str, kind: str) -> str | None:
    for ext in (".nii.gz", ".nii"):
        path = os.path.join(directory, f"{patient_id}_{image_id}_{kind}{ext}")
        if os.path.isfile(path):
            return path
    return None


def _case_rows(case: CaseRecord, source: str, predicted_dir: str | None, cfg: RunConfig):
    """Extract all instances of one case; returns (RowKey, values) pairs."""
    image = read_nifti(case.image_path)
    manual = read_label_nifti(case.tumor_mask_path)
    rows = []
    if source == "manual":
        targets = [(label, manual, label) for label in sorted(case.instance_classes)]
    else:
        path = _mask_path(predicted_dir, case.patient_id, case.image_id, "tumor")
        if path is None:
            raise ExtractionError(
                f"case {case.patient_id}/{case.image_id}: no predicted mask "
                f"{case.patient_id}_{case.image_id}_tumor.nii[.gz] in {predicted_dir}"
            )
        predicted = read_label_nifti(path)
        comps = LabelGrid(
            connected_components(predicted.data > 0), predicted.spacing, predicted.origin
        )
        matches = {m.instance_label: m for m in cross_match(manual, predicted.data > 0)}
        targets = []
        for label in sorted(case.instance_classes):
            match = matches[label]
            if match.component is None:
                raise ExtractionError(
                    f"case {case.patient_id}/{case.image_id}: instance {label} "
                    "overlaps no predicted component"
                )
            targets.append((label, comps, match.component))
    for manual_label, mask, roi_label in targets:
        try:
            vector = extract_instance(image, mask, roi_label, cfg.preprocess)
        except FibromicsError as exc:
            raise ExtractionError(
                f"case {case.patient_id}/{case.image_id} instance {manual_label}: {exc}"
            ) from exc
        key = RowKey(
            patient_id=case.patient_id,
            image_id=case.image_id,
            instance_label=manual_label,
            instance_class=case.instance_classes[manual_label],
            source=source,
        )
        rows.append((key, vector.values))
    return rows


def cmd_extract(args, cfg: RunConfig, out: _Outputs) -> None:
    manifest = load_manifest(args.manifest)
    if args.source == "predicted" and not args.predicted_dir:
        raise ConfigError("--predicted-dir is required with --source predicted")
    cases = list(manifest.cases)
    if args.split != "all":
        for case in cases:
            if case.split is None:
                raise ManifestError(
                    f"case {case.patient_id}/{case.image_id} has no split; run 'split' first"
                )
        cases = [c for c in cases if c.split == args.split]
        if not cases:
            raise ManifestError(f"no cases with split={args.split}")

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futures = [
                pool.submit(_case_rows, c, args.source, args.predicted_dir, cfg) for c in cases
            ]
            pairs = [row for f in futures for row in f.result()]
    else:
        pairs = [row for c in cases for row in _case_rows(c, args.source, args.predicted_dir, cfg)]

    table = FeatureTable(
        keys=[k for k, _v in pairs],
        feature_names=feature_names(),
        matrix=np.array([v for _k, v in pairs], dtype=np.float64),
    )
    path = out.claim(args.out)
    write_feature_table(path, table)
    print(f"extract: {len(table)} instances from {len(cases)} cases -> {path}")


def _load_mask_set(name: str, directory: str | None, case: CaseRecord):
    """Returns (tumor LabelGrid, uterus LabelGrid | None) for one case."""
    if directory is None:
        tumor = read_label_nifti(case.tumor_mask_path)
        uterus = (
            read_label_nifti(case.uterus_mask_path) if case.uterus_mask_path else None
        )
        return tumor, uterus
    tumor_path = _mask_path(directory, case.patient_id, case.image_id, "tumor")
    if tumor_path is None:
        raise ManifestError(
            f"mask set {name}: no {case.patient_id}_{case.image_id}_tumor.nii[.gz] "
            f"in {directory}"
        )
    uterus_path = _mask_path(directory, case.patient_id, case.image_id, "uterus")
    return read_label_nifti(tumor_path), (
        read_label_nifti(uterus_path) if uterus_path else None
    )


def cmd_segeval(args, cfg: RunConfig, out: _Outputs) -> None:
    manifest = load_manifest(args.manifest)
    sets: list[tuple[str, str | None]] = []
    if args.include_manual:
        sets.append(("manual", None))
    for item in args.masks or []:
        name, eq, directory = item.partition("=")
        if not eq or not name or not directory:
            raise ConfigError(f"--masks expects NAME=DIR, got {item!r}")
        if not os.path.isdir(directory):
            raise ConfigError(f"--masks {name}: {directory} is not a directory")
        sets.append((name, directory))
    if len(sets) < 2:
        raise ConfigError("segeval needs at least two mask sets (--masks/--include-manual)")
    if len({n for n, _d in sets}) != len(sets):
        raise ConfigError("mask set names must be unique")

    values: dict[tuple[str, str], list[float]] = {}
    rows: list[list[str]] = [["comparison", "task", "case_id", "dsc", "ci_low", "ci_high"]]
    case_rows: list[list[str]] = []
    for case in manifest.cases:
        case_id = f"{case.patient_id}_{case.image_id}"
        loaded = {name: _load_mask_set(name, directory, case) for name, directory in sets}
        for (na, _), (nb, _) in combinations(sets, 2):
            pair = f"{na}_vs_{nb}"
            ta, ua = loaded[na]
            tb, ub = loaded[nb]
            d = dice(ta.data > 0, tb.data > 0)
            values.setdefault((pair, "tumor"), []).append(d)
            case_rows.append([pair, "tumor", case_id, _fmt(d), "", ""])
            if ua is not None and ub is not None:
                d = dice(
                    merge_uterus_and_tumor(ua, ta).data > 0,
                    merge_uterus_and_tumor(ub, tb).data > 0,
                )
                values.setdefault((pair, "merged"), []).append(d)
                case_rows.append([pair, "merged", case_id, _fmt(d), "", ""])

    rows.extend(case_rows)
    for (pair, task), dscs in values.items():
        summary = summarize(dscs)
        rows.append(
            [pair, task, "summary", _fmt(summary.mean), _fmt(summary.ci_low), _fmt(summary.ci_high)]
        )
    path = out.write_text("agreement.csv", _csv_text(rows))
    for task in ("tumor", "merged"):
        groups = [(pair, dscs) for (pair, t), dscs in values.items() if t == task]
        if groups:
            svg = boxplot(
                groups,
                title=f"Segmentation agreement ({task})",
                y_label="Dice similarity coefficient",
                y_range=(0.0, 1.0),
            )
            out.write_text(f"agreement_{task}.svg", svg)
    print(f"segeval: {len(case_rows)} case comparisons -> {path}")


def cmd_learncurve(args, cfg: RunConfig, out: _Outputs) -> None:
    with open(args.points, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ConfigError(f"{args.points}: expected a CSV with columns n,dsc")
        points = [(float(r[0]), float(r[1])) for r in reader if r]
    model = fit_plateau([p[0] for p in points], [p[1] for p in points])
    if model.degenerate:
        plateau_n = int(min(p[0] for p in points))
        print("warning: flat learning curve; plateau set to smallest n given", file=sys.stderr)
    else:
        plateau_n = plateau_point(model, args.tolerance)
    rows = [
        ["y0", "ym", "k", "plateau_n", "degenerate"],
        [_fmt(model.y0), _fmt(model.ym), _fmt(model.k), str(plateau_n), str(model.degenerate).lower()],
    ]
    out.write_text("learncurve_fit.csv", _csv_text(rows))
    svg = curve_plot(
        points,
        lambda n: float(model.predict(n)),
        title="Segmentation learning curve",
        x_label="training cases",
        y_label="mean DSC",
    )
    out.write_text("learncurve.svg", svg)
    print(
        f"learncurve: y0={model.y0:.6g} ym={model.ym:.6g} k={model.k:.6g} plateau_n={plateau_n}"
    )


def cmd_screen(args, cfg: RunConfig, out: _Outputs) -> None:
    table = read_feature_table(args.features)
    task = cfg.task(args.task)
    idx, y, _patients = task_arrays(table, task)
    if int(y.sum()) in (0, len(y)):
        raise ConfigError(f"task {task.name}: both classes are needed for screening")
    x = table.matrix[idx]
    rows = [["feature", "p_value", "significant"]]
    n_sig = 0
    for j, name in enumerate(table.feature_names):
        result = mann_whitney_u(x[y == 0, j], x[y == 1, j])
        significant = result.p_value < SCREEN_ALPHA
        n_sig += int(significant)
        rows.append([name, _fmt(result.p_value), "yes" if significant else "no"])
    path = out.write_text(
        args.out, _csv_text(rows, comments=(f"alpha = {SCREEN_ALPHA}",))
    )
    print(f"screen: {n_sig}/{len(table.feature_names)} features significant -> {path}")


def _report_rows(pipeline: TrainedPipeline, test_f1: float | None) -> list[list[str]]:
    rows = [list(_REPORT_HEADER)]
    order = sorted(range(len(pipeline.combos)), key=lambda i: (_rank_key(pipeline.combos[i]), i))
    for rank, i in enumerate(order):
        combo = pipeline.combos[i]
        test_cell = _fmt(test_f1) if (test_f1 is not None and i == pipeline.best_index) else ""
        rows.append(
            [
                combo.selector.name,
                combo.selector.describe(),
                combo.learner.name,
                combo.learner.describe(),
                _fmt(combo.train_f1_mean),
                _fmt(combo.val_f1_mean),
                _fmt(combo.val_ci_low),
                _fmt(combo.val_ci_high),
                test_cell,
            ]
        )
    return rows


def _single_feature_rows(pipeline: TrainedPipeline) -> list[list[str]]:
    rows = [["feature", "train_f1_mean", "val_f1_mean", "val_ci_low", "val_ci_high"]]
    ranked = sorted(pipeline.single_feature.results, key=lambda r: (-r.val_f1_mean, r.feature))
    for r in ranked:
        rows.append(
            [r.feature, _fmt(r.train_f1_mean), _fmt(r.val_f1_mean), _fmt(r.val_ci_low), _fmt(r.val_ci_high)]
        )
    return rows


def cmd_train(args, cfg: RunConfig, out: _Outputs) -> None:
    seed = _require_seed(cfg, "train")
    table = read_feature_table(args.features)
    if args.manifest:
        table = _filter_table(table, _split_map(args.manifest), "train")
    task = cfg.task(args.task)
    pipeline = train_study(
        table,
        task,
        n_folds=cfg.folds,
        seed=seed,
        selectors=cfg.selectors,
        learners=cfg.learners,
        threads=cfg.threads,
    )
    pipeline_path = out.claim("pipeline.bin")
    save_pipeline(pipeline_path, pipeline)
    out.write_text("model_report.csv", _csv_text(_report_rows(pipeline, None)))
    out.write_text("single_feature_report.csv", _csv_text(_single_feature_rows(pipeline)))
    best = pipeline.best
    sf = pipeline.single_feature
    best_sf = sf.result_for(sf.best_feature)
    print(
        f"train: best model {best.selector.name}[{best.selector.describe()}] + "
        f"{best.learner.name}[{best.learner.describe()}], "
        f"val F1 {best.val_f1_mean:.3f} [{best.val_ci_low:.3f}, {best.val_ci_high:.3f}]"
    )
    print(
        f"train: best single feature {sf.best_feature}, "
        f"val F1 {best_sf.val_f1_mean:.3f} [{best_sf.val_ci_low:.3f}, {best_sf.val_ci_high:.3f}]"
    )
    print(f"train: pipeline -> {pipeline_path}")


def cmd_evaluate(args, cfg: RunConfig, out: _Outputs) -> None:
    pipeline = load_pipeline(args.pipeline)
    table = read_feature_table(args.features)
    if args.manifest:
        table = _filter_table(table, _split_map(args.manifest), "test")
    result = evaluate_test(pipeline, table)
    rows = [["metric", "value"]]
    rows.append(["n_test", str(result.n_test)])
    rows.append(["n_positive", str(result.n_positive)])
    for i, f1 in enumerate(result.per_model_f1, start=1):
        rows.append([f"fold_{i}_f1", _fmt(f1)])
    rows.append(["test_f1_mean", _fmt(result.mean_f1)])
    rows.append(["test_ci_low", _fmt(result.ci_low)])
    rows.append(["test_ci_high", _fmt(result.ci_high)])
    rows.append(["majority_vote_f1", _fmt(result.vote_f1)])
    rows.append(["naive_benchmark_f1", _fmt(result.benchmark_f1)])
    rows.append(["single_feature", result.single_feature])
    rows.append(["single_feature_f1_mean", _fmt(result.single_feature_f1_mean)])
    rows.append(["single_feature_vote_f1", _fmt(result.single_feature_vote_f1)])
    path = out.write_text("evaluation.csv", _csv_text(rows))
    out.write_text("model_report_evaluated.csv", _csv_text(_report_rows(pipeline, result.mean_f1)))
    print(
        f"evaluate: test F1 {result.mean_f1:.3f} [{result.ci_low:.3f}, {result.ci_high:.3f}] "
        f"over {result.n_test} instances"
    )
    print(f"evaluate: majority vote F1 {result.vote_f1:.3f}")
    print(f"evaluate: naive benchmark F1 {result.benchmark_f1:.3f}")
    print(
        f"evaluate: single feature {result.single_feature} "
        f"F1 {result.single_feature_f1_mean:.3f} (vote {result.single_feature_vote_f1:.3f})"
    )
    print(f"evaluate: report -> {path}")


def cmd_bayes(args, cfg: RunConfig, out: _Outputs) -> None:
    op = OperatingPoint.from_counts(args.tp, args.fn, args.fp, args.tn)
    posterior = posterior_probability(args.prior, op)
    print(
        f"bayes: tpr={op.tpr:.4g} fpr={op.fpr:.4g} prior={args.prior:.4g} -> "
        f"posterior = {format_posterior(posterior)} (1 in {one_in_n(posterior)})"
    )


def _add_global_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=argparse.SUPPRESS, help="config file path")
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads")
    parser.add_argument(
        "--out-dir", default=argparse.SUPPRESS, help="output directory (default .)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fibromics",
        description="Radiomic feature extraction and tumor classification pipeline.",
    )
    _add_global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="assign stratified patient-grouped train/test splits")
    _add_global_flags(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--out", default="manifest_split.csv")
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("extract", help="extract the 107-feature vector per tumor instance")
    _add_global_flags(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--source", choices=("manual", "predicted"), default="manual")
    p.add_argument("--predicted-dir", default=None, help="directory of predicted masks")
    p.add_argument("--split", choices=("train", "test", "all"), default="all")
    p.add_argument("--out", default="features.csv")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("segeval", help="pairwise Dice agreement between mask sets")
    _add_global_flags(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--masks", action="append", metavar="NAME=DIR")
    p.add_argument("--include-manual", action="store_true", help="include manifest masks")
    p.set_defaults(handler=cmd_segeval)

    p = sub.add_parser("learncurve", help="fit the exponential-plateau learning curve")
    _add_global_flags(p)
    p.add_argument("--points", required=True, help="CSV of n,dsc points")
    p.add_argument("--tolerance", type=float, default=0.01)
    p.set_defaults(handler=cmd_learncurve)

    p = sub.add_parser("screen", help="Mann-Whitney significance screen per feature")
    _add_global_flags(p)
    p.add_argument("--features", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--out", default="significance.csv")
    p.set_defaults(handler=cmd_screen)

    p = sub.add_parser("train", help="cross-validated selector x learner grid search")
    _add_global_flags(p)
    p.add_argument("--features", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--manifest", default=None, help="manifest with splits; keeps train rows")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("evaluate", help="score a trained pipeline on the test set")
    _add_global_flags(p)
    p.add_argument("--features", required=True)
    p.add_argument("--pipeline", required=True)
    p.add_argument("--manifest", default=None, help="manifest with splits; keeps test rows")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("bayes", help="posterior malignancy risk from an operating point")
    _add_global_flags(p)
    p.add_argument("--prior", type=float, required=True)
    p.add_argument("--tp", type=int, required=True)
    p.add_argument("--fn", type=int, required=True)
    p.add_argument("--fp", type=int, required=True)
    p.add_argument("--tn", type=int, required=True)
    p.set_defaults(handler=cmd_bayes)

    return parser


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = load_config(getattr(ns, "config", None)).with_overrides(
            seed=getattr(ns, "seed", None), threads=getattr(ns, "threads", None)
        )
        outputs = _Outputs(getattr(ns, "out_dir", "."))
    except FibromicsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        ns.handler(ns, cfg, outputs)
    except FibromicsError as exc:
        outputs.discard()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        outputs.discard()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
