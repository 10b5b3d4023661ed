"""Command-line front end for the takeover pipeline.

Five subcommands cover the full loop: `generate` synthesizes a session
directory, `features` turns it into a raw feature CSV, `train` fits a
network bundle, `eval` scores held-out rows (or runs grouped k-fold),
and `predict` streams predictions for new feature rows.

Configuration precedence, lowest to highest: JSON config file, then
TAKEOVER_<KEY> environment variables (paths only), then command-line
flags. Exit codes: 0 ok, 2 config error, 3 data error, 4 schema error,
1 internal failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import features, labeling, metrics, nn, sampling, synth
from .errors import (
    ConfigError,
    DataError,
    EmptyMatrix,
    InvalidSpec,
    IoFailure,
    SchemaError,
    SchemaMismatch,
    TakeoverError,
)

ENV_PREFIX = "TAKEOVER_"
# keys a config file may set under "paths"; same names double as flags
PATH_KEYS = ("spec", "data", "features", "events", "bundle", "out")
CONFIG_KEYS = {"paths", "task", "window_s", "seed", "smote_k",
               "split_ratios", "folds", "network"}
NETWORK_KEYS = {"hidden_dims", "learning_rate", "batch_size", "max_epochs",
                "beta1", "beta2", "epsilon", "patience"}


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved run settings shared by all subcommands."""

    paths: dict[str, str] = field(default_factory=dict)
    task: str = "intention"
    window_s: float = features.WINDOW_S
    seed: int | None = None
    smote_k: int = sampling.SMOTE_K
    split_ratios: tuple[float, float, float] = sampling.SPLIT_RATIOS
    folds: int = 0
    network: dict = field(default_factory=dict)
    baseline_preds: tuple[str, ...] = ()

    def __post_init__(self):
        if self.task not in labeling.TASKS:
            raise InvalidSpec(f"unknown task {self.task!r}; expected one of {labeling.TASKS}")
        if not self.window_s > 0:
            raise InvalidSpec("window_s must be positive")
        if self.folds < 0:
            raise InvalidSpec("folds must be >= 0")
        if self.smote_k < 1:
            raise InvalidSpec("smote_k must be >= 1")
        ratios = tuple(float(r) for r in self.split_ratios)
        if len(ratios) != 3 or any(r <= 0 for r in ratios) \
                or abs(sum(ratios) - 1.0) > 1e-9:
            raise InvalidSpec("split_ratios must be three positive numbers summing to 1")
        object.__setattr__(self, "split_ratios", ratios)
        unknown = set(self.network) - NETWORK_KEYS
        if unknown:
            raise InvalidSpec(f"unknown network keys: {sorted(unknown)}")


def _read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise InvalidSpec(f"file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise InvalidSpec(f"{path}: expected a JSON object")
    return raw


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    raw: dict = {}
    if getattr(args, "config", None):
        raw = _read_json(args.config)
        unknown = set(raw) - CONFIG_KEYS
        if unknown:
            raise InvalidSpec(f"unknown config keys: {sorted(unknown)}")
    paths = {str(k): str(v) for k, v in raw.get("paths", {}).items()}
    for key in PATH_KEYS:
        env = os.environ.get(ENV_PREFIX + key.upper())
        if env:
            paths[key] = env
        flag = getattr(args, key, None)
        if flag is not None:
            paths[key] = str(flag)
    kwargs: dict = {}
    for key in ("task", "window_s", "seed", "smote_k", "folds"):
        flag = getattr(args, key, None)
        if flag is not None:
            kwargs[key] = flag
        elif key in raw:
            kwargs[key] = raw[key]
    if "split_ratios" in raw:
        kwargs["split_ratios"] = tuple(raw["split_ratios"])
    preds = getattr(args, "baseline_preds", None)
    return PipelineConfig(paths=paths, network=dict(raw.get("network", {})),
                          baseline_preds=tuple(preds or ()), **kwargs)


def _require_path(cfg: PipelineConfig, key: str, must_exist: bool = True) -> Path:
    value = cfg.paths.get(key)
    if value is None:
        raise InvalidSpec(f"missing required path {key!r} (flag --{key}, config paths.{key}, "
                          f"or {ENV_PREFIX}{key.upper()})")
    path = Path(value)
    if must_exist and not path.exists():
        raise InvalidSpec(f"path for {key!r} does not exist: {path}")
    return path


def _network_config(overrides: dict, input_dim: int, output_dim: int,
                    seed: int) -> nn.NetworkConfig:
    fields = dict(overrides)
    if "hidden_dims" in fields:
        fields["hidden_dims"] = tuple(int(h) for h in fields["hidden_dims"])
    return nn.NetworkConfig(input_dim=input_dim, output_dim=output_dim,
                            seed=seed, **fields)


def _labeled_rows(matrix: features.FeatureMatrix, events_by_id: dict, task: str):
    """Rows that carry a label under the task, with labels and groups.

    Raises:
        SchemaMismatch: a feature row has no matching event.
        EmptyMatrix: no row is labelable (e.g. quality with no takeovers).
    """
    classes = labeling.task_classes(task)
    rows, labels, groups = [], [], []
    for i, eid in enumerate(matrix.event_ids):
        event = events_by_id.get(eid)
        if event is None:
            raise SchemaMismatch(f"no event found for feature row {eid!r}")
        name = labeling.task_label(labeling.label_event(event), task)
        if name is None:
            continue
        rows.append(i)
        labels.append(classes.index(name))
        groups.append(event.subject_id)
    if not rows:
        raise EmptyMatrix(f"no row carries a {task!r} label")
    return matrix.subset(rows), np.asarray(labels, dtype=int), tuple(groups)


def _skeleton(matrix: features.FeatureMatrix, labels: np.ndarray,
              groups: tuple[str, ...], classes) -> sampling.LabeledDataset:
    # split decisions depend only on groups/ids, so raw NaN features are fine
    return sampling.LabeledDataset(
        X=matrix.numeric, y=labels, groups=groups, event_ids=matrix.event_ids,
        class_names=tuple(classes), feature_names=matrix.numeric_names)


def _fused_dataset(matrix, labels, groups, classes, transform, fused):
    return sampling.LabeledDataset(
        X=fused, y=labels, groups=groups, event_ids=matrix.event_ids,
        class_names=tuple(classes), feature_names=transform.fused_names,
        indicator_groups=transform.indicator_groups)


def cmd_generate(cfg: PipelineConfig) -> int:
    spec_raw = _read_json(_require_path(cfg, "spec"))
    spec = synth.SessionSpec.from_dict(spec_raw)
    if cfg.seed is not None:
        spec = replace(spec, seed=cfg.seed)
    out = _require_path(cfg, "out", must_exist=False)
    session = synth.generate(spec)
    synth.export(session, out)
    print(f"generate: {spec.n_subjects} subjects, {len(session.events)} events -> {out}")
    return 0


def cmd_features(cfg: PipelineConfig) -> int:
    data_dir = _require_path(cfg, "data")
    out = _require_path(cfg, "out", must_exist=False)
    trials, events, surveys = synth.ingest(data_dir)
    matrix, warnings = features.session_matrix(trials, events, surveys, cfg.window_s)
    for line in warnings:
        print(f"warning: {line}", file=sys.stderr)
    for flag in features.validate_ranges(matrix):
        print(f"warning: out-of-range {flag['feature']} on {flag['event_id']}: "
              f"{flag['value']:.6g}", file=sys.stderr)
    matrix = features.drop_sparse_columns(matrix)
    out.parent.mkdir(parents=True, exist_ok=True)
    features.save_matrix(matrix, out)
    print(f"features: {len(matrix)} rows, {len(matrix.numeric_names)} numeric "
          f"+ {len(matrix.categoricals)} categorical columns -> {out}")
    return 0


def cmd_train(cfg: PipelineConfig) -> int:
    matrix = features.load_matrix(_require_path(cfg, "features"))
    events = {e.event_id: e for e in
              labeling.read_events_csv(_require_path(cfg, "events"))}
    out_dir = _require_path(cfg, "out", must_exist=False)
    seed = cfg.seed if cfg.seed is not None else 0
    classes = labeling.task_classes(cfg.task)

    labeled, labels, groups = _labeled_rows(matrix, events, cfg.task)
    plan = sampling.grouped_split(_skeleton(labeled, labels, groups, classes),
                                  cfg.split_ratios, seed)
    transform, fused = features.fit_transform(labeled, train_ids=plan.train_ids)
    dataset = _fused_dataset(labeled, labels, groups, classes, transform, fused)
    train_set = dataset.subset(sampling.rows_for_ids(dataset, plan.train_ids))
    val_set = dataset.subset(sampling.rows_for_ids(dataset, plan.val_ids))
    balanced = sampling.smote(train_set, k=cfg.smote_k, seed=seed)

    net_cfg = _network_config(cfg.network, fused.shape[1], len(classes), seed)
    network, report = nn.train(balanced.X, balanced.y, val_set.X, val_set.y, net_cfg)
    bundle = nn.ModelBundle(task=cfg.task, class_names=tuple(classes),
                            network=network, config=net_cfg,
                            transform=transform.to_dict(), seed=seed)

    out_dir.mkdir(parents=True, exist_ok=True)
    nn.save_bundle(bundle, out_dir / "bundle.json")
    sampling.save_split_plan(plan, out_dir / "split.json")
    (out_dir / "train_report.json").write_text(
        json.dumps(asdict(report), indent=2, sort_keys=True) + "\n")
    print(f"train[{cfg.task}]: {len(balanced)} balanced rows "
          f"({len(train_set)} original), best epoch {report.best_epoch} "
          f"of {report.epochs_run} ({report.stopping_reason}) -> {out_dir}")
    return 0


def _eval_single_split(cfg: PipelineConfig, bundle, labeled, labels, groups,
                       out_dir: Path) -> int:
    classes = tuple(bundle.class_names)
    split_file = _require_path(cfg, "bundle").parent / "split.json"
    if split_file.is_file():
        plan = sampling.load_split_plan(split_file)
    else:
        plan = sampling.grouped_split(_skeleton(labeled, labels, groups, classes),
                                      cfg.split_ratios, bundle.seed)
    index = {eid: i for i, eid in enumerate(labeled.event_ids)}
    missing = [eid for eid in plan.test_ids if eid not in index]
    if missing:
        raise SchemaMismatch(f"test ids absent from feature file: {missing[:5]}")
    test_rows = [index[eid] for eid in plan.test_ids]

    transform = features.FeatureTransform.from_dict(bundle.transform)
    test_matrix = labeled.subset(test_rows)
    probs = nn.forward(bundle.network, features.apply_transform(transform, test_matrix))
    y_pred = np.argmax(probs, axis=1)
    preds = metrics.PredictionSet(labels[test_rows], y_pred, probs, classes)
    report = metrics.build_report(preds, bundle.task)

    rows = [metrics.ComparisonRow(bundle.task, "DNN", report.accuracy,
                                  report.weighted_f1)]
    for path in cfg.baseline_preds:
        ids, pred_names, _ = metrics.load_predictions_csv(path, classes)
        absent = [eid for eid in ids if eid not in index]
        if absent:
            raise SchemaMismatch(f"{path}: unknown event ids {absent[:5]}")
        ext = metrics.PredictionSet(
            labels[[index[eid] for eid in ids]],
            [classes.index(p) for p in pred_names], None, classes)
        rows.append(metrics.ComparisonRow(bundle.task, Path(path).stem,
                                          metrics.accuracy(ext),
                                          metrics.weighted_f1(ext)))

    out_dir.mkdir(parents=True, exist_ok=True)
    metrics.save_report(report, out_dir / "report.json")
    metrics.save_roc_csv(preds, out_dir / "roc.csv")
    metrics.save_confusion_csv(report, out_dir / "confusion.csv")
    metrics.save_predictions_csv(test_matrix.event_ids,
                                 [classes[i] for i in y_pred], probs, classes,
                                 out_dir / "predictions.csv")
    (out_dir / "comparison.txt").write_text(metrics.comparison_table(rows))
    print(f"eval[{bundle.task}]: {report.n_rows} test rows, "
          f"accuracy {report.accuracy:.4f}, weighted F1 {report.weighted_f1:.4f} "
          f"-> {out_dir}")
    return 0


def _eval_kfold(cfg: PipelineConfig, bundle, labeled, labels, groups,
                out_dir: Path) -> int:
    classes = tuple(bundle.class_names)
    skeleton = _skeleton(labeled, labels, groups, classes)
    plans = sampling.grouped_kfold(skeleton, cfg.folds, bundle.seed)
    presence = sampling.fold_class_presence(skeleton, plans)
    index = {eid: i for i, eid in enumerate(labeled.event_ids)}
    fold_rows = []
    for fi, plan in enumerate(plans):
        transform, fused = features.fit_transform(labeled, train_ids=plan.train_ids)
        dataset = _fused_dataset(labeled, labels, groups, classes, transform, fused)
        train_set = dataset.subset(sampling.rows_for_ids(dataset, plan.train_ids))
        test_rows = [index[eid] for eid in plan.test_ids]
        test_set = dataset.subset(test_rows)
        balanced = sampling.smote(train_set, k=cfg.smote_k, seed=bundle.seed + fi)
        net_cfg = replace(bundle.config, input_dim=fused.shape[1],
                          seed=bundle.seed + fi)
        network, _ = nn.train(balanced.X, balanced.y, test_set.X, test_set.y, net_cfg)
        probs = nn.forward(network, test_set.X)
        preds = metrics.PredictionSet(labels[test_rows], np.argmax(probs, axis=1),
                                      probs, classes)
        fold_rows.append({
            "fold": fi,
            "n_test": int(len(test_rows)),
            "accuracy": metrics.accuracy(preds),
            "weighted_f1": metrics.weighted_f1(preds),
            "class_presence": presence[fi],
        })
    mean = {
        "accuracy": float(np.mean([r["accuracy"] for r in fold_rows])),
        "weighted_f1": float(np.mean([r["weighted_f1"] for r in fold_rows])),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "folds.json").write_text(json.dumps(
        {"task": bundle.task, "folds": fold_rows, "mean": mean},
        indent=2, sort_keys=True) + "\n")
    print(f"eval[{bundle.task}]: {cfg.folds}-fold mean accuracy "
          f"{mean['accuracy']:.4f}, weighted F1 {mean['weighted_f1']:.4f} "
          f"-> {out_dir / 'folds.json'}")
    return 0


def cmd_eval(cfg: PipelineConfig) -> int:
    bundle = nn.load_bundle(_require_path(cfg, "bundle"))
    matrix = features.load_matrix(_require_path(cfg, "features"))
    events = {e.event_id: e for e in
              labeling.read_events_csv(_require_path(cfg, "events"))}
    out_dir = _require_path(cfg, "out", must_exist=False)
    labeled, labels, groups = _labeled_rows(matrix, events, bundle.task)
    if cfg.folds:
        return _eval_kfold(cfg, bundle, labeled, labels, groups, out_dir)
    return _eval_single_split(cfg, bundle, labeled, labels, groups, out_dir)


def cmd_predict(cfg: PipelineConfig) -> int:
    bundle = nn.load_bundle(_require_path(cfg, "bundle"))
    matrix = features.load_matrix(_require_path(cfg, "features"))
    out = _require_path(cfg, "out", must_exist=False)
    transform = features.FeatureTransform.from_dict(bundle.transform)
    probs = nn.forward(bundle.network, features.apply_transform(transform, matrix))
    classes = tuple(bundle.class_names)
    y_pred = np.argmax(probs, axis=1)
    out.parent.mkdir(parents=True, exist_ok=True)
    metrics.save_predictions_csv(matrix.event_ids,
                                 [classes[i] for i in y_pred], probs, classes, out)
    print(f"predict[{bundle.task}]: {len(matrix)} rows -> {out}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "features": cmd_features,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file or directory")

    parser = argparse.ArgumentParser(
        prog="takeover",
        description="driver takeover behavior prediction pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common],
                       help="synthesize a session directory from a spec")
    p.add_argument("--spec", help="session spec JSON")

    p = sub.add_parser("features", parents=[common],
                       help="extract a raw feature CSV from a session directory")
    p.add_argument("--data", help="session directory")
    p.add_argument("--window-s", dest="window_s", type=float)

    p = sub.add_parser("train", parents=[common],
                       help="train a network bundle on labeled feature rows")
    p.add_argument("--features", help="feature CSV")
    p.add_argument("--events", help="events CSV")
    p.add_argument("--task", choices=labeling.TASKS)
    p.add_argument("--smote-k", dest="smote_k", type=int)

    p = sub.add_parser("eval", parents=[common],
                       help="score held-out rows or run grouped k-fold")
    p.add_argument("--bundle", help="bundle JSON from train")
    p.add_argument("--features", help="feature CSV")
    p.add_argument("--events", help="events CSV")
    p.add_argument("--folds", type=int)
    p.add_argument("--baseline-preds", dest="baseline_preds", nargs="+",
                   help="external prediction CSVs for the comparison table")

    p = sub.add_parser("predict", parents=[common],
                       help="write predictions for a feature CSV")
    p.add_argument("--bundle", help="bundle JSON from train")
    p.add_argument("--features", help="feature CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, IoFailure) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 4
    except TakeoverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
