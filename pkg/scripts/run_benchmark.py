"""End-to-end synthetic benchmark: network vs baseline learners.

Generates a synthetic study, extracts and fuses features, then trains
the network plus logistic-regression and random-forest baselines on an
identical grouped split for each requested task. Prints one comparison
table per run and writes per-task reports under --out.

Usage:
    python scripts/run_benchmark.py --subjects 17 --separability 0.9
"""

from __future__ import annotations

import argparse
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from takeover import baselines, features, labeling, metrics, nn, sampling, synth


@dataclass(frozen=True)
class BenchmarkConfig:
    subjects: int = 17
    trials_per_subject: int = 3
    tors_per_trial: int = 15
    separability: float = 0.9
    seed: int = 42
    tasks: tuple[str, ...] = labeling.TASKS
    select: bool = False
    out: Path = Path("benchmark_out")
    spec: synth.SessionSpec = field(init=False)

    def __post_init__(self):
        # keep the default 6/3/6 shape but rescale to the alarm count
        tors = self.tors_per_trial
        no = max(1, round(tors * 0.2))
        true = max(1, round(tors * 0.4))
        object.__setattr__(self, "spec", synth.SessionSpec(
            n_subjects=self.subjects,
            trials_per_subject=self.trials_per_subject,
            tors_per_trial=tors,
            alarm_mix=(true, no, tors - true - no),
            separability=self.separability,
            seed=self.seed,
        ))


def labeled_dataset(matrix, events_by_id, task):
    classes = labeling.task_classes(task)
    rows, labels, groups = [], [], []
    for i, eid in enumerate(matrix.event_ids):
        event = events_by_id[eid]
        name = labeling.task_label(labeling.label_event(event), task)
        if name is None:
            continue
        rows.append(i)
        labels.append(classes.index(name))
        groups.append(event.subject_id)
    return matrix.subset(rows), np.asarray(labels), tuple(groups), classes


def run_task(matrix, events_by_id, task, cfg: BenchmarkConfig):
    labeled, labels, groups, classes = labeled_dataset(matrix, events_by_id, task)
    skeleton = sampling.LabeledDataset(
        X=labeled.numeric, y=labels, groups=groups, event_ids=labeled.event_ids,
        class_names=classes, feature_names=labeled.numeric_names)
    plan = sampling.grouped_split(skeleton, seed=cfg.seed)
    transform, fused = features.fit_transform(labeled, train_ids=plan.train_ids)
    dataset = sampling.LabeledDataset(
        X=fused, y=labels, groups=groups, event_ids=labeled.event_ids,
        class_names=classes, feature_names=transform.fused_names,
        indicator_groups=transform.indicator_groups)

    train_set = dataset.subset(sampling.rows_for_ids(dataset, plan.train_ids))
    val_set = dataset.subset(sampling.rows_for_ids(dataset, plan.val_ids))
    test_set = dataset.subset(sampling.rows_for_ids(dataset, plan.test_ids))
    balanced = sampling.smote(train_set, seed=cfg.seed)

    if cfg.select:
        report = baselines.select_features(balanced, seed=cfg.seed)
        names = [transform.fused_names[i] for i in report.selected]
        print(f"  selected {len(names)} features: {', '.join(names)}")

    started = time.time()
    net_cfg = nn.NetworkConfig(input_dim=fused.shape[1], output_dim=len(classes),
                               seed=cfg.seed)
    network, _ = nn.train(balanced.X, balanced.y, val_set.X, val_set.y, net_cfg)
    probs = nn.forward(network, test_set.X)
    dnn_preds = metrics.PredictionSet(test_set.y, np.argmax(probs, axis=1),
                                      probs, classes)
    dnn_seconds = time.time() - started

    logistic = baselines.fit_logistic(balanced.X, balanced.y, l2=1e-3)
    lr_pred, lr_scores = baselines.predict_logistic(logistic, test_set.X)
    lr_preds = metrics.PredictionSet(test_set.y, lr_pred, lr_scores, classes)

    forest = baselines.fit_random_forest(balanced.X, balanced.y, seed=cfg.seed)
    rf_pred, rf_scores = baselines.predict_forest(forest, test_set.X)
    rf_preds = metrics.PredictionSet(test_set.y, rf_pred, rf_scores, classes)

    rows = [
        metrics.ComparisonRow(task, "DNN", metrics.accuracy(dnn_preds),
                              metrics.weighted_f1(dnn_preds)),
        metrics.ComparisonRow(task, "Logistic regression", metrics.accuracy(lr_preds),
                              metrics.weighted_f1(lr_preds)),
        metrics.ComparisonRow(task, "Random forest", metrics.accuracy(rf_preds),
                              metrics.weighted_f1(rf_preds)),
    ]
    report = metrics.build_report(dnn_preds, task)
    print(f"  DNN test accuracy {report.accuracy:.4f}, weighted F1 "
          f"{report.weighted_f1:.4f} ({dnn_seconds:.1f}s train+score)")
    return rows, report


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--subjects", type=int, default=17)
    parser.add_argument("--trials-per-subject", type=int, default=3)
    parser.add_argument("--tors-per-trial", type=int, default=15)
    parser.add_argument("--separability", type=float, default=0.9)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--task", choices=labeling.TASKS + ("all",), default="all")
    parser.add_argument("--select", action="store_true",
                        help="report the LASSO/forest feature intersection")
    parser.add_argument("--out", type=Path, default=Path("benchmark_out"))
    args = parser.parse_args()

    cfg = BenchmarkConfig(
        subjects=args.subjects,
        trials_per_subject=args.trials_per_subject,
        tors_per_trial=args.tors_per_trial,
        separability=args.separability,
        seed=args.seed,
        tasks=labeling.TASKS if args.task == "all" else (args.task,),
        select=args.select,
        out=args.out,
    )

    started = time.time()
    print(f"generating {cfg.subjects} subjects x {cfg.trials_per_subject} trials "
          f"x {cfg.tors_per_trial} alarms (separability {cfg.separability}) ...")
    session = synth.generate(cfg.spec)
    events_by_id = {e.event_id: e for e in session.events}
    matrix, warnings = features.session_matrix(session.trials, session.events,
                                               session.surveys)
    for line in warnings:
        print(f"  warning: {line}")
    matrix = features.drop_sparse_columns(matrix)
    print(f"  {len(matrix)} feature rows in {time.time() - started:.1f}s")

    cfg.out.mkdir(parents=True, exist_ok=True)
    all_rows = []
    for task in cfg.tasks:
        print(f"task {task}:")
        rows, report = run_task(matrix, events_by_id, task, cfg)
        all_rows.extend(rows)
        metrics.save_report(report, cfg.out / f"report_{task}.json")

    table = metrics.comparison_table(all_rows)
    print()
    print(table)
    (cfg.out / "comparison.txt").write_text(table)
    (cfg.out / "config.json").write_text(json.dumps(
        {"subjects": cfg.subjects, "separability": cfg.separability,
         "seed": cfg.seed, "tasks": list(cfg.tasks)}, indent=2, sort_keys=True) + "\n")
    print(f"artifacts in {cfg.out}; total {time.time() - started:.1f}s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
