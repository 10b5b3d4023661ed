"""Class rebalancing (SMOTE) and subject-grouped data splits."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (EmptyPartition, SchemaMismatch, TooFewGroups,
                     TooFewMinoritySamples)

SMOTE_K = 5
SPLIT_RATIOS = (0.70, 0.15, 0.15)


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with integer labels and a group id per row.

    indicator_groups lists column-index groups that form one-hot blocks;
    synthetic rows snap those blocks back to a valid indicator pattern.
    """

    X: np.ndarray
    y: np.ndarray
    groups: tuple[str, ...]
    event_ids: tuple[str, ...]
    class_names: tuple[str, ...]
    feature_names: tuple[str, ...]
    indicator_groups: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=int))
        n = self.X.shape[0]
        if not (len(self.y) == len(self.groups) == len(self.event_ids) == n):
            raise SchemaMismatch("rows, labels, groups and ids must align")

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=int)
        return replace(
            self,
            X=self.X[rows],
            y=self.y[rows],
            groups=tuple(self.groups[i] for i in rows),
            event_ids=tuple(self.event_ids[i] for i in rows),
        )


@dataclass(frozen=True)
class SplitPlan:
    """Row ids per partition plus the seed that produced them."""

    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int

    def to_dict(self) -> dict:
        return {
            "train_ids": list(self.train_ids),
            "val_ids": list(self.val_ids),
            "test_ids": list(self.test_ids),
            "seed": self.seed,
        }


def save_split_plan(plan: SplitPlan, path) -> None:
    Path(path).write_text(json.dumps(plan.to_dict(), indent=2, sort_keys=True) + "\n")


def load_split_plan(path) -> SplitPlan:
    raw = json.loads(Path(path).read_text())
    return SplitPlan(tuple(raw["train_ids"]), tuple(raw["val_ids"]),
                     tuple(raw["test_ids"]), int(raw["seed"]))


def rows_for_ids(dataset: LabeledDataset, ids) -> np.ndarray:
    index = {eid: i for i, eid in enumerate(dataset.event_ids)}
    missing = [eid for eid in ids if eid not in index]
    if missing:
        raise SchemaMismatch(f"ids not in dataset: {missing[:5]}")
    return np.asarray([index[eid] for eid in ids], dtype=int)


def _snap_indicators(row: np.ndarray, indicator_groups) -> None:
    for cols in indicator_groups:
        cols = np.asarray(cols, dtype=int)
        best = cols[int(np.argmax(row[cols]))]
        row[cols] = 0.0
        row[best] = 1.0


def smote(dataset: LabeledDataset, k: int = SMOTE_K, seed: int = 0) -> LabeledDataset:
    """Oversample every minority class up to the majority count.

    Each synthetic row lies on the segment x + lam * (nn - x) between a
    seeded-random minority row x and one of its k nearest same-class
    neighbors (Euclidean), with lam uniform on [0, 1]. Synthetic rows
    inherit the group of x and get ids of the form syn_<class>_<i>.

    Raises:
        TooFewMinoritySamples: a class that needs synthesis has < 2 rows.
    """
    rng = np.random.default_rng(seed)
    counts = np.bincount(dataset.y, minlength=len(dataset.class_names))
    majority = counts.max()
    new_X, new_y, new_groups, new_ids = [], [], [], []
    for cls in range(len(dataset.class_names)):
        need = majority - counts[cls]
        if need == 0:
            continue
        rows = np.nonzero(dataset.y == cls)[0]
        if rows.size < 2:
            raise TooFewMinoritySamples(
                f"class {dataset.class_names[cls]!r} has {rows.size} rows")
        Xc = dataset.X[rows]
        k_eff = min(k, rows.size - 1)
        # Pairwise distances within the class; self-distance masked out.
        d2 = ((Xc[:, None, :] - Xc[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        neighbors = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
        base = rng.integers(0, rows.size, size=need)
        pick = rng.integers(0, k_eff, size=need)
        lam = rng.uniform(0.0, 1.0, size=need)
        for i in range(need):
            x = Xc[base[i]]
            nn = Xc[neighbors[base[i], pick[i]]]
            row = x + lam[i] * (nn - x)
            _snap_indicators(row, dataset.indicator_groups)
            new_X.append(row)
            new_y.append(cls)
            new_groups.append(dataset.groups[rows[base[i]]])
            new_ids.append(f"syn_{dataset.class_names[cls]}_{i}")
    if not new_X:
        return dataset
    return replace(
        dataset,
        X=np.vstack([dataset.X, np.asarray(new_X)]),
        y=np.concatenate([dataset.y, np.asarray(new_y, dtype=int)]),
        groups=dataset.groups + tuple(new_groups),
        event_ids=dataset.event_ids + tuple(new_ids),
    )


def grouped_split(dataset: LabeledDataset, ratios=SPLIT_RATIOS, seed: int = 0) -> SplitPlan:
    """Split rows 70/15/15 by whole groups.

    Groups are shuffled by seed and assigned greedily to the partition
    with the largest relative row deficit, so no group ever straddles
    partitions and all three partitions are non-empty.

    Raises:
        TooFewGroups: fewer than 3 distinct groups.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) <= 0:
        raise TooFewGroups(f"bad ratios {ratios}")
    names = sorted(set(dataset.groups))
    if len(names) < 3:
        raise TooFewGroups(f"{len(names)} groups, need at least 3")
    rng = np.random.default_rng(seed)
    order = [names[i] for i in rng.permutation(len(names))]
    rows_by_group = {name: [] for name in names}
    for i, g in enumerate(dataset.groups):
        rows_by_group[g].append(i)
    n = len(dataset)
    targets = [r * n for r in ratios]
    filled = [0.0, 0.0, 0.0]
    assignment: list[list[str]] = [[], [], []]
    for name in order:
        deficits = [(targets[p] - filled[p]) / targets[p] for p in range(3)]
        part = int(np.argmax(deficits))
        assignment[part].append(name)
        filled[part] += len(rows_by_group[name])
    ids = []
    for part in range(3):
        part_rows = sorted(r for name in assignment[part] for r in rows_by_group[name])
        ids.append(tuple(dataset.event_ids[r] for r in part_rows))
    plan = SplitPlan(ids[0], ids[1], ids[2], seed)
    if not (plan.train_ids and plan.val_ids and plan.test_ids):
        raise EmptyPartition("a split partition came out empty")
    return plan


def grouped_kfold(dataset: LabeledDataset, folds: int = 10, seed: int = 0) -> list[SplitPlan]:
    """Deal shuffled groups round-robin into k folds; each fold is a test set.

    The returned plans have empty validation partitions; fold f holds out
    fold f's groups and trains on the rest.

    Raises:
        TooFewGroups: fewer groups than folds.
    """
    names = sorted(set(dataset.groups))
    if len(names) < folds:
        raise TooFewGroups(f"{len(names)} groups for {folds} folds")
    rng = np.random.default_rng(seed)
    order = [names[i] for i in rng.permutation(len(names))]
    fold_groups: list[set[str]] = [set() for _ in range(folds)]
    for i, name in enumerate(order):
        fold_groups[i % folds].add(name)
    plans = []
    for f in range(folds):
        test_rows = [i for i, g in enumerate(dataset.groups) if g in fold_groups[f]]
        train_rows = [i for i, g in enumerate(dataset.groups) if g not in fold_groups[f]]
        plans.append(SplitPlan(
            tuple(dataset.event_ids[i] for i in train_rows),
            (),
            tuple(dataset.event_ids[i] for i in test_rows),
            seed,
        ))
    return plans


def fold_class_presence(dataset: LabeledDataset, plans: list[SplitPlan]) -> list[dict]:
    """Per-fold class counts in the held-out partition, for reporting."""
    report = []
    for f, plan in enumerate(plans):
        rows = rows_for_ids(dataset, plan.test_ids)
        counts = np.bincount(dataset.y[rows], minlength=len(dataset.class_names))
        report.append({
            "fold": f,
            "test_rows": len(rows),
            "class_counts": {c: int(n) for c, n in zip(dataset.class_names, counts)},
            "all_classes_present": bool((counts > 0).all()),
        })
    return report
