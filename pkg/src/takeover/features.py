"""Window segmentation, the per-event feature registry, and matrix assembly.

The registry pins every feature's source channels, plausibility range and
normalization family. Extraction works on 10 s pre-alarm windows; matrix
finalization (impute, encode, normalize) fits its statistics on training
rows only and is captured in a FeatureTransform for later reuse.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dsp, hrv
from .errors import (AllMissingColumn, DegenerateColumn, DegenerateSeries,
                     EmptyMatrix, InsufficientHistory, SchemaMismatch,
                     TooFewBeats, UnknownCategory, UnknownChannel)

WINDOW_S = 10.0
MAX_GAP_S = 1.0
SPARSE_THRESHOLD = 0.5


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    default_rate_hz: float
    lo: float | None = None
    hi: float | None = None


CHANNELS: dict[str, ChannelSpec] = {c.name: c for c in [
    ChannelSpec("ppg", 256.0),
    ChannelSpec("gsr", 256.0),
    ChannelSpec("gaze_x", 60.0, 0.0, 1920.0),
    ChannelSpec("gaze_y", 60.0, 0.0, 1080.0),
    ChannelSpec("pupil", 60.0, 0.0, 7.0),
    ChannelSpec("aoi", 60.0, 0.0, 3.0),
    ChannelSpec("lane_right", 20.0, 0.73, 2.4),
    ChannelSpec("lane_left", 20.0, 1.02, 2.8),
    ChannelSpec("hazard", 20.0, 98.0, 131.0),
    ChannelSpec("steer", 20.0, -180.0, 114.0),
    ChannelSpec("throttle", 20.0, 15.0, 21.0),
    ChannelSpec("brake", 20.0, 0.0, 17.0),
    ChannelSpec("velocity", 20.0, 0.0, 55.0),
]}


@dataclass(frozen=True)
class FeatureDef:
    """One numeric feature: where it comes from and how it is checked."""

    name: str
    source: str
    channels: tuple[str, ...]
    lo: float
    hi: float
    norm: str  # "zscore" or "minmax"


NUMERIC_FEATURES: tuple[FeatureDef, ...] = (
    FeatureDef("gaze_x_mean", "eye", ("gaze_x",), 0.0, 1920.0, "zscore"),
    FeatureDef("gaze_y_mean", "eye", ("gaze_y",), 0.0, 1080.0, "zscore"),
    FeatureDef("pupil_mean", "eye", ("pupil",), 0.0, 7.0, "zscore"),
    FeatureDef("ttff_ds", "eye", ("aoi",), 1.0, 90.0, "zscore"),
    FeatureDef("fixation_ms_mean", "eye", ("aoi",), 100.0, 1500.0, "zscore"),
    FeatureDef("fixation_count", "eye", ("aoi",), 1.0, 2500.0, "zscore"),
    FeatureDef("sdnn_ms", "ppg", ("ppg",), 45.0, 75.0, "minmax"),
    FeatureDef("rmssd_ms", "ppg", ("ppg",), 25.0, 43.0, "minmax"),
    FeatureDef("pnn50_pct", "ppg", ("ppg",), 18.0, 28.0, "minmax"),
    FeatureDef("gsr_peak_count", "gsr", ("gsr",), 1.0, 6.0, "zscore"),
    FeatureDef("gsr_amp_mean_us", "gsr", ("gsr",), 0.01, 1.58, "zscore"),
    FeatureDef("lane_right_mean_m", "vehicle", ("lane_right",), 0.73, 2.4, "zscore"),
    FeatureDef("lane_left_mean_m", "vehicle", ("lane_left",), 1.02, 2.8, "zscore"),
    FeatureDef("hazard_end_m", "vehicle", ("hazard",), 98.0, 131.0, "zscore"),
    FeatureDef("steer_std_deg", "vehicle", ("steer",), 0.0, 147.0, "zscore"),
    FeatureDef("throttle_mean_deg", "vehicle", ("throttle",), 15.0, 21.0, "zscore"),
    FeatureDef("brake_mean_deg", "vehicle", ("brake",), 0.0, 17.0, "zscore"),
    FeatureDef("velocity_mean_mph", "vehicle", ("velocity",), 0.0, 55.0, "zscore"),
)

NUMERIC_NAMES = tuple(f.name for f in NUMERIC_FEATURES)
NUMERIC_BY_NAME = {f.name: f for f in NUMERIC_FEATURES}

CATEGORICAL_DOMAINS: dict[str, tuple[str, ...]] = {
    "gender": ("M", "W"),
    "nasa_tlx": tuple(str(i) for i in range(1, 22)),
    "pss10": tuple(str(i) for i in range(0, 5)),
    "ndrt": ("C", "U", "R", "S"),
}
CATEGORICAL_NAMES = tuple(CATEGORICAL_DOMAINS)


@dataclass(frozen=True)
class Window:
    """Aligned pre-alarm slices of every available channel."""

    event_id: str
    t_start: float
    t_end: float
    channels: dict[str, dsp.TimeSeries]


@dataclass(frozen=True)
class FeatureVector:
    event_id: str
    values: dict[str, float | None]
    categoricals: dict[str, str]


@dataclass(frozen=True)
class FeatureMatrix:
    """Raw per-event features; NaN in `numeric` marks a missing value."""

    event_ids: tuple[str, ...]
    numeric_names: tuple[str, ...]
    numeric: np.ndarray
    categoricals: dict[str, tuple[str, ...]]
    audit: tuple[dict, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "numeric", np.asarray(self.numeric, dtype=float))
        if self.numeric.shape != (len(self.event_ids), len(self.numeric_names)):
            raise SchemaMismatch("numeric block does not match ids/names")

    def __len__(self) -> int:
        return len(self.event_ids)

    def column(self, name: str) -> np.ndarray:
        return self.numeric[:, self.numeric_names.index(name)]

    def subset(self, rows) -> "FeatureMatrix":
        rows = list(rows)
        return replace(
            self,
            event_ids=tuple(self.event_ids[i] for i in rows),
            numeric=self.numeric[rows],
            categoricals={k: tuple(v[i] for i in rows)
                          for k, v in self.categoricals.items()},
        )


def segment_window(channels: dict[str, dsp.TimeSeries], event_id: str,
                   tor_time: float, width_s: float = WINDOW_S) -> Window:
    """Cut the half-open [tor - width, tor) slice out of every channel.

    Raises:
        UnknownChannel: a channel name missing from the registry.
        InsufficientHistory: a channel does not cover the window.
    """
    t_start = tor_time - width_s
    slices = {}
    for name, series in channels.items():
        if name not in CHANNELS:
            raise UnknownChannel(f"{event_id}: channel {name!r} not in registry")
        rate = series.sample_rate_hz
        n = int(round(rate * width_s))
        start = math.ceil((t_start - series.t0) * rate - 1e-9)
        if start < 0 or start + n > len(series):
            raise InsufficientHistory(
                f"{event_id}: channel {name!r} does not cover "
                f"[{t_start:.3f}, {tor_time:.3f})")
        slices[name] = dsp.TimeSeries(name, rate, series.t0 + start / rate,
                                      series.values[start:start + n])
    return Window(event_id, t_start, tor_time, slices)


def _usable(series: dsp.TimeSeries | None) -> bool:
    """A slice is usable when no missing run exceeds MAX_GAP_S."""
    if series is None:
        return False
    bad = ~np.isfinite(series.values)
    if not bad.any():
        return True
    if bad.all():
        return False
    limit = int(series.sample_rate_hz * MAX_GAP_S)
    run = 0
    for flag in bad:
        run = run + 1 if flag else 0
        if run > limit:
            return False
    return True


def _nanmean(values: np.ndarray) -> float | None:
    finite = values[np.isfinite(values)]
    return float(finite.mean()) if finite.size else None


def _fixation_runs(aoi: np.ndarray) -> list[tuple[int, int]]:
    """(start, length) of each contiguous on-AOI run."""
    on = np.isfinite(aoi) & (aoi > 0)
    runs = []
    start = None
    for i, flag in enumerate(on):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - start))
            start = None
    if start is not None:
        runs.append((start, len(on) - start))
    return runs


def _eye_features(window: Window, out: dict) -> None:
    for feat, ch in (("gaze_x_mean", "gaze_x"), ("gaze_y_mean", "gaze_y"),
                     ("pupil_mean", "pupil")):
        series = window.channels.get(ch)
        out[feat] = _nanmean(series.values) if _usable(series) else None
    aoi = window.channels.get("aoi")
    if not _usable(aoi):
        out["ttff_ds"] = out["fixation_ms_mean"] = out["fixation_count"] = None
        return
    runs = _fixation_runs(aoi.values)
    if not runs:
        out["ttff_ds"] = None
        out["fixation_ms_mean"] = None
        out["fixation_count"] = 0.0
        return
    rate = aoi.sample_rate_hz
    first_s = runs[0][0] / rate
    out["ttff_ds"] = float(math.floor(first_s * 10.0) + 1)
    out["fixation_ms_mean"] = float(np.mean([ln / rate * 1000.0 for _, ln in runs]))
    out["fixation_count"] = float(len(runs))


def _ppg_features(window: Window, out: dict) -> None:
    series = window.channels.get("ppg")
    if not _usable(series):
        out["sdnn_ms"] = out["rmssd_ms"] = out["pnn50_pct"] = None
        return
    try:
        beats = hrv.detect_beats(dsp.condition_ppg(series))
        metrics = hrv.hrv_metrics(beats)
    except (DegenerateSeries, TooFewBeats):
        out["sdnn_ms"] = out["rmssd_ms"] = out["pnn50_pct"] = None
        return
    out["sdnn_ms"] = metrics.sdnn_ms
    out["rmssd_ms"] = metrics.rmssd_ms
    out["pnn50_pct"] = metrics.pnn50_pct


def _gsr_features(window: Window, out: dict) -> None:
    series = window.channels.get("gsr")
    if not _usable(series):
        out["gsr_peak_count"] = out["gsr_amp_mean_us"] = None
        return
    peaks = dsp.detect_gsr_peaks(series)
    out["gsr_peak_count"] = float(peaks.count)
    out["gsr_amp_mean_us"] = float(peaks.amplitudes_us.mean()) if peaks.count else None


def _vehicle_features(window: Window, out: dict) -> None:
    specs = (("lane_right_mean_m", "lane_right", "mean"),
             ("lane_left_mean_m", "lane_left", "mean"),
             ("hazard_end_m", "hazard", "end"),
             ("steer_std_deg", "steer", "std"),
             ("throttle_mean_deg", "throttle", "mean"),
             ("brake_mean_deg", "brake", "mean"),
             ("velocity_mean_mph", "velocity", "mean"))
    for feat, ch, kind in specs:
        series = window.channels.get(ch)
        if not _usable(series):
            out[feat] = None
            continue
        values = series.values[np.isfinite(series.values)]
        if values.size == 0:
            out[feat] = None
        elif kind == "mean":
            out[feat] = float(values.mean())
        elif kind == "std":
            out[feat] = float(values.std(ddof=1)) if values.size > 1 else None
        else:
            out[feat] = float(values[-1])


def extract_features(window: Window, meta: dict[str, str]) -> FeatureVector:
    """Compute every registry feature for one window.

    meta supplies the categorical fields (gender, nasa_tlx, pss10, ndrt).
    Channels that are absent or hold a gap longer than MAX_GAP_S yield
    missing values for their features.

    Raises:
        UnknownCategory: a categorical value outside its declared domain.
    """
    out: dict[str, float | None] = {}
    _eye_features(window, out)
    _ppg_features(window, out)
    _gsr_features(window, out)
    _vehicle_features(window, out)
    cats = {}
    for name in CATEGORICAL_NAMES:
        value = str(meta[name])
        if value not in CATEGORICAL_DOMAINS[name]:
            raise UnknownCategory(
                f"{window.event_id}: {name}={value!r} not in {CATEGORICAL_DOMAINS[name]}")
        cats[name] = value
    ordered = {name: out[name] for name in NUMERIC_NAMES}
    return FeatureVector(window.event_id, ordered, cats)


def assemble_matrix(vectors: list[FeatureVector]) -> FeatureMatrix:
    """Stack feature vectors into a matrix in deterministic event-id order."""
    if not vectors:
        raise EmptyMatrix("no feature vectors to assemble")
    vectors = sorted(vectors, key=lambda v: v.event_id)
    numeric = np.full((len(vectors), len(NUMERIC_NAMES)), np.nan)
    for i, vec in enumerate(vectors):
        for j, name in enumerate(NUMERIC_NAMES):
            value = vec.values.get(name)
            if value is not None:
                numeric[i, j] = value
    cats = {name: tuple(v.categoricals[name] for v in vectors)
            for name in CATEGORICAL_NAMES}
    return FeatureMatrix(tuple(v.event_id for v in vectors), NUMERIC_NAMES,
                         numeric, cats)


def validate_ranges(matrix: FeatureMatrix) -> list[dict]:
    """Flag numeric cells outside their declared plausibility range."""
    flags = []
    for j, name in enumerate(matrix.numeric_names):
        spec = NUMERIC_BY_NAME[name]
        col = matrix.numeric[:, j]
        for i in np.nonzero(np.isfinite(col) & ((col < spec.lo) | (col > spec.hi)))[0]:
            flags.append({"event_id": matrix.event_ids[i], "feature": name,
                          "value": float(col[i]), "lo": spec.lo, "hi": spec.hi})
    return flags


def drop_sparse_columns(matrix: FeatureMatrix,
                        threshold: float = SPARSE_THRESHOLD) -> FeatureMatrix:
    """Remove numeric columns whose missing fraction exceeds the threshold.

    Raises:
        EmptyMatrix: every numeric column was dropped.
    """
    missing = np.mean(~np.isfinite(matrix.numeric), axis=0)
    keep = [j for j in range(len(matrix.numeric_names)) if missing[j] <= threshold]
    dropped = [
        {"name": matrix.numeric_names[j], "reason":
         f"missing fraction {missing[j]:.3f} > {threshold}"}
        for j in range(len(matrix.numeric_names)) if missing[j] > threshold
    ]
    if not keep:
        raise EmptyMatrix("all numeric columns exceeded the sparsity threshold")
    return replace(
        matrix,
        numeric_names=tuple(matrix.numeric_names[j] for j in keep),
        numeric=matrix.numeric[:, keep],
        audit=matrix.audit + tuple(dropped),
    )


def impute_mean(matrix: FeatureMatrix, train_ids=None):
    """Fill missing numeric cells with training-row column means.

    train_ids defaults to all rows. Returns (dense_matrix, means).

    Raises:
        AllMissingColumn: a column with no observed training cell.
    """
    if train_ids is None:
        train_rows = np.arange(len(matrix))
    else:
        index = {eid: i for i, eid in enumerate(matrix.event_ids)}
        train_rows = np.asarray([index[eid] for eid in train_ids], dtype=int)
    means = {}
    dense = matrix.numeric.copy()
    for j, name in enumerate(matrix.numeric_names):
        col = matrix.numeric[train_rows, j]
        observed = col[np.isfinite(col)]
        if observed.size == 0:
            raise AllMissingColumn(f"column {name!r} has no observed training value")
        means[name] = float(observed.mean())
        hole = ~np.isfinite(dense[:, j])
        dense[hole, j] = means[name]
    return replace(matrix, numeric=dense), means


def one_hot(matrix: FeatureMatrix):
    """Indicator encoding of the categorical columns.

    Returns (block, names, groups) where groups lists the column index
    ranges belonging to each categorical, and every row sums to one
    inside each group.
    """
    blocks, names, groups = [], [], []
    cursor = 0
    for cat in CATEGORICAL_NAMES:
        if cat not in matrix.categoricals:
            continue
        domain = CATEGORICAL_DOMAINS[cat]
        block = np.zeros((len(matrix), len(domain)))
        for i, value in enumerate(matrix.categoricals[cat]):
            if value not in domain:
                raise UnknownCategory(f"{cat}={value!r} not in {domain}")
            block[i, domain.index(value)] = 1.0
        blocks.append(block)
        names.extend(f"{cat}={v}" for v in domain)
        groups.append(tuple(range(cursor, cursor + len(domain))))
        cursor += len(domain)
    if not blocks:
        return np.zeros((len(matrix), 0)), [], []
    return np.hstack(blocks), names, groups


@dataclass(frozen=True)
class FeatureTransform:
    """Fitted finalization pipeline, replayable on any raw matrix."""

    numeric_names: tuple[str, ...]
    impute_means: dict[str, float]
    norm_stats: dict[str, tuple]  # name -> ("zscore", mean, sd) | ("minmax", lo, hi)
    categorical_names: tuple[str, ...]
    fused_names: tuple[str, ...]
    indicator_groups: tuple[tuple[int, ...], ...]
    dropped: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "numeric_names": list(self.numeric_names),
            "impute_means": self.impute_means,
            "norm_stats": {k: list(v) for k, v in self.norm_stats.items()},
            "categorical_names": list(self.categorical_names),
            "fused_names": list(self.fused_names),
            "indicator_groups": [list(g) for g in self.indicator_groups],
            "dropped": list(self.dropped),
        }

    @staticmethod
    def from_dict(raw: dict) -> "FeatureTransform":
        return FeatureTransform(
            numeric_names=tuple(raw["numeric_names"]),
            impute_means={k: float(v) for k, v in raw["impute_means"].items()},
            norm_stats={k: (v[0], float(v[1]), float(v[2]))
                        for k, v in raw["norm_stats"].items()},
            categorical_names=tuple(raw["categorical_names"]),
            fused_names=tuple(raw["fused_names"]),
            indicator_groups=tuple(tuple(g) for g in raw["indicator_groups"]),
            dropped=tuple(raw["dropped"]),
        )


def fit_transform(matrix: FeatureMatrix, train_ids=None):
    """Fit imputation/normalization on training rows and fuse the matrix.

    PPG-derived columns are min-max scaled, all other numeric columns
    z-scored (population std); one-hot indicators pass through untouched.
    Columns that are constant or entirely missing on the training rows
    are dropped with an audit entry.

    Returns:
        (FeatureTransform, fused_matrix) with rows in matrix order.
    """
    if train_ids is None:
        train_rows = np.arange(len(matrix))
        train_ids = list(matrix.event_ids)
    else:
        index = {eid: i for i, eid in enumerate(matrix.event_ids)}
        train_rows = np.asarray([index[eid] for eid in train_ids], dtype=int)
    dropped = list(matrix.audit)

    # Columns with no observed training cell cannot be imputed; drop them.
    observable = []
    for j, name in enumerate(matrix.numeric_names):
        col = matrix.numeric[train_rows, j]
        if np.isfinite(col).any():
            observable.append(name)
        else:
            dropped.append({"name": name, "reason": "no observed training value"})
    work = replace(
        matrix,
        numeric_names=tuple(observable),
        numeric=matrix.numeric[:, [matrix.numeric_names.index(n) for n in observable]],
    )
    dense, means = impute_mean(work, train_ids)

    norm_stats: dict[str, tuple] = {}
    kept: list[str] = []
    columns: list[np.ndarray] = []
    for name in dense.numeric_names:
        col = dense.column(name)
        train_col = col[train_rows]
        family = NUMERIC_BY_NAME[name].norm if name in NUMERIC_BY_NAME else "zscore"
        if family == "minmax":
            lo, hi = float(train_col.min()), float(train_col.max())
            if hi == lo:
                dropped.append({"name": name, "reason": "constant on training rows"})
                continue
            norm_stats[name] = ("minmax", lo, hi)
            columns.append((col - lo) / (hi - lo))
        else:
            mean, sd = float(train_col.mean()), float(train_col.std())
            if sd == 0.0:
                dropped.append({"name": name, "reason": "constant on training rows"})
                continue
            norm_stats[name] = ("zscore", mean, sd)
            columns.append((col - mean) / sd)
        kept.append(name)
    if not kept:
        raise DegenerateColumn("no numeric column survived normalization")

    cat_block, cat_names, cat_groups = one_hot(matrix)
    offset = len(kept)
    groups = tuple(tuple(offset + c for c in g) for g in cat_groups)
    fused = np.column_stack(columns + [cat_block]) if cat_names else np.column_stack(columns)
    transform = FeatureTransform(
        numeric_names=tuple(kept),
        impute_means={k: means[k] for k in kept},
        norm_stats=norm_stats,
        categorical_names=tuple(
            c for c in CATEGORICAL_NAMES if c in matrix.categoricals),
        fused_names=tuple(kept) + tuple(cat_names),
        indicator_groups=groups,
        dropped=tuple(dropped),
    )
    return transform, fused


def apply_transform(transform: FeatureTransform, matrix: FeatureMatrix) -> np.ndarray:
    """Replay a fitted transform on a raw matrix, realigning by name.

    Raises:
        SchemaMismatch: a required column is absent.
        UnknownCategory: a categorical value outside its fitted domain.
    """
    columns = []
    for name in transform.numeric_names:
        if name not in matrix.numeric_names:
            raise SchemaMismatch(f"feature column {name!r} missing from input")
        col = matrix.column(name).copy()
        col[~np.isfinite(col)] = transform.impute_means[name]
        kind, a, b = transform.norm_stats[name]
        columns.append((col - a) / (b - a) if kind == "minmax" else (col - a) / b)
    for cat in transform.categorical_names:
        if cat not in matrix.categoricals:
            raise SchemaMismatch(f"categorical column {cat!r} missing from input")
        domain = CATEGORICAL_DOMAINS[cat]
        block = np.zeros((len(matrix), len(domain)))
        for i, value in enumerate(matrix.categoricals[cat]):
            if value not in domain:
                raise UnknownCategory(f"{cat}={value!r} not in {domain}")
            block[i, domain.index(value)] = 1.0
        columns.append(block)
    return np.column_stack(columns)


def session_matrix(trials: dict, events, surveys: dict,
                   window_s: float = WINDOW_S):
    """Extract one feature row per event from per-trial channel maps.

    trials maps (subject_id, trial_id) to {channel_name: TimeSeries};
    surveys maps the same key to the categorical survey fields. Events
    whose window is not covered are skipped with a warning entry.

    Returns:
        (FeatureMatrix, warnings) where warnings is a list of strings.

    Raises:
        EmptyMatrix: no event produced a feature row.
    """
    vectors = []
    warnings = []
    for event in sorted(events, key=lambda e: e.event_id):
        key = (event.subject_id, event.trial_id)
        channels = trials.get(key)
        if channels is None:
            warnings.append(f"{event.event_id}: no channels for trial {key}")
            continue
        try:
            window = segment_window(channels, event.event_id, event.t_alarm, window_s)
        except InsufficientHistory as exc:
            warnings.append(str(exc))
            continue
        meta = dict(surveys[key])
        meta["ndrt"] = event.ndrt
        vectors.append(extract_features(window, meta))
    if not vectors:
        raise EmptyMatrix("no event yielded a feature row")
    return assemble_matrix(vectors), warnings


def save_matrix(matrix: FeatureMatrix, path, transform: FeatureTransform | None = None) -> None:
    """Write the matrix CSV plus a .meta.json sidecar with column metadata."""
    path = Path(path)
    cat_names = [c for c in CATEGORICAL_NAMES if c in matrix.categoricals]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["event_id", *matrix.numeric_names, *cat_names])
        for i, eid in enumerate(matrix.event_ids):
            row = [eid]
            for v in matrix.numeric[i]:
                row.append(repr(float(v)) if np.isfinite(v) else "")
            row.extend(matrix.categoricals[c][i] for c in cat_names)
            writer.writerow(row)
    missing = np.mean(~np.isfinite(matrix.numeric), axis=0)
    meta = {
        "n_rows": len(matrix),
        "columns": [
            {
                "name": name,
                "type": "numeric",
                "source": NUMERIC_BY_NAME[name].source,
                "range": [NUMERIC_BY_NAME[name].lo, NUMERIC_BY_NAME[name].hi],
                "norm_family": NUMERIC_BY_NAME[name].norm,
                "missing_fraction": float(missing[j]),
                "norm_stats": (list(transform.norm_stats[name])
                               if transform and name in transform.norm_stats else None),
            }
            for j, name in enumerate(matrix.numeric_names)
        ] + [
            {"name": c, "type": "categorical",
             "domain": list(CATEGORICAL_DOMAINS[c])}
            for c in cat_names
        ],
        "dropped": list(matrix.audit) + (list(transform.dropped) if transform else []),
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def load_matrix(path) -> FeatureMatrix:
    """Read a feature CSV; columns may appear in any order.

    Raises:
        SchemaMismatch: missing event_id column or an unknown column name.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or "event_id" not in header:
            raise SchemaMismatch(f"{path}: no event_id column")
        for name in header:
            if name != "event_id" and name not in NUMERIC_BY_NAME \
                    and name not in CATEGORICAL_DOMAINS:
                raise SchemaMismatch(f"{path}: unknown column {name!r}")
        rows = list(reader)
    col = {name: header.index(name) for name in header}
    numeric_names = tuple(n for n in header if n in NUMERIC_BY_NAME)
    cat_names = [n for n in header if n in CATEGORICAL_DOMAINS]
    numeric = np.full((len(rows), len(numeric_names)), np.nan)
    for i, row in enumerate(rows):
        for j, name in enumerate(numeric_names):
            cell = row[col[name]]
            if cell:
                numeric[i, j] = float(cell)
    cats = {name: tuple(row[col[name]] for row in rows) for name in cat_names}
    return FeatureMatrix(tuple(row[col["event_id"]] for row in rows),
                         numeric_names, numeric, cats)
