"""Synthetic driving-session generator with plantable class structure.

Every takeover event gets latent intention/time/quality states. Channel
stretches inside the 10 s pre-alarm window are written so the extracted
features reflect those states with a controllable separability: at 1.0
the class signatures are disjoint, at 0.0 the features carry no label
information at all. Ground truth goes to a plant record for audits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import pandas as pd

from . import labeling
from .dsp import TimeSeries
from .errors import InvalidSpec, IoFailure, SchemaMismatch, UnknownChannel
from .features import CHANNELS
from .labeling import TakeoverEvent

ALARM_MIX_KINDS = ("true", "no", "false")


@dataclass(frozen=True)
class SessionSpec:
    """Shape and effect knobs for one synthetic study."""

    n_subjects: int
    trials_per_subject: int = 3
    tors_per_trial: int = 15
    alarm_mix: tuple[int, int, int] = (6, 3, 6)  # true / no / false alarms
    separability: float = 0.9
    seed: int = 0
    first_alarm_s: float = 12.0
    alarm_spacing_s: float = 16.0
    incident_delay_s: float = 13.0
    window_s: float = 10.0
    # Mean takeover-time shift per ongoing NDRT, seconds.
    ndrt_time_offset_s: dict = field(default_factory=lambda: {
        "C": -0.30, "U": 0.30, "R": 0.15, "S": 0.00})
    # SDNN targets (ms) per planted time class: readiness depresses HRV.
    hrv_sdnn_targets_ms: tuple[float, float, float] = (70.0, 59.0, 48.0)
    # Phasic peak-count targets per intention state (TK, NTK).
    gsr_peak_targets: tuple[float, float] = (2.0, 5.0)
    # Lateral-deviation draw ranges (m) per planted quality class.
    quality_deviation_m: dict = field(default_factory=lambda: {
        "low": (0.8, 3.0), "high": (4.0, 6.7), "medium": (7.3, 9.7)})
    takeover_prob: dict = field(default_factory=lambda: {
        "true": 0.92, "no": 0.25, "false": 0.85})

    def __post_init__(self):
        if self.n_subjects < 1:
            raise InvalidSpec("n_subjects must be >= 1")
        if self.trials_per_subject < 1 or self.tors_per_trial < 1:
            raise InvalidSpec("trials and tors per trial must be >= 1")
        if len(self.alarm_mix) != 3 or any(m < 0 for m in self.alarm_mix):
            raise InvalidSpec("alarm_mix must be three non-negative counts")
        if sum(self.alarm_mix) != self.tors_per_trial:
            raise InvalidSpec(
                f"alarm_mix {self.alarm_mix} must sum to tors_per_trial "
                f"{self.tors_per_trial}")
        if not (0.0 <= self.separability <= 1.0):
            raise InvalidSpec("separability must lie in [0, 1]")
        if self.first_alarm_s < self.window_s:
            raise InvalidSpec("first alarm must leave a full window of history")
        if self.alarm_spacing_s < self.window_s + 2.0:
            raise InvalidSpec("alarm spacing too small for disjoint windows")

    @property
    def trial_duration_s(self) -> float:
        return self.first_alarm_s + self.alarm_spacing_s * self.tors_per_trial

    def to_dict(self) -> dict:
        out = asdict(self)
        out["alarm_mix"] = list(self.alarm_mix)
        out["hrv_sdnn_targets_ms"] = list(self.hrv_sdnn_targets_ms)
        out["gsr_peak_targets"] = list(self.gsr_peak_targets)
        out["quality_deviation_m"] = {k: list(v) for k, v in self.quality_deviation_m.items()}
        return out

    @staticmethod
    def from_dict(raw: dict) -> "SessionSpec":
        known = {f for f in SessionSpec.__dataclass_fields__}
        extra = set(raw) - known
        if extra:
            raise InvalidSpec(f"unknown spec fields: {sorted(extra)}")
        raw = dict(raw)
        if "alarm_mix" in raw:
            raw["alarm_mix"] = tuple(raw["alarm_mix"])
        if "hrv_sdnn_targets_ms" in raw:
            raw["hrv_sdnn_targets_ms"] = tuple(raw["hrv_sdnn_targets_ms"])
        if "gsr_peak_targets" in raw:
            raw["gsr_peak_targets"] = tuple(raw["gsr_peak_targets"])
        if "quality_deviation_m" in raw:
            raw["quality_deviation_m"] = {k: tuple(v)
                                          for k, v in raw["quality_deviation_m"].items()}
        return SessionSpec(**raw)


@dataclass
class SyntheticSession:
    spec: SessionSpec
    events: list[TakeoverEvent]
    trials: dict  # (subject_id, trial_id) -> {channel: TimeSeries}
    surveys: dict  # (subject_id, trial_id) -> {"gender","nasa_tlx","pss10"}
    plant: dict  # event_id -> ground-truth record


def _blend(rng, s: float, target: float, neutral: float, spread: float,
           jitter: float) -> float:
    """Interpolate between an uninformative draw and the class target."""
    loose = neutral + rng.uniform(-spread, spread)
    tight = target + rng.uniform(-jitter, jitter)
    return (1.0 - s) * loose + s * tight


# Feature signatures: target per class state, plus (neutral, spread, jitter).
_TIME_SIG = {
    "sdnn_ms": ((70.0, 59.0, 48.0), 59.0, 11.0, 1.2),
    "velocity": ((28.0, 38.0, 46.0), 37.0, 9.5, 0.8),
    "throttle": ((16.3, 18.0, 19.6), 18.0, 1.6, 0.15),
}
_INTENT_SIG = {
    "ttff_s": ((4.5, 0.4), 2.5, 2.1, 0.25),
    "fix_ms": ((260.0, 1150.0), 700.0, 430.0, 40.0),
    "pupil": ((3.2, 5.4), 4.3, 1.1, 0.12),
    "gsr_n": ((2.0, 5.0), 3.5, 2.4, 0.4),
    "gsr_amp": ((0.45, 1.15), 0.8, 0.36, 0.05),
}
_QUALITY_SIG = {
    "steer_std": ((3.0, 18.0, 10.0), 10.5, 7.4, 0.3),  # low, medium, high
    "lane_right": ((1.05, 2.15, 1.60), 1.60, 0.54, 0.05),
    "lane_left": ((1.35, 2.45, 1.90), 1.90, 0.54, 0.05),
    "brake": ((2.5, 12.5, 7.5), 7.5, 4.6, 0.4),
}
_TIME_CENTERS_S = (1.7, 4.2, 7.6)
_TIME_JITTER_S = 0.35
_QUALITY_ORDER = ("low", "medium", "high")


def _plant_event(rng, spec: SessionSpec, alarm_type: str, ndrt: str):
    """Draw latent states and the per-window channel parameters."""
    s = spec.separability
    takes_over = bool(rng.random() < spec.takeover_prob[alarm_type])
    c_time = int(rng.integers(0, 3))
    c_quality = _QUALITY_ORDER[int(rng.integers(0, 3))]

    params: dict[str, float] = {}
    if takes_over:
        t = _TIME_CENTERS_S[c_time] + spec.ndrt_time_offset_s[ndrt] \
            + rng.uniform(-_TIME_JITTER_S, _TIME_JITTER_S)
        deviation = float(rng.uniform(*spec.quality_deviation_m[c_quality]))
        sd_targets = spec.hrv_sdnn_targets_ms
        for key, (targets, neutral, spread, jitter) in _TIME_SIG.items():
            targets = sd_targets if key == "sdnn_ms" else targets
            params[key] = _blend(rng, s, targets[c_time], neutral, spread, jitter)
        for key, (targets, neutral, spread, jitter) in _QUALITY_SIG.items():
            idx = _QUALITY_ORDER.index(c_quality)
            params[key] = _blend(rng, s, targets[idx], neutral, spread, jitter)
    else:
        t = None
        deviation = None
        for key, (_, neutral, spread, _) in (_TIME_SIG | _QUALITY_SIG).items():
            params[key] = neutral + rng.uniform(-spread, spread)
    gsr_lo, gsr_hi = spec.gsr_peak_targets
    for key, (targets, neutral, spread, jitter) in _INTENT_SIG.items():
        if key == "gsr_n":
            targets = (gsr_lo, gsr_hi)
        params[key] = _blend(rng, s, targets[0 if takes_over else 1],
                             neutral, spread, jitter)
    params["gsr_n"] = float(np.clip(round(params["gsr_n"]), 1, 6))
    params["hazard_end"] = float(rng.uniform(100.0, 128.0))
    return takes_over, t, deviation, c_time, c_quality, params


def _rr_pattern_ms(target_sdnn_ms: float, n: int = 12, mean_ms: float = 800.0,
                   spike_ms: float = 70.0) -> np.ndarray:
    """Deterministic RR train whose sample SDNN equals the target.

    A half-cosine arc carries the spread at the smallest possible
    successive-difference cost, so RMSSD stays well under SDNN. One
    late spike pushes exactly two successive differences past 50 ms,
    pinning pNN50 at 2/(n-1). The spike's mass is folded back into
    the mean, keeping the train sum at n * mean_ms so a full cycle
    always fits the pre-alarm window.
    """
    j = np.arange(n)
    arc = np.cos(np.pi * (j + 0.5) / n)  # zero mean by symmetry
    spike_part = np.zeros(n)
    spike_part[n - 2] = 1.0
    b = (spike_part - spike_part.mean()) * spike_ms
    # Solve the sample-variance quadratic for the arc scale alpha.
    va = float(arc @ arc)
    vb = float(b @ b)
    vab = float(arc @ b)
    want = target_sdnn_ms ** 2 * (n - 1)
    disc = vab ** 2 - va * (vb - want)
    alpha = (-vab + np.sqrt(max(disc, 0.0))) / va
    return mean_ms + alpha * arc + b


def _window_starts(spec: SessionSpec) -> np.ndarray:
    alarms = spec.first_alarm_s + spec.alarm_spacing_s * np.arange(spec.tors_per_trial)
    return alarms - spec.window_s


def _gaussian_bumps(grid_t: np.ndarray, rate: float, centers, widths, amps,
                    out: np.ndarray) -> None:
    for c, w, a in zip(centers, widths, amps):
        lo = max(0, int((c - 4 * w) * rate))
        hi = min(len(out), int((c + 4 * w) * rate) + 1)
        t = grid_t[lo:hi]
        out[lo:hi] += a * np.exp(-0.5 * ((t - c) / w) ** 2)


def _ppg_channel(rng, spec, events_in_trial, plan) -> np.ndarray:
    rate = CHANNELS["ppg"].default_rate_hz
    n = int(round(spec.trial_duration_s * rate))
    t = np.arange(n) / rate
    values = 0.08 + 0.02 * np.sin(2 * np.pi * t / 9.7)
    beats = []
    cursor = 0.4
    for ev, params in zip(events_in_trial, plan):
        ws = ev.t_alarm - spec.window_s
        # stop fillers short of the window so no bump straddles its edge
        while cursor < ws - 0.25:
            beats.append(cursor)
            cursor += 0.8
        rr = _rr_pattern_ms(params["sdnn_ms"]) / 1000.0
        b = ws + 0.3
        k = 0
        while b < ev.t_alarm - 0.05:
            beats.append(b)
            b += rr[k % len(rr)]
            k += 1
        cursor = ev.t_alarm + 0.4
    while cursor < spec.trial_duration_s - 0.3:
        beats.append(cursor)
        cursor += 0.8
    beats = np.asarray(beats)
    amps = 1.0 + 0.05 * np.sin(beats / 3.1)
    _gaussian_bumps(t, rate, beats, np.full(beats.size, 0.045), amps, values)
    return np.round(values, 6)


def _gsr_channel(rng, spec, events_in_trial, plan) -> np.ndarray:
    rate = CHANNELS["gsr"].default_rate_hz
    n = int(round(spec.trial_duration_s * rate))
    t = np.arange(n) / rate
    values = 5.0 + 0.25 * np.sin(2 * np.pi * t / 137.0) \
        + 0.15 * np.sin(2 * np.pi * t / 41.0)
    for ev, params in zip(events_in_trial, plan):
        ws = ev.t_alarm - spec.window_s
        k = int(params["gsr_n"])
        amp = params["gsr_amp"]
        centers = ws + 1.2 + np.arange(k) * (7.6 / max(k, 1))
        for j, c in enumerate(centers):
            a = amp * (1.0 + 0.12 * (1 if j % 2 else -1))
            lo = max(0, int((c - 0.5) * rate))
            # write the tail until the decay is ~1e-4 of the amplitude, so
            # the truncation step stays far below the peak-onset threshold
            hi = min(n, int((c + 12.0) * rate))
            seg = t[lo:hi] - c
            rise = np.clip((seg + 0.5) / 0.5, 0.0, 1.0)
            decay = np.exp(-np.maximum(seg, 0.0) / 1.2)
            values[lo:hi] += a * rise * decay
    return np.round(values, 6)


def _eye_channels(rng, spec, events_in_trial, plan) -> dict[str, np.ndarray]:
    rate = CHANNELS["pupil"].default_rate_hz
    n = int(round(spec.trial_duration_s * rate))
    t = np.arange(n) / rate
    gaze_x = 960.0 + 120.0 * np.sin(2 * np.pi * t / 41.0) \
        + 60.0 * np.sin(2 * np.pi * t / 7.3 + 1.0)
    gaze_y = 540.0 + 80.0 * np.sin(2 * np.pi * t / 37.0) \
        + 40.0 * np.sin(2 * np.pi * t / 5.9)
    pupil = 4.3 + 0.15 * np.sin(2 * np.pi * t / 23.0)
    aoi = np.zeros(n)
    for ev, params in zip(events_in_trial, plan):
        ws = ev.t_alarm - spec.window_s
        lo = int(round(ws * rate))
        hi = int(round(ev.t_alarm * rate))
        trel = t[lo:hi] - ws
        pupil[lo:hi] = params["pupil"] + 0.08 * np.sin(2 * np.pi * trel / 3.0)
        cursor = ws + params["ttff_s"]
        which = 1
        fix_s = params["fix_ms"] / 1000.0
        while cursor < ev.t_alarm - 0.05:
            a = int(round(cursor * rate))
            b = min(hi, a + max(1, int(round(fix_s * rate))))
            aoi[a:b] = which
            which = which % 3 + 1
            cursor = b / rate + 0.45
    return {
        "gaze_x": np.round(np.clip(gaze_x, 1.0, 1919.0), 6),
        "gaze_y": np.round(np.clip(gaze_y, 1.0, 1079.0), 6),
        "pupil": np.round(np.clip(pupil, 0.1, 6.9), 6),
        "aoi": aoi,
    }


def _vehicle_channels(rng, spec, events_in_trial, plan) -> dict[str, np.ndarray]:
    rate = CHANNELS["velocity"].default_rate_hz
    n = int(round(spec.trial_duration_s * rate))
    t = np.arange(n) / rate
    chans = {
        "lane_right": 1.60 + 0.25 * np.sin(2 * np.pi * t / 53.0),
        "lane_left": 1.90 + 0.25 * np.sin(2 * np.pi * t / 47.0),
        "hazard": 126.0 + 3.0 * np.sin(2 * np.pi * t / 61.0),
        "steer": 1.5 * np.sin(2 * np.pi * t / 19.0),
        "throttle": 18.0 + 0.5 * np.sin(2 * np.pi * t / 43.0),
        "brake": 7.5 + 2.0 * np.sin(2 * np.pi * t / 59.0),
        "velocity": 37.0 + 3.0 * np.sin(2 * np.pi * t / 71.0),
    }
    for ev, params in zip(events_in_trial, plan):
        ws = ev.t_alarm - spec.window_s
        lo = int(round(ws * rate))
        hi = int(round(ev.t_alarm * rate))
        m = hi - lo
        trel = t[lo:hi] - ws
        chans["lane_right"][lo:hi] = params["lane_right"] + 0.10 * np.sin(2 * np.pi * trel / 7.0)
        chans["lane_left"][lo:hi] = params["lane_left"] + 0.10 * np.sin(2 * np.pi * trel / 6.3)
        chans["hazard"][lo:hi] = np.linspace(chans["hazard"][lo], params["hazard_end"], m)
        noise = rng.normal(0.0, 1.0, size=m)
        noise = np.convolve(noise, np.ones(5) / 5.0, mode="same")
        noise -= noise.mean()
        sd = noise.std(ddof=1)
        if sd > 0:
            noise *= params["steer_std"] / sd
        chans["steer"][lo:hi] = np.clip(noise, -100.0, 100.0)
        chans["throttle"][lo:hi] = params["throttle"] + 0.3 * np.sin(2 * np.pi * trel / 5.1)
        chans["brake"][lo:hi] = params["brake"] + 0.35 * np.sin(2 * np.pi * trel / 4.3)
        chans["velocity"][lo:hi] = params["velocity"] + 0.4 * np.sin(2 * np.pi * trel / 6.7)
    for name, arr in chans.items():
        c = CHANNELS[name]
        chans[name] = np.round(np.clip(arr, c.lo + 1e-6, c.hi - 1e-6), 6)
    return chans


def generate(spec: SessionSpec) -> SyntheticSession:
    """Build a full deterministic session for a spec.

    Subjects get independent child streams of the spec seed, so changing
    n_subjects never reshuffles earlier subjects.
    """
    events: list[TakeoverEvent] = []
    trials: dict = {}
    surveys: dict = {}
    plant: dict = {}
    alarm_kinds = sum(([k] * m for k, m in zip(ALARM_MIX_KINDS, spec.alarm_mix)), [])
    for si in range(spec.n_subjects):
        subject_id = f"s{si + 1:02d}"
        rng_subject = np.random.default_rng([spec.seed, si])
        gender = "M" if rng_subject.random() < 0.5 else "W"
        pss10 = int(rng_subject.integers(0, 5))
        for ti in range(spec.trials_per_subject):
            trial_id = f"t{ti + 1}"
            rng = np.random.default_rng([spec.seed, si, ti])
            nasa = int(rng.integers(1, 22))
            surveys[(subject_id, trial_id)] = {
                "gender": gender, "nasa_tlx": str(nasa), "pss10": str(pss10)}
            kinds = [alarm_kinds[i] for i in rng.permutation(len(alarm_kinds))]
            ndrts = ["C"] * 4 + ["U"] * 4 + ["R"] * 4 + ["S"] * (spec.tors_per_trial - 12) \
                if spec.tors_per_trial >= 12 else \
                [("C", "U", "R", "S")[i % 4] for i in range(spec.tors_per_trial)]
            ndrts = [ndrts[i] for i in rng.permutation(len(ndrts))]
            trial_events = []
            trial_plan = []
            for ei in range(spec.tors_per_trial):
                event_id = f"{subject_id}_{trial_id}_e{ei:02d}"
                t_alarm = spec.first_alarm_s + spec.alarm_spacing_s * ei
                takes_over, t_rel, deviation, c_time, c_quality, params = \
                    _plant_event(rng, spec, kinds[ei], ndrts[ei])
                event = TakeoverEvent(
                    event_id=event_id, subject_id=subject_id, trial_id=trial_id,
                    alarm_type=kinds[ei], t_alarm=t_alarm,
                    t_takeover=(t_alarm + t_rel) if takes_over else None,
                    t_incident=t_alarm + spec.incident_delay_s,
                    lateral_deviation_m=deviation, ndrt=ndrts[ei])
                labels = labeling.label_event(event)
                trial_events.append(event)
                trial_plan.append(params)
                plant[event_id] = {
                    "intention": labels.intention,
                    "time3": labels.time3,
                    "time5": labels.time5,
                    "quality": labels.quality,
                    "takeover_time_s": t_rel,
                    "lateral_deviation_m": deviation,
                    "alarm_type": kinds[ei],
                    "ndrt": ndrts[ei],
                    "targets": {k: round(float(v), 6) for k, v in params.items()},
                }
            channels = {
                "ppg": _ppg_channel(rng, spec, trial_events, trial_plan),
                "gsr": _gsr_channel(rng, spec, trial_events, trial_plan),
            }
            channels.update(_eye_channels(rng, spec, trial_events, trial_plan))
            channels.update(_vehicle_channels(rng, spec, trial_events, trial_plan))
            trials[(subject_id, trial_id)] = {
                name: TimeSeries(name, CHANNELS[name].default_rate_hz, 0.0, arr)
                for name, arr in channels.items()
            }
            events.extend(trial_events)
    events.sort(key=lambda e: e.event_id)
    return SyntheticSession(spec, events, trials, surveys, plant)


SURVEYS_HEADER = ["subject_id", "trial_id", "gender", "nasa_tlx", "pss10"]


def export(session: SyntheticSession, out_dir) -> None:
    """Write channels/, events.csv, surveys.csv and plant.json.

    Channel CSVs carry `t,<channel>` columns at six decimals; generated
    values are pre-rounded to six decimals so the files re-ingest
    losslessly. Exports are byte-identical for identical sessions.
    """
    out = Path(out_dir)
    (out / "channels").mkdir(parents=True, exist_ok=True)
    for (subject_id, trial_id), channels in sorted(session.trials.items()):
        for name, series in sorted(channels.items()):
            frame = pd.DataFrame({"t": series.times(), name: series.values})
            frame.to_csv(out / "channels" / f"{subject_id}_{trial_id}_{name}.csv",
                         index=False, float_format="%.6f")
    labeling.write_events_csv(session.events, out / "events.csv")
    with (out / "surveys.csv").open("w") as fh:
        fh.write(",".join(SURVEYS_HEADER) + "\n")
        for (subject_id, trial_id), row in sorted(session.surveys.items()):
            fh.write(f"{subject_id},{trial_id},{row['gender']},"
                     f"{row['nasa_tlx']},{row['pss10']}\n")
    payload = {"spec": session.spec.to_dict(), "events": session.plant}
    (out / "plant.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_channel_csv(path: Path) -> TimeSeries:
    frame = pd.read_csv(path)
    if frame.shape[1] != 2 or frame.columns[0] != "t":
        raise SchemaMismatch(f"{path}: expected columns t,<channel>")
    name = frame.columns[1]
    if name not in CHANNELS:
        raise UnknownChannel(f"{path}: channel {name!r} not in registry")
    t = frame["t"].to_numpy(dtype=float)
    if t.size < 2:
        raise SchemaMismatch(f"{path}: need at least 2 samples")
    rate = float(np.round(1.0 / np.median(np.diff(t))))
    return TimeSeries(name, rate, float(t[0]), frame[name].to_numpy(dtype=float))


def ingest(data_dir):
    """Load an exported session directory.

    Returns:
        (trials, events, surveys) in the shapes session_matrix expects.

    Raises:
        IoFailure: missing events.csv/surveys.csv or channels directory.
    """
    root = Path(data_dir)
    channels_dir = root / "channels"
    if not (root / "events.csv").is_file() or not channels_dir.is_dir():
        raise IoFailure(f"{root}: not a session directory")
    if not (root / "surveys.csv").is_file():
        raise IoFailure(f"{root}: missing surveys.csv")
    events = labeling.read_events_csv(root / "events.csv")
    surveys = {}
    with (root / "surveys.csv").open() as fh:
        header = fh.readline().strip().split(",")
        if header != SURVEYS_HEADER:
            raise SchemaMismatch(f"surveys.csv: expected header {SURVEYS_HEADER}")
        for line in fh:
            sid, tid, gender, nasa, pss = line.strip().split(",")
            surveys[(sid, tid)] = {"gender": gender, "nasa_tlx": nasa, "pss10": pss}
    trials: dict = {}
    for path in sorted(channels_dir.glob("*.csv")):
        parts = path.stem.split("_")
        if len(parts) < 3:
            raise SchemaMismatch(f"{path}: expected <subject>_<trial>_<channel>.csv")
        key = (parts[0], parts[1])
        series = _read_channel_csv(path)
        trials.setdefault(key, {})[series.channel_name] = series
    return trials, events, surveys
