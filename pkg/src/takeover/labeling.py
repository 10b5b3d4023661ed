"""Event records and label derivation for the four prediction tasks."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import NegativeDeviation, NegativeTime, SchemaMismatch

ALARM_TYPES = ("true", "no", "false")
NDRT_TYPES = ("C", "U", "R", "S")

TASKS = ("intention", "time3", "time5", "quality")

INTENTION_CLASSES = ("NTK", "TK")
TIME3_CLASSES = ("low", "medium", "high")
TIME5_CLASSES = ("lowest", "low", "medium", "high", "highest")
QUALITY_CLASSES = ("low", "medium", "high")

# Takeover-time boundaries in seconds. The 3-class split uses 2.6/6.1,
# the 5-class refinement adds 1.5 and 4.7 without moving the outer edges.
TIME_LOW_S = 1.5
TIME_MID_S = 2.6
TIME_HIGH_S = 4.7
TIME_TOP_S = 6.1

# Lateral-deviation boundaries in meters for takeover quality.
QUALITY_LOW_M = 3.5
QUALITY_HIGH_M = 7.0
QUALITY_AUDIT_M = 10.0

EVENTS_HEADER = [
    "event_id", "subject_id", "trial_id", "alarm_type", "t_alarm",
    "t_takeover", "t_incident", "lateral_deviation_m", "ndrt",
]


@dataclass(frozen=True)
class TakeoverEvent:
    """One takeover-request event within a trial.

    t_takeover is None when the driver never responded. lateral_deviation_m
    is None when no maneuver was recorded.
    """

    event_id: str
    subject_id: str
    trial_id: str
    alarm_type: str
    t_alarm: float
    t_takeover: float | None
    t_incident: float
    lateral_deviation_m: float | None
    ndrt: str

    def __post_init__(self):
        if self.alarm_type not in ALARM_TYPES:
            raise SchemaMismatch(f"{self.event_id}: bad alarm_type {self.alarm_type!r}")
        if self.ndrt not in NDRT_TYPES:
            raise SchemaMismatch(f"{self.event_id}: bad ndrt {self.ndrt!r}")
        if self.t_alarm < 0:
            raise NegativeTime(f"{self.event_id}: t_alarm < 0")
        if self.t_incident <= self.t_alarm:
            raise NegativeTime(f"{self.event_id}: t_incident must follow t_alarm")
        if self.t_takeover is not None and self.t_takeover < self.t_alarm:
            raise NegativeTime(f"{self.event_id}: t_takeover precedes t_alarm")
        if self.lateral_deviation_m is not None and self.lateral_deviation_m < 0:
            raise NegativeDeviation(f"{self.event_id}: negative lateral deviation")

    @property
    def takeover_time_s(self) -> float | None:
        if self.t_takeover is None:
            return None
        return self.t_takeover - self.t_alarm


@dataclass(frozen=True)
class LabelSet:
    """All labels derivable from one event. time/quality are None for NTK."""

    intention: str
    time3: str | None
    time5: str | None
    quality: str | None
    audit: tuple[str, ...] = ()


def label_intention(event: TakeoverEvent) -> str:
    """TK iff the driver took over between the alarm and the incident."""
    tk = event.t_takeover is not None and event.t_alarm <= event.t_takeover < event.t_incident
    return "TK" if tk else "NTK"


def label_time3(takeover_time_s: float) -> str:
    if takeover_time_s < 0:
        raise NegativeTime(f"takeover time {takeover_time_s} < 0")
    if takeover_time_s < TIME_MID_S:
        return "low"
    if takeover_time_s <= TIME_TOP_S:
        return "medium"
    return "high"


def label_time5(takeover_time_s: float) -> str:
    if takeover_time_s < 0:
        raise NegativeTime(f"takeover time {takeover_time_s} < 0")
    if takeover_time_s < TIME_LOW_S:
        return "lowest"
    if takeover_time_s < TIME_MID_S:
        return "low"
    if takeover_time_s < TIME_HIGH_S:
        return "medium"
    if takeover_time_s <= TIME_TOP_S:
        return "high"
    return "highest"


def label_quality(lateral_deviation_m: float) -> str:
    if lateral_deviation_m < 0:
        raise NegativeDeviation(f"lateral deviation {lateral_deviation_m} < 0")
    if lateral_deviation_m < QUALITY_LOW_M:
        return "low"
    if lateral_deviation_m <= QUALITY_HIGH_M:
        return "high"
    return "medium"


def label_event(event: TakeoverEvent) -> LabelSet:
    """Derive every label for one event.

    Time and quality labels exist only for TK events; deviations beyond
    QUALITY_AUDIT_M still label as medium but are flagged for audit.
    """
    intention = label_intention(event)
    if intention == "NTK":
        return LabelSet("NTK", None, None, None)
    t = event.takeover_time_s
    audit: list[str] = []
    quality = None
    if event.lateral_deviation_m is not None:
        quality = label_quality(event.lateral_deviation_m)
        if event.lateral_deviation_m > QUALITY_AUDIT_M:
            audit.append(f"lateral deviation {event.lateral_deviation_m:.2f} m "
                         f"beyond {QUALITY_AUDIT_M} m")
    return LabelSet("TK", label_time3(t), label_time5(t), quality, tuple(audit))


def task_classes(task: str) -> tuple[str, ...]:
    return {
        "intention": INTENTION_CLASSES,
        "time3": TIME3_CLASSES,
        "time5": TIME5_CLASSES,
        "quality": QUALITY_CLASSES,
    }[task]


def task_label(labels: LabelSet, task: str) -> str | None:
    """Label of one event under a task; None when the row is unusable."""
    return {
        "intention": labels.intention,
        "time3": labels.time3,
        "time5": labels.time5,
        "quality": labels.quality,
    }[task]


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def write_events_csv(events, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVENTS_HEADER)
        for ev in events:
            writer.writerow([
                ev.event_id, ev.subject_id, ev.trial_id, ev.alarm_type,
                _fmt(ev.t_alarm), _fmt(ev.t_takeover), _fmt(ev.t_incident),
                _fmt(ev.lateral_deviation_m), ev.ndrt,
            ])


def read_events_csv(path) -> list[TakeoverEvent]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EVENTS_HEADER:
            raise SchemaMismatch(f"{path}: expected header {EVENTS_HEADER}, got {header}")
        events = []
        for row in reader:
            if len(row) != len(EVENTS_HEADER):
                raise SchemaMismatch(f"{path}: row width {len(row)}")
            events.append(TakeoverEvent(
                event_id=row[0], subject_id=row[1], trial_id=row[2],
                alarm_type=row[3],
                t_alarm=float(row[4]),
                t_takeover=float(row[5]) if row[5] else None,
                t_incident=float(row[6]),
                lateral_deviation_m=float(row[7]) if row[7] else None,
                ndrt=row[8],
            ))
    return events
