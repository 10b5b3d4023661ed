"""PPG beat extraction and time-domain heart rate variability metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

from .dsp import TimeSeries, fill_missing
from .errors import TooFewBeats

ENVELOPE_WINDOW_S = 2.0
ENVELOPE_FRACTION = 0.6
REFRACTORY_S = 0.3
# Physiological inter-beat gate; intervals outside it are treated as
# detector artifacts and the offending stretch is discarded.
MIN_INTERVAL_S = 0.3
MAX_INTERVAL_S = 2.0
PNN50_THRESHOLD_MS = 50.0


@dataclass(frozen=True)
class BeatTrain:
    """Strictly increasing beat times in seconds."""

    beat_times: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beat_times", np.asarray(self.beat_times, dtype=float))

    def __len__(self) -> int:
        return len(self.beat_times)

    def rr_intervals_ms(self) -> np.ndarray:
        return np.diff(self.beat_times) * 1000.0


@dataclass(frozen=True)
class HrvMetrics:
    sdnn_ms: float
    rmssd_ms: float
    pnn50_pct: float


def _longest_gated_run(times: np.ndarray) -> np.ndarray:
    """Drop beats violating the inter-beat gate, keep the longest clean run."""
    kept = [times[0]]
    for t in times[1:]:
        if t - kept[-1] >= MIN_INTERVAL_S:
            kept.append(t)
    kept = np.asarray(kept)
    gaps = np.diff(kept)
    breaks = np.nonzero(gaps > MAX_INTERVAL_S)[0]
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks + 1, [kept.size]))
    lengths = ends - starts
    best = int(np.argmax(lengths))
    return kept[starts[best]:ends[best]]


def detect_beats(series: TimeSeries) -> BeatTrain:
    """Locate pulse peaks in a conditioned PPG window.

    Candidates are local maxima above ENVELOPE_FRACTION of a rolling
    2-second max envelope, thinned by a 0.3 s refractory period. Beats
    whose spacing falls outside the physiological gate are dropped, and
    the longest surviving run is returned.

    Raises:
        TooFewBeats: fewer than 3 usable beats in the window.
    """
    values = fill_missing(series.values)
    rate = series.sample_rate_hz
    win = max(3, int(round(ENVELOPE_WINDOW_S * rate)) | 1)
    envelope = ndimage.maximum_filter1d(values, size=win, mode="nearest")
    distance = max(1, int(round(REFRACTORY_S * rate)))
    peaks, _ = signal.find_peaks(values, height=ENVELOPE_FRACTION * envelope,
                                 distance=distance)
    if peaks.size < 3:
        raise TooFewBeats(f"{peaks.size} beats found, need at least 3")
    times = series.t0 + peaks / rate
    times = _longest_gated_run(times)
    if times.size < 3:
        raise TooFewBeats(f"{times.size} beats within the interval gate, need 3")
    return BeatTrain(times)


def hrv_metrics(beats: BeatTrain) -> HrvMetrics:
    """Compute SDNN, RMSSD and pNN50 from a beat train.

    SDNN is the sample standard deviation (n-1 denominator) of the RR
    intervals in ms, RMSSD the root mean square of successive RR
    differences, pNN50 the percentage of successive differences whose
    magnitude exceeds 50 ms.

    Raises:
        TooFewBeats: fewer than 2 RR intervals (3 beats).
    """
    rr = beats.rr_intervals_ms()
    if rr.size < 2:
        raise TooFewBeats(f"{rr.size} RR intervals, need at least 2")
    diffs = np.diff(rr)
    return HrvMetrics(
        sdnn_ms=float(rr.std(ddof=1)),
        rmssd_ms=float(np.sqrt(np.mean(diffs ** 2))),
        pnn50_pct=float(100.0 * np.mean(np.abs(diffs) > PNN50_THRESHOLD_MS)),
    )
