"""Signal preprocessing: normalization, Butterworth filtering, GSR peak analysis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

from .errors import DegenerateSeries, InvalidCutoff


@dataclass(frozen=True)
class TimeSeries:
    """One uniformly sampled channel. NaN marks a missing sample.

    Attributes:
        channel_name: canonical channel name, e.g. "ppg".
        sample_rate_hz: sampling rate, > 0.
        t0: time of the first sample in seconds.
        values: 1-D float array of samples.
    """

    channel_name: str
    sample_rate_hz: float
    t0: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        if self.values.ndim != 1:
            raise ValueError("values must be 1-D")

    def __len__(self) -> int:
        return len(self.values)

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.values)) / self.sample_rate_hz

    def with_values(self, values: np.ndarray) -> "TimeSeries":
        return TimeSeries(self.channel_name, self.sample_rate_hz, self.t0, values)


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth filter description.

    kind: "high_pass" or "low_pass".
    order: filter order >= 1.
    cutoff_hz: -3 dB corner, must sit strictly inside (0, rate/2).
    """

    kind: str
    order: int
    cutoff_hz: float

    def __post_init__(self):
        if self.kind not in ("high_pass", "low_pass"):
            raise InvalidCutoff(f"unknown filter kind {self.kind!r}")
        if self.order < 1:
            raise InvalidCutoff(f"order must be >= 1, got {self.order}")


@dataclass(frozen=True)
class PeakSet:
    """Phasic peaks found in a conductance series."""

    count: int
    indices: np.ndarray
    amplitudes_us: np.ndarray


# Default PPG conditioning chain: drift removal then pulse-band smoothing.
PPG_HIGH_PASS = FilterSpec(kind="high_pass", order=2, cutoff_hz=0.5)
PPG_LOW_PASS = FilterSpec(kind="low_pass", order=1, cutoff_hz=6.0)

GSR_BASELINE_WINDOW_S = 4.0
GSR_ONSET_THRESHOLD_US = 0.01
GSR_MIN_SEPARATION_S = 1.0


def fill_missing(values: np.ndarray) -> np.ndarray:
    """Linearly interpolate NaN runs; edge NaNs take the nearest valid value."""
    values = np.asarray(values, dtype=float)
    good = np.isfinite(values)
    if good.all():
        return values.copy()
    if not good.any():
        raise DegenerateSeries("series has no valid samples")
    idx = np.arange(len(values))
    return np.interp(idx, idx[good], values[good])


def minmax_normalize(series: TimeSeries) -> TimeSeries:
    """Rescale a series to [0, 1] using its own finite min and max.

    NaN samples are ignored for the statistics and stay NaN in the output.

    Raises:
        DegenerateSeries: fewer than 2 finite samples, or max == min.
    """
    values = series.values
    finite = values[np.isfinite(values)]
    if finite.size < 2:
        raise DegenerateSeries(f"{series.channel_name}: too few samples to normalize")
    lo, hi = finite.min(), finite.max()
    if hi == lo:
        raise DegenerateSeries(f"{series.channel_name}: constant series")
    return series.with_values((values - lo) / (hi - lo))


def zscore_normalize(values) -> np.ndarray:
    """Center and scale a dense value sequence by its population std.

    Raises:
        DegenerateSeries: fewer than 2 values or zero variance.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise DegenerateSeries("need at least 2 values")
    sd = values.std()
    if sd == 0:
        raise DegenerateSeries("zero variance")
    return (values - values.mean()) / sd


def warmup_seconds(spec: FilterSpec) -> float:
    """Transient span at the start of a causal pass, flagged as warm-up."""
    return max(1.0, 3.0 / spec.cutoff_hz)


def butterworth_filter(series: TimeSeries, spec: FilterSpec) -> TimeSeries:
    """Apply a causal single-pass Butterworth filter.

    Missing samples are linearly interpolated first; the filter needs a
    dense input. The realization is a bilinear-transform cascade of
    second-order sections with zero initial state.

    Raises:
        InvalidCutoff: cutoff outside (0, rate/2).
        DegenerateSeries: series with no valid samples.
    """
    nyquist = series.sample_rate_hz / 2.0
    if not (0.0 < spec.cutoff_hz < nyquist):
        raise InvalidCutoff(
            f"cutoff {spec.cutoff_hz} Hz outside (0, {nyquist}) for "
            f"rate {series.sample_rate_hz} Hz"
        )
    dense = fill_missing(series.values)
    btype = "highpass" if spec.kind == "high_pass" else "lowpass"
    sos = signal.butter(spec.order, spec.cutoff_hz, btype=btype,
                        fs=series.sample_rate_hz, output="sos")
    return series.with_values(signal.sosfilt(sos, dense))


def condition_ppg(series: TimeSeries) -> TimeSeries:
    """Standard PPG chain: min-max scale, drift high-pass, smoothing low-pass."""
    scaled = minmax_normalize(series.with_values(fill_missing(series.values)))
    return butterworth_filter(butterworth_filter(scaled, PPG_HIGH_PASS), PPG_LOW_PASS)


def _rolling_median(values: np.ndarray, rate_hz: float, window_s: float) -> np.ndarray:
    # Baseline only has to track the slow tonic level, so estimate it on a
    # ~32 Hz decimated copy and interpolate back to full rate.
    step = max(1, int(round(rate_hz / 32.0)))
    coarse = values[::step]
    win = int(round(window_s * rate_hz / step))
    win = max(3, win | 1)
    half = win // 2
    padded = np.pad(coarse, half, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, win)
    med = np.median(windows, axis=1)
    if step == 1:
        return med
    coarse_idx = np.arange(coarse.size) * step
    return np.interp(np.arange(values.size), coarse_idx, med)


def detect_gsr_peaks(
    series: TimeSeries,
    baseline_window_s: float = GSR_BASELINE_WINDOW_S,
    onset_threshold_us: float = GSR_ONSET_THRESHOLD_US,
    min_separation_s: float = GSR_MIN_SEPARATION_S,
) -> PeakSet:
    """Find phasic conductance peaks over a rolling-median baseline.

    A peak is a local maximum rising more than `onset_threshold_us` above
    the rolling baseline; peaks closer than `min_separation_s` keep only
    the larger one. Amplitude is peak value minus baseline at onset, where
    the onset is the last sub-threshold sample before the peak.

    Returns:
        PeakSet with indices sorted in time. A flat series yields count 0.
    """
    values = fill_missing(series.values)
    if values.size < 3:
        return PeakSet(0, np.array([], dtype=int), np.array([]))
    baseline = _rolling_median(values, series.sample_rate_hz, baseline_window_s)
    excess = values - baseline
    distance = max(1, int(round(min_separation_s * series.sample_rate_hz)))
    peaks, _ = signal.find_peaks(excess, height=onset_threshold_us, distance=distance)
    amplitudes = np.empty(peaks.size)
    for i, p in enumerate(peaks):
        below = np.nonzero(excess[:p] <= onset_threshold_us)[0]
        onset = below[-1] if below.size else 0
        amplitudes[i] = max(values[p] - baseline[onset], 0.0)
    return PeakSet(int(peaks.size), peaks, amplitudes)
