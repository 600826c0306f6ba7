"""Trace analytics: per-rail power/energy, spectra with alias folding,
frame-burst event detection and the high-rate vs PMBus comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .rail_model import AdcConfig, RailConfig, code_to_voltage, sense_to_current
from .trace_codec import TraceFile


@dataclass
class PowerSeries:
    rail_id: int
    timestamps_ns: np.ndarray
    power_w: np.ndarray


@dataclass
class Spectrum:
    bin_hz: float
    magnitudes: np.ndarray  # one-sided power per bin, [0, f_s/2]
    window: str

    @property
    def frequencies_hz(self) -> np.ndarray:
        return np.arange(len(self.magnitudes)) * self.bin_hz

    def dominant_peak_hz(self, skip_dc: bool = True) -> float:
        start = 1 if skip_dc else 0
        return float((start + np.argmax(self.magnitudes[start:])) * self.bin_hz)


@dataclass(frozen=True)
class DetectedEvent:
    t_start_ns: int
    t_end_ns: int
    peak_current_a: float
    rail_id: int

    def __post_init__(self):
        if self.t_start_ns >= self.t_end_ns:
            raise ValueError("event must have t_start < t_end")


@dataclass(frozen=True)
class DetectionParams:
    baseline_window_s: float = 0.010
    k_sigma: float = 6.0
    min_duration_s: float | None = None  # None: two sample periods
    hysteresis_fraction: float = 0.5


@dataclass
class PmbusComparison:
    mean_abs_error_a: float
    detectable: bool
    recall: float
    highrate_events: int
    pmbus_events: int


def _adc_for(trace: TraceFile) -> AdcConfig:
    return AdcConfig(sample_rate_hz=trace.header.sample_rate_hz)


def rail_current_series(
    trace: TraceFile, rail: RailConfig
) -> tuple[np.ndarray, np.ndarray]:
    """(timestamps_ns, amperes) for a rail's current channel."""
    adc = _adc_for(trace)
    codes = trace.channel_codes(rail.i_channel)
    return trace.frame_timestamps_ns(), sense_to_current(
        code_to_voltage(codes, adc), rail
    )


def power_series(trace: TraceFile, rail: RailConfig) -> PowerSeries:
    """Per-frame V*I in watts from the stored codes."""
    adc = _adc_for(trace)
    volts = code_to_voltage(trace.channel_codes(rail.v_channel), adc)
    amps = sense_to_current(
        code_to_voltage(trace.channel_codes(rail.i_channel), adc), rail
    )
    return PowerSeries(
        rail_id=rail.rail_id,
        timestamps_ns=trace.frame_timestamps_ns(),
        power_w=volts * amps,
    )


def _window_slice(
    timestamps_ns: np.ndarray, t0: float, t1: float, rate_hz: int
) -> slice:
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if len(timestamps_ns) == 0:
        raise ValueError("empty trace")
    dt_ns = 1e9 / rate_hz
    if t0 * 1e9 < timestamps_ns[0] - dt_ns or t1 * 1e9 > timestamps_ns[-1] + dt_ns:
        raise ValueError("window outside trace span")
    lo = int(np.searchsorted(timestamps_ns, t0 * 1e9 - 0.5))
    hi = int(np.searchsorted(timestamps_ns, t1 * 1e9 + 0.5))
    return slice(lo, hi)


def energy(trace: TraceFile, rail: RailConfig, t0: float, t1: float) -> float:
    """Trapezoidal integral of V*I over frames within [t0, t1], in joules."""
    series = power_series(trace, rail)
    sel = _window_slice(series.timestamps_ns, t0, t1, trace.header.sample_rate_hz)
    t = series.timestamps_ns[sel] * 1e-9
    p = series.power_w[sel]
    if len(p) < 2:
        return 0.0
    terms = 0.5 * (p[:-1] + p[1:]) * np.diff(t)
    return math.fsum(terms)


def energy_exact(trace: TraceFile, rail: RailConfig, t0: float, t1: float) -> Fraction:
    """Trapezoidal energy in exact rational arithmetic.

    Grid-aligned splits partition the per-interval terms, so additivity
    holds exactly in this mode (float summation is only ulp-accurate).
    """
    series = power_series(trace, rail)
    sel = _window_slice(series.timestamps_ns, t0, t1, trace.header.sample_rate_hz)
    t = [Fraction(int(ts), 10**9) for ts in series.timestamps_ns[sel]]
    p = [Fraction(x) for x in series.power_w[sel]]
    total = Fraction(0)
    for k in range(len(p) - 1):
        total += (p[k] + p[k + 1]) * (t[k + 1] - t[k]) / 2
    return total


def alias_frequency(f: float, f_s: float) -> float:
    """Fold a signal frequency into the sampled band [0, f_s/2]."""
    if f < 0 or f_s <= 0:
        raise ValueError("require f >= 0 and f_s > 0")
    r = math.fmod(f, f_s)
    return r if r <= f_s / 2 else f_s - r


def psd(
    trace: TraceFile,
    channel: int,
    segment: slice | None = None,
    window: str = "rect",
) -> Spectrum:
    """One-sided periodogram of a raw channel, truncated to a power of two.

    Power is scaled so that with a rect window the bin sum equals the sum
    of squared time samples (Parseval).
    """
    x = trace.channel_codes(channel).astype(np.float64)
    if segment is not None:
        x = x[segment]
    if len(x) < 2:
        raise ValueError("segment too short")
    n = 1 << (len(x).bit_length() - 1)
    x = x[:n]
    if window == "hann":
        x = x * np.hanning(n)
    elif window != "rect":
        raise ValueError(f"unknown window {window!r}")
    spec = np.fft.rfft(x)
    power = np.abs(spec) ** 2 / n
    power[1:] *= 2.0
    if n % 2 == 0:
        power[-1] /= 2.0  # Nyquist bin is not doubled
    return Spectrum(
        bin_hz=trace.header.sample_rate_hz / n, magnitudes=power, window=window
    )


# --- event detection ---------------------------------------------------------

def detect_events_series(
    timestamps_ns: np.ndarray,
    current_a: np.ndarray,
    dt_s: float,
    params: DetectionParams,
    rail_id: int = 0,
) -> list[DetectedEvent]:
    """Threshold detection with a rolling-median baseline and hysteresis.

    The baseline and a robust deviation (scaled MAD) are estimated per
    baseline window and held piecewise-constant.  An event opens when the
    current exceeds baseline + k_sigma * deviation, closes when it falls
    below the hysteresis level, and must span min_duration_s.
    """
    n = len(current_a)
    if n == 0:
        return []
    span_s = n * dt_s
    if params.baseline_window_s > span_s:
        raise ValueError("baseline window longer than trace")
    min_dur = (
        params.min_duration_s if params.min_duration_s is not None else 2 * dt_s
    )
    min_samples = max(1, int(round(min_dur / dt_s)))

    win = max(1, int(round(params.baseline_window_s / dt_s)))
    n_win = max(1, n // win)
    baseline = np.empty(n)
    sigma = np.empty(n)
    for w in range(n_win):
        lo = w * win
        hi = n if w == n_win - 1 else lo + win
        chunk = current_a[lo:hi]
        med = np.median(chunk)
        mad = np.median(np.abs(chunk - med))
        baseline[lo:hi] = med
        sigma[lo:hi] = 1.4826 * mad  # MAD -> sigma for Gaussian noise

    high = baseline + params.k_sigma * sigma
    low = baseline + params.hysteresis_fraction * params.k_sigma * sigma
    above_high = current_a > high
    above_low = current_a > low

    events: list[DetectedEvent] = []
    edges = np.flatnonzero(np.diff(above_low.astype(np.int8)))
    starts = list(edges[above_low[edges + 1]] + 1)
    ends = list(edges[~above_low[edges + 1]] + 1)
    if above_low[0]:
        starts.insert(0, 0)
    if above_low[-1]:
        ends.append(n)
    for s, e in zip(starts, ends):
        hits = np.flatnonzero(above_high[s:e])
        if len(hits) == 0:
            continue
        first = s + hits[0]
        if e - first < min_samples:
            continue
        events.append(
            DetectedEvent(
                t_start_ns=int(timestamps_ns[first]),
                t_end_ns=int(timestamps_ns[e - 1]) + int(round(dt_s * 1e9)),
                peak_current_a=float(np.max(current_a[first:e])),
                rail_id=rail_id,
            )
        )
    return events


def detect_frames(
    trace: TraceFile, rail: RailConfig, params: DetectionParams = DetectionParams()
) -> list[DetectedEvent]:
    """Frame-burst events on a rail's current channel."""
    timestamps_ns, current = rail_current_series(trace, rail)
    dt_s = 1.0 / trace.header.sample_rate_hz
    return detect_events_series(
        timestamps_ns, current, dt_s, params, rail_id=rail.rail_id
    )


def match_events(
    detected: list[DetectedEvent], reference: list[tuple[int, int]]
) -> list[int | None]:
    """For each reference (start_ns, end_ns) interval, the index of an
    overlapping detected event, or None."""
    out: list[int | None] = []
    for ref_start, ref_end in reference:
        hit = None
        for idx, ev in enumerate(detected):
            if ev.t_start_ns < ref_end and ev.t_end_ns > ref_start:
                hit = idx
                break
        out.append(hit)
    return out


# --- PMBus contrast ----------------------------------------------------------

def compare_pmbus(
    trace: TraceFile,
    rail: RailConfig,
    params: DetectionParams = DetectionParams(),
) -> PmbusComparison:
    """Contrast the coarse PMBus current series against the high-rate path.

    The PMBus samples are zero-order-hold resampled onto the frame grid
    for the error figure; detection runs on the raw PMBus-rate series and
    is scored against the high-rate detection result.
    """
    records = [r for r in trace.pmbus if r.rail_id == rail.rail_id]
    if not records:
        raise ValueError(f"no PMBus records for rail {rail.name!r}")
    pm_ts = np.array([r.timestamp_ns for r in records], dtype=np.int64)
    pm_i = np.array([r.amperes for r in records])

    frame_ts, high_i = rail_current_series(trace, rail)
    idx = np.clip(np.searchsorted(pm_ts, frame_ts, side="right") - 1, 0, None)
    zoh = pm_i[idx]
    mae = float(np.mean(np.abs(high_i - zoh)))

    high_events = detect_frames(trace, rail, params)
    pm_dt = float(np.median(np.diff(pm_ts))) * 1e-9 if len(pm_ts) > 1 else 1.0
    pm_params = params
    if params.baseline_window_s < pm_dt:
        pm_params = DetectionParams(
            baseline_window_s=pm_dt,
            k_sigma=params.k_sigma,
            min_duration_s=params.min_duration_s,
            hysteresis_fraction=params.hysteresis_fraction,
        )
    pm_events = detect_events_series(
        pm_ts, pm_i, pm_dt, pm_params, rail_id=rail.rail_id
    )
    ref = [(ev.t_start_ns, ev.t_end_ns) for ev in high_events]
    matched = sum(1 for m in match_events(pm_events, ref) if m is not None)
    recall = matched / len(ref) if ref else 0.0
    return PmbusComparison(
        mean_abs_error_a=mae,
        detectable=recall >= 0.5,
        recall=recall,
        highrate_events=len(high_events),
        pmbus_events=len(pm_events),
    )
