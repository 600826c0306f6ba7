"""Presentation-only figure rendering for the CLI report path.

Figures carry no numeric contract; the CSV output is authoritative.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analysis import DetectedEvent, PowerSeries, Spectrum, rail_current_series
from .rail_model import RailConfig
from .trace_codec import TraceFile


def _finish(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_current(
    trace: TraceFile,
    rail: RailConfig,
    path,
    events: list[DetectedEvent] | None = None,
) -> None:
    """Current-vs-time line plot, optionally with detected event spans."""
    t_ns, amps = rail_current_series(trace, rail)
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ax.plot(t_ns * 1e-9, amps * 1e3, lw=0.5, color="tab:blue")
    if events:
        for ev in events:
            ax.axvspan(
                ev.t_start_ns * 1e-9, ev.t_end_ns * 1e-9, color="tab:red", alpha=0.25
            )
    ax.set_xlabel("time [s]")
    ax.set_ylabel("current [mA]")
    ax.set_title(f"{rail.name} current")
    _finish(fig, path)


def plot_power(series: PowerSeries, rail: RailConfig, path) -> None:
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ax.plot(series.timestamps_ns * 1e-9, series.power_w, lw=0.5, color="tab:green")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("power [W]")
    ax.set_title(f"{rail.name} power")
    _finish(fig, path)


def plot_spectrum(spectrum: Spectrum, title: str, path) -> None:
    fig, ax = plt.subplots(figsize=(7, 3.6))
    freqs = spectrum.frequencies_hz
    mags = spectrum.magnitudes
    ax.semilogy(freqs[1:] * 1e-3, mags[1:], lw=0.6, color="tab:purple")
    ax.set_xlabel("frequency [kHz]")
    ax.set_ylabel("power [code$^2$]")
    ax.set_title(title)
    _finish(fig, path)
