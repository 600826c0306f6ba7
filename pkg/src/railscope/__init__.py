"""railscope: synthetic multi-rail power-trace acquisition and analysis.

Pipeline: a scenario document describes per-rail waveforms and events; the
capture engine samples them through an ADC/sense-circuit model into a
binary trace; the analysis layer extracts energy, spectra and frame
events from the trace.
"""

from .rail_model import AdcConfig, RailConfig, RailGroup, default_rails
from .dut_synth import (
    FrameSchedule,
    Scenario,
    TriggerSpec,
    eval_rail,
    frame_duration,
    load_scenario,
    save_scenario,
    visual_servoing_scenario,
)
from .capture import CaptureConfig, RingBuffer, run_capture
from .trace_codec import TraceFile, decode, encode, export_csv, read_trace, write_trace
from .pmbus import PmbusRecord, linear11_decode, linear11_encode
from .analysis import (
    DetectedEvent,
    DetectionParams,
    alias_frequency,
    compare_pmbus,
    detect_frames,
    energy,
    psd,
)

__version__ = "0.1.0"
