import numpy as np
import pytest

from railscope.dut_synth import (
    FrameDirection,
    FrameSchedule,
    RailWaveformSpec,
    Scenario,
    TriggerMode,
    TriggerSpec,
    visual_servoing_scenario,
)
from railscope.rail_model import AdcConfig, RailConfig, RailGroup
from railscope.capture import CaptureConfig, run_capture
from railscope.trace_codec import SampleBlock, TraceFile, TraceHeader


def two_rail_scenario(
    duration_s=0.6,
    seed=7,
    trigger=None,
    schedules=(),
    noise_rms_a=0.0,
    ripple_amp_a=0.0,
    idle=(0.2, 0.05),
):
    """Small scenario used throughout the unit tests."""
    rails = (
        RailConfig(0, "core", 0.1, 50.0, 0, 1, RailGroup.DUT),
        RailConfig(1, "io", 0.1, 50.0, 2, 3, RailGroup.PHY1),
    )
    waveforms = (
        RailWaveformSpec(0, nominal_volts=1.0, idle_current_a=idle[0],
                         noise_rms_a=noise_rms_a, ripple_amp_a=ripple_amp_a),
        RailWaveformSpec(1, nominal_volts=2.5, idle_current_a=idle[1],
                         noise_rms_a=noise_rms_a),
    )
    if trigger is None:
        trigger = TriggerSpec(mode=TriggerMode.AT_TIME, t_s=duration_s / 2)
    return Scenario(
        duration_s=duration_s,
        seed=seed,
        adc=AdcConfig(),
        rails=rails,
        waveforms=waveforms,
        frame_schedules=tuple(schedules),
        trigger=trigger,
    )


def make_trace(i_codes, v_codes=None, sample_rate_hz=225_000, block_frames=64):
    """Single-rail trace assembled directly from channel codes."""
    i_codes = np.asarray(i_codes, dtype=np.uint16)
    if v_codes is None:
        v_codes = np.full_like(i_codes, 6554)
    v_codes = np.asarray(v_codes, dtype=np.uint16)
    rail = RailConfig(0, "core", 0.1, 50.0, 0, 1, RailGroup.DUT)
    header = TraceHeader(
        channel_count=2,
        sample_rate_hz=sample_rate_hz,
        block_frames=block_frames,
        rails=(rail,),
    )
    blocks = []
    for k0 in range(0, len(i_codes), block_frames):
        chunk_v = v_codes[k0 : k0 + block_frames]
        chunk_i = i_codes[k0 : k0 + block_frames]
        frames = np.stack([chunk_v, chunk_i], axis=1)
        blocks.append(
            SampleBlock(
                timestamp_ns=(k0 * 10**9) // sample_rate_hz, frames=frames
            )
        )
    return TraceFile(header=header, blocks=blocks), rail


@pytest.fixture(scope="session")
def servo_scenario():
    return visual_servoing_scenario(seed=2024)


@pytest.fixture(scope="session")
def servo_trace(servo_scenario):
    """Default capture: 160 ms pre-trigger, 0.5 s post."""
    config = CaptureConfig.from_scenario(servo_scenario)
    return run_capture(servo_scenario, config)


@pytest.fixture(scope="session")
def servo_trace_full(servo_scenario):
    """Capture with the pre-trigger window widened to cover all frames."""
    config = CaptureConfig.from_scenario(servo_scenario, pretrigger_s=1.05)
    return run_capture(servo_scenario, config)
