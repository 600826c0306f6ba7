"""Acquisition-firmware model: fixed-rate simultaneous sampling, a
pre-trigger ring buffer, trigger handling, block timestamping and the
interleaved low-rate PMBus poll."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .dut_synth import Scenario, eval_rail_array, trigger_time
from .pmbus import (
    DEFAULT_CURRENT_EXPONENT,
    DEFAULT_VOLTAGE_EXPONENT,
    PmbusRecord,
    linear11_encode,
)
from .rail_model import AdcConfig, RailConfig, current_to_sense
from .trace_codec import SampleBlock, TraceFile, TraceHeader, TriggerEvent

log = logging.getLogger(__name__)

MIN_PRETRIGGER_S = 0.150
MAX_PMBUS_RATE_SPS = 1000

_GEN_CHUNK_FRAMES = 1 << 16


class CaptureError(RuntimeError):
    pass


@dataclass(frozen=True)
class CaptureConfig:
    adc: AdcConfig
    rails: tuple[RailConfig, ...]
    block_frames: int = 64
    pretrigger_s: float = 0.160
    posttrigger_s: float = 0.5
    pmbus_rate_sps: float = 125.0
    pmbus_rails: tuple[int, ...] = ()  # rail_ids polled round-robin
    pmbus_exponents: tuple[int, int] = (
        DEFAULT_VOLTAGE_EXPONENT,
        DEFAULT_CURRENT_EXPONENT,
    )

    def __post_init__(self):
        if self.block_frames < 1:
            raise ValueError("block_frames must be >= 1")
        if self.pretrigger_s < MIN_PRETRIGGER_S:
            raise ValueError(
                f"pretrigger_s must be >= {MIN_PRETRIGGER_S}, got {self.pretrigger_s}"
            )
        if not 0 < self.pmbus_rate_sps <= MAX_PMBUS_RATE_SPS:
            raise ValueError(
                f"pmbus_rate_sps must be in (0, {MAX_PMBUS_RATE_SPS}]"
            )

    @property
    def capacity_blocks(self) -> int:
        """Ring capacity: smallest block count spanning >= pretrigger_s."""
        return math.ceil(
            self.pretrigger_s * self.adc.sample_rate_hz / self.block_frames
        )

    @classmethod
    def from_scenario(cls, scenario: Scenario, **overrides) -> "CaptureConfig":
        if "pmbus_rails" not in overrides:
            preferred = ["vccint", "vccaux", "vccbram", "vccps-core", "phy2-io"]
            names = {r.name: r.rail_id for r in scenario.rails}
            chosen = [names[n] for n in preferred if n in names]
            if not chosen:
                chosen = [r.rail_id for r in scenario.rails[:5]]
            overrides["pmbus_rails"] = tuple(chosen)
        return cls(adc=scenario.adc, rails=scenario.rails, **overrides)


class RingBuffer:
    """Fixed-capacity block store; when full, only the oldest is overwritten."""

    def __init__(self, capacity_blocks: int):
        if capacity_blocks < 1:
            raise ValueError("capacity_blocks must be >= 1")
        self.capacity_blocks = capacity_blocks
        self._store: deque[SampleBlock] = deque(maxlen=capacity_blocks)

    def push(self, block: SampleBlock) -> None:
        self._store.append(block)

    def contents(self) -> list[SampleBlock]:
        """Blocks in capture order, oldest first."""
        return list(self._store)

    def __len__(self) -> int:
        return len(self._store)


def timestamp_of_frame(k: int, config: CaptureConfig) -> int:
    """Drift-free frame timestamp via exact integer arithmetic."""
    if k < 0:
        raise ValueError("frame index must be >= 0")
    return (k * 10**9) // config.adc.sample_rate_hz


def _tick_at_or_after(t: float, rate: int) -> int:
    """Index of the first sample tick at or after time t."""
    r = t * rate
    k = math.floor(r)
    if r - k > 1e-6:
        k += 1
    return max(k, 0)


def sample_frames(
    scenario: Scenario, config: CaptureConfig, frame_indices: np.ndarray
) -> np.ndarray:
    """Quantized codes for the given frame indices, shape (n, channels).

    All channels of one frame are evaluated at the same instant; rail
    evaluation order cannot affect the result (channels are independent).
    """
    from .rail_model import quantize_voltage

    t = np.asarray(frame_indices, dtype=np.float64) / config.adc.sample_rate_hz
    codes = np.zeros((len(t), config.adc.channels), dtype=np.uint16)
    for rail in config.rails:
        volts, amps = eval_rail_array(scenario, rail.rail_id, t)
        codes[:, rail.v_channel] = quantize_voltage(volts, config.adc)
        codes[:, rail.i_channel] = quantize_voltage(
            current_to_sense(amps, rail), config.adc
        )
    return codes


def sample_frame(scenario: Scenario, config: CaptureConfig, t: float) -> np.ndarray:
    """One 18-channel frame at a sample-grid instant t."""
    k = int(round(t * config.adc.sample_rate_hz))
    return sample_frames(scenario, config, np.array([k]))[0]


def pmbus_poll_schedule(
    config: CaptureConfig, t_start: float, t_stop: float
) -> list[tuple[float, int]]:
    """Round-robin PMBus poll times within [t_start, t_stop].

    Ticks run at the aggregate rate from t=0; each configured rail is
    visited in turn, so the per-rail rate is aggregate / rail count.
    """
    if not config.pmbus_rails:
        return []
    rate = config.pmbus_rate_sps
    n0 = max(0, math.ceil(t_start * rate - 1e-9))
    out = []
    n = n0
    while n / rate <= t_stop + 1e-12:
        out.append((n / rate, config.pmbus_rails[n % len(config.pmbus_rails)]))
        n += 1
    return out


def run_capture(scenario: Scenario, config: CaptureConfig) -> TraceFile:
    """Simulate a full triggered acquisition and return the trace.

    Blocks stream from t=0 into the pre-trigger ring; on the trigger the
    ring contents plus posttrigger_s worth of further blocks become the
    trace, truncated (and flagged) at scenario boundaries.
    """
    rate = config.adc.sample_rate_hz
    B = config.block_frames
    try:
        t_trig = trigger_time(scenario)
    except ValueError as exc:
        raise CaptureError("no trigger") from exc
    if t_trig > scenario.duration_s:
        raise CaptureError("no trigger")

    k_trig = _tick_at_or_after(t_trig, rate)
    trig_block = k_trig // B
    n_post = int(round(config.posttrigger_s * rate))
    k_last_scenario = math.floor(scenario.duration_s * rate + 1e-6)
    k_stop = min(k_trig + n_post + 1, k_last_scenario + 1)
    truncated_end = k_trig + n_post + 1 > k_stop

    ring = RingBuffer(config.capacity_blocks)
    truncated_pre = trig_block < config.capacity_blocks
    if truncated_pre:
        log.warning(
            "pre-trigger window extends before t=0; truncating at scenario start"
        )

    post_blocks: list[SampleBlock] = []
    chunk_frames = max(B, (_GEN_CHUNK_FRAMES // B) * B)
    block_start = 0
    while block_start < k_stop:
        # block-aligned chunks; only the final chunk may end mid-block
        n = min(chunk_frames, k_stop - block_start)
        if n > B:
            n = (n // B) * B or n
        chunk_stop = block_start + n
        codes = sample_frames(
            scenario, config, np.arange(block_start, chunk_stop, dtype=np.int64)
        )
        for off in range(0, chunk_stop - block_start, B):
            k0 = block_start + off
            block = SampleBlock(
                timestamp_ns=timestamp_of_frame(k0, config),
                frames=codes[off : off + B].copy(),
            )
            if k0 // B < trig_block:
                ring.push(block)
            else:
                post_blocks.append(block)
        block_start = chunk_stop

    blocks = ring.contents() + post_blocks
    if not blocks:
        raise CaptureError("no trigger")

    t_first = blocks[0].timestamp_ns / 1e9
    t_last = (k_stop - 1) / rate
    pmbus_records = [
        _pmbus_record(scenario, config, t, rail_id)
        for t, rail_id in pmbus_poll_schedule(config, t_first, t_last)
    ]

    header = TraceHeader(
        channel_count=config.adc.channels,
        sample_rate_hz=rate,
        block_frames=B,
        rails=config.rails,
    )
    trace = TraceFile(
        header=header,
        blocks=blocks,
        pmbus=pmbus_records,
        triggers=[TriggerEvent(timestamp_ns=timestamp_of_frame(k_trig, config))],
        truncated_pretrigger=truncated_pre,
        truncated_end=truncated_end,
    )
    log.info(
        "captured %d frames in %d blocks (trigger at %d ns)",
        trace.frame_count,
        len(blocks),
        trace.triggers[0].timestamp_ns,
    )
    return trace


def _pmbus_record(
    scenario: Scenario, config: CaptureConfig, t: float, rail_id: int
) -> PmbusRecord:
    e_v, e_i = config.pmbus_exponents
    volts, amps = eval_rail_array(scenario, rail_id, np.array([t]))
    return PmbusRecord(
        timestamp_ns=int(round(t * 1e9)),
        rail_id=rail_id,
        v_raw=linear11_encode(float(volts[0]), e_v),
        i_raw=linear11_encode(float(amps[0]), e_i),
    )


def record_window(
    scenario: Scenario, config: CaptureConfig, first_block: int, n_blocks: int
) -> list[SampleBlock]:
    """Oracle path: slice an unbounded recording into blocks directly."""
    B = config.block_frames
    k0 = first_block * B
    codes = sample_frames(
        scenario, config, np.arange(k0, k0 + n_blocks * B, dtype=np.int64)
    )
    return [
        SampleBlock(
            timestamp_ns=timestamp_of_frame(k0 + off, config),
            frames=codes[off : off + B].copy(),
        )
        for off in range(0, n_blocks * B, B)
    ]
