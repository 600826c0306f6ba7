"""Deterministic synthetic device-under-test.

Produces per-rail voltage/current waveforms from a scenario schedule:
idle load, workload phases, Ethernet frame bursts, switching ripple,
seeded Gaussian noise and a parasitic ground-reference offset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .rail_model import (
    AdcConfig,
    RailConfig,
    RailGroup,
    current_lsb,
    default_rails,
    validate_channel_map,
)

MIN_FRAME_BYTES = 64
MAX_FRAME_BYTES = 1518
# preamble + SFD (8 bytes) and inter-frame gap (12 bytes) occupy the wire
# alongside the frame itself
WIRE_OVERHEAD_BYTES = 20
GIGABIT_BPS = 1_000_000_000


def frame_duration(frame_bytes: int, line_rate_bps: float = GIGABIT_BPS) -> float:
    """Wire-time of one Ethernet frame, overhead included, in seconds."""
    if not MIN_FRAME_BYTES <= frame_bytes <= MAX_FRAME_BYTES:
        raise ValueError(
            f"frame_bytes must be in [{MIN_FRAME_BYTES}, {MAX_FRAME_BYTES}], "
            f"got {frame_bytes}"
        )
    if line_rate_bps <= 0:
        raise ValueError("line_rate_bps must be > 0")
    return (frame_bytes + WIRE_OVERHEAD_BYTES) * 8 / line_rate_bps


class FrameDirection(str, Enum):
    INGRESS = "ingress"
    EGRESS = "egress"


@dataclass(frozen=True)
class FrameSchedule:
    """Periodic train of frame-shaped current bursts on one rail."""

    rail_id: int
    direction: FrameDirection
    frame_bytes: int
    period_s: float
    count: int
    first_arrival_s: float
    burst_current_a: float  # 0 models traffic invisible in the trace
    line_rate_bps: float = GIGABIT_BPS

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if self.period_s <= self.duration_s:
            raise ValueError("period_s must exceed the frame wire duration")

    @property
    def duration_s(self) -> float:
        return frame_duration(self.frame_bytes, self.line_rate_bps)


def frame_event_times(schedule: FrameSchedule) -> list[tuple[float, float]]:
    """(t_start, t_end) of every scheduled frame, in order."""
    dur = schedule.duration_s
    return [
        (schedule.first_arrival_s + k * schedule.period_s,
         schedule.first_arrival_s + k * schedule.period_s + dur)
        for k in range(schedule.count)
    ]


class TriggerMode(str, Enum):
    AFTER_N_FRAMES = "after_n_frames"
    AT_TIME = "at_time"


@dataclass(frozen=True)
class TriggerSpec:
    mode: TriggerMode
    n: int = 0
    t_s: float = 0.0
    schedule_index: int = 0  # which frame schedule after_n_frames refers to


@dataclass(frozen=True)
class GroundOffsetSpec:
    """Parasitic voltage error from shared return currents.

    activity: piecewise-constant system current schedule as
    (t_start_s, t_end_s, amperes) segments.
    """

    r_ground_ohms: float = 0.0
    activity: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        if self.r_ground_ohms < 0:
            raise ValueError("r_ground_ohms must be >= 0")

    def offset_volts(self, t: np.ndarray) -> np.ndarray:
        out = np.zeros_like(t, dtype=np.float64)
        if self.r_ground_ohms == 0.0:
            return out
        for t0, t1, amps in self.activity:
            out += np.where((t >= t0) & (t < t1), amps, 0.0)
        return out * self.r_ground_ohms


@dataclass(frozen=True)
class RailWaveformSpec:
    """Electrical behaviour of one rail over the scenario."""

    rail_id: int
    nominal_volts: float
    idle_current_a: float
    ripple_amp_a: float = 0.0
    noise_rms_a: float = 0.0
    phases: tuple[tuple[float, float, float], ...] = ()  # (t0, t1, extra_amps)
    ground_referenced: bool = False

    def __post_init__(self):
        if self.nominal_volts <= 0:
            raise ValueError("nominal_volts must be > 0")
        if self.idle_current_a < 0:
            raise ValueError("idle_current_a must be >= 0")
        spans = sorted((p[0], p[1]) for p in self.phases)
        for (a0, a1), (b0, _) in zip(spans, spans[1:]):
            if b0 < a1:
                raise ValueError("phases must not overlap")


@dataclass(frozen=True)
class Scenario:
    duration_s: float
    seed: int
    adc: AdcConfig = field(default_factory=AdcConfig)
    rails: tuple[RailConfig, ...] = ()
    waveforms: tuple[RailWaveformSpec, ...] = ()
    frame_schedules: tuple[FrameSchedule, ...] = ()
    trigger: TriggerSpec | None = None
    ripple_hz: float = 500_000.0  # switching-converter fundamental
    ground_offset: GroundOffsetSpec = field(default_factory=GroundOffsetSpec)

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        validate_channel_map(list(self.rails), self.adc)
        known = {r.rail_id for r in self.rails}
        for wf in self.waveforms:
            if wf.rail_id not in known:
                raise ValueError(f"waveform references unknown rail {wf.rail_id}")
        for sched in self.frame_schedules:
            if sched.rail_id not in known:
                raise ValueError(f"schedule references unknown rail {sched.rail_id}")

    def rail(self, rail_id: int) -> RailConfig:
        for r in self.rails:
            if r.rail_id == rail_id:
                return r
        raise KeyError(f"unknown rail_id {rail_id}")

    def rail_by_name(self, name: str) -> RailConfig:
        for r in self.rails:
            if r.name == name:
                return r
        raise KeyError(f"unknown rail {name!r}")

    def waveform(self, rail_id: int) -> RailWaveformSpec:
        for wf in self.waveforms:
            if wf.rail_id == rail_id:
                return wf
        raise KeyError(f"no waveform for rail_id {rail_id}")


def trigger_time(scenario: Scenario) -> float:
    """Resolve the scenario trigger to an absolute time in seconds."""
    trig = scenario.trigger
    if trig is None:
        raise ValueError("scenario has no trigger")
    if trig.mode is TriggerMode.AT_TIME:
        return trig.t_s
    sched = scenario.frame_schedules[trig.schedule_index]
    if trig.n > sched.count:
        raise ValueError(
            f"trigger after {trig.n} frames but schedule has only {sched.count}"
        )
    events = frame_event_times(sched)
    return events[trig.n - 1][1]


# --- seeded, counter-based noise ---------------------------------------------
#
# Noise must be a pure function of (seed, rail, t) so that eval_rail is
# bit-reproducible for arbitrary, possibly overlapping time ranges.  A
# splitmix64 hash of the time bits provides that; Box-Muller maps the
# hashed uniforms to a standard normal.

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    z = (x + _SM_GAMMA).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _SM_M1
    z = (z ^ (z >> np.uint64(27))) * _SM_M2
    return z ^ (z >> np.uint64(31))


def _unit_noise(seed: int, rail_id: int, t: np.ndarray) -> np.ndarray:
    """Standard-normal noise sample keyed on (seed, rail_id, t)."""
    bits = np.asarray(t, dtype=np.float64).view(np.uint64)
    key = np.uint64((seed ^ (rail_id * 0x51ED2701)) & 0xFFFFFFFFFFFFFFFF)
    h1 = _splitmix64(bits ^ key)
    h2 = _splitmix64(h1)
    # (0, 1] uniforms from the top 53 bits
    u1 = ((h1 >> np.uint64(11)).astype(np.float64) + 1.0) / 9007199254740993.0
    u2 = (h2 >> np.uint64(11)).astype(np.float64) / 9007199254740992.0
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def eval_rail_array(
    scenario: Scenario, rail_id: int, t: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised rail evaluation: (volts, amperes) at each time in `t`."""
    scenario.rail(rail_id)  # raises KeyError on unknown rail
    wf = scenario.waveform(rail_id)
    t = np.asarray(t, dtype=np.float64)

    current = np.full_like(t, wf.idle_current_a)
    for t0, t1, extra in wf.phases:
        current += np.where((t >= t0) & (t < t1), extra, 0.0)
    for sched in scenario.frame_schedules:
        if sched.rail_id != rail_id or sched.count == 0 or sched.burst_current_a == 0.0:
            continue
        k = np.floor((t - sched.first_arrival_s) / sched.period_s)
        k = np.clip(k, 0, sched.count - 1)
        start = sched.first_arrival_s + k * sched.period_s
        active = (t >= start) & (t < start + sched.duration_s)
        current += np.where(active, sched.burst_current_a, 0.0)
    if wf.ripple_amp_a != 0.0:
        current = current + wf.ripple_amp_a * np.sin(
            2.0 * np.pi * scenario.ripple_hz * t
        )
    if wf.noise_rms_a != 0.0:
        current = current + wf.noise_rms_a * _unit_noise(scenario.seed, rail_id, t)

    voltage = np.full_like(t, wf.nominal_volts)
    if wf.ground_referenced:
        voltage = voltage + scenario.ground_offset.offset_volts(t)
    return voltage, current


def eval_rail(scenario: Scenario, rail_id: int, t: float) -> tuple[float, float]:
    """Scalar (volts, amperes) for one rail at time `t`."""
    if not 0.0 <= t <= scenario.duration_s:
        raise ValueError(f"t={t} outside scenario duration {scenario.duration_s}")
    v, i = eval_rail_array(scenario, rail_id, np.array([t]))
    return float(v[0]), float(i[0])


# --- scenario document (JSON) ------------------------------------------------

def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "duration_s": scenario.duration_s,
        "seed": scenario.seed,
        "adc": {
            "full_scale_volts": scenario.adc.full_scale_volts,
            "bits": scenario.adc.bits,
            "sample_rate_hz": scenario.adc.sample_rate_hz,
            "channels": scenario.adc.channels,
        },
        "ripple_hz": scenario.ripple_hz,
        "rails": [
            {
                "rail_id": r.rail_id,
                "name": r.name,
                "shunt_ohms": r.shunt_ohms,
                "amp_gain": r.amp_gain,
                "v_channel": r.v_channel,
                "i_channel": r.i_channel,
                "group": r.group.value,
                "shunt_error": r.shunt_error,
                **_waveform_dict(scenario, r.rail_id),
            }
            for r in scenario.rails
        ],
        "frames": [
            {
                "rail_id": s.rail_id,
                "direction": s.direction.value,
                "frame_bytes": s.frame_bytes,
                "period_s": s.period_s,
                "count": s.count,
                "first_arrival_s": s.first_arrival_s,
                "burst_current_a": s.burst_current_a,
                "line_rate_bps": s.line_rate_bps,
            }
            for s in scenario.frame_schedules
        ],
        "trigger": None
        if scenario.trigger is None
        else {
            "mode": scenario.trigger.mode.value,
            "n": scenario.trigger.n,
            "t_s": scenario.trigger.t_s,
            "schedule_index": scenario.trigger.schedule_index,
        },
        "ground_offset": {
            "r_ground_ohms": scenario.ground_offset.r_ground_ohms,
            "activity": [list(seg) for seg in scenario.ground_offset.activity],
        },
    }


def _waveform_dict(scenario: Scenario, rail_id: int) -> dict:
    wf = scenario.waveform(rail_id)
    return {
        "nominal_volts": wf.nominal_volts,
        "idle_current_a": wf.idle_current_a,
        "ripple_amp_a": wf.ripple_amp_a,
        "noise_rms_a": wf.noise_rms_a,
        "phases": [list(p) for p in wf.phases],
        "ground_referenced": wf.ground_referenced,
    }


def scenario_from_dict(doc: dict) -> Scenario:
    adc_doc = doc.get("adc", {})
    adc = AdcConfig(
        full_scale_volts=adc_doc.get("full_scale_volts", 10.0),
        bits=adc_doc.get("bits", 16),
        sample_rate_hz=adc_doc.get("sample_rate_hz", 225_000),
        channels=adc_doc.get("channels", 18),
    )
    rails, waveforms = [], []
    for rd in doc["rails"]:
        rails.append(
            RailConfig(
                rail_id=rd["rail_id"],
                name=rd["name"],
                shunt_ohms=rd["shunt_ohms"],
                amp_gain=rd["amp_gain"],
                v_channel=rd["v_channel"],
                i_channel=rd["i_channel"],
                group=RailGroup(rd.get("group", "DUT")),
                shunt_error=rd.get("shunt_error", 0.0),
            )
        )
        waveforms.append(
            RailWaveformSpec(
                rail_id=rd["rail_id"],
                nominal_volts=rd["nominal_volts"],
                idle_current_a=rd["idle_current_a"],
                ripple_amp_a=rd.get("ripple_amp_a", 0.0),
                noise_rms_a=rd.get("noise_rms_a", 0.0),
                phases=tuple(tuple(p) for p in rd.get("phases", [])),
                ground_referenced=rd.get("ground_referenced", False),
            )
        )
    schedules = tuple(
        FrameSchedule(
            rail_id=fd["rail_id"],
            direction=FrameDirection(fd["direction"]),
            frame_bytes=fd["frame_bytes"],
            period_s=fd["period_s"],
            count=fd["count"],
            first_arrival_s=fd["first_arrival_s"],
            burst_current_a=fd["burst_current_a"],
            line_rate_bps=fd.get("line_rate_bps", GIGABIT_BPS),
        )
        for fd in doc.get("frames", [])
    )
    trig_doc = doc.get("trigger")
    trigger = None
    if trig_doc is not None:
        trigger = TriggerSpec(
            mode=TriggerMode(trig_doc["mode"]),
            n=trig_doc.get("n", 0),
            t_s=trig_doc.get("t_s", 0.0),
            schedule_index=trig_doc.get("schedule_index", 0),
        )
    go_doc = doc.get("ground_offset", {})
    ground = GroundOffsetSpec(
        r_ground_ohms=go_doc.get("r_ground_ohms", 0.0),
        activity=tuple(tuple(seg) for seg in go_doc.get("activity", [])),
    )
    return Scenario(
        duration_s=doc["duration_s"],
        seed=doc["seed"],
        adc=adc,
        rails=tuple(rails),
        waveforms=tuple(waveforms),
        frame_schedules=schedules,
        trigger=trigger,
        ripple_hz=doc.get("ripple_hz", 500_000.0),
        ground_offset=ground,
    )


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))


# --- presets -----------------------------------------------------------------

def visual_servoing_scenario(seed: int = 2024) -> Scenario:
    """Default scenario: 1000 ingress frames at 1 kHz on the PHY2 I/O rail,
    FPGA-side load while frames arrive, CPU-side load after the trigger."""
    rails = tuple(default_rails())
    adc = AdcConfig()
    by_name = {r.name: r for r in rails}
    lsb_i = current_lsb(by_name["phy2-io"], adc)

    n_frames = 1000
    first, period = 1e-3, 1e-3
    wire = frame_duration(1518)
    t_trig = first + (n_frames - 1) * period + wire

    def wf(name, volts, idle, **kw):
        return RailWaveformSpec(
            rail_id=by_name[name].rail_id,
            nominal_volts=volts,
            idle_current_a=idle,
            noise_rms_a=kw.pop("noise", lsb_i),
            **kw,
        )

    waveforms = (
        # FPGA fabric busy while frames arrive, quiescent afterwards
        wf("vccint", 1.0, 0.30, phases=((0.0, t_trig, 0.25),)),
        wf("vccaux", 1.8, 0.05),
        wf("vccbram", 1.0, 0.01),
        # CPU side takes over after the trigger
        wf("vccps-core", 1.0, 0.20, phases=((t_trig, 2.0, 0.30),)),
        wf("vccps-aux", 1.8, 0.04),
        # switching ripple visible on PHY1 core (aliases at capture rate)
        wf("phy1-core", 1.0, 0.08, ripple_amp_a=5e-3),
        wf("phy1-io", 2.5, 0.05),
        wf("phy2-core", 1.0, 0.08),
        wf("phy2-io", 2.5, 0.06),
    )
    schedules = (
        FrameSchedule(
            rail_id=by_name["phy2-io"].rail_id,
            direction=FrameDirection.INGRESS,
            frame_bytes=1518,
            period_s=period,
            count=n_frames,
            first_arrival_s=first,
            burst_current_a=0.02,
        ),
        # egress on PHY2 draws no measurable current: invisible by construction
        FrameSchedule(
            rail_id=by_name["phy2-core"].rail_id,
            direction=FrameDirection.EGRESS,
            frame_bytes=1518,
            period_s=period,
            count=n_frames,
            first_arrival_s=first + period / 2,
            burst_current_a=0.0,
        ),
    )
    return Scenario(
        duration_s=2.0,
        seed=seed,
        adc=adc,
        rails=rails,
        waveforms=waveforms,
        frame_schedules=schedules,
        trigger=TriggerSpec(mode=TriggerMode.AFTER_N_FRAMES, n=n_frames),
    )


PRESETS = {"visual-servoing": visual_servoing_scenario}
