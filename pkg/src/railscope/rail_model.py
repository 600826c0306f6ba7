"""Sense-circuit math: ADC code conversions, shunt/gain current scaling
and the channel-to-rail map."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class RailGroup(str, Enum):
    DUT = "DUT"
    PHY1 = "PHY1"
    PHY2 = "PHY2"
    HDMI = "HDMI"


@dataclass(frozen=True)
class AdcConfig:
    """Converter geometry shared by all channels.

    Unipolar mapping: code 0 is 0 V, full scale spans 2^bits codes.
    """

    full_scale_volts: float = 10.0
    bits: int = 16
    sample_rate_hz: int = 225_000
    channels: int = 18

    MAX_SAMPLE_RATE_HZ = 630_000

    def __post_init__(self):
        if not 0 < self.sample_rate_hz <= self.MAX_SAMPLE_RATE_HZ:
            raise ValueError(
                f"sample_rate_hz must be in (0, {self.MAX_SAMPLE_RATE_HZ}], "
                f"got {self.sample_rate_hz}"
            )

    @property
    def code_span(self) -> int:
        return 1 << self.bits

    @property
    def max_code(self) -> int:
        return self.code_span - 1

    @property
    def lsb_volts(self) -> float:
        return self.full_scale_volts / self.code_span


@dataclass(frozen=True)
class RailConfig:
    """One monitored supply rail and its sense circuitry."""

    rail_id: int
    name: str
    shunt_ohms: float
    amp_gain: float
    v_channel: int
    i_channel: int
    group: RailGroup = RailGroup.DUT
    shunt_error: float = field(default=0.0)  # static multiplicative shunt tolerance knob

    def __post_init__(self):
        if self.shunt_ohms <= 0:
            raise ValueError(f"shunt_ohms must be > 0, got {self.shunt_ohms}")
        if self.amp_gain <= 0:
            raise ValueError(f"amp_gain must be > 0, got {self.amp_gain}")
        if self.v_channel == self.i_channel:
            raise ValueError(
                f"rail {self.name!r}: v_channel and i_channel must differ"
            )

    @property
    def effective_shunt_ohms(self) -> float:
        return self.shunt_ohms * (1.0 + self.shunt_error)


def validate_channel_map(rails: list[RailConfig], adc: AdcConfig) -> None:
    """Reject duplicate or out-of-range channel assignments."""
    used: dict[int, str] = {}
    for rail in rails:
        for ch in (rail.v_channel, rail.i_channel):
            if not 0 <= ch < adc.channels:
                raise ValueError(
                    f"rail {rail.name!r}: channel {ch} outside 0..{adc.channels - 1}"
                )
            if ch in used:
                raise ValueError(
                    f"channel {ch} claimed by both {used[ch]!r} and {rail.name!r}"
                )
            used[ch] = rail.name


def code_to_voltage(code, adc: AdcConfig):
    """Map a raw ADC code (or array of codes) to volts."""
    return np.asarray(code, dtype=np.float64) * (adc.full_scale_volts / adc.code_span)


def quantize_voltage(v, adc: AdcConfig):
    """Inverse of :func:`code_to_voltage`: round to nearest code, clamp to range."""
    codes = np.rint(np.asarray(v, dtype=np.float64) / adc.lsb_volts)
    codes = np.clip(codes, 0, adc.max_code)
    out = codes.astype(np.uint16)
    return out if out.ndim else int(out)


def sense_to_current(v_sense, rail: RailConfig):
    """Convert an amplified shunt-drop voltage back to rail current."""
    return np.asarray(v_sense, dtype=np.float64) / (
        rail.amp_gain * rail.effective_shunt_ohms
    )


def current_to_sense(current, rail: RailConfig):
    """Rail current to the sense voltage seen by the ADC channel."""
    return np.asarray(current, dtype=np.float64) * (
        rail.amp_gain * rail.effective_shunt_ohms
    )


def current_lsb(rail: RailConfig, adc: AdcConfig) -> float:
    """Smallest resolvable current step for this rail's sense parameters."""
    return adc.lsb_volts / (rail.amp_gain * rail.effective_shunt_ohms)


# Default 9-rail allocation: five DUT rails plus core/IO pairs for both
# Ethernet PHYs, each rail claiming a (V, I) channel pair.
_DEFAULT_RAIL_TABLE = [
    ("vccint", RailGroup.DUT),
    ("vccaux", RailGroup.DUT),
    ("vccbram", RailGroup.DUT),
    ("vccps-core", RailGroup.DUT),
    ("vccps-aux", RailGroup.DUT),
    ("phy1-core", RailGroup.PHY1),
    ("phy1-io", RailGroup.PHY1),
    ("phy2-core", RailGroup.PHY2),
    ("phy2-io", RailGroup.PHY2),
]

DEFAULT_AMP_GAIN = 50.0
DEFAULT_SHUNT_OHMS = 0.1


def default_rails() -> list[RailConfig]:
    """Default channel map: 9 rails x (V, I) pairs filling all 18 channels."""
    rails = []
    for idx, (name, group) in enumerate(_DEFAULT_RAIL_TABLE):
        rails.append(
            RailConfig(
                rail_id=idx,
                name=name,
                shunt_ohms=DEFAULT_SHUNT_OHMS,
                amp_gain=DEFAULT_AMP_GAIN,
                v_channel=2 * idx,
                i_channel=2 * idx + 1,
                group=group,
            )
        )
    return rails
