"""LINEAR11 telemetry codec and the coarse PMBus read path.

LINEAR11 packs a 5-bit two's-complement exponent (bits 15..11) and an
11-bit two's-complement mantissa (bits 10..0); value = mantissa * 2^exponent.
"""

from __future__ import annotations

from dataclasses import dataclass

MANTISSA_MIN, MANTISSA_MAX = -1024, 1023
EXPONENT_MIN, EXPONENT_MAX = -16, 15

# fixed per-quantity exponents: 2^-8 V and 2^-5 A (31.25 mA) steps
DEFAULT_VOLTAGE_EXPONENT = -8
DEFAULT_CURRENT_EXPONENT = -5


def linear11_encode(value: float, exponent: int) -> int:
    """Encode a real value as a raw LINEAR11 word with the given exponent.

    Out-of-range values clamp to the mantissa limits.
    """
    if not EXPONENT_MIN <= exponent <= EXPONENT_MAX:
        raise ValueError(f"exponent must be in [{EXPONENT_MIN}, {EXPONENT_MAX}]")
    m = round(value / 2.0**exponent)
    m = max(MANTISSA_MIN, min(MANTISSA_MAX, m))
    return ((exponent & 0x1F) << 11) | (m & 0x7FF)


def linear11_decode(raw: int) -> float:
    """Decode a raw LINEAR11 word, sign-extending both fields."""
    e = (raw >> 11) & 0x1F
    if e >= 16:
        e -= 32
    m = raw & 0x7FF
    if m >= 1024:
        m -= 2048
    return m * 2.0**e


def linear11_step(exponent: int) -> float:
    """Quantization step size for a fixed exponent."""
    return 2.0**exponent


@dataclass(frozen=True)
class PmbusRecord:
    """One coarse timestamped telemetry reading for a rail."""

    timestamp_ns: int
    rail_id: int
    v_raw: int  # LINEAR11 volts
    i_raw: int  # LINEAR11 amperes

    @property
    def volts(self) -> float:
        return linear11_decode(self.v_raw)

    @property
    def amperes(self) -> float:
        return linear11_decode(self.i_raw)


def pmbus_read(
    scenario,
    rail_id: int,
    t: float,
    exponents: tuple[int, int] = (DEFAULT_VOLTAGE_EXPONENT, DEFAULT_CURRENT_EXPONENT),
    timestamp_ns: int | None = None,
) -> PmbusRecord:
    """Sample a rail's instantaneous V/I and quantize through LINEAR11."""
    from .dut_synth import eval_rail

    e_v, e_i = exponents
    v, i = eval_rail(scenario, rail_id, t)
    ts = timestamp_ns if timestamp_ns is not None else int(round(t * 1e9))
    return PmbusRecord(
        timestamp_ns=ts,
        rail_id=rail_id,
        v_raw=linear11_encode(v, e_v),
        i_raw=linear11_encode(i, e_i),
    )
