"""Bit-exact binary trace format (.ptrc) and CSV export.

Layout (all integers little-endian, stream is append-only):

  header:  magic "PTRC", version u16, channel_count u8, sample_rate_hz u32,
           block_frames u16, rail_count u8, then per rail:
           {name_len u8, name bytes, shunt_uohm u32, gain_x1000 u32,
            v_channel u8, i_channel u8, group u8}
  records: tag u8 followed by the record payload --
           0x01 sample block  {timestamp_ns u64, frame_count u16,
                               frames u16 x (frame_count x channel_count)}
           0x02 PMBus record  {timestamp_ns u64, rail_id u8,
                               v_linear11 u16, i_linear11 u16}
           0x03 trigger event {timestamp_ns u64, source u8}

A truncated final record is dropped with a warning count; anything else
malformed raises TraceFormatError.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .pmbus import PmbusRecord
from .rail_model import RailConfig, RailGroup, code_to_voltage, sense_to_current

MAGIC = b"PTRC"
VERSION = 1

TAG_SAMPLE_BLOCK = 0x01
TAG_PMBUS = 0x02
TAG_TRIGGER = 0x03

_GROUPS = [RailGroup.DUT, RailGroup.PHY1, RailGroup.PHY2, RailGroup.HDMI]

FILE_EXTENSION = ".ptrc"


class TraceFormatError(ValueError):
    """Raised when a byte stream is not a decodable trace."""


@dataclass(frozen=True)
class TraceHeader:
    channel_count: int
    sample_rate_hz: int
    block_frames: int
    rails: tuple[RailConfig, ...]

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


@dataclass
class SampleBlock:
    """One timestamped block of simultaneous multi-channel codes."""

    timestamp_ns: int
    frames: np.ndarray  # shape (frame_count, channel_count), uint16

    def __eq__(self, other):
        if not isinstance(other, SampleBlock):
            return NotImplemented
        return self.timestamp_ns == other.timestamp_ns and np.array_equal(
            self.frames, other.frames
        )


@dataclass(frozen=True)
class TriggerEvent:
    timestamp_ns: int
    source: int = 0  # 0 = external trigger line


@dataclass
class TraceFile:
    header: TraceHeader
    blocks: list[SampleBlock] = field(default_factory=list)
    pmbus: list[PmbusRecord] = field(default_factory=list)
    triggers: list[TriggerEvent] = field(default_factory=list)
    # decode/capture diagnostics; not serialized and not part of equality
    warnings: int = field(default=0, compare=False)
    truncated_pretrigger: bool = field(default=False, compare=False)
    truncated_end: bool = field(default=False, compare=False)

    @property
    def frame_count(self) -> int:
        return sum(b.frames.shape[0] for b in self.blocks)

    def frame_timestamps_ns(self) -> np.ndarray:
        """Per-frame timestamps reconstructed from block stamps and the
        nominal sample rate."""
        rate = self.header.sample_rate_hz
        parts = []
        for block in self.blocks:
            n = block.frames.shape[0]
            offs = (np.arange(n, dtype=np.int64) * 10**9) // rate
            parts.append(block.timestamp_ns + offs)
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(parts)

    def channel_codes(self, channel: int) -> np.ndarray:
        if not self.blocks:
            return np.empty(0, dtype=np.uint16)
        return np.concatenate([b.frames[:, channel] for b in self.blocks])


def _encode_header(header: TraceHeader) -> bytes:
    out = bytearray()
    out += MAGIC
    out += struct.pack(
        "<HBIHB",
        VERSION,
        header.channel_count,
        header.sample_rate_hz,
        header.block_frames,
        len(header.rails),
    )
    for rail in sorted(header.rails, key=lambda r: r.rail_id):
        name = rail.name.encode("utf-8")
        if len(name) > 255:
            raise ValueError(f"rail name too long: {rail.name!r}")
        out += struct.pack("<B", len(name))
        out += name
        out += struct.pack(
            "<IIBBB",
            int(round(rail.shunt_ohms * 1e6)),
            int(round(rail.amp_gain * 1e3)),
            rail.v_channel,
            rail.i_channel,
            _GROUPS.index(rail.group),
        )
    return bytes(out)


def encode(trace: TraceFile) -> bytes:
    """Serialize a trace to its canonical byte stream."""
    out = bytearray(_encode_header(trace.header))
    records: list[tuple[int, int, bytes]] = []
    for block in trace.blocks:
        frames = np.ascontiguousarray(block.frames, dtype="<u2")
        payload = (
            struct.pack("<QH", block.timestamp_ns, frames.shape[0])
            + frames.tobytes()
        )
        records.append((block.timestamp_ns, TAG_SAMPLE_BLOCK, payload))
    for rec in trace.pmbus:
        payload = struct.pack(
            "<QBHH", rec.timestamp_ns, rec.rail_id, rec.v_raw, rec.i_raw
        )
        records.append((rec.timestamp_ns, TAG_PMBUS, payload))
    for trig in trace.triggers:
        payload = struct.pack("<QB", trig.timestamp_ns, trig.source)
        records.append((trig.timestamp_ns, TAG_TRIGGER, payload))
    records.sort(key=lambda r: r[0])
    for _, tag, payload in records:
        out.append(tag)
        out += payload
    return bytes(out)


class _Reader:
    """Bounds-checked cursor over the input bytes."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if self.remaining() < n:
            raise _Truncated()
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


class _Truncated(Exception):
    pass


def _decode_header(r: _Reader) -> TraceHeader:
    try:
        if r.take(4) != MAGIC:
            raise TraceFormatError("not a trace")
    except _Truncated:
        raise TraceFormatError("not a trace") from None
    try:
        version, channels, rate, block_frames, rail_count = r.unpack("<HBIHB")
        if version != VERSION:
            raise TraceFormatError(f"unsupported version {version}")
        rails = []
        for rail_id in range(rail_count):
            (name_len,) = r.unpack("<B")
            name = r.take(name_len).decode("utf-8", errors="replace")
            shunt_uohm, gain_x1000, v_ch, i_ch, group = r.unpack("<IIBBB")
            if group >= len(_GROUPS):
                raise TraceFormatError(f"corrupt at offset {r.pos}")
            rails.append(
                RailConfig(
                    rail_id=rail_id,
                    name=name,
                    shunt_ohms=shunt_uohm / 1e6,
                    amp_gain=gain_x1000 / 1e3,
                    v_channel=v_ch,
                    i_channel=i_ch,
                    group=_GROUPS[group],
                )
            )
    except _Truncated:
        raise TraceFormatError("truncated header") from None
    except ValueError as exc:
        raise TraceFormatError(f"corrupt header: {exc}") from None
    return TraceHeader(
        channel_count=channels,
        sample_rate_hz=rate,
        block_frames=block_frames,
        rails=tuple(rails),
    )


def decode(data: bytes) -> TraceFile:
    """Parse a byte stream back into a TraceFile.

    A record cut off at end-of-stream is dropped (counted in
    ``trace.warnings``); malformed content raises TraceFormatError.
    """
    r = _Reader(data)
    header = _decode_header(r)
    trace = TraceFile(header=header)
    while r.remaining() > 0:
        record_start = r.pos
        tag = r.take(1)[0]
        try:
            if tag == TAG_SAMPLE_BLOCK:
                timestamp_ns, frame_count = r.unpack("<QH")
                raw = r.take(frame_count * header.channel_count * 2)
                frames = np.frombuffer(raw, dtype="<u2").reshape(
                    frame_count, header.channel_count
                )
                trace.blocks.append(
                    SampleBlock(timestamp_ns=timestamp_ns, frames=frames.copy())
                )
            elif tag == TAG_PMBUS:
                timestamp_ns, rail_id, v_raw, i_raw = r.unpack("<QBHH")
                trace.pmbus.append(
                    PmbusRecord(
                        timestamp_ns=timestamp_ns,
                        rail_id=rail_id,
                        v_raw=v_raw,
                        i_raw=i_raw,
                    )
                )
            elif tag == TAG_TRIGGER:
                timestamp_ns, source = r.unpack("<QB")
                trace.triggers.append(
                    TriggerEvent(timestamp_ns=timestamp_ns, source=source)
                )
            else:
                raise TraceFormatError(f"corrupt at offset {record_start}")
        except _Truncated:
            trace.warnings += 1
            break
    return trace


def write_trace(trace: TraceFile, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(trace))


def read_trace(path) -> TraceFile:
    with open(path, "rb") as fh:
        return decode(fh.read())


def export_csv(
    trace: TraceFile,
    rails: list[str] | None = None,
    engineering_units: bool = False,
) -> str:
    """Render frames as CSV: timestamp plus V/I columns per selected rail.

    Raw mode emits the stored codes; engineering mode converts through the
    header's sense parameters.
    """
    if rails is None:
        selected = sorted(trace.header.rails, key=lambda r: r.rail_id)
    else:
        selected = [trace.header.rail_by_name(name) for name in rails]

    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    suffix_v = "_v" if engineering_units else "_vcode"
    suffix_i = "_a" if engineering_units else "_icode"
    writer.writerow(
        ["timestamp_ns"]
        + [col for r in selected for col in (r.name + suffix_v, r.name + suffix_i)]
    )
    timestamps = trace.frame_timestamps_ns()
    columns = []
    from .rail_model import AdcConfig

    adc = AdcConfig(sample_rate_hz=trace.header.sample_rate_hz)
    for r in selected:
        v_codes = trace.channel_codes(r.v_channel)
        i_codes = trace.channel_codes(r.i_channel)
        if engineering_units:
            columns.append(
                [f"{v:.6f}" for v in code_to_voltage(v_codes, adc)]
            )
            columns.append(
                [f"{i:.6f}" for i in sense_to_current(code_to_voltage(i_codes, adc), r)]
            )
        else:
            columns.append([str(int(c)) for c in v_codes])
            columns.append([str(int(c)) for c in i_codes])
    for row_idx, ts in enumerate(timestamps):
        writer.writerow([str(int(ts))] + [col[row_idx] for col in columns])
    return buf.getvalue()
