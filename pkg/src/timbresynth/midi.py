"""Minimal standard MIDI file reader/writer.

Tracks are merged; note-on/off and tempo events are honored, everything else
is skipped. Times come out in seconds via the tempo map.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import InvalidArgument


@dataclass
class NoteEvent:
    midi_note: int
    onset_s: float
    duration_s: float
    velocity: int | None = None

    def __post_init__(self):
        if self.duration_s <= 0:
            raise InvalidArgument("note duration must be > 0")
        if self.onset_s < 0:
            raise InvalidArgument("note onset must be >= 0")


def _read_varlen(data, pos):
    value = 0
    while True:
        b = data[pos]
        pos += 1
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            return value, pos


def _parse_track(data):
    """Yield (tick, kind, note, velocity) with kind in {'on','off','tempo'}."""
    pos = 0
    tick = 0
    running = None
    events = []
    while pos < len(data):
        delta, pos = _read_varlen(data, pos)
        tick += delta
        status = data[pos]
        if status & 0x80:
            pos += 1
            running = status
        else:
            status = running
        kind = status & 0xF0
        if kind in (0x80, 0x90):
            note, vel = data[pos], data[pos + 1]
            pos += 2
            if kind == 0x90 and vel > 0:
                events.append((tick, "on", note, vel))
            else:
                events.append((tick, "off", note, 0))
        elif kind in (0xA0, 0xB0, 0xE0):
            pos += 2
        elif kind in (0xC0, 0xD0):
            pos += 1
        elif status == 0xFF:
            meta = data[pos]
            pos += 1
            length, pos = _read_varlen(data, pos)
            if meta == 0x51:
                tempo = int.from_bytes(data[pos:pos + 3], "big")
                events.append((tick, "tempo", tempo, 0))
            pos += length
        elif status in (0xF0, 0xF7):
            length, pos = _read_varlen(data, pos)
            pos += length
        else:
            raise InvalidArgument(f"unsupported MIDI status byte 0x{status:02x}")
    return events


def parse_midi(path) -> list[NoteEvent]:
    """Read a .mid file into sorted NoteEvents (all tracks merged)."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != b"MThd":
        raise InvalidArgument(f"{path} is not a MIDI file")
    (hlen,) = struct.unpack(">I", data[4:8])
    _fmt, n_tracks, division = struct.unpack(">HHH", data[8:14])
    if division & 0x8000:
        raise InvalidArgument("SMPTE time division is not supported")
    pos = 8 + hlen
    merged = []
    for _ in range(n_tracks):
        if data[pos:pos + 4] != b"MTrk":
            raise InvalidArgument("malformed track chunk")
        (tlen,) = struct.unpack(">I", data[pos + 4:pos + 8])
        merged.extend(_parse_track(data[pos + 8:pos + 8 + tlen]))
        pos += 8 + tlen
    merged.sort(key=lambda e: (e[0], e[1] != "tempo"))

    # walk the tempo map, converting ticks to seconds
    events = []
    open_notes = {}
    sec_per_tick = 500000 / 1e6 / division      # default 120 bpm
    now_s, now_tick = 0.0, 0
    for tick, kind, a, b in merged:
        now_s += (tick - now_tick) * sec_per_tick
        now_tick = tick
        if kind == "tempo":
            sec_per_tick = a / 1e6 / division
        elif kind == "on":
            open_notes.setdefault(a, []).append((now_s, b))
        elif kind == "off" and open_notes.get(a):
            onset, vel = open_notes[a].pop(0)
            if now_s > onset:
                events.append(NoteEvent(a, onset, now_s - onset, vel))
    events.sort(key=lambda e: (e.onset_s, e.midi_note))
    return events


def _varlen(value):
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def write_midi(events, path, tempo_bpm: float = 120.0, division: int = 480):
    """Write NoteEvents as a single-track MIDI file (testing / demo helper)."""
    sec_per_tick = 60.0 / tempo_bpm / division
    timeline = []
    for e in events:
        timeline.append((round(e.onset_s / sec_per_tick), 0x90, e.midi_note, e.velocity or 80))
        timeline.append((round((e.onset_s + e.duration_s) / sec_per_tick), 0x80, e.midi_note, 0))
    timeline.sort(key=lambda t: (t[0], t[1]))
    body = bytearray()
    body += _varlen(0) + bytes([0xFF, 0x51, 0x03]) + int(60e6 / tempo_bpm).to_bytes(3, "big")
    last = 0
    for tick, status, note, vel in timeline:
        body += _varlen(tick - last) + bytes([status, note, vel])
        last = tick
    body += _varlen(0) + bytes([0xFF, 0x2F, 0x00])
    with open(path, "wb") as f:
        f.write(b"MThd" + struct.pack(">IHHH", 6, 0, 1, division))
        f.write(b"MTrk" + struct.pack(">I", len(body)) + bytes(body))
