"""Trajectory cache: a framed little-endian binary file plus a JSON-lines mirror.

Layout::

    b"TRVK1" | u16 version | u32 record count
    per record: u32 payload length | payload

    payload: u8 status | u8 state dim | u16 event count | u16 message bytes
             | f64[dim] entry | f64 entry_time | f64[dim] start (NaN if none)
             | per event: f64 time, f64[dim] state, i32 multiplicity, i32 sign
             | utf-8 message
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .integrate import Event, TrajectoryRecord

MAGIC = b"TRVK1"
VERSION = 1
_STATUS = ["ok", "budget", "ill-conditioned", "parity", "outside"]


class CacheFormatError(ValueError):
    pass


def _pack(rec: TrajectoryRecord) -> bytes:
    dim = len(rec.entry_state)
    msg = rec.message.encode("utf-8")
    start = rec.start_state if rec.start_state is not None else (float("nan"),) * dim
    parts = [struct.pack("<BBHH", _STATUS.index(rec.status), dim, len(rec.events), len(msg)),
             struct.pack(f"<{dim}d", *rec.entry_state), struct.pack("<d", rec.entry_time),
             struct.pack(f"<{dim}d", *start)]
    for e in rec.events:
        parts.append(struct.pack(f"<d{dim}dii", e.time, *e.state, e.multiplicity, e.sign))
    parts.append(msg)
    return b"".join(parts)


def _unpack(buf: bytes) -> TrajectoryRecord:
    status, dim, n_ev, n_msg = struct.unpack_from("<BBHH", buf, 0)
    off = 6
    entry = struct.unpack_from(f"<{dim}d", buf, off)
    off += 8 * dim
    (entry_time,) = struct.unpack_from("<d", buf, off)
    off += 8
    start = struct.unpack_from(f"<{dim}d", buf, off)
    off += 8 * dim
    events = []
    fmt = f"<d{dim}dii"
    size = struct.calcsize(fmt)
    for _ in range(n_ev):
        vals = struct.unpack_from(fmt, buf, off)
        off += size
        events.append(Event(vals[0], tuple(vals[1:1 + dim]), vals[1 + dim], vals[2 + dim]))
    msg = buf[off:off + n_msg].decode("utf-8")
    if off + n_msg != len(buf):
        raise CacheFormatError("record length mismatch")
    return TrajectoryRecord(entry_state=entry, start_state=None if np.isnan(start).all() else start,
                            events=events, status=_STATUS[status], message=msg,
                            entry_time=entry_time)


def write_cache(path, records: list[TrajectoryRecord]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<HI", VERSION, len(records)))
        for rec in records:
            payload = _pack(rec)
            fh.write(struct.pack("<I", len(payload)))
            fh.write(payload)


def read_cache(path) -> list[TrajectoryRecord]:
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise CacheFormatError("bad magic; not a trajectory cache")
    version, count = struct.unpack_from("<HI", data, 5)
    if version != VERSION:
        raise CacheFormatError(f"unsupported cache version {version}")
    off = 11
    out = []
    for _ in range(count):
        if off + 4 > len(data):
            raise CacheFormatError("truncated cache")
        (n,) = struct.unpack_from("<I", data, off)
        off += 4
        if off + n > len(data):
            raise CacheFormatError("truncated cache")
        out.append(_unpack(data[off:off + n]))
        off += n
    if off != len(data):
        raise CacheFormatError("trailing bytes after last record")
    return out


def record_to_dict(rec: TrajectoryRecord) -> dict:
    return {
        "entry": list(rec.entry_state),
        "entry_time": rec.entry_time,
        "start": None if rec.start_state is None else list(rec.start_state),
        "status": rec.status,
        "pattern": None if rec.pattern is None else str(rec.pattern),
        "events": [{"t": e.time, "state": list(e.state), "m": e.multiplicity, "sign": e.sign}
                   for e in rec.events],
        "message": rec.message,
    }


def write_jsonl(path, records: list[TrajectoryRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec), sort_keys=True) + "\n")
