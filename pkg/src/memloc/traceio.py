"""Bit-exact binary access-trace format.

Layout:
  header, 17 bytes: magic "MLTR" (4), version (1), zero padding (4),
  record count (8-byte little-endian)
  records, 16 bytes each: vaddr (8 LE), cycle (4 LE), kind (1),
  zero padding (3)

kind: 0 = read, 1 = write, 2 = prefetch.  Cycles are non-decreasing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"MLTR"
VERSION = 1
HEADER_SIZE = 17
RECORD_SIZE = 16

KIND_READ = 0
KIND_WRITE = 1
KIND_PREFETCH = 2

RECORD_DTYPE = np.dtype(
    [("vaddr", "<u8"), ("cycle", "<u4"), ("kind", "u1"), ("pad", "3u1")]
)


class TraceFormatError(ValueError):
    pass


@dataclass
class Trace:
    """In-memory access trace backed by parallel numpy arrays."""

    vaddr: np.ndarray
    cycle: np.ndarray
    kind: np.ndarray

    def __post_init__(self):
        self.vaddr = np.asarray(self.vaddr, dtype=np.uint64)
        self.cycle = np.asarray(self.cycle, dtype=np.uint32)
        self.kind = np.asarray(self.kind, dtype=np.uint8)
        if not (len(self.vaddr) == len(self.cycle) == len(self.kind)):
            raise TraceFormatError("vaddr/cycle/kind length mismatch")

    def __len__(self):
        return len(self.vaddr)

    def __eq__(self, other):
        return (
            isinstance(other, Trace)
            and np.array_equal(self.vaddr, other.vaddr)
            and np.array_equal(self.cycle, other.cycle)
            and np.array_equal(self.kind, other.kind)
        )

    @classmethod
    def empty(cls) -> "Trace":
        return cls(np.empty(0, np.uint64), np.empty(0, np.uint32), np.empty(0, np.uint8))

    @classmethod
    def from_addresses(cls, vaddr, kind=KIND_READ, issue_gap: int = 4) -> "Trace":
        """Build a trace with a fixed issue gap between records."""
        vaddr = np.asarray(vaddr, dtype=np.uint64)
        n = len(vaddr)
        cycle = (np.arange(n, dtype=np.uint64) * issue_gap).astype(np.uint32)
        kinds = np.full(n, kind, dtype=np.uint8) if np.isscalar(kind) else np.asarray(kind, np.uint8)
        return cls(vaddr, cycle, kinds)

    def validate(self):
        if len(self) and np.any(np.diff(self.cycle.astype(np.int64)) < 0):
            raise TraceFormatError("cycles must be non-decreasing")
        if np.any(self.kind > KIND_PREFETCH):
            raise TraceFormatError("unknown record kind")


def write_trace(path, trace: Trace):
    trace.validate()
    n = len(trace)
    rec = np.zeros(n, dtype=RECORD_DTYPE)
    rec["vaddr"] = trace.vaddr
    rec["cycle"] = trace.cycle
    rec["kind"] = trace.kind
    header = MAGIC + struct.pack("<B", VERSION) + b"\x00" * 4 + struct.pack("<Q", n)
    assert len(header) == HEADER_SIZE
    with open(path, "wb") as f:
        f.write(header)
        f.write(rec.tobytes())


def read_trace(path) -> Trace:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE or raw[:4] != MAGIC:
        raise TraceFormatError(f"{path}: not a trace file")
    version = raw[4]
    if version != VERSION:
        raise TraceFormatError(f"{path}: unsupported version {version}")
    (count,) = struct.unpack("<Q", raw[9:17])
    expected = HEADER_SIZE + RECORD_SIZE * count
    if len(raw) != expected:
        raise TraceFormatError(
            f"{path}: size {len(raw)} != {expected} for {count} records"
        )
    rec = np.frombuffer(raw, dtype=RECORD_DTYPE, count=count, offset=HEADER_SIZE)
    trace = Trace(rec["vaddr"].copy(), rec["cycle"].copy(), rec["kind"].copy())
    trace.validate()
    return trace
