"""Set-associative LRU cache hierarchy with prefetch models.

Filters a demand trace down to the accesses that reach DRAM.  The
hierarchy is non-inclusive with fill-on-miss along the lookup path.
A per-page stride prefetcher (with next-line behavior on misses)
models the default hardware prefetching into L2; software prefetch
records fill only their target level and are never counted as demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .traceio import KIND_PREFETCH, Trace

LINE_SIZE = 64
PAGE_SIZE = 4096

LEVEL_NAMES = ("L1", "L2", "L3")


@dataclass(frozen=True)
class LevelConfig:
    capacity_bytes: int
    associativity: int
    line_size: int = LINE_SIZE

    def __post_init__(self):
        sets = self.capacity_bytes // (self.associativity * self.line_size)
        if sets * self.associativity * self.line_size != self.capacity_bytes:
            raise ValueError("capacity must be divisible by ways * line size")
        if sets & (sets - 1):
            raise ValueError("set count must be a power of two")

    @property
    def num_sets(self) -> int:
        return self.capacity_bytes // (self.associativity * self.line_size)


@dataclass(frozen=True)
class CacheConfig:
    l1: LevelConfig = LevelConfig(32 * 1024, 8)
    l2: LevelConfig = LevelConfig(256 * 1024, 8)
    l3: LevelConfig = LevelConfig(8 * 1024 * 1024, 16)

    @property
    def levels(self):
        return (self.l1, self.l2, self.l3)


@dataclass(frozen=True)
class StridePrefetchConfig:
    degree: int = 2
    distance: int = 1

    def __post_init__(self):
        if self.degree < 1 or self.distance < 1:
            raise ValueError("degree and distance must be >= 1")


@dataclass(frozen=True)
class PrefetchConfig:
    hw: StridePrefetchConfig | None = None
    sw_target: str = "L2"  # target level for injected prefetch records

    def __post_init__(self):
        if self.sw_target not in LEVEL_NAMES:
            raise ValueError(f"sw target must be one of {LEVEL_NAMES}")


@dataclass
class MemsysStats:
    demand_accesses: list = field(default_factory=lambda: [0, 0, 0])
    demand_misses: list = field(default_factory=lambda: [0, 0, 0])
    hw_prefetches_issued: int = 0
    hw_prefetches_useful: int = 0
    sw_prefetches_seen: int = 0
    dram_demand_accesses: int = 0

    @property
    def hw_prefetches_useless(self) -> int:
        return self.hw_prefetches_issued - self.hw_prefetches_useful

    @property
    def useless_fraction(self) -> float:
        if self.hw_prefetches_issued == 0:
            return 0.0
        return self.hw_prefetches_useless / self.hw_prefetches_issued

    def miss_ratio(self, level: int) -> float:
        acc = self.demand_accesses[level]
        return self.demand_misses[level] / acc if acc else 0.0


class _Level:
    """One set-associative LRU level.  Way order encodes recency (MRU last)."""

    __slots__ = ("ways", "set_mask", "sets", "line_shift")

    def __init__(self, cfg: LevelConfig):
        self.ways = cfg.associativity
        self.set_mask = cfg.num_sets - 1
        self.sets = [[] for _ in range(cfg.num_sets)]
        self.line_shift = cfg.line_size.bit_length() - 1

    def lookup(self, line: int) -> bool:
        """Hit: refresh recency and return True.  No fill on miss."""
        ways = self.sets[line & self.set_mask]
        try:
            ways.remove(line)
        except ValueError:
            return False
        ways.append(line)
        return True

    def fill(self, line: int) -> int | None:
        """Insert as MRU; returns the evicted line, if any."""
        ways = self.sets[line & self.set_mask]
        victim = None
        if len(ways) >= self.ways:
            victim = ways.pop(0)
        ways.append(line)
        return victim

    def contains(self, line: int) -> bool:
        return line in self.sets[line & self.set_mask]


class _StridePrefetcher:
    """Per-4KB-page stream table feeding prefetches into L2.

    Trains on the L2 access stream (L1 demand misses).  A confirmed
    stride (two consecutive same-page deltas equal) issues `degree`
    line prefetches ahead; an L2 demand miss also issues a next-line
    prefetch, modeling default next-line behavior.
    """

    def __init__(self, cfg: StridePrefetchConfig):
        self.cfg = cfg
        self.table: dict = {}  # page -> (last_line, stride)

    def observe(self, line: int, l2_miss: bool):
        page = line >> 6  # lines per 4KB page
        out = []
        entry = self.table.get(page)
        if entry is not None:
            last, stride = entry
            delta = line - last
            if delta != 0 and delta == stride:
                for i in range(1, self.cfg.degree + 1):
                    out.append(line + delta * (self.cfg.distance + i - 1))
            self.table[page] = (line, delta)
        else:
            self.table[page] = (line, 0)
        if l2_miss:
            out.append(line + 1)
        return out


class CacheHierarchy:
    """Three-level demand filter with prefetch accounting."""

    def __init__(self, cache: CacheConfig = CacheConfig(),
                 pf: PrefetchConfig = PrefetchConfig()):
        self.levels = [_Level(c) for c in cache.levels]
        self.pf = pf
        self.stats = MemsysStats()
        self.hw = _StridePrefetcher(pf.hw) if pf.hw else None
        self.pf_lines: set = set()  # hw-prefetched L2 lines not yet demand-hit
        self.sw_level = LEVEL_NAMES.index(pf.sw_target)

    def _fill_l2(self, line: int, prefetched: bool):
        victim = self.levels[1].fill(line)
        if prefetched:
            self.pf_lines.add(line)
        if victim is not None:
            self.pf_lines.discard(victim)  # evicted unused -> stays useless

    def access_demand(self, line: int) -> bool:
        """Returns True when the access misses all levels (reaches DRAM)."""
        st = self.stats
        st.demand_accesses[0] += 1
        if self.levels[0].lookup(line):
            return False
        st.demand_misses[0] += 1
        st.demand_accesses[1] += 1
        l2_hit = self.levels[1].lookup(line)
        if l2_hit and line in self.pf_lines:
            self.pf_lines.discard(line)
            st.hw_prefetches_useful += 1
        if not l2_hit:
            st.demand_misses[1] += 1
        if self.hw is not None:
            for pline in self.hw.observe(line, not l2_hit):
                if not self.levels[1].contains(pline):
                    st.hw_prefetches_issued += 1
                    self._fill_l2(pline, prefetched=True)
        if l2_hit:
            self.levels[0].fill(line)
            return False
        st.demand_accesses[2] += 1
        if self.levels[2].lookup(line):
            self._fill_l2(line, prefetched=False)
            self.levels[0].fill(line)
            return False
        st.demand_misses[2] += 1
        self.levels[2].fill(line)
        self._fill_l2(line, prefetched=False)
        self.levels[0].fill(line)
        st.dram_demand_accesses += 1
        return True

    def access_prefetch(self, line: int) -> bool:
        """Software prefetch: fills only the target level; not demand."""
        self.stats.sw_prefetches_seen += 1
        lvl = self.levels[self.sw_level]
        if lvl.lookup(line):
            return False
        victim = lvl.fill(line)
        if self.sw_level == 1 and victim is not None:
            self.pf_lines.discard(victim)
        return True


def filter_to_dram(trace: Trace, cache: CacheConfig = CacheConfig(),
                   pf: PrefetchConfig = PrefetchConfig(),
                   keep_prefetch_misses: bool = False):
    """Simulate the hierarchy; return (dram_trace, stats).

    The output is the order-preserving subsequence of demand accesses
    that miss every level.  With keep_prefetch_misses, software
    prefetch records that miss their target level are carried along
    (still marked prefetch and never counted as demand).
    """
    trace.validate()
    hier = CacheHierarchy(cache, pf)
    shift = 6
    vaddr = trace.vaddr
    kinds = trace.kind
    keep = np.zeros(len(trace), dtype=bool)
    demand = hier.access_demand
    prefetch = hier.access_prefetch
    lines = (vaddr >> np.uint64(shift)).astype(np.int64)
    for i in range(len(trace)):
        if kinds[i] == KIND_PREFETCH:
            if prefetch(int(lines[i])) and keep_prefetch_misses:
                keep[i] = True
        elif demand(int(lines[i])):
            keep[i] = True
    out = Trace(vaddr[keep].copy(), trace.cycle[keep].copy(), kinds[keep].copy())
    return out, hier.stats


def inject_sw_prefetch(trace: Trace, distance: int,
                       stream: np.ndarray | None = None) -> Trace:
    """Insert a prefetch record before each access for the address
    `distance` positions ahead in the demand stream.

    By default the annotated stream is the trace's own demand
    addresses (an oracle of the kernel's future accesses, standing in
    for compiler-inserted prefetch intrinsics).
    """
    if distance < 1:
        raise ValueError("distance must be >= 1")
    demand_idx = np.flatnonzero(trace.kind != KIND_PREFETCH)
    if stream is None:
        stream = trace.vaddr[demand_idx]
    stream = np.asarray(stream, dtype=np.uint64)
    n = len(demand_idx)
    if distance >= len(stream):
        return Trace(trace.vaddr.copy(), trace.cycle.copy(), trace.kind.copy())
    vaddr, cycle, kind = [], [], []
    pos = 0
    for j, i in enumerate(demand_idx):
        # Records before this demand access (already-present prefetches etc.)
        while pos < i:
            vaddr.append(trace.vaddr[pos]); cycle.append(trace.cycle[pos]); kind.append(trace.kind[pos])
            pos += 1
        if j + distance < len(stream):
            vaddr.append(stream[j + distance])
            cycle.append(trace.cycle[i])
            kind.append(KIND_PREFETCH)
        vaddr.append(trace.vaddr[i]); cycle.append(trace.cycle[i]); kind.append(trace.kind[i])
        pos = i + 1
    while pos < len(trace):
        vaddr.append(trace.vaddr[pos]); cycle.append(trace.cycle[pos]); kind.append(trace.kind[pos])
        pos += 1
    return Trace(np.asarray(vaddr, np.uint64), np.asarray(cycle, np.uint32),
                 np.asarray(kind, np.uint8))
