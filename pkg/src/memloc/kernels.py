"""Synthetic kernel trace generators.

Each generator walks a kernel (kNN, DBSCAN-style radius queries,
decision-tree induction, random gather) over a dataset and emits one
read per distinct 64-byte line of every row whose features are
examined, in examination order.  Generators also return the logical
row sequence, which feeds the inspector-style reorderings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kdtree import KdTree
from .traceio import KIND_READ, Trace

LINE_SIZE = 64
PAGE_SIZE = 4096
DEFAULT_ISSUE_GAP = 4


@dataclass
class AddressModel:
    """Virtual address layout of the feature matrix."""

    base: int = 0x1000_0000
    row_stride_bytes: int = 64
    row_bytes: int = 0  # bytes examined per row; defaults to the stride
    line_size: int = LINE_SIZE
    page_size: int = PAGE_SIZE
    page_mapping: str = "identity"  # or "shuffle"
    seed: int = 0

    def __post_init__(self):
        if self.base % self.line_size:
            raise ValueError("base must be line-aligned")
        if self.row_stride_bytes < 1:
            raise ValueError("row_stride_bytes must be >= 1")
        if not self.row_bytes:
            self.row_bytes = self.row_stride_bytes

    @classmethod
    def for_matrix(cls, m: int, **kw) -> "AddressModel":
        return cls(row_stride_bytes=m * 8, **kw)


def rows_to_lines(rows, addr: AddressModel, full_row: bool = True) -> np.ndarray:
    """Expand row examinations into 64B-aligned line addresses.

    With full_row, every distinct line covering the row's bytes is
    emitted per examination; otherwise only the row's first line.
    """
    rows = np.asarray(rows, dtype=np.int64)
    start = addr.base + rows * addr.row_stride_bytes
    first = start // addr.line_size
    if not full_row or addr.row_bytes <= addr.line_size and addr.row_stride_bytes % addr.line_size == 0:
        return (first * addr.line_size).astype(np.uint64)
    last = (start + addr.row_bytes - 1) // addr.line_size
    counts = last - first + 1
    total = int(counts.sum())
    rep_first = np.repeat(first, counts)
    group_start = np.repeat(np.cumsum(counts) - counts, counts)
    within = np.arange(total) - group_start
    return ((rep_first + within) * addr.line_size).astype(np.uint64)


def rows_to_trace(rows, addr: AddressModel, issue_gap: int = DEFAULT_ISSUE_GAP,
                  full_row: bool = True) -> Trace:
    lines = rows_to_lines(rows, addr, full_row=full_row)
    return Trace.from_addresses(lines, KIND_READ, issue_gap)


def gen_knn_trace(data: np.ndarray, queries: np.ndarray, k: int,
                  addr: AddressModel, issue_gap: int = DEFAULT_ISSUE_GAP):
    """kd-tree k-NN over all queries; returns (trace, row_sequence)."""
    data = np.asarray(data, dtype=np.float64)
    if k > data.shape[0]:
        raise ValueError("k cannot exceed the number of rows")
    tree = KdTree(data)
    rows: list = []
    visit = rows.append
    for q in np.asarray(queries, dtype=np.float64):
        tree.knn(q, k, visit=visit)
    rows = np.asarray(rows, dtype=np.int64)
    return rows_to_trace(rows, addr, issue_gap), rows


def gen_dbscan_trace(data: np.ndarray, radius: float, addr: AddressModel,
                     issue_gap: int = DEFAULT_ISSUE_GAP):
    """Radius query around every point, DBSCAN-style neighborhood pass."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    data = np.asarray(data, dtype=np.float64)
    tree = KdTree(data)
    rows: list = []
    visit = rows.append
    for q in data:
        tree.radius(q, radius, visit=visit)
    rows = np.asarray(rows, dtype=np.int64)
    return rows_to_trace(rows, addr, issue_gap), rows


def _gini(labels: np.ndarray) -> float:
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    return 1.0 - float(p @ p)


def gen_dtree_trace(data: np.ndarray, labels: np.ndarray, max_depth: int,
                    addr: AddressModel, issue_gap: int = DEFAULT_ISSUE_GAP):
    """Greedy single-feature threshold tree; node subsets read via index lists."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels)
    rows: list = []

    def grow(idx: np.ndarray, depth: int):
        rows.extend(idx.tolist())
        if depth >= max_depth:
            return
        sub_labels = labels[idx]
        parent = _gini(sub_labels)
        if parent == 0.0:
            return
        best = None
        for j in range(data.shape[1]):
            col = data[idx, j]
            thr = float(np.median(col))
            mask = col <= thr
            nl = int(mask.sum())
            if nl == 0 or nl == len(idx):
                continue
            score = (nl * _gini(sub_labels[mask])
                     + (len(idx) - nl) * _gini(sub_labels[~mask])) / len(idx)
            if best is None or score < best[0]:
                best = (score, j, thr, mask)
        if best is None or best[0] >= parent:
            return
        _, _, _, mask = best
        grow(idx[mask], depth + 1)
        grow(idx[~mask], depth + 1)

    grow(np.arange(data.shape[0], dtype=np.int64), 1)
    rows = np.asarray(rows, dtype=np.int64)
    return rows_to_trace(rows, addr, issue_gap), rows


def gen_gather_trace(n: int, count: int, addr: AddressModel, seed: int = 0,
                     issue_gap: int = DEFAULT_ISSUE_GAP):
    """Indirect A[B[i]] reads over uniform random rows; one line per read."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, n, size=count, dtype=np.int64)
    return rows_to_trace(rows, addr, issue_gap, full_row=False), rows


def gen_sequential_trace(n_lines: int, addr: AddressModel,
                         issue_gap: int = DEFAULT_ISSUE_GAP) -> Trace:
    """Streaming sanity kernel: one pass of consecutive lines."""
    lines = addr.base + np.arange(n_lines, dtype=np.uint64) * addr.line_size
    return Trace.from_addresses(lines, KIND_READ, issue_gap)


def translate(trace: Trace, addr: AddressModel) -> Trace:
    """Virtual-to-physical page mapping; offsets inside pages are kept."""
    if addr.page_mapping == "identity":
        return Trace(trace.vaddr.copy(), trace.cycle.copy(), trace.kind.copy())
    if addr.page_mapping != "shuffle":
        raise ValueError(f"unknown page_mapping {addr.page_mapping!r}")
    page = trace.vaddr // addr.page_size
    offset = trace.vaddr % addr.page_size
    if len(trace) == 0:
        return Trace(trace.vaddr.copy(), trace.cycle.copy(), trace.kind.copy())
    lo, hi = int(page.min()), int(page.max())
    rng = np.random.default_rng(addr.seed)
    frames = rng.permutation(hi - lo + 1).astype(np.uint64) + lo
    paddr = frames[(page - lo).astype(np.int64)] * addr.page_size + offset
    return Trace(paddr, trace.cycle.copy(), trace.kind.copy())


def make_clustered(n: int, m: int, clusters: int, seed: int = 0,
                   layout: str = "contiguous", spread: float = 0.02) -> np.ndarray:
    """Gaussian cluster mixture in the unit cube.

    layout "contiguous" keeps each cluster's rows adjacent (generation
    order); "shuffled" permutes rows to destroy layout locality.
    """
    rng = np.random.default_rng(seed)
    centers = rng.random((clusters, m))
    sizes = np.full(clusters, n // clusters)
    sizes[: n % clusters] += 1
    parts = [centers[c] + rng.normal(0.0, spread, (sizes[c], m)) for c in range(clusters)]
    data = np.vstack(parts)
    if layout == "shuffled":
        data = data[rng.permutation(n)]
    elif layout != "contiguous":
        raise ValueError(f"unknown layout {layout!r}")
    return data


def make_uniform(n: int, m: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).random((n, m))
