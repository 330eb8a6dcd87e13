"""Row-permutation and access-order transformations for locality.

Data-layout reorderings (first-touch, recursive coordinate bisection,
Hilbert, Z-order) return a permutation ``map`` with
``map[new_position] = old_index``.  Computation reorderings permute the
access or query order instead of the rows themselves.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .sfc import QuantizerConfig, hilbert_encode, morton_encode, quantize_rows

DEFAULT_SFC_BITS = 10
DEFAULT_BLOCK_WINDOW = 4096


def check_permutation(perm: np.ndarray, n: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ValueError("not a bijection on [0, n)")
    return perm


def invert_permutation(perm: np.ndarray) -> np.ndarray:
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    return inv


def reorder_first_touch(inspected, n: int, passes: int = 1) -> np.ndarray:
    """Order rows by first occurrence in the inspected access sequence.

    Rows never touched are appended in ascending original order.  The
    inspector makes `passes` passes over the sequence; extra passes only
    matter when the caller truncates the sequence per pass.
    """
    inspected = np.asarray(inspected, dtype=np.int64).ravel()
    if inspected.size and (inspected.min() < 0 or inspected.max() >= n):
        raise ValueError("access index out of range")
    seen = np.zeros(n, dtype=bool)
    order = []
    for _ in range(max(1, passes)):
        for i in inspected:
            if not seen[i]:
                seen[i] = True
                order.append(i)
    rest = np.flatnonzero(~seen)
    return np.concatenate([np.asarray(order, dtype=np.int64), rest]) if order else np.arange(n)


def reorder_rcb(data: np.ndarray, leaf_size: int) -> np.ndarray:
    """Recursive coordinate bisection.

    Splits at the lower median of the dimension with the largest spread
    (ties go to the lowest dimension index) until partitions have at
    most `leaf_size` points.  Splits are stable on equal keys.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("dataset must be a non-empty (n, m) array")
    if leaf_size < 1:
        raise ValueError("leaf_size must be >= 1")

    out = []

    def split(idx: np.ndarray):
        if len(idx) <= leaf_size:
            out.append(idx)
            return
        pts = data[idx]
        spread = pts.max(axis=0) - pts.min(axis=0)
        axis = int(np.argmax(spread))
        order = np.argsort(pts[:, axis], kind="stable")
        left = (len(idx) + 1) // 2
        split(idx[order[:left]])
        split(idx[order[left:]])

    split(np.arange(data.shape[0], dtype=np.int64))
    return np.concatenate(out)


def sfc_codes(data: np.ndarray, curve: str, bits: int = DEFAULT_SFC_BITS) -> list:
    """SFC code per row, quantizing with the dataset's own min/max bounds."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("dataset must be an (n, m) array")
    m = data.shape[1]
    cfg = QuantizerConfig(m, bits, tuple(data.min(axis=0)), tuple(data.max(axis=0)))
    grid = quantize_rows(data, cfg)
    if curve == "zorder":
        encode = morton_encode
    elif curve == "hilbert":
        encode = hilbert_encode
    else:
        raise ValueError(f"unknown curve {curve!r}")
    return [encode(row, cfg) for row in grid.tolist()]


def reorder_sfc(data: np.ndarray, curve: str, bits: int = DEFAULT_SFC_BITS) -> np.ndarray:
    """Stable sort of rows by ascending space-filling-curve index."""
    codes = sfc_codes(data, curve, bits)
    return np.asarray(
        sorted(range(len(codes)), key=codes.__getitem__), dtype=np.int64
    )


def reorder_queries_zorder(queries: np.ndarray, bits: int = DEFAULT_SFC_BITS) -> np.ndarray:
    """Permute query order by ascending Morton code (stable)."""
    return reorder_sfc(queries, "zorder", bits)


def block_by_page(
    seq,
    row_stride_bytes: int,
    page_size_bytes: int = 4096,
    window: int = DEFAULT_BLOCK_WINDOW,
) -> np.ndarray:
    """Group accesses by OS page inside consecutive windows.

    Within each window of `window` accesses, accesses are stably grouped
    by the page of their row's first byte, pages ordered by first
    appearance.  The multiset of accesses is preserved.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    seq = np.asarray(seq, dtype=np.int64).ravel()
    pages = (seq * row_stride_bytes) // page_size_bytes
    out = np.empty_like(seq)
    pos = 0
    for start in range(0, len(seq), window):
        chunk = seq[start : start + window]
        chunk_pages = pages[start : start + window]
        groups: dict = {}
        for i, pg in zip(chunk, chunk_pages):
            groups.setdefault(int(pg), []).append(i)
        for grp in groups.values():
            out[pos : pos + len(grp)] = grp
            pos += len(grp)
    return out


def apply_permutation(data: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Gather rows: output row i is input row perm[i]."""
    data = np.asarray(data)
    perm = check_permutation(perm, data.shape[0])
    return data[perm]


def save_permutation(path, perm: np.ndarray):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["new_position", "old_index"])
        for new, old in enumerate(np.asarray(perm, dtype=np.int64)):
            w.writerow([new, int(old)])


def load_permutation(path) -> np.ndarray:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    body = rows[1:] if rows and rows[0] and not rows[0][0].isdigit() else rows
    perm = np.full(len(body), -1, dtype=np.int64)
    for new, old in body:
        perm[int(new)] = int(old)
    return check_permutation(perm, len(body))


def save_dataset(path, data: np.ndarray):
    """Raw little-endian float64 rows plus a JSON sidecar with n and m."""
    data = np.ascontiguousarray(data, dtype="<f8")
    Path(path).write_bytes(data.tobytes())
    meta = {"n": int(data.shape[0]), "m": int(data.shape[1])}
    Path(str(path) + ".json").write_text(json.dumps(meta))


def load_dataset(path) -> np.ndarray:
    meta = json.loads(Path(str(path) + ".json").read_text())
    raw = np.frombuffer(Path(path).read_bytes(), dtype="<f8")
    return raw.reshape(meta["n"], meta["m"]).copy()
