"""Array-backed kd-tree with traversal-order callbacks.

The tree stores one dataset row per node (median split, axis cycling
by depth).  Queries report every row whose features are examined, in
examination order, which is what the trace generators consume.
"""

from __future__ import annotations

import heapq

import numpy as np


class KdTree:
    def __init__(self, data: np.ndarray):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] == 0:
            raise ValueError("data must be a non-empty (n, m) array")
        self.data = data
        n, self.m = data.shape
        self.row = np.empty(n, dtype=np.int64)
        self.axis = np.empty(n, dtype=np.int64)
        self.left = np.full(n, -1, dtype=np.int64)
        self.right = np.full(n, -1, dtype=np.int64)
        self._count = 0
        self.root = self._build(np.arange(n, dtype=np.int64), 0)

    def _build(self, idx: np.ndarray, depth: int) -> int:
        if len(idx) == 0:
            return -1
        axis = depth % self.m
        order = np.argsort(self.data[idx, axis], kind="stable")
        idx = idx[order]
        mid = len(idx) // 2
        node = self._count
        self._count += 1
        self.row[node] = idx[mid]
        self.axis[node] = axis
        self.left[node] = self._build(idx[:mid], depth + 1)
        self.right[node] = self._build(idx[mid + 1 :], depth + 1)
        return node

    def knn(self, query: np.ndarray, k: int, visit=None):
        """k nearest rows by Euclidean distance, pruned DFS.

        `visit(row)` is called for every row whose features are read,
        in examination order.
        """
        data, row, axis, left, right = self.data, self.row, self.axis, self.left, self.right
        heap: list = []  # (-dist2, row)
        stack = [(self.root, False, 0.0)]
        q = np.asarray(query, dtype=np.float64)
        while stack:
            node, is_far, plane2 = stack.pop()
            if node < 0:
                continue
            if is_far and len(heap) == k and plane2 >= -heap[0][0]:
                continue
            r = row[node]
            if visit is not None:
                visit(r)
            diff = data[r] - q
            d2 = float(diff @ diff)
            if len(heap) < k:
                heapq.heappush(heap, (-d2, int(r)))
            elif d2 < -heap[0][0]:
                heapq.heapreplace(heap, (-d2, int(r)))
            ax = axis[node]
            delta = q[ax] - data[r, ax]
            near, far = (left[node], right[node]) if delta < 0 else (right[node], left[node])
            # LIFO stack: push far side first so the near side is explored first.
            stack.append((far, True, delta * delta))
            stack.append((near, False, 0.0))
        return sorted(((-d, r) for d, r in heap))

    def radius(self, query: np.ndarray, radius: float, visit=None):
        """All rows within `radius`, pruned DFS (near side first)."""
        data, row, axis, left, right = self.data, self.row, self.axis, self.left, self.right
        r2 = radius * radius
        out = []
        stack = [self.root]
        q = np.asarray(query, dtype=np.float64)
        while stack:
            node = stack.pop()
            if node < 0:
                continue
            r = row[node]
            if visit is not None:
                visit(r)
            diff = data[r] - q
            if float(diff @ diff) <= r2:
                out.append(int(r))
            ax = axis[node]
            delta = q[ax] - data[r, ax]
            near, far = (left[node], right[node]) if delta < 0 else (right[node], left[node])
            if delta * delta <= r2:
                stack.append(far)
            stack.append(near)
        return out
