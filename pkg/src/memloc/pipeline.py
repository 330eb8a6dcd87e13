"""End-to-end experiment pipelines.

An experiment config (one JSON document) names a kernel, a memory
system, a DRAM model, and a list of variants.  Each variant runs
generate -> cache-filter -> DRAM simulate (actual and ideal) over
identical seeds and yields one CSV row.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass

import numpy as np

from . import dramsim, kernels, memsys, reorder
from .traceio import Trace

CSV_FIELDS = [
    "config_hash", "variant", "records", "dram_requests",
    "hit_ratio", "avg_latency", "ideal_latency", "improvement_pct",
    "l2_miss_ratio", "useless_prefetch_fraction", "overhead_s",
]

DATA_LAYOUT_METHODS = ("first-touch", "rcb", "hilbert", "zorder")
COMPUTATION_METHODS = ("block", "zorder-comp")


class PipelineError(RuntimeError):
    """Raised with the failing stage's name in the message."""


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _build_cache(config: dict) -> memsys.CacheConfig:
    c = config.get("cache", {})
    return memsys.CacheConfig(
        l1=memsys.LevelConfig(c.get("l1_kb", 32) * 1024, c.get("l1_ways", 8)),
        l2=memsys.LevelConfig(c.get("l2_kb", 256) * 1024, c.get("l2_ways", 8)),
        l3=memsys.LevelConfig(c.get("l3_kb", 8192) * 1024, c.get("l3_ways", 16)),
    )


def _build_prefetch(config: dict) -> memsys.PrefetchConfig:
    p = config.get("prefetch", {})
    hw = None
    if p.get("hw"):
        hw = memsys.StridePrefetchConfig(degree=p.get("hw_degree", 2),
                                         distance=p.get("hw_distance", 1))
    return memsys.PrefetchConfig(hw=hw, sw_target=p.get("sw_target", "L2"))


def _build_dram(config: dict):
    d = config.get("dram", {})
    geom = dramsim.DramGeometry(
        banks=d.get("banks", 16),
        rows_per_bank=d.get("rows_per_bank", 32768),
        row_size_bytes=d.get("row_size_bytes", 8192),
    )
    timing = dramsim.DramTiming(
        tCL=d.get("tCL", 16), tRCD=d.get("tRCD", 16),
        tRP=d.get("tRP", 16), tBURST=d.get("tBURST", 4),
    )
    kw = {
        "scheme": d.get("scheme", "RoBaRaCoCh"),
        "cap": d.get("cap", 4),
        "arrival": d.get("arrival", "from-trace"),
        "arrival_gap": d.get("arrival_gap", 4),
        "queue_depth": d.get("queue_depth", 32),
    }
    return geom, timing, kw


@dataclass
class _KernelCtx:
    kind: str
    data: np.ndarray | None
    labels: np.ndarray | None
    queries: np.ndarray | None
    addr: kernels.AddressModel
    spec: dict
    seed: int

    def generate(self, data=None, queries=None):
        """(trace, row_sequence) for the current (possibly reordered) inputs."""
        data = self.data if data is None else data
        queries = self.queries if queries is None else queries
        k = self.spec
        if self.kind == "knn":
            return kernels.gen_knn_trace(data, queries, k.get("k", 5), self.addr)
        if self.kind == "dbscan":
            return kernels.gen_dbscan_trace(data, k.get("radius", 0.05), self.addr)
        if self.kind == "dtree":
            return kernels.gen_dtree_trace(data, self.labels, k.get("max_depth", 8), self.addr)
        if self.kind == "gather":
            return kernels.gen_gather_trace(k["n"], k.get("count", 100000), self.addr, self.seed)
        raise PipelineError(f"gen: unknown kernel kind {self.kind!r}")


def build_kernel(config: dict) -> _KernelCtx:
    k = dict(config["kernel"])
    kind = k["kind"]
    seed = int(config.get("seed", 0))
    n, m = int(k.get("n", 10000)), int(k.get("m", 2))
    rng = np.random.default_rng(seed)
    data = labels = queries = None
    if kind != "gather":
        if k.get("clusters"):
            data = kernels.make_clustered(n, m, int(k["clusters"]), seed,
                                          layout=k.get("layout", "contiguous"),
                                          spread=k.get("spread", 0.02))
        else:
            data = kernels.make_uniform(n, m, seed)
    if kind == "knn":
        nq = int(k.get("queries", 1000))
        if k.get("clusters") and k.get("queries_from_data", True):
            queries = data[rng.integers(0, n, nq)] + rng.normal(0, 0.005, (nq, m))
        else:
            queries = rng.random((nq, m))
    if kind == "dtree":
        labels = (data @ rng.random(m) > 0.5 * rng.random(m).sum()).astype(np.int64)
    stride = int(k.get("row_stride_bytes", m * 8))
    addr = kernels.AddressModel(row_stride_bytes=stride, row_bytes=m * 8,
                                page_mapping=k.get("page_mapping", "identity"),
                                seed=seed)
    return _KernelCtx(kind, data, labels, queries, addr, k, seed)


def run_variant(ctx: _KernelCtx, variant: str, config: dict,
                baseline: tuple | None = None) -> dict:
    """One pipeline row.  `baseline` caches (trace, rows) for reuse."""
    t0 = time.perf_counter()
    sw_distance = 0
    if variant == "baseline":
        trace, rows = baseline if baseline else ctx.generate()
    elif variant in ("first-touch", "block"):
        _, rows = baseline if baseline else ctx.generate()
        if variant == "first-touch":
            n = int(ctx.spec["n"]) if ctx.data is None else len(ctx.data)
            perm = reorder.reorder_first_touch(rows, n)
            if ctx.data is None:
                # Index-only kernel: relabel rows through the inverse map.
                rows = reorder.invert_permutation(perm)[rows]
                trace = kernels.rows_to_trace(rows, ctx.addr, full_row=False)
            else:
                data = reorder.apply_permutation(ctx.data, perm)
                tree_ctx = _KernelCtx(ctx.kind, data, None if ctx.labels is None
                                      else ctx.labels[perm], ctx.queries, ctx.addr,
                                      ctx.spec, ctx.seed)
                trace, rows = tree_ctx.generate()
        else:
            blocked = reorder.block_by_page(
                rows, ctx.addr.row_stride_bytes, ctx.addr.page_size,
                config.get("block_window", reorder.DEFAULT_BLOCK_WINDOW))
            trace = kernels.rows_to_trace(blocked, ctx.addr)
            rows = blocked
    elif variant in ("rcb", "hilbert", "zorder"):
        if ctx.data is None:
            raise PipelineError(f"reorder: {variant} needs a feature matrix")
        if variant == "rcb":
            perm = reorder.reorder_rcb(ctx.data, config.get("rcb_leaf_size", 32))
        else:
            perm = reorder.reorder_sfc(ctx.data, variant,
                                       config.get("sfc_bits", reorder.DEFAULT_SFC_BITS))
        data = reorder.apply_permutation(ctx.data, perm)
        lab = None if ctx.labels is None else ctx.labels[perm]
        trace, rows = _KernelCtx(ctx.kind, data, lab, ctx.queries, ctx.addr,
                                 ctx.spec, ctx.seed).generate()
    elif variant == "zorder-comp":
        if ctx.kind == "dtree":
            raise PipelineError("reorder: zorder-comp is not applicable to tree kernels")
        if ctx.queries is None:
            raise PipelineError(f"reorder: zorder-comp needs a query set ({ctx.kind})")
        qperm = reorder.reorder_queries_zorder(
            ctx.queries, config.get("sfc_bits", reorder.DEFAULT_SFC_BITS))
        trace, rows = ctx.generate(queries=ctx.queries[qperm])
    elif variant == "sw-prefetch":
        trace, rows = baseline if baseline else ctx.generate()
        sw_distance = int(config.get("prefetch", {}).get("sw_distance", 16))
        trace = memsys.inject_sw_prefetch(trace, sw_distance)
    else:
        raise PipelineError(f"reorder: unknown variant {variant!r}")
    overhead = time.perf_counter() - t0

    cache = _build_cache(config)
    pf = _build_prefetch(config)
    try:
        dram_trace, mstats = memsys.filter_to_dram(trace, cache, pf)
    except Exception as e:
        raise PipelineError(f"filter: {e}") from e
    geom, timing, kw = _build_dram(config)
    try:
        actual = dramsim.simulate(dram_trace, geom, timing, **kw)
        ideal = dramsim.simulate_ideal(dram_trace, geom, timing, **kw)
    except Exception as e:
        raise PipelineError(f"dramsim: {e}") from e
    return {
        "config_hash": config_hash(config),
        "variant": variant,
        "records": len(trace),
        "dram_requests": actual.total,
        "hit_ratio": round(actual.hit_ratio, 6),
        "avg_latency": round(actual.avg_latency, 4),
        "ideal_latency": round(ideal.avg_latency, 4),
        "improvement_pct": round(dramsim.improvement(actual, ideal), 4),
        "l2_miss_ratio": round(mstats.miss_ratio(1), 6),
        "useless_prefetch_fraction": round(mstats.useless_fraction, 6),
        "overhead_s": round(overhead, 6),
    }


def run_pipeline(config: dict) -> list[dict]:
    ctx = build_kernel(config)
    baseline = ctx.generate()
    rows = []
    for variant in config.get("variants", ["baseline"]):
        rows.append(run_variant(ctx, variant, config, baseline=baseline))
    return rows


def write_csv(path, rows: list[dict]):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        w.writeheader()
        w.writerows(rows)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
