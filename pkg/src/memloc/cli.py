"""Command-line driver.

Subcommands: gen, reorder, filter, dramsim, prefetch, pipeline,
report.  Exit code is 0 on success; failures print a stage-tagged
message to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import dramsim, kernels, memsys, pipeline, reorder, traceio

DATA_LAYOUT = ("first-touch", "rcb", "hilbert", "zorder")
COMPUTATION = ("block", "zorder-comp")


def _fail(stage: str, msg: str) -> int:
    print(f"memloc: {stage}: {msg}", file=sys.stderr)
    return 1


def _save_rows(path, rows: np.ndarray):
    np.asarray(rows, dtype="<i8").tofile(path)


def _load_rows(path) -> np.ndarray:
    return np.fromfile(path, dtype="<i8")


def cmd_gen(args) -> int:
    prefix = args.out
    addr = kernels.AddressModel(
        row_stride_bytes=args.row_stride or args.m * 8,
        row_bytes=args.m * 8, seed=args.seed)
    if args.kind == "gather":
        trace, rows = kernels.gen_gather_trace(args.n, args.count, addr, args.seed)
        data = labels = None
    else:
        if args.clusters:
            data = kernels.make_clustered(args.n, args.m, args.clusters,
                                          args.seed, layout=args.layout)
        else:
            data = kernels.make_uniform(args.n, args.m, args.seed)
        labels = None
        if args.kind == "knn":
            rng = np.random.default_rng(args.seed + 1)
            queries = rng.random((args.queries, args.m))
            reorder.save_dataset(prefix + ".queries", queries)
            if args.queries == 0:
                trace, rows = traceio.Trace.empty(), np.empty(0, np.int64)
            else:
                trace, rows = kernels.gen_knn_trace(data, queries, args.k, addr)
        elif args.kind == "dbscan":
            trace, rows = kernels.gen_dbscan_trace(data, args.radius, addr)
        elif args.kind == "dtree":
            rng = np.random.default_rng(args.seed + 1)
            labels = (data @ rng.random(args.m) > 0.5 * args.m * 0.5).astype(np.int64)
            trace, rows = kernels.gen_dtree_trace(data, labels, args.max_depth, addr)
        else:
            return _fail("gen", f"unknown kind {args.kind}")
    if data is not None:
        reorder.save_dataset(prefix + ".data", data)
    if labels is not None:
        _save_rows(prefix + ".labels", labels)
    _save_rows(prefix + ".rows", rows)
    traceio.write_trace(prefix + ".trace", trace)
    print(f"{len(trace)} records")
    return 0


def cmd_reorder(args) -> int:
    method = args.method
    if args.kernel == "dtree" and method == "zorder-comp":
        return _fail("reorder", "zorder-comp is not applicable to tree kernels")
    t0 = time.perf_counter()
    if method in ("rcb", "hilbert", "zorder", "zorder-comp"):
        data = reorder.load_dataset(args.dataset)
        if method == "rcb":
            perm = reorder.reorder_rcb(data, args.leaf_size)
        elif method == "zorder-comp":
            perm = reorder.reorder_queries_zorder(data, args.bits)
        else:
            perm = reorder.reorder_sfc(data, method, args.bits)
        out_data = reorder.apply_permutation(data, perm)
    elif method == "first-touch":
        data = reorder.load_dataset(args.dataset)
        rows = _load_rows(args.rows)
        perm = reorder.reorder_first_touch(rows, len(data))
        out_data = reorder.apply_permutation(data, perm)
    elif method == "block":
        rows = _load_rows(args.rows)
        data = reorder.load_dataset(args.dataset) if args.dataset else None
        stride = args.row_stride or (data.shape[1] * 8 if data is not None else 64)
        blocked = reorder.block_by_page(rows, stride, window=args.window)
        _save_rows(args.out + ".rows", blocked)
        perm = None
        out_data = None
    else:
        return _fail("reorder", f"unknown method {method}")
    overhead = time.perf_counter() - t0
    if perm is not None:
        reorder.save_permutation(args.out + ".perm.csv", perm)
    if out_data is not None:
        reorder.save_dataset(args.out + ".data", out_data)
    with open(args.out + ".overhead.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["method", "overhead_s"])
        w.writerow([method, f"{max(overhead, 1e-9):.6f}"])
    print(f"{method}: overhead {overhead:.4f}s")
    return 0


def _cache_from_args(args) -> memsys.CacheConfig:
    return memsys.CacheConfig(
        l1=memsys.LevelConfig(args.l1_kb * 1024, 8),
        l2=memsys.LevelConfig(args.l2_kb * 1024, 8),
        l3=memsys.LevelConfig(args.l3_kb * 1024, 16),
    )


def cmd_filter(args) -> int:
    trace = traceio.read_trace(args.trace)
    hw = memsys.StridePrefetchConfig(degree=args.hw_degree) if args.hw_prefetch else None
    pf = memsys.PrefetchConfig(hw=hw, sw_target=args.sw_target)
    dram_trace, stats = memsys.filter_to_dram(trace, _cache_from_args(args), pf)
    traceio.write_trace(args.out, dram_trace)
    with open(args.stats, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["level", "demand_accesses", "demand_misses", "miss_ratio"])
        for i, name in enumerate(memsys.LEVEL_NAMES):
            w.writerow([name, stats.demand_accesses[i], stats.demand_misses[i],
                        f"{stats.miss_ratio(i):.6f}"])
        w.writerow(["prefetch_issued", stats.hw_prefetches_issued, "", ""])
        w.writerow(["prefetch_useful", stats.hw_prefetches_useful, "", ""])
        w.writerow(["useless_fraction", f"{stats.useless_fraction:.6f}", "", ""])
    print(f"{len(dram_trace)} DRAM records")
    return 0


def cmd_dramsim(args) -> int:
    trace = traceio.read_trace(args.trace)
    geom = dramsim.DramGeometry()
    timing = dramsim.DramTiming()
    stats = dramsim.simulate(trace, geom, timing, scheme=args.scheme,
                             cap=args.cap, arrival=args.arrival)
    ideal = dramsim.simulate_ideal(trace, geom, timing, scheme=args.scheme,
                                   cap=args.cap, arrival=args.arrival)
    header = ["trace", "scheme", "cap", "hits", "misses", "conflicts",
              "hit_ratio", "avg_latency", "ideal_latency", "improvement_pct"]
    row = [args.trace, args.scheme, args.cap, stats.hits, stats.misses,
           stats.conflicts, f"{stats.hit_ratio:.6f}", f"{stats.avg_latency:.4f}",
           f"{ideal.avg_latency:.4f}", f"{dramsim.improvement(stats, ideal):.4f}"]
    new = not Path(args.stats).exists()
    with open(args.stats, "a", newline="") as f:
        w = csv.writer(f)
        if new:
            w.writerow(header)
        w.writerow(row)
    print(f"hit_ratio {stats.hit_ratio:.4f} avg_latency {stats.avg_latency:.2f}")
    return 0


def cmd_prefetch(args) -> int:
    trace = traceio.read_trace(args.trace)
    out = memsys.inject_sw_prefetch(trace, args.distance)
    traceio.write_trace(args.out, out)
    print(f"{len(out)} records ({len(out) - len(trace)} prefetches injected)")
    return 0


def cmd_pipeline(args) -> int:
    configs = [json.loads(Path(p).read_text()) for p in args.config]
    if args.jobs > 1 and len(configs) > 1:
        with concurrent.futures.ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(pipeline.run_pipeline, configs))
    else:
        results = [pipeline.run_pipeline(c) for c in configs]
    rows = [r for rs in results for r in rs]
    pipeline.write_csv(args.out, rows)
    print(f"{len(rows)} result rows -> {args.out}")
    return 0


def render_report(rows: list[dict]) -> str:
    """Summary table: benchmark, hit ratio, latencies, improvement."""
    out = [f"{'benchmark':<20} {'hit-ratio':>9}  {'latency':>9}  "
           f"{'ideal':>9}  {'improvement%':>12}"]
    for r in rows:
        name = r.get("benchmark") or r.get("variant") or r.get("trace", "?")
        hr = float(r["hit_ratio"])
        lat = float(r["avg_latency"])
        ideal = float(r["ideal_latency"])
        if r.get("improvement_pct") not in (None, ""):
            imp = float(r["improvement_pct"])
        else:
            imp = 100.0 * (lat - ideal) / lat if lat else 0.0
        out.append(f"{name:<20} {hr:.2f}, {lat:.2f}, {ideal:.2f}, {imp:.2f}")
    return "\n".join(out)


def cmd_report(args) -> int:
    rows = []
    for path in args.csv:
        rows.extend(pipeline.read_csv(path))
    required = {"hit_ratio", "avg_latency", "ideal_latency"}
    for r in rows:
        if not required <= set(r):
            return _fail("report", f"missing columns {required - set(r)}")
    print(render_report(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="memloc",
                                description="Memory-locality trace toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a dataset and kernel trace")
    g.add_argument("--kind", required=True, choices=["knn", "dbscan", "dtree", "gather"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--k", type=int, default=5)
    g.add_argument("--queries", type=int, default=1000)
    g.add_argument("--radius", type=float, default=0.05)
    g.add_argument("--max-depth", type=int, default=8)
    g.add_argument("--count", type=int, default=100000)
    g.add_argument("--clusters", type=int, default=0)
    g.add_argument("--layout", choices=["contiguous", "shuffled"], default="contiguous")
    g.add_argument("--row-stride", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output path prefix")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("reorder", help="build and apply a reordering")
    r.add_argument("--method", required=True,
                   choices=list(DATA_LAYOUT) + list(COMPUTATION))
    r.add_argument("--dataset", help="dataset path (raw f64 + .json sidecar)")
    r.add_argument("--rows", help="access row sequence (raw i64)")
    r.add_argument("--kernel", help="kernel kind, for applicability checks")
    r.add_argument("--bits", type=int, default=reorder.DEFAULT_SFC_BITS)
    r.add_argument("--leaf-size", type=int, default=32)
    r.add_argument("--window", type=int, default=reorder.DEFAULT_BLOCK_WINDOW)
    r.add_argument("--row-stride", type=int, default=0)
    r.add_argument("--out", required=True, help="output path prefix")
    r.set_defaults(func=cmd_reorder)

    f = sub.add_parser("filter", help="filter a trace through the cache hierarchy")
    f.add_argument("--trace", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--stats", required=True)
    f.add_argument("--l1-kb", type=int, default=32)
    f.add_argument("--l2-kb", type=int, default=256)
    f.add_argument("--l3-kb", type=int, default=8192)
    f.add_argument("--hw-prefetch", action="store_true")
    f.add_argument("--hw-degree", type=int, default=2)
    f.add_argument("--sw-target", default="L2", choices=list(memsys.LEVEL_NAMES))
    f.set_defaults(func=cmd_filter)

    d = sub.add_parser("dramsim", help="simulate DRAM over a trace")
    d.add_argument("--trace", required=True)
    d.add_argument("--stats", required=True)
    d.add_argument("--scheme", default="RoBaRaCoCh", choices=list(dramsim.SCHEMES))
    d.add_argument("--cap", type=int, default=4)
    d.add_argument("--arrival", default="from-trace", choices=["from-trace", "fixed-gap"])
    d.set_defaults(func=cmd_dramsim)

    pf = sub.add_parser("prefetch", help="inject software prefetch records")
    pf.add_argument("--trace", required=True)
    pf.add_argument("--out", required=True)
    pf.add_argument("--distance", type=int, default=16)
    pf.set_defaults(func=cmd_prefetch)

    pl = sub.add_parser("pipeline", help="run experiment configs end to end")
    pl.add_argument("--config", nargs="+", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--jobs", type=int, default=1)
    pl.set_defaults(func=cmd_pipeline)

    rp = sub.add_parser("report", help="merge result CSVs into a summary table")
    rp.add_argument("csv", nargs="+")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except pipeline.PipelineError as e:
        return _fail("pipeline", str(e))
    except (ValueError, OSError, traceio.TraceFormatError) as e:
        return _fail(args.command, str(e))


if __name__ == "__main__":
    sys.exit(main())
