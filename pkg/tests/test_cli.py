import csv
import json

import numpy as np
import pytest

from memloc import pipeline, reorder, traceio
from memloc.cli import main, render_report


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture
def gather_prefix(tmp_path):
    prefix = tmp_path / "g"
    assert run(["gen", "--kind", "gather", "--n", str(1 << 16), "--count",
                "10000", "--seed", "3", "--out", prefix]) == 0
    return prefix


class TestGen:
    def test_gather_record_count(self, gather_prefix, capsys):
        trace = traceio.read_trace(str(gather_prefix) + ".trace")
        assert len(trace) == 10000

    def test_deterministic_files(self, tmp_path):
        args = ["gen", "--kind", "knn", "--n", "500", "--m", "2", "--k", "3",
                "--queries", "50", "--seed", "9"]
        assert run(args + ["--out", tmp_path / "a"]) == 0
        assert run(args + ["--out", tmp_path / "b"]) == 0
        for suffix in (".trace", ".data", ".rows"):
            assert (tmp_path / ("a" + suffix)).read_bytes() == \
                   (tmp_path / ("b" + suffix)).read_bytes()

    def test_zero_queries_empty_trace(self, tmp_path):
        assert run(["gen", "--kind", "knn", "--n", "100", "--queries", "0",
                    "--out", tmp_path / "q0"]) == 0
        assert len(traceio.read_trace(tmp_path / "q0.trace")) == 0

    def test_dbscan_and_dtree(self, tmp_path):
        assert run(["gen", "--kind", "dbscan", "--n", "200", "--radius", "0.1",
                    "--out", tmp_path / "db"]) == 0
        assert run(["gen", "--kind", "dtree", "--n", "200", "--m", "3",
                    "--max-depth", "3", "--out", tmp_path / "dt"]) == 0
        assert len(traceio.read_trace(tmp_path / "db.trace")) > 0
        assert len(traceio.read_trace(tmp_path / "dt.trace")) > 0


class TestReorder:
    @pytest.fixture
    def dataset(self, tmp_path):
        path = tmp_path / "ds"
        reorder.save_dataset(path, np.array(
            [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
        return path

    def test_hilbert_four_point_grid(self, dataset, tmp_path):
        out = tmp_path / "h"
        assert run(["reorder", "--method", "hilbert", "--dataset", dataset,
                    "--bits", "1", "--out", out]) == 0
        perm = reorder.load_permutation(str(out) + ".perm.csv")
        assert perm.tolist() == [0, 2, 3, 1]

    def test_overhead_reported_positive(self, dataset, tmp_path):
        for method in ("rcb", "zorder", "hilbert"):
            out = tmp_path / method
            assert run(["reorder", "--method", method, "--dataset", dataset,
                        "--bits", "2", "--out", out]) == 0
            with open(str(out) + ".overhead.csv") as f:
                rows = list(csv.DictReader(f))
            assert float(rows[0]["overhead_s"]) > 0

    def test_zorder_comp_rejected_for_tree_kernel(self, dataset, tmp_path):
        rc = run(["reorder", "--method", "zorder-comp", "--kernel", "dtree",
                  "--dataset", dataset, "--out", tmp_path / "x"])
        assert rc != 0

    def test_first_touch_roundtrip(self, dataset, tmp_path):
        rows_path = tmp_path / "rows.bin"
        np.array([2, 0, 2, 1], dtype="<i8").tofile(rows_path)
        out = tmp_path / "ft"
        assert run(["reorder", "--method", "first-touch", "--dataset", dataset,
                    "--rows", rows_path, "--out", out]) == 0
        perm = reorder.load_permutation(str(out) + ".perm.csv")
        assert perm.tolist() == [2, 0, 1, 3]

    def test_block_writes_reordered_rows(self, tmp_path):
        rows_path = tmp_path / "rows.bin"
        np.array([0, 100, 1, 101], dtype="<i8").tofile(rows_path)
        out = tmp_path / "blk"
        assert run(["reorder", "--method", "block", "--rows", rows_path,
                    "--row-stride", "64", "--window", "4", "--out", out]) == 0
        blocked = np.fromfile(str(out) + ".rows", dtype="<i8")
        assert blocked.tolist() == [0, 1, 100, 101]


class TestFilterAndDram:
    def test_filter_then_dramsim(self, gather_prefix, tmp_path):
        dram = tmp_path / "dram.trace"
        stats = tmp_path / "filter.csv"
        assert run(["filter", "--trace", str(gather_prefix) + ".trace",
                    "--out", dram, "--stats", stats]) == 0
        assert len(traceio.read_trace(dram)) > 0
        dstats = tmp_path / "dram.csv"
        assert run(["dramsim", "--trace", dram, "--stats", dstats]) == 0
        with open(dstats) as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 1
        assert 0.0 <= float(rows[0]["hit_ratio"]) <= 1.0

    def test_prefetch_injection(self, gather_prefix, tmp_path):
        out = tmp_path / "pf.trace"
        assert run(["prefetch", "--trace", str(gather_prefix) + ".trace",
                    "--distance", "16", "--out", out]) == 0
        t = traceio.read_trace(out)
        assert (t.kind == 2).sum() == 10000 - 16


class TestPipeline:
    def config(self, tmp_path, variants):
        cfg = {
            "seed": 5,
            "kernel": {"kind": "knn", "n": 2000, "m": 2, "k": 3,
                       "queries": 200, "clusters": 8, "layout": "contiguous",
                       "row_stride_bytes": 64},
            "cache": {"l3_kb": 64},
            "variants": variants,
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        return path, cfg

    def test_baseline_only_single_row(self, tmp_path):
        path, _ = self.config(tmp_path, ["baseline"])
        out = tmp_path / "out.csv"
        assert run(["pipeline", "--config", path, "--out", out]) == 0
        rows = pipeline.read_csv(out)
        assert len(rows) == 1
        assert rows[0]["variant"] == "baseline"

    def test_rerun_is_csv_identical(self, tmp_path):
        path, _ = self.config(tmp_path, ["baseline", "zorder-comp"])
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(["pipeline", "--config", path, "--out", a]) == 0
        assert run(["pipeline", "--config", path, "--out", b]) == 0
        ra = [{k: v for k, v in r.items() if k != "overhead_s"}
              for r in pipeline.read_csv(a)]
        rb = [{k: v for k, v in r.items() if k != "overhead_s"}
              for r in pipeline.read_csv(b)]
        assert ra == rb

    def test_ideal_bounds_actual_in_every_row(self, tmp_path):
        path, _ = self.config(tmp_path, ["baseline", "hilbert", "block"])
        out = tmp_path / "out.csv"
        assert run(["pipeline", "--config", path, "--out", out]) == 0
        for r in pipeline.read_csv(out):
            assert float(r["ideal_latency"]) <= float(r["avg_latency"])

    def test_rows_echo_config_hash(self, tmp_path):
        path, cfg = self.config(tmp_path, ["baseline", "rcb"])
        out = tmp_path / "out.csv"
        assert run(["pipeline", "--config", path, "--out", out]) == 0
        h = pipeline.config_hash(cfg)
        assert all(r["config_hash"] == h for r in pipeline.read_csv(out))

    def test_stage_error_is_tagged(self, tmp_path):
        cfg = {"seed": 1, "kernel": {"kind": "dtree", "n": 100, "m": 2},
               "variants": ["zorder-comp"]}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(cfg))
        assert run(["pipeline", "--config", path, "--out", tmp_path / "o.csv"]) != 0


class TestReport:
    def write_csv(self, path, rows):
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)

    def test_single_row(self, tmp_path, capsys):
        path = tmp_path / "r.csv"
        self.write_csv(path, [{"benchmark": "demo", "hit_ratio": 0.5,
                               "avg_latency": 40.0, "ideal_latency": 20.0,
                               "improvement_pct": 50.0}])
        assert run(["report", path]) == 0
        out = capsys.readouterr().out
        assert "demo" in out
        assert "0.50, 40.00, 20.00, 50.00" in out

    def test_reference_rows_render_verbatim(self, tmp_path, capsys):
        path = tmp_path / "ref.csv"
        self.write_csv(path, [
            {"benchmark": "KNN", "hit_ratio": 0.13, "avg_latency": 92.13,
             "ideal_latency": 68.67, "improvement_pct": 25.46},
            {"benchmark": "Adaboost", "hit_ratio": 0.64, "avg_latency": 82.37,
             "ideal_latency": 72.61, "improvement_pct": 11.84},
        ])
        assert run(["report", path]) == 0
        out = capsys.readouterr().out
        assert "0.13, 92.13, 68.67, 25.46" in out
        assert "0.64, 82.37, 72.61, 11.84" in out

    def test_empty_input_header_only(self, tmp_path, capsys):
        path = tmp_path / "empty.csv"
        path.write_text("benchmark,hit_ratio,avg_latency,ideal_latency\n")
        assert run(["report", path]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 1  # header only

    def test_schema_mismatch_fails(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("foo,bar\n1,2\n")
        assert run(["report", path]) != 0
