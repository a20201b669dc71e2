"""Command-line layer: the four subcommands, their exit codes, and the
report formats of the bench harness."""

import json

import numpy as np
import pytest

from gridwave.bench import CSV_COLUMNS, run_experiment, to_csv, to_json
from gridwave.cli import main
from gridwave.grid import FG, Image2D
from gridwave.imgio import read_f32_raw, read_pgm, write_pgm
from gridwave.verify import run_suites


def gray(path, arr):
    a = np.asarray(arr, dtype=np.uint8)
    write_pgm(Image2D(a.shape[1], a.shape[0], "u8", a), str(path))
    return str(path)


def binary(path, arr):
    a = np.asarray(arr, dtype=np.uint8) * FG
    write_pgm(Image2D(a.shape[1], a.shape[0], "binary", a), str(path))
    return str(path)


# ---------------------------------------------------------------------------
# recon

def test_recon_marker_equals_mask_reproduces_mask(tmp_path):
    rng = np.random.default_rng(1)
    a = rng.integers(0, 256, (16, 16)).astype(np.uint8)
    mask = gray(tmp_path / "mask.pgm", a)
    out = tmp_path / "out.pgm"
    assert main(["recon", "--marker", mask, "--mask", mask,
                 "--out", str(out)]) == 0
    assert out.read_bytes() == (tmp_path / "mask.pgm").read_bytes()


def test_recon_fh_and_tiled_write_identical_files(tmp_path):
    rng = np.random.default_rng(2)
    mask = gray(tmp_path / "mask.pgm", rng.integers(0, 256, (48, 48)))
    a = tmp_path / "a.pgm"
    b = tmp_path / "b.pgm"
    assert main(["recon", "--mask", mask, "--auto-marker", "40",
                 "--out", str(a), "--algo", "fh"]) == 0
    assert main(["recon", "--mask", mask, "--auto-marker", "40",
                 "--out", str(b), "--algo", "tiled", "--tile", "16x16",
                 "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_recon_marker_above_mask_exits_2(tmp_path, capsys):
    mask = gray(tmp_path / "mask.pgm", np.full((8, 8), 10))
    marker = gray(tmp_path / "marker.pgm", np.full((8, 8), 200))
    code = main(["recon", "--marker", marker, "--mask", mask,
                 "--out", str(tmp_path / "out.pgm")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_recon_missing_file_exits_2(tmp_path):
    assert main(["recon", "--mask", str(tmp_path / "nope.pgm"),
                 "--auto-marker", "40",
                 "--out", str(tmp_path / "out.pgm")]) == 2


def test_recon_parallel_matches_fh_output(tmp_path):
    rng = np.random.default_rng(3)
    mask = gray(tmp_path / "mask.pgm", rng.integers(0, 256, (32, 32)))
    a = tmp_path / "a.pgm"
    b = tmp_path / "b.pgm"
    assert main(["recon", "--mask", mask, "--auto-marker", "40",
                 "--out", str(a), "--algo", "fh"]) == 0
    assert main(["recon", "--mask", mask, "--auto-marker", "40",
                 "--out", str(b), "--algo", "parallel", "--workers", "2",
                 "--queue", "naive"]) == 0
    assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------------------
# edt

def test_edt_all_background_writes_zero_map(tmp_path):
    mask = binary(tmp_path / "mask.pgm", np.zeros((12, 12), np.uint8))
    out = tmp_path / "d.f32"
    assert main(["edt", "--input", mask, "--out", str(out)]) == 0
    got = read_f32_raw(str(out))
    assert (got.data == 0.0).all()


def test_edt_seq_and_tiled_write_identical_f32(tmp_path):
    rng = np.random.default_rng(4)
    mask = binary(tmp_path / "mask.pgm", rng.random((48, 48)) < 0.5)
    a = tmp_path / "a.f32"
    b = tmp_path / "b.f32"
    assert main(["edt", "--input", mask, "--out", str(a),
                 "--mode", "seq"]) == 0
    assert main(["edt", "--input", mask, "--out", str(b),
                 "--mode", "tiled", "--tile", "16x16"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_edt_all_foreground_exits_3(tmp_path, capsys):
    mask = binary(tmp_path / "mask.pgm", np.ones((8, 8), np.uint8))
    code = main(["edt", "--input", mask, "--out", str(tmp_path / "d.f32")])
    assert code == 3
    assert "error:" in capsys.readouterr().err


def test_edt_quantized_pgm_rounds_distances(tmp_path):
    a = np.ones((8, 8), np.uint8)
    a[0, 0] = 0
    mask = binary(tmp_path / "mask.pgm", a)
    out = tmp_path / "d.pgm"
    assert main(["edt", "--input", mask, "--out", str(out)]) == 0
    got = read_pgm(str(out))
    assert got.data[0, 0] == 0
    assert got.data[0, 1] == 1
    assert got.data[4, 3] == 5  # a 3-4-5 triangle from the corner
    assert got.data[1, 1] == round(2 ** 0.5)


def test_edt_rejects_gray_input(tmp_path):
    mask = gray(tmp_path / "mask.pgm", np.arange(64).reshape(8, 8))
    assert main(["edt", "--input", mask,
                 "--out", str(tmp_path / "d.f32")]) == 2


def test_bad_tile_flag_exits_2(tmp_path):
    rng = np.random.default_rng(5)
    mask = binary(tmp_path / "mask.pgm", rng.random((8, 8)) < 0.5)
    assert main(["edt", "--input", mask, "--out", str(tmp_path / "d.f32"),
                 "--mode", "tiled", "--tile", "16by16"]) == 2


# ---------------------------------------------------------------------------
# verify

def test_verify_suites_pass_and_exit_0(capsys):
    assert main(["verify", "--suite", "all", "--cases", "4",
                 "--size", "32x32", "--seed", "5"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines == [
        "recon: 4/4 pass",
        "edt: 4/4 pass",
        "queue: 4/4 pass",
        "tiling: 4/4 pass",
    ]


def test_verify_is_deterministic():
    a = run_suites("recon", 6, 9, (32, 32))
    b = run_suites("recon", 6, 9, (32, 32))
    assert [(r.passed, r.failed) for r in a] == [(r.passed, r.failed) for r in b]


def test_verify_single_suite(capsys):
    assert main(["verify", "--suite", "queue", "--cases", "30"]) == 0
    assert capsys.readouterr().out.strip() == "queue: 30/30 pass"


# ---------------------------------------------------------------------------
# bench

def test_bench_queue_counters_agree(tmp_path, capsys):
    out_json = tmp_path / "r.json"
    assert main(["bench", "--experiment", "queue", "--size", "96x96",
                 "--json", str(out_json)]) == 0
    rows = json.loads(out_json.read_text())
    assert [r["queue_strategy"] for r in rows] == [
        "naive", "prefix_sum", "per_worker"
    ]
    assert len({r["queued_total"] for r in rows}) == 1
    header = capsys.readouterr().out.splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)


def test_bench_coverage_zero_queues_nothing():
    rows = run_experiment("coverage", size=(64, 64), seed=3, workers=2)
    by_pct = {r.coverage_pct: r for r in rows}
    assert by_pct[0].queued_total == 0
    assert by_pct[50].queued_total > 0


def test_bench_scaling_reports_speedup_column():
    rows = run_experiment("scaling", size=(256, 256), seed=1, workers=4)
    assert [r.workers for r in rows] == [1, 2, 4]
    assert rows[0].speedup_vs_1worker == 1.0
    assert all(r.speedup_vs_1worker is not None for r in rows)


def test_bench_overflow_reports_reexecutions():
    rows = run_experiment("overflow", size=(96, 96), seed=2, workers=2)
    assert rows[0].overflow_count == 0
    assert rows[1].overflow_count >= 2


def test_bench_csv_and_json_mirror_each_other():
    rows = run_experiment("tilesize", size=(128, 128), seed=4, workers=2)
    csv_lines = to_csv(rows).strip().splitlines()
    parsed = json.loads(to_json(rows))
    assert len(csv_lines) == len(parsed) + 1
    assert csv_lines[0] == ",".join(CSV_COLUMNS)
    for line, obj in zip(csv_lines[1:], parsed):
        assert set(obj) == set(CSV_COLUMNS)
        cells = line.split(",")
        assert cells[0] == obj["experiment"]
        assert cells[3] == obj["tile_dims"]
        assert int(cells[2]) == obj["workers"]
