"""Benchmark harness. Each experiment emits one record per configuration;
wall time is the median of three repeats and covers the propagation phase
only, never instance generation or file I/O.

CSV column order is fixed: experiment, variant, workers, tile_dims,
queue_strategy, coverage_pct, wall_time_ms, rounds, bp_waves,
queued_total, overflow_count, speedup_vs_1worker. The JSON form is a
list of objects with the same keys.
"""

import json
import statistics
import time
from dataclasses import asdict, dataclass

import numpy as np

from .edt import edt_propagate, init_packed
from .engine import EngineConfig
from .grid import FG, Image2D, StructuringElement
from .recon import ReconInput, recon_parallel, recon_tiled
from .tiles import PipelineConfig
from .wqueue import QueueConfig, QueueStrategy

REPEATS = 3
CSV_COLUMNS = (
    "experiment", "variant", "workers", "tile_dims", "queue_strategy",
    "coverage_pct", "wall_time_ms", "rounds", "bp_waves", "queued_total",
    "overflow_count", "speedup_vs_1worker",
)
SE8 = StructuringElement(8)


@dataclass
class BenchReport:
    experiment: str
    variant: str
    workers: int
    tile_dims: str = ""
    queue_strategy: str = ""
    coverage_pct: int | None = None
    wall_time_ms: float = 0.0
    rounds: int = 0
    bp_waves: int = 0
    queued_total: int = 0
    overflow_count: int = 0
    speedup_vs_1worker: float | None = None


def to_csv(reports: list[BenchReport]) -> str:
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return f"{v:.3f}"
        return str(v)

    lines = [",".join(CSV_COLUMNS)]
    for r in reports:
        d = asdict(r)
        lines.append(",".join(cell(d[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def to_json(reports: list[BenchReport]) -> str:
    return json.dumps([asdict(r) for r in reports], indent=2) + "\n"


def _timed(fn) -> tuple[float, object]:
    """Median wall milliseconds over REPEATS runs, plus the last result."""
    times = []
    result = None
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        result = fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(times), result


def _gray_pair(rng, w, h):
    I = rng.integers(0, 256, (h, w)).astype(np.uint8)
    J = np.maximum(I.astype(np.int32) - 40, 0).astype(np.uint8)
    return ReconInput(Image2D(w, h, "u8", J), Image2D(w, h, "u8", I), SE8)


def bench_queue(size, seed, workers) -> list[BenchReport]:
    """The three enqueue strategies on one identical instance; their
    queued_total counters must agree.

    Runs single-worker regardless of the workers flag: with one worker
    every strategy commits pushes in chronological order, so the three
    executions are step-for-step identical and the counters comparable.
    Concurrent workers interleave merges and the duplicate-enqueue count
    becomes schedule noise, which would bury the comparison.
    """
    rng = np.random.default_rng(seed)
    w, h = size
    inp = _gray_pair(rng, w, h)
    out = []
    for strat in QueueStrategy:
        cfg = {}

        def run():
            c = EngineConfig(n_workers=1,
                             queue=QueueConfig(strategy=strat))
            recon_parallel(inp, c)
            cfg["last"] = c

        ms, _ = _timed(run)
        c = cfg["last"]
        out.append(BenchReport(
            "queue", "recon_parallel", 1,
            queue_strategy=strat.name.lower(), wall_time_ms=ms,
            rounds=c.stats.rounds, queued_total=c.stats.queued_total,
            overflow_count=c.stats.overflow_count,
        ))
    return out


def bench_tilesize(size, seed, workers) -> list[BenchReport]:
    rng = np.random.default_rng(seed)
    w, h = size
    inp = _gray_pair(rng, w, h)
    out = []
    for t in (32, 64, 128, 256):
        if t > max(w, h):
            continue
        cfg = {}

        def run():
            c = PipelineConfig(n_workers=workers)
            recon_tiled(inp, (t, t), c)
            cfg["last"] = c

        ms, _ = _timed(run)
        out.append(BenchReport(
            "tilesize", "recon_tiled", workers, tile_dims=f"{t}x{t}",
            wall_time_ms=ms, bp_waves=cfg["last"].bp_waves,
        ))
    return out


def bench_coverage(size, seed, workers) -> list[BenchReport]:
    """Distance-transform work as a function of foreground coverage; 0%
    has no contour, so nothing is ever queued."""
    rng = np.random.default_rng(seed)
    w, h = size
    out = []
    for pct in (0, 25, 50, 75, 100):
        a = (rng.random((h, w)) < pct / 100.0).astype(np.uint8) * FG
        mask = Image2D(w, h, "binary", a)
        cfg = {}

        def run():
            vmap, seeds = init_packed(mask, SE8)
            c = EngineConfig(n_workers=workers)
            edt_propagate(vmap, seeds, SE8, mode="parallel", cfg=c)
            cfg["last"] = c

        ms, _ = _timed(run)
        c = cfg["last"]
        out.append(BenchReport(
            "coverage", "edt_parallel", workers, coverage_pct=pct,
            wall_time_ms=ms, rounds=c.stats.rounds,
            queued_total=c.stats.queued_total,
        ))
    return out


def bench_overflow(size, seed, workers) -> list[BenchReport]:
    rng = np.random.default_rng(seed)
    w, h = size
    inp = _gray_pair(rng, w, h)
    out = []
    for label, capacity in (("roomy", 8 * w * h), ("tiny", 16)):
        cfg = {}

        def run():
            c = EngineConfig(n_workers=workers,
                             queue=QueueConfig(gbq_capacity=capacity))
            recon_parallel(inp, c)
            cfg["last"] = c

        ms, _ = _timed(run)
        c = cfg["last"]
        out.append(BenchReport(
            "overflow", f"recon_parallel-{label}", workers,
            wall_time_ms=ms, rounds=c.stats.rounds,
            queued_total=c.stats.queued_total,
            overflow_count=c.stats.overflow_count,
        ))
    return out


def bench_scaling(size, seed, workers) -> list[BenchReport]:
    """Tiled reconstruction across worker counts. The speedup column is
    reported, not asserted; on a single hardware thread it hovers near 1."""
    rng = np.random.default_rng(seed)
    w, h = size
    inp = _gray_pair(rng, w, h)
    counts = sorted({1, 2, workers} | ({4} if workers >= 4 else set()))
    tile = (max(w // 8, 32), max(h // 8, 32))
    out = []
    base_ms = None
    for n in counts:
        cfg = {}

        def run():
            c = PipelineConfig(n_workers=n)
            recon_tiled(inp, tile, c)
            cfg["last"] = c

        ms, _ = _timed(run)
        if base_ms is None:
            base_ms = ms
        out.append(BenchReport(
            "scaling", "recon_tiled", n,
            tile_dims=f"{tile[0]}x{tile[1]}", wall_time_ms=ms,
            bp_waves=cfg["last"].bp_waves,
            speedup_vs_1worker=base_ms / ms if ms > 0 else None,
        ))
    return out


EXPERIMENTS = {
    "queue": bench_queue,
    "tilesize": bench_tilesize,
    "coverage": bench_coverage,
    "overflow": bench_overflow,
    "scaling": bench_scaling,
}


def run_experiment(name: str, size=(512, 512), seed: int = 0,
                   workers: int = 4) -> list[BenchReport]:
    return EXPERIMENTS[name](size, seed, workers)
