"""Randomized self-checks: every suite compares a fast implementation
against an independent oracle or a differently-scheduled twin, and a
suite is deterministic given (seed, cases, size)."""

from dataclasses import dataclass

import numpy as np

from .edt import edt, edt_propagate, edt_tiled, init_packed
from .engine import EngineConfig
from .grid import BG, FG, Image2D, StructuringElement
from .oracles import binary_recon_components, bruteforce_sqdist, recon_by_dilation
from .recon import ReconInput, recon_fh, recon_parallel, recon_qb, recon_sr, recon_tiled
from .tiles import PipelineConfig, partition
from .wqueue import EMPTY, QueueConfig, QueueStrategy, WavefrontQueue

SUITES = ("recon", "edt", "queue", "tiling")
_FAR = 1 << 62


@dataclass
class SuiteResult:
    name: str
    passed: int
    failed: int

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def line(self) -> str:
        return f"{self.name}: {self.passed}/{self.passed + self.failed} pass"


def _gray_pair(rng, w, h, se):
    I = rng.integers(0, 256, (h, w)).astype(np.uint8)
    J = np.maximum(I.astype(np.int32) - 40, 0).astype(np.uint8)
    return ReconInput(
        Image2D(w, h, "u8", J), Image2D(w, h, "u8", I), se
    )


def _random_mask(rng, w, h, coverage_pct):
    a = (rng.random((h, w)) < coverage_pct / 100.0).astype(np.uint8) * FG
    return Image2D(w, h, "binary", a)


def verify_recon(cases: int, seed: int, size: tuple[int, int]) -> SuiteResult:
    """Sequential variants vs the dilation fixed point, parallel vs
    sequential, and binary component selection vs flood fill."""
    rng = np.random.default_rng(seed)
    w, h = size
    passed = failed = 0
    for i in range(cases):
        conn = 8 if i % 2 == 0 else 4
        se = StructuringElement(conn)
        ok = True
        if i % 4 == 3:
            mask = (rng.random((h, w)) < 0.45).astype(np.uint8) * FG
            marker = np.where(
                (rng.random((h, w)) < 0.06) & (mask == FG), FG, BG
            ).astype(np.uint8)
            want = binary_recon_components(marker, mask, conn)
            inp = ReconInput(Image2D(w, h, "binary", marker),
                             Image2D(w, h, "binary", mask), se)
            ok = np.array_equal(recon_fh(inp).data, want)
        else:
            inp = _gray_pair(rng, w, h, se)
            want = recon_by_dilation(inp.marker.data, inp.mask.data, conn)
            ok = (
                np.array_equal(recon_fh(inp).data, want)
                and np.array_equal(recon_sr(inp).data, want)
                and np.array_equal(recon_qb(inp).data, want)
                and np.array_equal(
                    recon_parallel(
                        inp, EngineConfig(n_workers=(i % 3) + 1)
                    ).data,
                    want,
                )
            )
        passed, failed = passed + ok, failed + (not ok)
    return SuiteResult("recon", passed, failed)


def verify_edt(cases: int, seed: int, size: tuple[int, int]) -> SuiteResult:
    """Mode agreement at full size, the lower-bound property against brute
    force at 16x16, and single-source exactness at full size."""
    rng = np.random.default_rng(seed)
    w, h = size
    passed = failed = 0
    for i in range(cases):
        se = StructuringElement(8 if i % 2 == 0 else 4)
        if i % 5 == 4:
            a = np.full((h, w), FG, np.uint8)
            a[rng.integers(0, h), rng.integers(0, w)] = BG
            mask = Image2D(w, h, "binary", a)
            vmap, _ = edt(mask, se, mode="sequential")
            ok = np.array_equal(
                vmap.squared_distances(), bruteforce_sqdist(a, _FAR)
            )
        else:
            mask = _random_mask(rng, w, h, 25 + (i % 3) * 25)
            vmap, seeds = init_packed(mask, se)
            edt_propagate(vmap, seeds, se)
            d = vmap.squared_distances()
            vp, _ = edt(mask, se, mode="parallel",
                        cfg=EngineConfig(n_workers=(i % 3) + 1))
            vt, _ = edt_tiled(mask, se, (max(w // 4, 1), max(h // 4, 1)))
            small = _random_mask(rng, 16, 16, 50)
            vs, ss = init_packed(small, se)
            edt_propagate(vs, ss, se)
            ok = (
                np.array_equal(vp.squared_distances(), d)
                and np.array_equal(vt.squared_distances(), d)
                and (vs.squared_distances()
                     >= bruteforce_sqdist(small.data, _FAR)).all()
            )
        passed, failed = passed + ok, failed + (not ok)
    return SuiteResult("edt", passed, failed)


def _drain(q: WavefrontQueue, n_workers: int) -> list:
    got = []
    for wk in range(n_workers):
        it = 0
        while True:
            v = q.dequeue(wk, it, n_workers)
            if v is EMPTY:
                break
            got.append(v)
            it += 1
    return got


def verify_queue(cases: int, seed: int, size: tuple[int, int]) -> SuiteResult:
    """Partition of a round across workers, conservation below capacity,
    drop accounting, and the overflow flag."""
    rng = np.random.default_rng(seed)
    passed = failed = 0
    for _ in range(cases):
        n_workers = int(rng.integers(1, 5))
        cfg = QueueConfig(
            strategy=list(QueueStrategy)[int(rng.integers(0, 3))],
            tq_capacity=int(rng.integers(1, 8)),
            bq_capacity=int(rng.integers(1, 16)),
            gbq_capacity=int(rng.integers(1, 120)),
        )
        q = WavefrontQueue(n_workers, cfg)
        items = list(range(int(rng.integers(0, 160))))
        for item in items:
            q.push(int(rng.integers(0, n_workers)), item)
        q.end_round()
        got = _drain(q, n_workers)
        ok = (
            len(set(got)) == len(got)
            and set(got) <= set(items)
            and len(got) == len(items) - q.stats.dropped
            and q.overflowed == (q.stats.dropped > 0)
        )
        passed, failed = passed + ok, failed + (not ok)
    return SuiteResult("queue", passed, failed)


def verify_tiling(cases: int, seed: int, size: tuple[int, int]) -> SuiteResult:
    """Tiled pipeline vs the untiled algorithms, the disjoint-cover
    property, and the single-tile wave count."""
    rng = np.random.default_rng(seed)
    w, h = size
    passed = failed = 0
    for i in range(cases):
        se = StructuringElement(8 if i % 2 == 0 else 4)
        tile = [(16, 16), (32, 32), (w, h)][i % 3]
        inp = _gray_pair(rng, w, h, se)
        cfg = PipelineConfig(n_workers=(i % 3) + 1)
        ok = np.array_equal(
            recon_tiled(inp, tile, cfg).data, recon_fh(inp).data
        )
        if tile == (w, h):
            ok = ok and cfg.bp_waves == 1
        mask = _random_mask(rng, w, h, 50)
        vt, _ = edt_tiled(mask, se, tile)
        vs, _ = edt(mask, se, mode="sequential")
        ok = ok and np.array_equal(vt.vr, vs.vr)
        grid = partition(inp.mask, *tile)
        member = np.zeros((h, w), np.int32)
        for t in grid.tiles:
            member[t.y0:t.y1, t.x0:t.x1] += 1
        ok = ok and (member == 1).all()
        passed, failed = passed + ok, failed + (not ok)
    return SuiteResult("tiling", passed, failed)


_RUNNERS = {
    "recon": verify_recon,
    "edt": verify_edt,
    "queue": verify_queue,
    "tiling": verify_tiling,
}


def run_suites(suite: str, cases: int, seed: int,
               size: tuple[int, int]) -> list[SuiteResult]:
    names = SUITES if suite == "all" else (suite,)
    return [_RUNNERS[name](cases, seed, size) for name in names]
