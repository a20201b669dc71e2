"""Tile scheduler: partitioning, the TP and BP stages, the wave pipeline,
and the demand-driven worker pool."""

import json
import time

import numpy as np
import pytest

from gridwave.edt import DistanceRule, edt, edt_tiled, init_packed
from gridwave.errors import ContractViolation
from gridwave.grid import Image2D, StructuringElement
from gridwave.recon import ReconInput, ReconRule, recon_fh, recon_tiled
from gridwave.tiles import (
    MicroConfig,
    PipelineConfig,
    Task,
    WorkerPool,
    dispatch,
    partition,
    run_bp,
    run_pipeline,
    run_tp,
)

SE8 = StructuringElement(8)
SE4 = StructuringElement(4)


def img(a, kind="u8"):
    a = np.asarray(a, dtype=np.uint8)
    return Image2D(a.shape[1], a.shape[0], kind, a)


def bin_img(a):
    a = np.asarray(a, dtype=np.uint8)
    return Image2D(a.shape[1], a.shape[0], "binary", a)


def pk(x, y, w):
    return y * w + x


def random_pair(rng, n, h=40, se=SE8):
    I = rng.integers(0, 256, (n, n)).astype(np.uint8)
    J = np.maximum(I.astype(np.int32) - h, 0).astype(np.uint8)
    return ReconInput(img(J), img(I), se)


# ---------------------------------------------------------------------------
# partition

def test_partition_100x100_into_64x64_gives_four_tiles():
    g = partition(Image2D(100, 100, "u8", np.zeros((100, 100), np.uint8)), 64, 64)
    assert len(g.tiles) == 4
    assert [t.id for t in g.tiles] == [0, 1, 2, 3]
    sizes = [(t.x1 - t.x0, t.y1 - t.y0) for t in g.tiles]
    assert sizes == [(64, 64), (36, 64), (64, 36), (36, 36)]


def test_partition_tile_at_least_image_gives_one_tile():
    g = partition(Image2D(20, 30, "u8", np.zeros((30, 20), np.uint8)), 64, 64)
    assert len(g.tiles) == 1
    assert g.tiles[0].bounds == (0, 0, 20, 30)


def test_partition_256_disjoint_cover():
    g = partition(Image2D(256, 256, "u8", np.zeros((256, 256), np.uint8)), 64, 64)
    assert len(g.tiles) == 16
    assert g.shape == (4, 4)
    membership = np.zeros((256, 256), np.int32)
    for t in g.tiles:
        membership[t.y0:t.y1, t.x0:t.x1] += 1
    assert (membership == 1).all()


def test_partition_zero_dims_rejected():
    im = Image2D(8, 8, "u8", np.zeros((8, 8), np.uint8))
    with pytest.raises(ContractViolation):
        partition(im, 0, 8)
    with pytest.raises(ContractViolation):
        partition(im, 8, 0)


def test_tile_at_agrees_with_containment():
    g = partition(Image2D(100, 70, "u8", np.zeros((70, 100), np.uint8)), 32, 16)
    rng = np.random.default_rng(3)
    for _ in range(200):
        x = int(rng.integers(0, 100))
        y = int(rng.integers(0, 70))
        t = g.tiles[g.tile_at(x, y)]
        assert t.x0 <= x < t.x1 and t.y0 <= y < t.y1


# ---------------------------------------------------------------------------
# TP

def test_tp_no_seeds_no_change():
    rng = np.random.default_rng(11)
    inp = random_pair(rng, 16)
    rule = ReconRule(inp.marker.data.copy(), inp.mask.data, SE8)
    before = rule.J.copy()
    tile = partition(inp.marker, 16, 16).tiles[0]
    assert run_tp(tile, rule, []) is False
    assert np.array_equal(rule.J, before)


def test_tp_wave_dying_inside_reports_no_border_change():
    # the mask island sits strictly inside, so the wave cannot reach the ring
    I = np.zeros((16, 16), np.uint8)
    I[6:9, 6:9] = 100
    J = np.zeros((16, 16), np.uint8)
    J[7, 7] = 100
    rule = ReconRule(J, I, SE8)
    tile = partition(img(I), 16, 16).tiles[0]
    changed = run_tp(tile, rule, [pk(7, 7, 16)])
    assert changed is False
    expect = np.zeros((16, 16), np.uint8)
    expect[6:9, 6:9] = 100
    assert np.array_equal(rule.J, expect)


def test_tp_reaching_the_ring_reports_border_change():
    I = np.zeros((16, 16), np.uint8)
    I[0:3, 6:9] = 100
    J = np.zeros((16, 16), np.uint8)
    J[1, 7] = 100
    rule = ReconRule(J, I, SE8)
    tile = partition(img(I), 16, 16).tiles[0]
    assert run_tp(tile, rule, [pk(7, 1, 16)]) is True
    assert rule.J[0, 7] == 100


def test_tp_ignores_neighbors_outside_the_tile():
    I = np.full((8, 16), 100, np.uint8)
    J = np.zeros((8, 16), np.uint8)
    J[3, 3] = 100
    rule = ReconRule(J, I, SE8)
    g = partition(img(I), 8, 8)
    assert run_tp(g.tiles[0], rule, [pk(3, 3, 16)]) is True
    assert (rule.J[:, :8] == 100).all()
    assert (rule.J[:, 8:] == 0).all()


def test_tp_micro_bands_match_plain_flooding():
    rng = np.random.default_rng(29)
    inp = random_pair(rng, 32)
    seeds = np.arange(32 * 32, dtype=np.int64)
    results = []
    for bands in (1, 4):
        rule = ReconRule(inp.marker.data.copy(), inp.mask.data, SE8)
        tile = partition(inp.mask, 32, 32).tiles[0]
        run_tp(tile, rule, seeds, micro_cfg=MicroConfig(n_bands=bands))
        results.append(rule.J.copy())
    assert np.array_equal(results[0], results[1])
    assert np.array_equal(results[0], recon_fh(inp).data)


def test_tp_micro_bands_match_plain_synchronous_round():
    rng = np.random.default_rng(31)
    mask = bin_img((rng.random((32, 32)) < 0.5).astype(np.uint8) * 255)
    results = []
    carries = []
    for bands in (None, MicroConfig(n_bands=4)):
        vmap, seeds = init_packed(mask, SE8)
        rule = DistanceRule(vmap.vr, SE8)
        tile = partition(mask, 32, 32).tiles[0]
        carry: list[int] = []
        run_tp(tile, rule, seeds, micro_cfg=bands, carry_out=carry,
               wave_start=vmap.vr.copy())
        results.append(vmap.vr.copy())
        carries.append(set(carry))
    assert np.array_equal(results[0], results[1])
    assert carries[0] == carries[1]


def test_tp_micro_synchronous_requires_snapshot():
    mask = bin_img(np.eye(8, dtype=np.uint8) * 255)
    vmap, seeds = init_packed(mask, SE8)
    rule = DistanceRule(vmap.vr, SE8)
    tile = partition(mask, 8, 8).tiles[0]
    with pytest.raises(ContractViolation):
        run_tp(tile, rule, seeds, micro_cfg=MicroConfig(n_bands=2))


# ---------------------------------------------------------------------------
# BP

def test_bp_stable_image_returns_empty_map():
    rng = np.random.default_rng(5)
    I = rng.integers(0, 256, (16, 16)).astype(np.uint8)
    rule = ReconRule(I.copy(), I, SE8)  # marker == mask is a fixed point
    g = partition(img(I), 8, 8)
    assert run_bp(img(I), g, rule) == {}


def test_bp_gradient_seeds_exactly_the_receiving_tile():
    I = np.full((4, 8), 100, np.uint8)
    J = np.zeros((4, 8), np.uint8)
    J[1, 1] = 100
    rule = ReconRule(J, I, SE8)
    g = partition(img(I), 4, 4)
    assert len(g.tiles) == 2

    assert run_tp(g.tiles[0], rule, [pk(1, 1, 8)]) is True
    assert (rule.J[:, :4] == 100).all()
    assert (rule.J[:, 4:] == 0).all()

    seeds = run_bp(img(I), g, rule)
    assert set(seeds) == {1}
    assert all(p % 8 == 4 for p in seeds[1])
    assert sorted(p // 8 for p in seeds[1]) == [0, 1, 2, 3]
    # the sweep applied the merges itself
    assert (rule.J[:, 4] == 100).all()
    assert (rule.J[:, 5:] == 0).all()

    # one more TP on the seeded tile reaches the global fixed point
    assert run_tp(g.tiles[1], rule, seeds[1]) is True
    assert run_bp(img(I), g, rule) == {}
    oracle = recon_fh(ReconInput(img(np.where(np.arange(32).reshape(4, 8) == 9,
                                              100, 0)), img(I), SE8))
    assert np.array_equal(rule.J, oracle.data)


# ---------------------------------------------------------------------------
# pipeline

def test_pipeline_single_tile_runs_one_empty_bp_wave():
    rng = np.random.default_rng(17)
    inp = random_pair(rng, 32)
    cfg = PipelineConfig()
    out = recon_tiled(inp, (64, 64), cfg)
    assert cfg.bp_waves == 1
    assert np.array_equal(out.data, recon_fh(inp).data)


def test_pipeline_recon_matches_untiled_across_settings():
    rng = np.random.default_rng(23)
    for trial in range(8):
        inp = random_pair(rng, 64, se=SE8 if trial % 2 else SE4)
        want = recon_fh(inp).data
        cfg = PipelineConfig(
            n_workers=(trial % 3) + 1,
            micro=MicroConfig(n_bands=2) if trial % 2 else None,
        )
        got = recon_tiled(inp, (16, 16), cfg)
        assert np.array_equal(got.data, want)


def test_pipeline_edt_matches_sequential():
    rng = np.random.default_rng(41)
    for conn in (SE4, SE8):
        mask = bin_img((rng.random((48, 48)) < 0.5).astype(np.uint8) * 255)
        vref, dref = edt(mask, conn, mode="sequential")
        cfg = PipelineConfig(n_workers=2, micro=MicroConfig(n_bands=2))
        vtil, dtil = edt_tiled(mask, conn, (16, 16), cfg)
        assert np.array_equal(vtil.vr, vref.vr)
        assert np.array_equal(dtil.data, dref.data)
        assert cfg.bp_waves >= 1


def _zigzag_instance():
    """A corridor that crosses the tile boundary twice: along row 1 into
    the right tile, down the far column, and back along row 5 into the
    left tile. The wave pipeline cannot finish it in one BP round."""
    I = np.zeros((8, 16), np.uint8)
    I[1, 1:15] = 100
    I[1:6, 14] = 100
    I[5, 1:15] = 100
    J = np.zeros((8, 16), np.uint8)
    J[1, 1] = 100
    return J, I


def test_pipeline_zigzag_needs_two_bp_rounds():
    J, I = _zigzag_instance()
    rule = ReconRule(J, I, SE8)
    cfg = PipelineConfig(n_workers=2)
    run_pipeline(img(J), rule, lambda: [pk(1, 1, 16)], (8, 8), cfg)

    # waves 1 and 2 exist only because a BP sweep seeded them
    assert cfg.bp_waves == 3
    tp_waves = {e.wave for e in cfg.events if e.kind == "TP"}
    assert tp_waves == {0, 1, 2}

    J2, I2 = _zigzag_instance()
    oracle = recon_fh(ReconInput(img(J2), img(I2), SE8))
    assert np.array_equal(rule.J, oracle.data)


def test_pipeline_wave_cap_guards_against_runaway():
    J, I = _zigzag_instance()
    rule = ReconRule(J, I, SE8)
    cfg = PipelineConfig(max_waves=1)
    with pytest.raises(ContractViolation):
        run_pipeline(img(J), rule, lambda: [pk(1, 1, 16)], (8, 8), cfg)


# ---------------------------------------------------------------------------
# dispatch and the event log

def test_dispatch_two_workers_share_four_tasks():
    pool = WorkerPool(2)
    try:
        tasks = [Task(i, "TP", 0, i, lambda: time.sleep(0.05)) for i in range(4)]
        events = dispatch(pool, tasks)
        assert len(events) == 4
        assert {e.worker for e in events} == {0, 1}
        bp = dispatch(pool, [Task(9, "BP", 0, -1, lambda: None)])[0]
        assert bp.start >= max(e.end for e in events)
    finally:
        pool.close()


def test_dispatch_single_worker_runs_fcfs():
    pool = WorkerPool(1)
    try:
        order: list[int] = []
        tasks = [Task(i, "TP", 0, i, lambda i=i: order.append(i)) for i in range(6)]
        dispatch(pool, tasks)
        assert order == list(range(6))
    finally:
        pool.close()


def test_pool_propagates_task_errors():
    pool = WorkerPool(2)
    try:
        def boom():
            raise ValueError("task failed")
        with pytest.raises(ValueError, match="task failed"):
            dispatch(pool, [Task(0, "TP", 0, 0, boom)])
    finally:
        pool.close()


def test_bp_never_overlaps_same_wave_tp():
    rng = np.random.default_rng(47)
    inp = random_pair(rng, 64)
    cfg = PipelineConfig(n_workers=4)
    recon_tiled(inp, (8, 8), cfg)
    by_wave: dict[int, list] = {}
    for e in cfg.events:
        by_wave.setdefault(e.wave, []).append(e)
    assert len(by_wave) >= 1
    for wave_events in by_wave.values():
        tp = [e for e in wave_events if e.kind == "TP"]
        bp = [e for e in wave_events if e.kind == "BP"]
        assert len(bp) == 1
        if tp:
            assert max(e.end for e in tp) <= bp[0].start


def test_event_log_lines_are_json_records():
    rng = np.random.default_rng(53)
    inp = random_pair(rng, 32)
    cfg = PipelineConfig(n_workers=2)
    recon_tiled(inp, (16, 16), cfg)
    assert cfg.events
    for rec in cfg.events:
        d = json.loads(rec.to_line())
        assert set(d) == {"task", "kind", "wave", "tile", "worker", "start", "end"}
        assert d["kind"] in ("TP", "BP")
        assert d["start"] <= d["end"]
        if d["kind"] == "BP":
            assert d["tile"] == -1
