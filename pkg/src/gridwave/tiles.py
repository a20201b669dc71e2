"""Tiled execution: split the image into non-overlapping tiles, propagate
inside tiles (TP), exchange across tile borders (BP), repeat in waves
until nothing moves.

Two tile disciplines share the pipeline, chosen by the rule's flavor:

* Flooding rules (reconstruction) run each TP to in-tile stability. Their
  fixed point is unique, so any interleaving of tile work and border
  exchange lands on the untiled result.
* Synchronous rules (distance transform) advance exactly one two-phase
  round per wave, and BP offers use the wave-start state. A wave is then
  the untiled round with its work split by tile, which keeps the result
  cell-for-cell identical to the untiled schedule. Running a tile ahead
  to local stability would instead change which sources get relayed.

TP tasks of one wave are dispatched FCFS to a worker pool and may run
concurrently (tiles are disjoint); the BP task runs alone once all of
them finished. The scheduler keeps a structured event log that the tests
and the bench harness read back.
"""

from __future__ import annotations

import itertools
import json
import threading
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .engine import PropagationRule, run_sequential
from .errors import ContractViolation

#: Tile lifecycle: created -> scheduled (task exists) -> running (on a
#: worker) -> stable (TP finished; BP may flip it back to scheduled).
IDLE = "idle"
SCHEDULED = "scheduled"
RUNNING = "running"
STABLE = "stable"


@dataclass
class Tile:
    id: int
    x0: int
    y0: int
    x1: int
    y1: int
    state: str = IDLE

    @property
    def bounds(self):
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass
class TileGrid:
    width: int
    height: int
    tile_w: int
    tile_h: int
    tiles: list[Tile]

    @property
    def shape(self):
        """(columns, rows) of the tile lattice."""
        nx = -(-self.width // self.tile_w)
        ny = -(-self.height // self.tile_h)
        return nx, ny

    def tile_at(self, x: int, y: int) -> int:
        nx, _ = self.shape
        return (y // self.tile_h) * nx + (x // self.tile_w)


def partition(image, tile_w: int, tile_h: int) -> TileGrid:
    """Cover the image with ceil(W/tile_w) x ceil(H/tile_h) raster-ordered
    tiles; edge tiles may be smaller. Accepts anything with width/height."""
    if tile_w < 1 or tile_h < 1:
        raise ContractViolation("tile dimensions must be >= 1")
    w, h = image.width, image.height
    tiles = []
    tid = 0
    for y0 in range(0, h, tile_h):
        for x0 in range(0, w, tile_w):
            tiles.append(Tile(tid, x0, y0, min(x0 + tile_w, w), min(y0 + tile_h, h)))
            tid += 1
    return TileGrid(w, h, tile_w, tile_h, tiles)


# ---------------------------------------------------------------------------
# worker pool with an event log

@dataclass
class EventRecord:
    task_id: int
    kind: str  # "TP" or "BP"
    wave: int
    tile_id: int  # -1 for BP
    worker: int
    start: float
    end: float

    def to_line(self) -> str:
        return json.dumps({
            "task": self.task_id, "kind": self.kind, "wave": self.wave,
            "tile": self.tile_id, "worker": self.worker,
            "start": self.start, "end": self.end,
        })


@dataclass
class Task:
    id: int
    kind: str
    wave: int
    tile_id: int
    fn: object  # zero-arg callable


class WorkerPool:
    """Demand-driven FCFS pool: idle workers pop the oldest ready task.

    Workers are plain threads; the heavy lifting inside tasks happens in
    nogil kernels, so TP tasks of one wave genuinely overlap.
    """

    def __init__(self, n_workers: int = 1):
        if n_workers < 1:
            raise ContractViolation("pool needs >= 1 worker")
        self.n_workers = n_workers
        self.events: list[EventRecord] = []
        self._ready: deque[Task] = deque()
        self._cv = threading.Condition()
        self._pending = 0
        self._stopping = False
        self._errors: list[BaseException] = []
        self._threads = [
            threading.Thread(target=self._work, args=(w,), daemon=True)
            for w in range(n_workers)
        ]
        for t in self._threads:
            t.start()

    def _work(self, w: int):
        while True:
            with self._cv:
                while not self._ready and not self._stopping:
                    self._cv.wait()
                if self._stopping and not self._ready:
                    return
                task = self._ready.popleft()
            start = time.perf_counter()
            try:
                task.fn()
            except BaseException as exc:
                self._errors.append(exc)
            end = time.perf_counter()
            with self._cv:
                self.events.append(EventRecord(
                    task.id, task.kind, task.wave, task.tile_id, w, start, end
                ))
                self._pending -= 1
                self._cv.notify_all()

    def submit(self, tasks: list[Task]):
        with self._cv:
            for t in tasks:
                self._ready.append(t)
                self._pending += 1
            self._cv.notify_all()

    def wait_idle(self):
        with self._cv:
            while self._pending > 0:
                self._cv.wait()
        if self._errors:
            raise self._errors[0]

    def close(self):
        with self._cv:
            self._stopping = True
            self._cv.notify_all()
        for t in self._threads:
            t.join(timeout=10)

    def event_log_lines(self) -> list[str]:
        return [e.to_line() for e in self.events]


def dispatch(pool: WorkerPool, ready_tasks: list[Task]) -> list[EventRecord]:
    """Run a batch of ready tasks to completion and return the events in
    FCFS assignment order (oldest task first)."""
    n_before = len(pool.events)
    pool.submit(ready_tasks)
    pool.wait_idle()
    new = pool.events[n_before:]
    return sorted(new, key=lambda e: e.start)


# ---------------------------------------------------------------------------
# TP / BP

@dataclass
class MicroConfig:
    """Split a TP tile into near-equal horizontal bands handled by a
    worker group, with border exchange between bands."""
    n_bands: int = 1


def _band_edges(y0: int, y1: int, n_bands: int):
    """Uniform band height so the exchange kernels' stride lands exactly
    on the internal edges; the last band absorbs the remainder."""
    h = y1 - y0
    n = max(1, min(n_bands, h))
    band_h = -(-h // n)
    edges = list(range(y0, y1, band_h)) + [y1]
    return edges, band_h


def _ring_snapshot(arr: np.ndarray, b) -> list[np.ndarray]:
    x0, y0, x1, y1 = b
    return [
        arr[y0, x0:x1].copy(),
        arr[y1 - 1, x0:x1].copy(),
        arr[y0:y1, x0].copy(),
        arr[y0:y1, x1 - 1].copy(),
    ]


def _ring_changed(arr: np.ndarray, b, before: list[np.ndarray]) -> bool:
    x0, y0, x1, y1 = b
    return not (
        np.array_equal(arr[y0, x0:x1], before[0])
        and np.array_equal(arr[y1 - 1, x0:x1], before[1])
        and np.array_equal(arr[y0:y1, x0], before[2])
        and np.array_equal(arr[y0:y1, x1 - 1], before[3])
    )


def _state_array(rule: PropagationRule) -> np.ndarray:
    """The 2-D array the rule mutates; what border diffs look at."""
    for name in ("J", "vr"):
        arr = getattr(rule, name, None)
        if arr is not None:
            return arr
    raise ContractViolation("rule does not expose its state array")


def run_tp(tile, rule: PropagationRule, seeds, micro_cfg: MicroConfig | None = None,
           carry_out: list | None = None, wave_start: np.ndarray | None = None) -> bool:
    """Propagate inside one tile; neighbors outside it do not exist.
    Returns whether any cell on the tile's one-pixel border ring changed.

    Flooding rules run to in-tile stability; synchronous rules advance one
    two-phase round, and the cells that improved (next wave's in-tile
    work) are appended to ``carry_out``. ``micro_cfg`` splits the tile
    into horizontal bands with internal border exchange; band processing
    is restructuring only and never changes the outcome.
    """
    b = tile.bounds if hasattr(tile, "bounds") else tuple(tile)
    bounded = rule.rebound(b)
    arr = _state_array(bounded)
    ring = _ring_snapshot(arr, b)
    seeds = np.asarray(list(seeds), dtype=np.int64)
    if rule.synchronous:
        carry = _tp_round(bounded, b, seeds, micro_cfg, wave_start)
        if carry_out is not None:
            carry_out.extend(carry)
    else:
        _tp_stability(bounded, b, seeds, micro_cfg)
    return _ring_changed(arr, b, ring)


def _tp_stability(bounded: PropagationRule, b, seeds: np.ndarray,
                  micro_cfg: MicroConfig | None):
    if micro_cfg is None or micro_cfg.n_bands <= 1:
        run_sequential(_GridStub(bounded), bounded, seeds)
        return
    x0, y0, x1, y1 = b
    edges, band_h = _band_edges(y0, y1, micro_cfg.n_bands)
    bands = [bounded.rebound((x0, lo, x1, hi)) for lo, hi in zip(edges, edges[1:])]
    w = bounded.width
    pending: list[np.ndarray] = [
        seeds[(seeds // w >= lo) & (seeds // w < hi)]
        for lo, hi in zip(edges, edges[1:])
    ]
    out = np.empty(max(6 * (x1 - x0) * (len(edges) - 2), 1) + 16, dtype=np.int64)
    while True:
        for band, s in zip(bands, pending):
            if s.size:
                run_sequential(_GridStub(band), band, s)
        n = bounded.band_exchange(b, band_h, out)
        if n == 0:
            return
        crossed = out[:n]
        pending = [
            crossed[(crossed // w >= lo) & (crossed // w < hi)]
            for lo, hi in zip(edges, edges[1:])
        ]


def _tp_round(bounded: PropagationRule, b, seeds: np.ndarray,
              micro_cfg: MicroConfig | None, wave_start: np.ndarray | None):
    if seeds.size == 0:
        return []
    # With concurrent tiles the snapshot is the authoritative round input;
    # a lone tile's live values are the same thing.
    if wave_start is not None:
        payload = wave_start.reshape(-1)[seeds]
    else:
        payload = bounded.gather(seeds)
    if micro_cfg is None or micro_cfg.n_bands <= 1:
        return list(bounded.kernel_round_block(seeds, 0, 1, payload))
    if wave_start is None:
        raise ContractViolation("micro-tiled synchronous TP needs the wave snapshot")
    x0, y0, x1, y1 = b
    edges, band_h = _band_edges(y0, y1, micro_cfg.n_bands)
    w = bounded.width
    carry: list[int] = []
    for lo, hi in zip(edges, edges[1:]):
        inside = (seeds // w >= lo) & (seeds // w < hi)
        if inside.any():
            band = bounded.rebound((x0, lo, x1, hi))
            carry.extend(band.kernel_round_block(seeds[inside], 0, 1, payload[inside]))
    out = np.empty(max(6 * (x1 - x0) * (len(edges) - 2), 1) + 16, dtype=np.int64)
    n = bounded.band_exchange(b, band_h, out, wave_start)
    carry.extend(out[:n])
    return carry


class _GridStub:
    """Adapter so run_sequential's dimension check accepts a bare rule."""

    def __init__(self, rule: PropagationRule):
        self.width = rule.width
        self.height = rule.height


def run_bp(image, tile_grid: TileGrid, rule: PropagationRule,
           wave_start: np.ndarray | None = None) -> dict[int, list[int]]:
    """One border sweep: every cross-boundary ordered neighbor pair is
    examined exactly once; winning merges are applied on the spot and the
    receiving cells come back grouped by their tile. An empty map means no
    border can advance."""
    changed = rule.bp_sweep(tile_grid, wave_start)
    if len(changed) == 0:
        return {}
    w = tile_grid.width
    th, tw = tile_grid.tile_h, tile_grid.tile_w
    nx, _ = tile_grid.shape
    out: dict[int, list[int]] = {}
    for p in dict.fromkeys(changed):
        p = int(p)
        tid = (p // w // th) * nx + (p % w // tw)
        out.setdefault(tid, []).append(p)
    return out


# ---------------------------------------------------------------------------
# pipeline

@dataclass
class PipelineConfig:
    n_workers: int = 1
    micro: MicroConfig | None = None
    max_waves: int | None = None
    pool: WorkerPool | None = None  # reuse an external pool (bench)
    events: list[EventRecord] = field(default_factory=list)
    bp_waves: int = 0


def run_pipeline(image, rule: PropagationRule, initial_seed_fn, tile_dims,
                 cfg: PipelineConfig | None = None):
    """Waves of per-tile TP tasks, one BP after each wave, until a wave
    leaves no border merge and no in-tile work. Returns the mutated image
    (the same object the rule works on)."""
    cfg = cfg or PipelineConfig()
    grid = partition(image, *tile_dims)
    arr = _state_array(rule)
    seeds_by_tile: dict[int, list[int]] = {t.id: [] for t in grid.tiles}
    w = image.width
    for p in initial_seed_fn():
        seeds_by_tile[grid.tile_at(p % w, p // w)].append(int(p))

    pool = cfg.pool or WorkerPool(cfg.n_workers)
    own_pool = cfg.pool is None
    events_before = len(pool.events)
    ids = itertools.count()
    cfg.bp_waves = 0
    try:
        for wave in itertools.count():
            if cfg.max_waves is not None and wave >= cfg.max_waves:
                raise ContractViolation(f"no stability within {cfg.max_waves} waves")
            wave_start = arr.copy() if rule.synchronous else None
            carries: dict[int, list[int]] = {}
            tasks = []
            for t in grid.tiles:
                seeds = seeds_by_tile.get(t.id)
                if not seeds:
                    continue
                carries[t.id] = []
                tasks.append(Task(
                    next(ids), "TP", wave, t.id,
                    _tp_closure(t, rule, seeds, cfg.micro, carries[t.id], wave_start),
                ))
                t.state = SCHEDULED
            _run_tracking_state(pool, tasks, grid)
            bp_result: dict[int, list[int]] = {}

            def bp_task():
                bp_result.update(run_bp(image, grid, rule, wave_start))

            dispatch(pool, [Task(next(ids), "BP", wave, -1, bp_task)])
            cfg.bp_waves += 1
            seeds_by_tile = {}
            for tid, cells in bp_result.items():
                seeds_by_tile.setdefault(tid, []).extend(cells)
                grid.tiles[tid].state = SCHEDULED
            for tid, cells in carries.items():
                if cells:
                    seeds_by_tile.setdefault(tid, []).extend(cells)
            if not bp_result and not any(seeds_by_tile.values()):
                break
    finally:
        cfg.events.extend(pool.events[events_before:])
        if own_pool:
            pool.close()
    return image


def _tp_closure(tile, rule, seeds, micro, carry, wave_start):
    def fn():
        run_tp(tile, rule, seeds, micro, carry_out=carry, wave_start=wave_start)
    return fn


def _run_tracking_state(pool: WorkerPool, tasks: list[Task], grid: TileGrid):
    for t in tasks:
        inner = t.fn
        tile = grid.tiles[t.tile_id]

        def wrapped(inner=inner, tile=tile):
            tile.state = RUNNING
            inner()
            tile.state = STABLE

        t.fn = wrapped
    dispatch(pool, tasks)
