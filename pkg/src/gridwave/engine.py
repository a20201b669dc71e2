"""Generic wavefront propagation engine.

A rule owns the cell state (as flat numpy views) and supplies four pieces:
a neighborhood, a propagation condition, a proposed value, and a strict
improvement order. The engine supplies scheduling: a plain FIFO for the
sequential reference, and a round-based scheme over a WavefrontQueue for
parallel execution.

Rules come in two flavors. For merges that are monotone toward a unique
fixed point (flooding toward a bound), any schedule lands on the same
answer and cells can be read live. Rules whose relayed value depends on
what the relaying cell happened to hold (nearest-source adoption) are
history-sensitive: there the rule sets ``synchronous`` and each round is
two-phase, with every offer computed from the values the round's cells
held at the round boundary. The end-of-round state is then a pure
function of the round's item set, so worker count, queue strategy, and
processing order inside the round cannot change the result.

Parallel backends
-----------------
``threads``   real worker threads; each read-modify-write goes through a
              striped lock table (see :func:`atomic_merge`), so lost
              updates are impossible and any interleaving is exercised.
``compiled``  per-round worker shares executed back to back through the
              rule's compiled kernels. This is a legal serialization of
              the same schedule (one worker's share at a time) and keeps
              the exact queue semantics, at compiled speed.
``serial``    like compiled but through the pure-Python rule methods.
``auto``      compiled when the rule has kernels, else threads.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, EngineError
from .grid import StructuringElement
from .wqueue import EMPTY, QueueConfig, WavefrontQueue, auto_gbq_capacity

_N_LOCK_STRIPES = 64


@dataclass
class RunStats:
    """Counters accumulated by run_parallel (and the tiled pipeline)."""

    rounds: int = 0
    executions: int = 0
    overflow_count: int = 0
    queued_total: int = 0

    def reset(self):
        self.rounds = 0
        self.executions = 0
        self.overflow_count = 0
        self.queued_total = 0


@dataclass
class EngineConfig:
    n_workers: int = 1
    queue: QueueConfig = field(default_factory=QueueConfig)
    backend: str = "auto"
    # Hard stop: raise EngineError if a single execution needs more rounds.
    max_rounds: int | None = None
    stats: RunStats = field(default_factory=RunStats)


class PropagationRule:
    """Base class for propagation rules over a bounded window of a grid.

    Subclasses bind concrete arrays and implement read/write/condition/
    propose/improves on packed flat indices. ``bounds`` restricts the
    active window (tiles); neighbors outside it do not exist.
    """

    #: True for history-sensitive rules that need two-phase rounds: all
    #: offers of a round are computed from round-start values.
    synchronous = False

    def __init__(self, width: int, height: int, se: StructuringElement, bounds=None):
        self.width = width
        self.height = height
        self.se = se
        self.bounds = bounds if bounds is not None else (0, 0, width, height)

    # -- required state access ----------------------------------------
    def read(self, q: int):
        raise NotImplementedError

    def write(self, q: int, value) -> None:
        raise NotImplementedError

    # -- required rule pieces -----------------------------------------
    def condition(self, p: int, q: int) -> bool:
        raise NotImplementedError

    def propose(self, p: int, q: int):
        raise NotImplementedError

    def improves(self, q: int, old, new) -> bool:
        raise NotImplementedError

    # -- snapshot variants (synchronous rules only) --------------------
    def gather(self, items: np.ndarray) -> np.ndarray:
        """Values held by ``items`` right now; a round's frozen inputs."""
        return np.asarray([self.read(int(p)) for p in items])

    def condition_from(self, v, p: int, q: int) -> bool:
        """condition(p, q) with p's value fixed to the snapshot ``v``."""
        raise NotImplementedError

    def propose_from(self, v, p: int, q: int):
        raise NotImplementedError

    def rebound(self, bounds) -> "PropagationRule":
        """A rule over the same state restricted to ``bounds``."""
        raise NotImplementedError

    # -- tiled execution hooks -----------------------------------------
    def bp_sweep(self, tile_grid, wave_start=None) -> np.ndarray:
        """Examine every ordered neighbor pair straddling a tile boundary
        once, apply the winning merges, return the receiving cells."""
        raise NotImplementedError

    def band_exchange(self, bounds, band_h: int, out: np.ndarray,
                      wave_start=None) -> int:
        """Same sweep across the horizontal band cuts inside one tile."""
        raise NotImplementedError

    # -- derived -------------------------------------------------------
    def iter_neighbors(self, p: int):
        x0, y0, x1, y1 = self.bounds
        w = self.width
        px = p % w
        py = p // w
        for dx, dy in self.se.offsets:
            nx = px + dx
            ny = py + dy
            if x0 <= nx < x1 and y0 <= ny < y1:
                yield ny * w + nx

    def seed_scan(self) -> list[int]:
        """All cells that could propagate right now, raster order. The
        restart set after an overflow dropped queue entries."""
        x0, y0, x1, y1 = self.bounds
        w = self.width
        out = []
        for y in range(y0, y1):
            base = y * w
            for x in range(x0, x1):
                p = base + x
                for q in self.iter_neighbors(p):
                    if self.condition(p, q):
                        out.append(p)
                        break
        return out

    # -- optional compiled hooks --------------------------------------
    def kernel_wavefront(self, seeds: np.ndarray) -> int | None:
        """Run FIFO propagation to the fixed point; return insertions."""
        return None

    def kernel_round_block(self, items: np.ndarray, start: int, stride: int,
                           payload: np.ndarray | None = None):
        """Process a stride share of a round; return pushed indices.
        Synchronous rules receive the round's gathered values aligned
        with ``items``."""
        return None

    def kernel_seed_scan(self):
        return None

    def has_round_kernel(self) -> bool:
        return type(self).kernel_round_block is not PropagationRule.kernel_round_block


def sweep_capacity(tile_grid) -> int:
    """Record buffer size for a full border sweep: every straddling
    ordered pair can record at most one cell."""
    nv = len(range(tile_grid.tile_w, tile_grid.width, tile_grid.tile_w))
    nh = len(range(tile_grid.tile_h, tile_grid.height, tile_grid.tile_h))
    return 6 * (nv * tile_grid.height + nh * tile_grid.width) + 16


class AtomicCells:
    """Striped-lock merge window over rule state.

    One lock guards each stripe of cell indices, which gives the same
    guarantee as a hardware compare-and-swap loop: the read-compare-write
    in :meth:`merge` is indivisible per cell, so concurrent merges into
    one cell serialize and the losing value is returned, never installed
    over a better one. Single-step orders (max/min) and retry-style orders
    behave identically under a lock, so one primitive covers both.
    """

    def __init__(self, rule: PropagationRule):
        self.rule = rule
        self._locks = [threading.Lock() for _ in range(_N_LOCK_STRIPES)]

    def merge(self, q: int, proposed, improves):
        with self._locks[q % _N_LOCK_STRIPES]:
            old = self.rule.read(q)
            if improves(q, old, proposed):
                self.rule.write(q, proposed)
            return old


def atomic_merge(cells: AtomicCells, q: int, proposed, improves):
    """Merge ``proposed`` into cell q under the cell's lock stripe and
    return the prior value. The caller decides it won (and should enqueue
    q) exactly when ``improves(q, prior, proposed)`` is true."""
    return cells.merge(q, proposed, improves)


def run_sequential(grid, rule: PropagationRule, seeds, use_kernel: bool | None = None):
    """FIFO propagation to the fixed point. Pops a cell, offers its value
    to every neighbor, enqueues neighbors that improved. Returns the grid
    (mutated in place).

    With ``use_kernel`` unset the rule's compiled wavefront is used when it
    has one; pass False to force the generic Python path.
    """
    _check_rule_matches(grid, rule)
    seeds = list(seeds)
    if use_kernel is None or use_kernel:
        arr = np.asarray(seeds, dtype=np.int64)
        done = rule.kernel_wavefront(arr)
        if done is not None:
            return grid
        if use_kernel:
            raise ContractViolation("rule has no compiled wavefront kernel")
    from collections import deque

    fifo = deque(seeds)
    while fifo:
        p = fifo.popleft()
        for q in rule.iter_neighbors(p):
            if rule.condition(p, q):
                v = rule.propose(p, q)
                old = rule.read(q)
                if rule.improves(q, old, v):
                    rule.write(q, v)
                    fifo.append(q)
    return grid


def run_parallel(grid, rule: PropagationRule, seeds, cfg: EngineConfig):
    """Round-based parallel propagation with overflow recovery.

    Each execution seeds a bounded queue and processes rounds until the
    front empties. If the global round ever overflowed (drops), the grid
    is still valid (merges are monotone, only scheduling was lost), so the
    whole propagation re-executes on the current grid with seeds recovered
    by a full rescan. Stops when an execution finishes clean or the rescan
    comes back empty.
    """
    _check_rule_matches(grid, rule)
    if cfg.n_workers < 1:
        raise ContractViolation("n_workers must be >= 1")
    backend = cfg.backend
    if backend == "auto":
        backend = "compiled" if rule.has_round_kernel() else "threads"
    if backend not in ("compiled", "threads", "serial"):
        raise ContractViolation(f"unknown backend {backend!r}")
    if backend == "compiled" and not rule.has_round_kernel():
        raise ContractViolation("compiled backend requires rule kernels")

    stats = cfg.stats
    seeds = list(seeds)
    while True:
        stats.executions += 1
        qcfg = cfg.queue
        if qcfg.gbq_capacity is None:
            qcfg = QueueConfig(
                strategy=qcfg.strategy,
                tq_capacity=qcfg.tq_capacity,
                bq_capacity=qcfg.bq_capacity,
                gbq_capacity=auto_gbq_capacity(len(seeds)),
            )
        queue = WavefrontQueue(cfg.n_workers, qcfg, initial=seeds)
        stats.queued_total += len(queue.in_round)
        if backend == "threads":
            _rounds_threads(queue, rule, cfg)
        else:
            _rounds_serialized(queue, rule, cfg, compiled=(backend == "compiled"))
        if not queue.overflowed:
            break
        stats.overflow_count += 1
        seeds = _rescan_seeds(rule)
        if not seeds:
            break
    return grid


def _rescan_seeds(rule: PropagationRule) -> list[int]:
    ks = rule.kernel_seed_scan()
    if ks is not None:
        return [int(v) for v in ks]
    return rule.seed_scan()


def _check_rule_matches(grid, rule):
    if (grid.width, grid.height) != (rule.width, rule.height):
        raise ContractViolation("rule dimensions do not match grid")


def _bump_round(queue, cfg):
    n = queue.end_round()
    cfg.stats.rounds += 1
    cfg.stats.queued_total += n
    if cfg.max_rounds is not None and cfg.stats.rounds > cfg.max_rounds:
        raise EngineError(f"no fixed point within {cfg.max_rounds} rounds")
    return n


def _round_payload(queue, rule):
    if not rule.synchronous:
        return None, None
    items = np.asarray(queue.in_round, dtype=np.int64)
    return items, rule.gather(items)


def _rounds_serialized(queue, rule, cfg, compiled):
    n = cfg.n_workers
    while len(queue.in_round) > 0:
        items, payload = _round_payload(queue, rule)
        if compiled:
            if items is None:
                items = np.asarray(queue.in_round, dtype=np.int64)
            for w in range(n):
                pushed = rule.kernel_round_block(items, w, n, payload)
                for it in pushed:
                    queue.push(w, int(it))
                queue.flush(w)
        else:
            for w in range(n):
                it = 0
                while (p := queue.dequeue(w, it, n)) is not EMPTY:
                    slot = w + it * n
                    it += 1
                    if payload is None:
                        for q in rule.iter_neighbors(p):
                            if rule.condition(p, q):
                                v = rule.propose(p, q)
                                old = rule.read(q)
                                if rule.improves(q, old, v):
                                    rule.write(q, v)
                                    queue.push(w, q)
                    else:
                        held = payload[slot]
                        for q in rule.iter_neighbors(p):
                            if rule.condition_from(held, p, q):
                                v = rule.propose_from(held, p, q)
                                old = rule.read(q)
                                if rule.improves(q, old, v):
                                    rule.write(q, v)
                                    queue.push(w, q)
                queue.flush(w)
        if _bump_round(queue, cfg) == 0:
            break


def _rounds_threads(queue, rule, cfg):
    n = cfg.n_workers
    cells = AtomicCells(rule)
    barrier = threading.Barrier(n + 1)
    stop = [False]
    errors = []
    payload_box = [None]

    def work(w):
        try:
            while True:
                barrier.wait()
                if stop[0]:
                    return
                payload = payload_box[0]
                it = 0
                while (p := queue.dequeue(w, it, n)) is not EMPTY:
                    slot = w + it * n
                    it += 1
                    if payload is None:
                        for q in rule.iter_neighbors(p):
                            # The condition is advisory (reads race with
                            # other workers); the locked merge is the
                            # authority.
                            if rule.condition(p, q):
                                v = rule.propose(p, q)
                                old = atomic_merge(cells, q, v, rule.improves)
                                if rule.improves(q, old, v):
                                    queue.push(w, q)
                    else:
                        held = payload[slot]
                        for q in rule.iter_neighbors(p):
                            if rule.condition_from(held, p, q):
                                v = rule.propose_from(held, p, q)
                                old = atomic_merge(cells, q, v, rule.improves)
                                if rule.improves(q, old, v):
                                    queue.push(w, q)
                queue.flush(w)
                barrier.wait()
        except threading.BrokenBarrierError:
            return
        except BaseException as exc:  # surfaced by the coordinator
            errors.append(exc)
            stop[0] = True
            barrier.abort()

    threads = [threading.Thread(target=work, args=(w,), daemon=True) for w in range(n)]
    for t in threads:
        t.start()
    try:
        while len(queue.in_round) > 0:
            _, payload_box[0] = _round_payload(queue, rule)
            barrier.wait()  # release the round
            barrier.wait()  # all workers flushed
            if _bump_round(queue, cfg) == 0:
                break
        stop[0] = True
        barrier.wait()  # let waiting workers observe stop and exit
    except threading.BrokenBarrierError:
        pass
    except BaseException:
        stop[0] = True
        barrier.abort()
        raise
    finally:
        stop[0] = True
        for t in threads:
            t.join(timeout=10)
    if errors:
        raise errors[0]
