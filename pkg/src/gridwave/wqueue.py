"""Round-based wavefront queue with a bounded global level.

The queue separates the front being processed (``in_round``) from the front
being built (``out_round``). Workers push into out_round through one of
three routes that trade contention for buffering:

* ``NAIVE``      - every push reserves a slot in the global round directly.
* ``PREFIX_SUM`` - pushes append to a shared batch queue; the batch is
  committed to the global round in one reservation when it fills.
* ``PER_WORKER`` - pushes land in a small private queue first, spill into
  the shared batch when full, and reach the global round batch-wise.

All three strategies deliver the same multiset of items to the next round;
only ordering and the number of global reservations differ.

The global round is bounded. Pushes that do not fit are dropped and the
``overflowed`` flag is raised; callers are expected to re-execute the
propagation from rescanned seeds when that happens (the current grid is
still valid, monotone merges lose no work, only scheduling).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum

from .errors import ContractViolation


class _Empty:
    """Sentinel returned by dequeue when a worker's partition is exhausted."""

    __slots__ = ()

    def __repr__(self):
        return "EMPTY"


EMPTY = _Empty()

DEFAULT_TQ_CAPACITY = 32
DEFAULT_BQ_CAPACITY = 1024
MIN_GBQ_CAPACITY = 1024
GBQ_HEADROOM = 1.1


class QueueStrategy(Enum):
    NAIVE = "naive"
    PREFIX_SUM = "prefix"
    PER_WORKER = "perworker"


@dataclass
class QueueConfig:
    strategy: QueueStrategy = QueueStrategy.PER_WORKER
    tq_capacity: int = DEFAULT_TQ_CAPACITY
    bq_capacity: int = DEFAULT_BQ_CAPACITY
    # None: sized when the queue is built, as max(1.1 * n_seeds, 1024).
    gbq_capacity: int | None = None


@dataclass
class QueueStats:
    pushes: int = 0
    dropped: int = 0
    tq_spills: int = 0
    bq_commits: int = 0
    gbq_reservations: int = 0


def auto_gbq_capacity(n_initial: int) -> int:
    return max(int(GBQ_HEADROOM * n_initial) + 1, MIN_GBQ_CAPACITY)


class WavefrontQueue:
    """Two-phase queue: build out_round while draining in_round.

    Items are opaque; the engines use packed pixel indices. ``dequeue``
    hands out in_round by a static stride partition so no two workers ever
    contend for the same slot and a round's schedule is reproducible.
    """

    def __init__(self, n_workers: int, cfg: QueueConfig | None = None, initial=()):
        if n_workers < 1:
            raise ContractViolation("n_workers must be >= 1")
        self.cfg = cfg or QueueConfig()
        self.n_workers = n_workers
        self.gbq_capacity = (
            self.cfg.gbq_capacity
            if self.cfg.gbq_capacity is not None
            else auto_gbq_capacity(len(initial))
        )
        if self.gbq_capacity < 1:
            raise ContractViolation("gbq_capacity must be >= 1")
        self.stats = QueueStats()
        self.round_index = 0
        self.overflowed = False
        self._tqs = [[] for _ in range(n_workers)]
        self._bq: list = []
        self._bq_lock = threading.Lock()
        self._gbq_lock = threading.Lock()
        self.out_round: list = []
        self.in_round: list = []
        if initial:
            # Seeds are committed through the bounded path (so an oversized
            # seed set already trips overflow) but stay round 0.
            self._gbq_append(list(initial))
            self.in_round = self.out_round
            self.out_round = []

    # -- push paths ----------------------------------------------------

    def push(self, worker_id: int, item) -> None:
        if not 0 <= worker_id < self.n_workers:
            raise ContractViolation(f"worker_id {worker_id} out of range")
        self.stats.pushes += 1
        strat = self.cfg.strategy
        if strat is QueueStrategy.NAIVE:
            self._gbq_append([item])
        elif strat is QueueStrategy.PREFIX_SUM:
            with self._bq_lock:
                self._bq.append(item)
                full = len(self._bq) >= self.cfg.bq_capacity
            if full:
                self._drain_bq()
        else:  # PER_WORKER
            tq = self._tqs[worker_id]
            tq.append(item)
            if len(tq) >= self.cfg.tq_capacity:
                self._spill_tq(worker_id)

    def _spill_tq(self, worker_id: int) -> None:
        tq = self._tqs[worker_id]
        if not tq:
            return
        self.stats.tq_spills += 1
        with self._bq_lock:
            self.stats.bq_commits += 1
            self._bq.extend(tq)
            full = len(self._bq) >= self.cfg.bq_capacity
        tq.clear()
        if full:
            self._drain_bq()

    def _drain_bq(self) -> None:
        with self._bq_lock:
            batch, self._bq = self._bq, []
        if batch:
            self._gbq_append(batch)

    def _gbq_append(self, batch: list) -> None:
        # One reservation per call; NAIVE calls this per item, the batched
        # strategies once per drained batch.
        with self._gbq_lock:
            self.stats.gbq_reservations += 1
            space = self.gbq_capacity - len(self.out_round)
            if space >= len(batch):
                self.out_round.extend(batch)
            else:
                if space > 0:
                    self.out_round.extend(batch[:space])
                self.stats.dropped += len(batch) - max(space, 0)
                self.overflowed = True

    # -- round control -------------------------------------------------

    def flush(self, worker_id: int) -> None:
        """Make this worker's buffered pushes globally visible."""
        if not 0 <= worker_id < self.n_workers:
            raise ContractViolation(f"worker_id {worker_id} out of range")
        self._spill_tq(worker_id)
        self._drain_bq()

    def end_round(self) -> int:
        """Flush every buffer, swap the fronts, return the new front's size."""
        for w in range(self.n_workers):
            self._spill_tq(w)
        self._drain_bq()
        self._swap()
        return len(self.in_round)

    def _swap(self) -> None:
        self.in_round = self.out_round
        self.out_round = []
        self.round_index += 1

    def dequeue(self, worker_id: int, iteration: int, n_workers: int):
        """Slot worker_id + iteration * n_workers of in_round, or EMPTY.

        Strides never collide across workers, and once a worker sees EMPTY
        every later iteration is EMPTY too, so a worker drains its share by
        counting iterations from zero.
        """
        idx = worker_id + iteration * n_workers
        if idx < 0 or not 0 <= worker_id < n_workers:
            raise ContractViolation("bad dequeue coordinates")
        if idx >= len(self.in_round):
            return EMPTY
        return self.in_round[idx]

    def clear_overflow(self) -> None:
        self.overflowed = False

    @property
    def pending(self) -> int:
        with self._bq_lock:
            n = len(self._bq)
        return n + sum(len(t) for t in self._tqs) + len(self.out_round)
