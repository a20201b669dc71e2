"""WavefrontQueue unit behavior: partitioning, batching, overflow."""

from collections import Counter

import numpy as np
import pytest

from gridwave.errors import ContractViolation
from gridwave.wqueue import (
    EMPTY,
    QueueConfig,
    QueueStrategy,
    WavefrontQueue,
    auto_gbq_capacity,
)

ALL_STRATEGIES = list(QueueStrategy)


def make_queue(n_workers=1, strategy=QueueStrategy.PER_WORKER, **kw):
    return WavefrontQueue(n_workers, QueueConfig(strategy=strategy, **kw))


def test_static_partition_five_items_two_workers():
    q = WavefrontQueue(2, initial=[10, 11, 12, 13, 14])
    assert [q.dequeue(0, i, 2) for i in range(3)] == [10, 12, 14]
    assert q.dequeue(0, 3, 2) is EMPTY
    assert [q.dequeue(1, i, 2) for i in range(2)] == [11, 13]
    assert q.dequeue(1, 2, 2) is EMPTY


def test_dequeue_does_not_consume():
    q = WavefrontQueue(1, initial=[5])
    assert q.dequeue(0, 0, 1) == 5
    assert q.dequeue(0, 0, 1) == 5
    assert q.in_round == [5]


def test_partition_exhaustive_small():
    # every in_round slot is handed to exactly one (worker, iteration) pair
    for size in range(6):
        for n in range(1, 5):
            q = WavefrontQueue(n, initial=list(range(size)))
            seen = []
            for w in range(n):
                it = 0
                while (item := q.dequeue(w, it, n)) is not EMPTY:
                    seen.append(item)
                    it += 1
            assert sorted(seen) == list(range(size))


@pytest.mark.parametrize("strategy", ALL_STRATEGIES)
def test_end_round_counts_pushes(strategy):
    q = make_queue(1, strategy)
    for v in range(12):
        q.push(0, v)
    assert q.end_round() == 12
    assert sorted(q.in_round) == list(range(12))
    assert q.end_round() == 0
    assert q.in_round == []


def test_overflow_drops_and_flags():
    q = make_queue(1, QueueStrategy.NAIVE, gbq_capacity=4)
    for v in range(7):
        q.push(0, v)
    assert q.end_round() == 4
    assert q.overflowed
    assert q.stats.dropped == 3
    # flag is sticky across rounds until cleared explicitly
    assert q.end_round() == 0
    assert q.overflowed
    q.clear_overflow()
    assert not q.overflowed


@pytest.mark.parametrize("strategy", ALL_STRATEGIES)
def test_out_round_never_exceeds_capacity(strategy):
    q = make_queue(2, strategy, gbq_capacity=8, tq_capacity=3, bq_capacity=5)
    for v in range(40):
        q.push(v % 2, v)
        assert len(q.out_round) <= 8
    q.end_round()
    assert len(q.in_round) == 8


def test_flush_makes_tq_visible():
    q = make_queue(1, QueueStrategy.PER_WORKER, tq_capacity=32)
    for v in (1, 2, 3):
        q.push(0, v)
    assert q.out_round == []  # still buffered privately
    q.flush(0)
    assert q.out_round == [1, 2, 3]


def test_two_workers_five_each():
    q = make_queue(2, QueueStrategy.PER_WORKER)
    for v in range(5):
        q.push(0, ("a", v))
        q.push(1, ("b", v))
    q.flush(0)
    q.flush(1)
    assert len(q.out_round) == 10


@pytest.mark.parametrize("strategy", ALL_STRATEGIES)
def test_per_worker_push_order_preserved(strategy):
    rng = np.random.default_rng(3)
    q = make_queue(2, strategy, tq_capacity=4, bq_capacity=8)
    pushed = {0: [], 1: []}
    for i in range(60):
        w = int(rng.integers(0, 2))
        item = (w, i)
        pushed[w].append(item)
        q.push(w, item)
    q.end_round()
    for w in (0, 1):
        ours = [it for it in q.in_round if it[0] == w]
        assert ours == pushed[w]


def test_strategies_identical_multisets():
    rng = np.random.default_rng(5)
    ops = [(int(rng.integers(0, 3)), int(rng.integers(0, 1000))) for _ in range(500)]
    results = []
    for strategy in ALL_STRATEGIES:
        q = make_queue(3, strategy, tq_capacity=5, bq_capacity=17)
        for w, v in ops:
            q.push(w, v)
        q.end_round()
        results.append(Counter(q.in_round))
    assert results[0] == results[1] == results[2]


def test_conservation_across_rounds():
    q = make_queue(2, QueueStrategy.PER_WORKER, tq_capacity=2, bq_capacity=3)
    q.push(0, "x")
    q.push(1, "y")
    assert q.end_round() == 2
    assert q.round_index == 1
    q.push(0, "z")
    assert q.end_round() == 1
    assert q.in_round == ["z"]
    assert q.stats.pushes == 3
    assert q.stats.dropped == 0


def test_batching_counters_reflect_strategy():
    n_items = 200
    per_item = make_queue(1, QueueStrategy.NAIVE)
    batched = make_queue(1, QueueStrategy.PER_WORKER, tq_capacity=32, bq_capacity=64)
    for v in range(n_items):
        per_item.push(0, v)
        batched.push(0, v)
    per_item.end_round()
    batched.end_round()
    assert per_item.stats.gbq_reservations == n_items
    assert batched.stats.gbq_reservations < n_items // 10


def test_auto_capacity_floor_and_headroom():
    assert auto_gbq_capacity(0) == 1024
    assert auto_gbq_capacity(100) == 1024
    assert auto_gbq_capacity(10_000) == 11_001


def test_bad_worker_ids_rejected():
    q = make_queue(2)
    with pytest.raises(ContractViolation):
        q.push(2, 1)
    with pytest.raises(ContractViolation):
        q.flush(-1)
    with pytest.raises(ContractViolation):
        q.dequeue(5, 0, 2)
