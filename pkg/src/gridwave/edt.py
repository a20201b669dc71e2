"""Euclidean distance transform by nearest-source propagation.

Every background cell starts as its own source; contour cells push their
source to neighbors, and a cell adopts a pushed source exactly when that
strictly shortens its distance, or matches it from a smaller packed index.
All comparisons happen in exact integer squared distance; square roots
appear only when the final map is materialized.

The index tiebreak matters: with a plain strict-distance comparison,
which of two equidistant sources a cell ends up relaying depends on
arrival order, and downstream cells then settle on visibly different
distances. Breaking ties toward the smaller index makes the per-cell
update a total order, so every schedule (queue order, worker count,
tiling) lands on the same map.

The result is a Voronoi-style source map plus a distance map. The
propagated map can exceed the true distance on adversarial layouts where
a cell's nearest source owns no connected relay path to it; the
brute-force reference here bounds that error in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from . import oracles
from .engine import EngineConfig, PropagationRule, run_parallel, sweep_capacity
from .errors import ContractViolation, NoBackgroundError
from .grid import Coord, Image2D, StructuringElement, pack, unpack
from .wqueue import QueueConfig

SE8 = StructuringElement(8)

#: Squared distance reported for cells with no source assigned.
FAR = int(K.FAR)

#: Sentinel stored in a source map for "no source yet" (a coordinate
#: outside the domain whose distance compares greater than any real one).
INF = -1


@dataclass
class VoronoiMap:
    """Per-cell packed index of the currently nearest background cell.

    ``vr`` is int64 of shape (height, width); entries are packed flat
    indices or INF. Background cells always map to themselves: nothing is
    ever closer to them than distance zero, so propagation cannot touch
    them.
    """

    width: int
    height: int
    vr: np.ndarray

    @property
    def dims(self):
        return self.width, self.height

    def copy(self) -> "VoronoiMap":
        return VoronoiMap(self.width, self.height, self.vr.copy())

    def source(self, p: Coord) -> Coord | None:
        v = int(self.vr[p[1], p[0]])
        return None if v == INF else unpack(v, self.width)

    def squared_distances(self) -> np.ndarray:
        """Exact int64 squared distance of every cell to its source, FAR
        where no source is assigned."""
        vr = self.vr
        valid = vr != INF
        sx = np.where(valid, vr % self.width, 0)
        sy = np.where(valid, vr // self.width, 0)
        xs = np.arange(self.width, dtype=np.int64)[None, :]
        ys = np.arange(self.height, dtype=np.int64)[:, None]
        d2 = (xs - sx) ** 2 + (ys - sy) ** 2
        return np.where(valid, d2, np.int64(FAR))


class DistanceRule(PropagationRule):
    """Source adoption as an engine rule: propose my source to you; you
    take it when it is strictly closer than what you hold, or equally
    close with a smaller packed index.

    The rule is synchronous: which source a cell relays depends on what
    it held when asked, so offers must be pinned to round boundaries or
    the result would vary with processing order inside a round.
    """

    synchronous = True

    def __init__(self, vr: np.ndarray, se: StructuringElement, bounds=None):
        h, w = vr.shape
        super().__init__(w, h, se, bounds)
        self.vr = vr
        self.vrf = vr.reshape(-1)
        self.conn8 = se.connectivity == 8

    def _sqd(self, q: int, src: int) -> int:
        if src < 0:
            return FAR
        w = self.width
        dx = q % w - src % w
        dy = q // w - src // w
        return dx * dx + dy * dy

    def _closer(self, q: int, cand: int, held: int) -> bool:
        if held < 0:
            return cand >= 0
        if cand < 0:
            return False
        dc = self._sqd(q, cand)
        dh = self._sqd(q, held)
        if dc != dh:
            return dc < dh
        return cand < held

    def read(self, q):
        return int(self.vrf[q])

    def write(self, q, value):
        self.vrf[q] = value

    def condition(self, p, q):
        return self._closer(q, int(self.vrf[p]), int(self.vrf[q]))

    def propose(self, p, q):
        return int(self.vrf[p])

    def improves(self, q, old, new):
        return self._closer(q, new, old)

    def gather(self, items):
        return self.vrf[items]

    def condition_from(self, v, p, q):
        return self._closer(q, int(v), int(self.vrf[q]))

    def propose_from(self, v, p, q):
        return int(v)

    def kernel_round_block(self, items, start, stride, payload=None):
        if payload is None:
            payload = self.gather(items)
        share = (len(items) - start + stride - 1) // stride if len(items) > start else 0
        nk = 8 if self.conn8 else 4
        out = np.empty(max(share * nk, 1), dtype=np.int64)
        n = K.edt_round_block(self.vr, self.conn8, *self.bounds, items, start,
                              stride, out, payload)
        return out[:n]

    def kernel_seed_scan(self):
        x0, y0, x1, y1 = self.bounds
        out = np.empty(max((x1 - x0) * (y1 - y0), 1), dtype=np.int64)
        n = K.edt_seed_scan(self.vr, self.conn8, *self.bounds, out)
        return out[:n]

    def rebound(self, bounds) -> "DistanceRule":
        """Same array, different active window (tiles share state)."""
        return DistanceRule(self.vr, self.se, bounds)

    def bp_sweep(self, tile_grid, wave_start=None):
        if wave_start is None:
            raise ContractViolation("synchronous border sweep needs the wave snapshot")
        out = np.empty(sweep_capacity(tile_grid), dtype=np.int64)
        n = K.edt_bp_sweep(self.vr, wave_start, self.conn8,
                           tile_grid.tile_w, tile_grid.tile_h, out)
        return out[:n]

    def band_exchange(self, bounds, band_h, out, wave_start=None):
        if wave_start is None:
            raise ContractViolation("synchronous band exchange needs the wave snapshot")
        return K.edt_band_exchange(self.vr, wave_start, self.conn8,
                                   *bounds, band_h, out)


def _require_binary(mask: Image2D):
    if mask.elem_kind != "binary":
        raise ContractViolation(
            f"distance transform needs a binary mask, got {mask.elem_kind!r}"
        )


def init_packed(mask: Image2D, se: StructuringElement):
    """Source map plus packed contour seeds (background cells touching
    foreground), in raster order."""
    _require_binary(mask)
    h, w = mask.height, mask.width
    vr = np.empty((h, w), dtype=np.int64)
    K.edt_assign(mask.data, 0, 0, w, h, vr)
    buf = np.empty(h * w, dtype=np.int64)
    n = K.edt_contour_seeds(mask.data, se.connectivity == 8, 0, 0, w, h, buf)
    return VoronoiMap(w, h, vr), buf[:n].copy()


def edt_init(mask: Image2D, se: StructuringElement = SE8):
    """As :func:`init_packed` but with seeds as coordinate pairs."""
    vmap, seeds = init_packed(mask, se)
    return vmap, [unpack(int(p), mask.width) for p in seeds]


def _norm_seeds(seeds, width: int) -> np.ndarray:
    if isinstance(seeds, np.ndarray):
        return seeds.astype(np.int64)
    out = np.empty(len(seeds), dtype=np.int64)
    for i, s in enumerate(seeds):
        if isinstance(s, (tuple, Coord)):
            out[i] = pack(s[0], s[1], width)
        else:
            out[i] = int(s)
    return out


def _run_rounds_single(rule: DistanceRule, seeds: np.ndarray):
    """The canonical schedule, one stream: process the whole pending set
    as a two-phase round, collect the cells that improved, repeat. Every
    other mode reproduces this round structure exactly."""
    items = seeds.astype(np.int64)
    while items.size:
        payload = rule.gather(items)
        items = np.asarray(
            rule.kernel_round_block(items, 0, 1, payload), dtype=np.int64
        )


def _widen_queue(cfg: EngineConfig, width: int, height: int) -> EngineConfig:
    """Per-round pushes are bounded by offers, i.e. neighborhood size per
    cell, so this capacity can never overflow. Dropped items would change
    which offers exist in later rounds, which is the one thing the
    synchronous discipline must rule out."""
    if cfg.queue.gbq_capacity is not None:
        return cfg
    queue = QueueConfig(
        strategy=cfg.queue.strategy,
        tq_capacity=cfg.queue.tq_capacity,
        bq_capacity=cfg.queue.bq_capacity,
        gbq_capacity=8 * width * height + 1024,
    )
    return EngineConfig(
        n_workers=cfg.n_workers, queue=queue, backend=cfg.backend,
        max_rounds=cfg.max_rounds, stats=cfg.stats,
    )


def edt_propagate(
    vmap: VoronoiMap,
    seeds,
    se: StructuringElement = SE8,
    mode: str = "sequential",
    cfg: EngineConfig | None = None,
) -> VoronoiMap:
    """Propagate sources to the fixed point where no cell would adopt
    any neighbor's source. Seeds may be coordinate pairs or packed
    indices. Sequential and parallel mode reach the same map: both
    advance in two-phase rounds, and a round's outcome depends only on
    which cells are pending, not on who processes them."""
    rule = DistanceRule(vmap.vr, se)
    packed = _norm_seeds(seeds, vmap.width)
    if mode == "sequential":
        _run_rounds_single(rule, packed)
    elif mode == "parallel":
        cfg = _widen_queue(cfg or EngineConfig(), vmap.width, vmap.height)
        run_parallel(vmap, rule, packed, cfg)
    else:
        raise ContractViolation(f"unknown mode {mode!r}")
    return vmap


def finalize_distance_map(vmap: VoronoiMap) -> Image2D:
    """Euclidean distances to the assigned sources, as f32. Cells still
    holding INF mean the input had no background at all."""
    if (vmap.vr == INF).any():
        raise NoBackgroundError("no background reachable: distance map undefined")
    d2 = vmap.squared_distances()
    return Image2D(
        vmap.width, vmap.height, "f32",
        np.sqrt(d2).astype(np.float32),
    )


def edt(
    mask: Image2D,
    se: StructuringElement = SE8,
    mode: str = "sequential",
    cfg: EngineConfig | None = None,
):
    """Full transform: init, propagate, finalize. Returns (sources,
    distances). Raises NoBackgroundError on an all-foreground mask."""
    vmap, seeds = init_packed(mask, se)
    edt_propagate(vmap, seeds, se, mode=mode, cfg=cfg)
    return vmap, finalize_distance_map(vmap)


def edt_tiled(
    mask: Image2D,
    se: StructuringElement = SE8,
    tile_dims: tuple[int, int] = (64, 64),
    cfg=None,
):
    """Tiled transform over the wave scheduler; cell-for-cell identical
    to the untiled modes. Returns (sources, distances)."""
    from .tiles import run_pipeline

    vmap, seeds = init_packed(mask, se)
    rule = DistanceRule(vmap.vr, se)
    run_pipeline(vmap, rule, lambda: seeds, tile_dims, cfg)
    return vmap, finalize_distance_map(vmap)


def edt_exact_bruteforce(mask: Image2D) -> Image2D:
    """Exact distances by direct minimization over every background cell.
    Quadratic; the reference the propagated map is bounded against."""
    _require_binary(mask)
    if not (mask.data == 0).any():
        raise NoBackgroundError("no background reachable: distance map undefined")
    d2 = oracles.bruteforce_sqdist(mask.data, FAR)
    return Image2D(
        mask.width, mask.height, "f32",
        np.sqrt(d2).astype(np.float32),
    )
