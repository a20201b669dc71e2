"""Grayscale morphological reconstruction by propagation.

The marker image J grows toward the mask image I: each cell ends up at the
largest value that can flow to it from the marker along grid paths, with
the mask clamping every step. Implemented four ways over the same cell
rule (condition ``J(q) < J(p) and I(q) != J(q)``, update
``J(q) <- min(J(p), I(q))``):

* ``recon_sr``       alternating raster/antiraster sweeps to stability.
* ``recon_qb``       FIFO wavefront seeded from the marker's regional maxima.
* ``recon_fh``       one raster sweep, one antiraster sweep that also
                     collects the still-active cells, then a FIFO wavefront.
* ``recon_parallel`` axis-decomposed parallel sweeps, a full seed rescan,
                     then round-based engine propagation.

All four reach the same fixed point; the test suite leans on that and on
an independent iterated-dilation reference.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .engine import (
    EngineConfig, PropagationRule, run_parallel, run_sequential, sweep_capacity,
)
from .errors import ContractViolation
from .grid import Coord, Image2D, StructuringElement, unpack

SE8 = StructuringElement(8)


@dataclass
class ReconInput:
    """Marker/mask pair plus connectivity.

    Contract: same dimensions, same element kind, and marker <= mask
    pointwise. The scan passes mutate ``marker`` in place; the ``recon_*``
    entry points work on a copy and leave the input untouched.
    """

    marker: Image2D
    mask: Image2D
    se: StructuringElement = field(default_factory=lambda: SE8)

    def __post_init__(self):
        m, i = self.marker, self.mask
        if m.dims != i.dims:
            raise ContractViolation(
                f"marker dims {m.dims} != mask dims {i.dims}"
            )
        if m.elem_kind != i.elem_kind:
            raise ContractViolation(
                f"marker kind {m.elem_kind!r} != mask kind {i.elem_kind!r}"
            )
        if not np.all(m.data <= i.data):
            raise ContractViolation("marker exceeds mask somewhere")

    def working_copy(self) -> "ReconInput":
        return ReconInput(self.marker.copy(), self.mask, self.se)


class ReconRule(PropagationRule):
    """Reconstruction as an engine rule over packed indices, with compiled
    hooks for the FIFO wavefront, round shares and seed rescans."""

    def __init__(self, J: np.ndarray, I: np.ndarray, se: StructuringElement, bounds=None):
        h, w = J.shape
        super().__init__(w, h, se, bounds)
        self.J = J
        self.I = I
        self.Jf = J.reshape(-1)
        self.If = I.reshape(-1)
        self.conn8 = se.connectivity == 8

    def read(self, q):
        return self.Jf[q]

    def write(self, q, value):
        self.Jf[q] = value

    def condition(self, p, q):
        vq = self.Jf[q]
        return vq < self.Jf[p] and self.If[q] != vq

    def propose(self, p, q):
        return min(self.Jf[p], self.If[q])

    def improves(self, q, old, new):
        return old < new

    def kernel_wavefront(self, seeds):
        return K.recon_wavefront(
            self.J, self.I, self.conn8, *self.bounds, seeds, len(seeds)
        )

    def kernel_round_block(self, items, start, stride, payload=None):
        share = (len(items) - start + stride - 1) // stride if len(items) > start else 0
        nk = 8 if self.conn8 else 4
        out = np.empty(max(share * nk, 1), dtype=np.int64)
        n = K.recon_round_block(
            self.J, self.I, self.conn8, *self.bounds, items, start, stride, out
        )
        return out[:n]

    def kernel_seed_scan(self):
        x0, y0, x1, y1 = self.bounds
        out = np.empty(max((x1 - x0) * (y1 - y0), 1), dtype=np.int64)
        n = K.recon_seed_scan(self.J, self.I, self.conn8, *self.bounds, out)
        return out[:n]

    def rebound(self, bounds) -> "ReconRule":
        """Same arrays, different active window (tiles share state)."""
        return ReconRule(self.J, self.I, self.se, bounds)

    def bp_sweep(self, tile_grid, wave_start=None):
        out = np.empty(sweep_capacity(tile_grid), dtype=np.int64)
        n = K.recon_bp_sweep(self.J, self.I, self.conn8,
                             tile_grid.tile_w, tile_grid.tile_h, out)
        return out[:n]

    def band_exchange(self, bounds, band_h, out, wave_start=None):
        return K.recon_band_exchange(self.J, self.I, self.conn8,
                                     *bounds, band_h, out)


# ---------------------------------------------------------------------------
# scan passes

def raster_pass(inp: ReconInput) -> bool:
    """One in-place top-left to bottom-right sweep. Returns whether any
    cell changed."""
    J, I = inp.marker.data, inp.mask.data
    h, w = J.shape
    return bool(K.recon_raster_pass(J, I, inp.se.connectivity == 8, 0, 0, w, h))


def antiraster_pass(inp: ReconInput, collect_seeds: bool = False):
    """One in-place bottom-right to top-left sweep. Returns (changed,
    seeds): the cells that may still raise a scan-order successor, in the
    order the sweep met them. Seeds are empty unless requested."""
    changed, packed = _antiraster_packed(inp, collect_seeds)
    w = inp.marker.width
    return changed, [unpack(int(p), w) for p in packed]


def _antiraster_packed(inp: ReconInput, collect_seeds: bool):
    J, I = inp.marker.data, inp.mask.data
    h, w = J.shape
    buf = np.empty(h * w if collect_seeds else 1, dtype=np.int64)
    changed, n = K.recon_antiraster_pass(
        J, I, inp.se.connectivity == 8, 0, 0, w, h, buf, collect_seeds
    )
    return bool(changed), buf[:n]


# ---------------------------------------------------------------------------
# sequential algorithms

def recon_sr(inp: ReconInput) -> Image2D:
    """Reconstruction by alternating sweeps until neither changes."""
    work = inp.working_copy()
    while True:
        ch1 = raster_pass(work)
        ch2, _ = antiraster_pass(work)
        if not (ch1 or ch2):
            return work.marker


def recon_fh(inp: ReconInput) -> Image2D:
    """Reconstruction by one sweep pair plus a FIFO wavefront over the
    cells the antiraster sweep left active."""
    work = inp.working_copy()
    raster_pass(work)
    _, seeds = _antiraster_packed(work, True)
    rule = ReconRule(work.marker.data, work.mask.data, work.se)
    run_sequential(work.marker, rule, seeds)
    return work.marker


def recon_qb(inp: ReconInput) -> Image2D:
    """Reconstruction by a FIFO wavefront seeded at the cells that can
    start a wave but never join one: the marker's regional maxima plus the
    cells already clamped to the mask.

    Clamped cells can only send (nothing may raise them, so no incoming
    wave ever enqueues them), yet their value must still spread; without
    them a wave dies wherever it crosses a cell sitting at its mask value.
    Every remaining cell has a strictly greater neighbor whose relay
    raises and enqueues it, so this seed set is complete.
    """
    work = inp.working_copy()
    J, I = work.marker.data, work.mask.data
    maxima = _regional_maxima_packed(J, work.se)
    clamped = np.flatnonzero((J == I).reshape(-1)).astype(np.int64)
    seeds = np.union1d(maxima, clamped)  # sorted = raster order
    rule = ReconRule(J, I, work.se)
    run_sequential(work.marker, rule, seeds)
    return work.marker


# ---------------------------------------------------------------------------
# regional maxima

def _shifted(a: np.ndarray, dy: int, dx: int, fill) -> np.ndarray:
    """a shifted so element (y, x) holds a[y+dy, x+dx], edges filled."""
    out = np.full_like(a, fill)
    H, W = a.shape
    ys = slice(max(dy, 0), H + min(dy, 0))
    xs = slice(max(dx, 0), W + min(dx, 0))
    yd = slice(max(-dy, 0), H + min(-dy, 0))
    xd = slice(max(-dx, 0), W + min(-dx, 0))
    out[yd, xd] = a[ys, xs]
    return out


def _offsets(se: StructuringElement):
    return [(dy, dx) for dx, dy in se.offsets]


def _regional_maxima_mask(a: np.ndarray, se: StructuringElement) -> np.ndarray:
    if np.issubdtype(a.dtype, np.floating):
        lowest = -np.inf
    else:
        lowest = np.iinfo(a.dtype).min
    offs = _offsets(se)
    # cells with a strictly greater neighbor can never be maxima...
    bad = np.zeros(a.shape, dtype=bool)
    for dy, dx in offs:
        bad |= _shifted(a, dy, dx, lowest) > a
    # ...and badness infects whole plateaus through equal-valued neighbors.
    while True:
        grown = bad.copy()
        for dy, dx in offs:
            grown |= _shifted(bad, dy, dx, False) & (_shifted(a, dy, dx, lowest) == a)
        if np.array_equal(grown, bad):
            return ~bad
        bad = grown


def _regional_maxima_packed(a: np.ndarray, se: StructuringElement) -> np.ndarray:
    ys, xs = np.nonzero(_regional_maxima_mask(a, se))
    return (ys.astype(np.int64) * a.shape[1] + xs).astype(np.int64)


def regional_maxima(img: Image2D, se: StructuringElement = SE8) -> list[Coord]:
    """All cells lying on plateaus with no strictly greater neighbor, in
    raster order. On a constant image that is every cell."""
    packed = _regional_maxima_packed(img.data, se)
    return [unpack(int(p), img.width) for p in packed]


# ---------------------------------------------------------------------------
# parallel algorithm

def _bands(lo: int, hi: int, n: int) -> list[tuple[int, int]]:
    # n near-equal contiguous chunks of [lo, hi); fewer when the range is short
    total = hi - lo
    n = max(1, min(n, total))
    step = total // n
    rem = total % n
    out = []
    at = lo
    for i in range(n):
        size = step + (1 if i < rem else 0)
        out.append((at, at + size))
        at += size
    return out


def parallel_sweeps(J: np.ndarray, I: np.ndarray, se: StructuringElement,
                    n_workers: int, pool: ThreadPoolExecutor | None = None,
                    bounds=None) -> None:
    """The four axis-decomposed sweeps, each parallelized over bands.

    Row sweeps are independent per row. Column sweeps read adjacent
    columns across band edges with 8-connectivity; values only grow toward
    the fixed point, so those races cost completeness, not correctness,
    and the seed rescan that follows is a full-neighborhood scan for
    exactly that reason.
    """
    x0, y0, x1, y1 = bounds if bounds is not None else (0, 0, J.shape[1], J.shape[0])
    conn8 = se.connectivity == 8

    def run_phase(fn, spans, args):
        if len(spans) == 1 or pool is None:
            for lo, hi in spans:
                fn(J, I, *args(lo, hi))
        else:
            futs = [pool.submit(fn, J, I, *args(lo, hi)) for lo, hi in spans]
            for f in futs:
                f.result()

    row_spans = _bands(y0, y1, n_workers)
    col_spans = _bands(x0, x1, n_workers)
    run_phase(K.recon_rows_forward, row_spans, lambda lo, hi: (lo, hi, x0, x1))
    run_phase(K.recon_cols_forward, col_spans,
              lambda lo, hi: (conn8, lo, hi, x0, y0, x1, y1))
    run_phase(K.recon_rows_backward, row_spans, lambda lo, hi: (lo, hi, x0, x1))
    run_phase(K.recon_cols_backward, col_spans,
              lambda lo, hi: (conn8, lo, hi, x0, y0, x1, y1))


def recon_tiled(inp: ReconInput, tile_dims: tuple[int, int] = (64, 64),
                cfg=None) -> Image2D:
    """Tiled reconstruction over the wave scheduler. The initial sweep
    pair runs over the whole image; its leftover active set seeds wave 0,
    split by tile. The fixed point is unique, so the result matches every
    untiled variant cell for cell."""
    from .tiles import run_pipeline

    work = inp.working_copy()
    rule = ReconRule(work.marker.data, work.mask.data, work.se)

    def initial():
        raster_pass(work)
        _, seeds = _antiraster_packed(work, True)
        return seeds

    run_pipeline(work.marker, rule, initial, tile_dims, cfg)
    return work.marker


def recon_parallel(inp: ReconInput, cfg: EngineConfig | None = None) -> Image2D:
    """Parallel reconstruction: decomposed sweeps, full seed rescan, then
    round-based propagation through the engine."""
    cfg = cfg or EngineConfig()
    work = inp.working_copy()
    J, I = work.marker.data, work.mask.data
    if cfg.n_workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_workers) as pool:
            parallel_sweeps(J, I, work.se, cfg.n_workers, pool)
    else:
        parallel_sweeps(J, I, work.se, 1)
    rule = ReconRule(J, I, work.se)
    seeds = rule.kernel_seed_scan()
    run_parallel(work.marker, rule, seeds, cfg)
    return work.marker
