"""Compiled inner loops for the propagation operators.

Everything here is numba-jitted with ``nogil=True`` so band- and
tile-parallel callers get real concurrency from plain threads. All kernels
take explicit bounds ``(x0, y0, x1, y1)`` and treat cells outside them as
nonexistent, which is how tile-local propagation ignores its surroundings.
Queue entries are packed flat indices ``y * width + x`` of the full image,
never tile-relative.

Scalar loops only; no allocation except the growable FIFO ring.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Squared distance stand-in for "no source assigned yet".
UNSET = np.int64(-1)
FAR = np.int64(1) << 62

# Full neighborhoods in raster order.
_DX8 = np.array([-1, 0, 1, -1, 1, -1, 0, 1], dtype=np.int64)
_DY8 = np.array([-1, -1, -1, 0, 0, 1, 1, 1], dtype=np.int64)
_DX4 = np.array([0, -1, 1, 0], dtype=np.int64)
_DY4 = np.array([-1, 0, 0, 1], dtype=np.int64)

# Scan-order halves (NW, N, NE, W for 8-connectivity; N, W for 4).
_RDX8 = np.array([-1, 0, 1, -1], dtype=np.int64)
_RDY8 = np.array([-1, -1, -1, 0], dtype=np.int64)
_RDX4 = np.array([0, -1], dtype=np.int64)
_RDY4 = np.array([-1, 0], dtype=np.int64)


# ---------------------------------------------------------------------------
# reconstruction: scans

@njit(nogil=True, cache=True)
def recon_raster_pass(J, I, conn8, x0, y0, x1, y1):
    """One top-left to bottom-right sweep. Each cell takes the max of itself
    and its already-visited half neighborhood, clamped by the mask."""
    nk = 4 if conn8 else 2
    changed = False
    for y in range(y0, y1):
        for x in range(x0, x1):
            v = J[y, x]
            for k in range(nk):
                if conn8:
                    nx = x + _RDX8[k]
                    ny = y + _RDY8[k]
                else:
                    nx = x + _RDX4[k]
                    ny = y + _RDY4[k]
                if x0 <= nx < x1 and y0 <= ny < y1:
                    w = J[ny, nx]
                    if w > v:
                        v = w
            m = I[y, x]
            if v > m:
                v = m
            if v != J[y, x]:
                J[y, x] = v
                changed = True
    return changed


@njit(nogil=True, cache=True)
def recon_antiraster_pass(J, I, conn8, x0, y0, x1, y1, seeds, collect):
    """Mirror sweep, bottom-right to top-left. After updating a cell, the
    cell is recorded as a seed if it could still improve some half
    neighbor (that neighbor is below its own mask and below this cell).
    Returns (changed, seed count); seeds are packed full-image indices."""
    width = J.shape[1]
    nk = 4 if conn8 else 2
    changed = False
    n_seeds = 0
    for y in range(y1 - 1, y0 - 1, -1):
        for x in range(x1 - 1, x0 - 1, -1):
            v = J[y, x]
            for k in range(nk):
                if conn8:
                    nx = x - _RDX8[k]
                    ny = y - _RDY8[k]
                else:
                    nx = x - _RDX4[k]
                    ny = y - _RDY4[k]
                if x0 <= nx < x1 and y0 <= ny < y1:
                    w = J[ny, nx]
                    if w > v:
                        v = w
            m = I[y, x]
            if v > m:
                v = m
            if v != J[y, x]:
                J[y, x] = v
                changed = True
            if collect:
                vp = J[y, x]
                for k in range(nk):
                    if conn8:
                        nx = x - _RDX8[k]
                        ny = y - _RDY8[k]
                    else:
                        nx = x - _RDX4[k]
                        ny = y - _RDY4[k]
                    if x0 <= nx < x1 and y0 <= ny < y1:
                        w = J[ny, nx]
                        if w < vp and w < I[ny, nx]:
                            seeds[n_seeds] = y * width + x
                            n_seeds += 1
                            break
    return changed, n_seeds


@njit(nogil=True, cache=True)
def recon_rows_forward(J, I, y_lo, y_hi, x0, x1):
    """Left-to-right pass over rows [y_lo, y_hi): west neighbor only."""
    for y in range(y_lo, y_hi):
        for x in range(x0 + 1, x1):
            v = J[y, x - 1]
            if v > J[y, x]:
                m = I[y, x]
                if v > m:
                    v = m
                if v > J[y, x]:
                    J[y, x] = v


@njit(nogil=True, cache=True)
def recon_rows_backward(J, I, y_lo, y_hi, x0, x1):
    for y in range(y_lo, y_hi):
        for x in range(x1 - 2, x0 - 1, -1):
            v = J[y, x + 1]
            if v > J[y, x]:
                m = I[y, x]
                if v > m:
                    v = m
                if v > J[y, x]:
                    J[y, x] = v


@njit(nogil=True, cache=True)
def recon_cols_forward(J, I, conn8, xs_lo, xs_hi, x0, y0, x1, y1):
    """Top-down pass over columns [xs_lo, xs_hi): previous-row neighbors.

    With 8-connectivity the diagonal reads may cross the [xs_lo, xs_hi)
    band into a column another thread owns. Values only ever grow toward
    the fixed point, so a stale read weakens this pass but never breaks it;
    the wavefront phase finishes whatever the scans left undone.
    """
    for x in range(xs_lo, xs_hi):
        for y in range(y0 + 1, y1):
            v = J[y - 1, x]
            if conn8:
                if x - 1 >= x0:
                    w = J[y - 1, x - 1]
                    if w > v:
                        v = w
                if x + 1 < x1:
                    w = J[y - 1, x + 1]
                    if w > v:
                        v = w
            if v > J[y, x]:
                m = I[y, x]
                if v > m:
                    v = m
                if v > J[y, x]:
                    J[y, x] = v


@njit(nogil=True, cache=True)
def recon_cols_backward(J, I, conn8, xs_lo, xs_hi, x0, y0, x1, y1):
    for x in range(xs_lo, xs_hi):
        for y in range(y1 - 2, y0 - 1, -1):
            v = J[y + 1, x]
            if conn8:
                if x - 1 >= x0:
                    w = J[y + 1, x - 1]
                    if w > v:
                        v = w
                if x + 1 < x1:
                    w = J[y + 1, x + 1]
                    if w > v:
                        v = w
            if v > J[y, x]:
                m = I[y, x]
                if v > m:
                    v = m
                if v > J[y, x]:
                    J[y, x] = v


@njit(nogil=True, cache=True)
def recon_seed_scan(J, I, conn8, x0, y0, x1, y1, out):
    """Full-neighborhood seed detection: p is live if it can raise some
    neighbor. Used after parallel scans (whose interleaving breaks the
    sequential half-scan invariant) and for overflow re-execution."""
    width = J.shape[1]
    nk = 8 if conn8 else 4
    n = 0
    for y in range(y0, y1):
        for x in range(x0, x1):
            vp = J[y, x]
            for k in range(nk):
                if conn8:
                    nx = x + _DX8[k]
                    ny = y + _DY8[k]
                else:
                    nx = x + _DX4[k]
                    ny = y + _DY4[k]
                if x0 <= nx < x1 and y0 <= ny < y1:
                    w = J[ny, nx]
                    if w < vp and w < I[ny, nx]:
                        out[n] = y * width + x
                        n += 1
                        break
    return n


@njit(nogil=True, cache=True)
def recon_wavefront(J, I, conn8, x0, y0, x1, y1, seeds, n_seeds):
    """FIFO propagation to the fixed point within bounds.

    Pop p; any neighbor below both p and its own mask is raised to
    min(J(p), I(q)) and enqueued. Returns the total number of queue
    insertions including the seeds.
    """
    width = J.shape[1]
    nk = 8 if conn8 else 4
    cap = 4 * n_seeds + 1024
    buf = np.empty(cap, dtype=np.int64)
    for i in range(n_seeds):
        buf[i] = seeds[i]
    head = 0
    tail = n_seeds
    total = n_seeds
    while head < tail:
        p = buf[head]
        head += 1
        py = p // width
        px = p % width
        vp = J[py, px]
        for k in range(nk):
            if conn8:
                nx = px + _DX8[k]
                ny = py + _DY8[k]
            else:
                nx = px + _DX4[k]
                ny = py + _DY4[k]
            if x0 <= nx < x1 and y0 <= ny < y1:
                vq = J[ny, nx]
                if vq < vp and I[ny, nx] != vq:
                    m = I[ny, nx]
                    v = vp if vp < m else m
                    J[ny, nx] = v
                    if tail == buf.shape[0]:
                        live = tail - head
                        if live * 2 < buf.shape[0]:
                            for i in range(live):
                                buf[i] = buf[head + i]
                            head = 0
                            tail = live
                        else:
                            nbuf = np.empty(buf.shape[0] * 2, dtype=np.int64)
                            nbuf[:tail] = buf[:tail]
                            buf = nbuf
                    buf[tail] = ny * width + nx
                    tail += 1
                    total += 1
    return total


@njit(nogil=True, cache=True)
def recon_round_block(J, I, conn8, x0, y0, x1, y1, items, start, stride, out):
    """Process one worker's stride share of a round. Changed neighbors are
    appended to out (packed indices); returns how many."""
    width = J.shape[1]
    nk = 8 if conn8 else 4
    n_out = 0
    i = start
    n_items = items.shape[0]
    while i < n_items:
        p = items[i]
        i += stride
        py = p // width
        px = p % width
        vp = J[py, px]
        for k in range(nk):
            if conn8:
                nx = px + _DX8[k]
                ny = py + _DY8[k]
            else:
                nx = px + _DX4[k]
                ny = py + _DY4[k]
            if x0 <= nx < x1 and y0 <= ny < y1:
                vq = J[ny, nx]
                if vq < vp and I[ny, nx] != vq:
                    m = I[ny, nx]
                    v = vp if vp < m else m
                    J[ny, nx] = v
                    out[n_out] = ny * width + nx
                    n_out += 1
    return n_out


# ---------------------------------------------------------------------------
# distance transform

@njit(nogil=True, cache=True)
def sqdist(qx, qy, src, width):
    """Squared Euclidean distance from (qx, qy) to a packed source index,
    or FAR when the source is UNSET."""
    if src < 0:
        return FAR
    sy = src // width
    sx = src % width
    dx = qx - sx
    dy = qy - sy
    return dx * dx + dy * dy


@njit(nogil=True, cache=True, inline="always")
def closer_source(qx, qy, cand, held, width):
    """True when cand should replace held at (qx, qy): strictly closer,
    or equally close with a smaller packed index. The index tiebreak makes
    the update a total order, so the fixed point does not depend on the
    order in which competing sources arrive."""
    if held < 0:
        return cand >= 0
    if cand < 0:
        return False
    dc = sqdist(qx, qy, cand, width)
    dh = sqdist(qx, qy, held, width)
    if dc != dh:
        return dc < dh
    return cand < held


@njit(nogil=True, cache=True)
def edt_assign(mask, x0, y0, x1, y1, vr):
    """Background cells become their own source; the rest start UNSET."""
    width = mask.shape[1]
    for y in range(y0, y1):
        for x in range(x0, x1):
            if mask[y, x] == 0:
                vr[y, x] = y * width + x
            else:
                vr[y, x] = UNSET


@njit(nogil=True, cache=True)
def edt_contour_seeds(mask, conn8, x0, y0, x1, y1, out):
    """Background cells adjacent (within bounds) to foreground, raster
    order. These are the only cells whose source can spread initially."""
    width = mask.shape[1]
    nk = 8 if conn8 else 4
    n = 0
    for y in range(y0, y1):
        for x in range(x0, x1):
            if mask[y, x] != 0:
                continue
            for k in range(nk):
                if conn8:
                    nx = x + _DX8[k]
                    ny = y + _DY8[k]
                else:
                    nx = x + _DX4[k]
                    ny = y + _DY4[k]
                if x0 <= nx < x1 and y0 <= ny < y1 and mask[ny, nx] != 0:
                    out[n] = y * width + x
                    n += 1
                    break
    return n


@njit(nogil=True, cache=True)
def edt_seed_scan(vr, conn8, x0, y0, x1, y1, out):
    """Cells whose source would improve some neighbor right now. The
    general restart predicate after an overflow discarded queue entries."""
    width = vr.shape[1]
    nk = 8 if conn8 else 4
    n = 0
    for y in range(y0, y1):
        for x in range(x0, x1):
            src = vr[y, x]
            if src < 0:
                continue
            for k in range(nk):
                if conn8:
                    nx = x + _DX8[k]
                    ny = y + _DY8[k]
                else:
                    nx = x + _DX4[k]
                    ny = y + _DY4[k]
                if x0 <= nx < x1 and y0 <= ny < y1:
                    if closer_source(nx, ny, src, vr[ny, nx], width):
                        out[n] = y * width + x
                        n += 1
                        break
    return n


@njit(nogil=True, cache=True)
def edt_round_block(vr, conn8, x0, y0, x1, y1, items, start, stride, out, srcs):
    """Stride share of one two-phase round. Every offer uses the source
    the cell held when the round began (srcs, aligned with items), so the
    round's outcome cannot depend on processing order within the round."""
    width = vr.shape[1]
    nk = 8 if conn8 else 4
    n_out = 0
    i = start
    n_items = items.shape[0]
    while i < n_items:
        p = items[i]
        src = srcs[i]
        i += stride
        if src < 0:
            continue
        py = p // width
        px = p % width
        for k in range(nk):
            if conn8:
                nx = px + _DX8[k]
                ny = py + _DY8[k]
            else:
                nx = px + _DX4[k]
                ny = py + _DY4[k]
            if x0 <= nx < x1 and y0 <= ny < y1:
                if closer_source(nx, ny, src, vr[ny, nx], width):
                    vr[ny, nx] = src
                    out[n_out] = ny * width + nx
                    n_out += 1
    return n_out


@njit(nogil=True, cache=True, inline="always")
def _recon_offer(J, I, px, py, qx, qy, out, n):
    vq = J[qy, qx]
    vp = J[py, px]
    if vq < vp and I[qy, qx] != vq:
        iq = I[qy, qx]
        J[qy, qx] = vp if vp < iq else iq
        out[n] = qy * J.shape[1] + qx
        n += 1
    return n


@njit(nogil=True, cache=True, inline="always")
def _edt_offer(vr, vr0, px, py, qx, qy, out, n):
    src = vr0[py, px]
    if src >= 0:
        width = vr.shape[1]
        if closer_source(qx, qy, src, vr[qy, qx], width):
            vr[qy, qx] = src
            out[n] = qy * width + qx
            n += 1
    return n


@njit(nogil=True, cache=True)
def recon_bp_sweep(J, I, conn8, tile_w, tile_h, out):
    """Border sweep for reconstruction: every ordered neighbor pair that
    straddles a tile boundary, examined once per call (diagonal pairs that
    cross a corner belong to the vertical sweep). Applies winning merges
    in place and records the receiving cells."""
    height, width = J.shape
    n = 0
    for bx in range(tile_w, width, tile_w):
        for y in range(height):
            n = _recon_offer(J, I, bx - 1, y, bx, y, out, n)
            n = _recon_offer(J, I, bx, y, bx - 1, y, out, n)
            if conn8:
                if y > 0:
                    n = _recon_offer(J, I, bx - 1, y, bx, y - 1, out, n)
                    n = _recon_offer(J, I, bx, y, bx - 1, y - 1, out, n)
                if y + 1 < height:
                    n = _recon_offer(J, I, bx - 1, y, bx, y + 1, out, n)
                    n = _recon_offer(J, I, bx, y, bx - 1, y + 1, out, n)
    for by in range(tile_h, height, tile_h):
        for x in range(width):
            n = _recon_offer(J, I, x, by - 1, x, by, out, n)
            n = _recon_offer(J, I, x, by, x, by - 1, out, n)
            if conn8:
                if x > 0 and x // tile_w == (x - 1) // tile_w:
                    n = _recon_offer(J, I, x, by - 1, x - 1, by, out, n)
                    n = _recon_offer(J, I, x, by, x - 1, by - 1, out, n)
                if x + 1 < width and x // tile_w == (x + 1) // tile_w:
                    n = _recon_offer(J, I, x, by - 1, x + 1, by, out, n)
                    n = _recon_offer(J, I, x, by, x + 1, by - 1, out, n)
    return n


@njit(nogil=True, cache=True)
def edt_bp_sweep(vr, vr0, conn8, tile_w, tile_h, out):
    """Border sweep for source adoption. Offers use vr0, the state at the
    start of the wave, so cross-tile offers carry exactly the values the
    untiled round schedule would have relayed."""
    height, width = vr.shape
    n = 0
    for bx in range(tile_w, width, tile_w):
        for y in range(height):
            n = _edt_offer(vr, vr0, bx - 1, y, bx, y, out, n)
            n = _edt_offer(vr, vr0, bx, y, bx - 1, y, out, n)
            if conn8:
                if y > 0:
                    n = _edt_offer(vr, vr0, bx - 1, y, bx, y - 1, out, n)
                    n = _edt_offer(vr, vr0, bx, y, bx - 1, y - 1, out, n)
                if y + 1 < height:
                    n = _edt_offer(vr, vr0, bx - 1, y, bx, y + 1, out, n)
                    n = _edt_offer(vr, vr0, bx, y, bx - 1, y + 1, out, n)
    for by in range(tile_h, height, tile_h):
        for x in range(width):
            n = _edt_offer(vr, vr0, x, by - 1, x, by, out, n)
            n = _edt_offer(vr, vr0, x, by, x, by - 1, out, n)
            if conn8:
                if x > 0 and x // tile_w == (x - 1) // tile_w:
                    n = _edt_offer(vr, vr0, x, by - 1, x - 1, by, out, n)
                    n = _edt_offer(vr, vr0, x, by, x - 1, by - 1, out, n)
                if x + 1 < width and x // tile_w == (x + 1) // tile_w:
                    n = _edt_offer(vr, vr0, x, by - 1, x + 1, by, out, n)
                    n = _edt_offer(vr, vr0, x, by, x + 1, by - 1, out, n)
    return n


@njit(nogil=True, cache=True)
def recon_band_exchange(J, I, conn8, x0, y0, x1, y1, band_h, out):
    """Like recon_bp_sweep but across the horizontal band boundaries of a
    single tile (micro-tiling); there are no vertical cuts inside a tile."""
    n = 0
    for by in range(y0 + band_h, y1, band_h):
        for x in range(x0, x1):
            n = _recon_offer(J, I, x, by - 1, x, by, out, n)
            n = _recon_offer(J, I, x, by, x, by - 1, out, n)
            if conn8:
                if x > x0:
                    n = _recon_offer(J, I, x, by - 1, x - 1, by, out, n)
                    n = _recon_offer(J, I, x, by, x - 1, by - 1, out, n)
                if x + 1 < x1:
                    n = _recon_offer(J, I, x, by - 1, x + 1, by, out, n)
                    n = _recon_offer(J, I, x, by, x + 1, by - 1, out, n)
    return n


@njit(nogil=True, cache=True)
def edt_band_exchange(vr, vr0, conn8, x0, y0, x1, y1, band_h, out):
    n = 0
    for by in range(y0 + band_h, y1, band_h):
        for x in range(x0, x1):
            n = _edt_offer(vr, vr0, x, by - 1, x, by, out, n)
            n = _edt_offer(vr, vr0, x, by, x, by - 1, out, n)
            if conn8:
                if x > x0:
                    n = _edt_offer(vr, vr0, x, by - 1, x - 1, by, out, n)
                    n = _edt_offer(vr, vr0, x, by, x - 1, by - 1, out, n)
                if x + 1 < x1:
                    n = _edt_offer(vr, vr0, x, by - 1, x + 1, by, out, n)
                    n = _edt_offer(vr, vr0, x, by, x + 1, by - 1, out, n)
    return n


def warm(kinds=("u8",)):
    """Force-compile the kernels for the given element kinds so later
    timings measure propagation, not compilation."""
    dts = {"u8": np.uint8, "u16": np.uint16, "f32": np.float32, "binary": np.uint8}
    for kind in kinds:
        dt = dts[kind]
        J = np.zeros((4, 4), dtype=dt)
        I = np.full((4, 4), 3, dtype=dt)
        J[0, 0] = 2
        for conn8 in (True, False):
            recon_raster_pass(J.copy(), I, conn8, 0, 0, 4, 4)
            recon_antiraster_pass(J.copy(), I, conn8, 0, 0, 4, 4, np.empty(16, np.int64), True)
            recon_rows_forward(J.copy(), I, 0, 4, 0, 4)
            recon_rows_backward(J.copy(), I, 0, 4, 0, 4)
            recon_cols_forward(J.copy(), I, conn8, 0, 4, 0, 0, 4, 4)
            recon_cols_backward(J.copy(), I, conn8, 0, 4, 0, 0, 4, 4)
            buf = np.empty(16, np.int64)
            n = recon_seed_scan(J, I, conn8, 0, 0, 4, 4, buf)
            recon_wavefront(J.copy(), I, conn8, 0, 0, 4, 4, buf, n)
            recon_round_block(J.copy(), I, conn8, 0, 0, 4, 4, buf[:n], 0, 1,
                              np.empty(16 * 8, np.int64))
            big = np.empty(256, np.int64)
            recon_bp_sweep(J.copy(), I, conn8, 2, 2, big)
            recon_band_exchange(J.copy(), I, conn8, 0, 0, 4, 4, 2, big)
    mask = np.zeros((4, 4), dtype=np.uint8)
    mask[1:3, 1:3] = 255
    vr = np.empty((4, 4), dtype=np.int64)
    for conn8 in (True, False):
        edt_assign(mask, 0, 0, 4, 4, vr)
        buf = np.empty(16, np.int64)
        n = edt_contour_seeds(mask, conn8, 0, 0, 4, 4, buf)
        edt_seed_scan(vr, conn8, 0, 0, 4, 4, buf)
        srcs = np.array([vr[0, 0]], dtype=np.int64)
        edt_round_block(vr, conn8, 0, 0, 4, 4, buf[:1], 0, 1, np.empty(8, np.int64), srcs)
        big = np.empty(256, np.int64)
        edt_bp_sweep(vr, vr.copy(), conn8, 2, 2, big)
        edt_band_exchange(vr, vr.copy(), conn8, 0, 0, 4, 4, 2, big)
