"""Slow reference implementations used to cross-check the fast paths.

Nothing in here touches the compiled kernels or the engine: these routes
go through plain numpy (and scipy's component labeling), so agreement with
the propagation implementations is meaningful evidence, not an identity.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import ContractViolation
from .grid import BG, FG

_STRUCT4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT8 = np.ones((3, 3), dtype=bool)


def _dilate_max(J: np.ndarray, connectivity: int) -> np.ndarray:
    """Max over the neighborhood including the cell itself. Edge padding
    replicates border values, which is a no-op under max-with-self."""
    P = np.pad(J, 1, mode="edge")
    out = J.copy()
    if connectivity == 8:
        offs = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        offs = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    H, W = J.shape
    for dy, dx in offs:
        np.maximum(out, P[1 + dy : 1 + dy + H, 1 + dx : 1 + dx + W], out)
    return out


def recon_by_dilation(marker: np.ndarray, mask: np.ndarray, connectivity: int) -> np.ndarray:
    """Reconstruction as the limit of mask-clamped elementary dilations."""
    if marker.shape != mask.shape:
        raise ContractViolation("marker and mask shapes differ")
    J = marker.copy()
    while True:
        nxt = np.minimum(_dilate_max(J, connectivity), mask)
        if np.array_equal(nxt, J):
            return J
        J = nxt


def binary_recon_components(marker: np.ndarray, mask: np.ndarray, connectivity: int) -> np.ndarray:
    """Binary reconstruction as component selection: keep exactly the
    foreground components of the mask that the marker touches."""
    struct = _STRUCT8 if connectivity == 8 else _STRUCT4
    labels, _ = ndimage.label(mask == FG, structure=struct)
    touched = np.unique(labels[(marker == FG) & (labels > 0)])
    out = np.where(np.isin(labels, touched) & (labels > 0), FG, BG)
    return out.astype(np.uint8)


def bruteforce_sqdist(mask: np.ndarray, far: int) -> np.ndarray:
    """Per-pixel minimum squared distance to any background pixel, by
    direct minimization over all background pixels. ``far`` fills the map
    when there is no background at all."""
    H, W = mask.shape
    bys, bxs = np.nonzero(mask == 0)
    best = np.full((H, W), far, dtype=np.int64)
    if len(bxs) == 0:
        return best
    ys = np.arange(H, dtype=np.int64)[:, None]
    xs = np.arange(W, dtype=np.int64)[None, :]
    for i in range(0, len(bxs), 256):
        cy = bys[i : i + 256].astype(np.int64)[:, None, None]
        cx = bxs[i : i + 256].astype(np.int64)[:, None, None]
        d2 = (ys[None] - cy) ** 2 + (xs[None] - cx) ** 2
        np.minimum(best, d2.min(axis=0), out=best)
    return best
