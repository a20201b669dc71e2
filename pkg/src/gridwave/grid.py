"""Core 2-D grid types and neighborhood algebra.

Images are dense row-major grids addressed by (x, y) with x the column and
y the row. Internally pixels are also handled as packed flat indices
(``y * width + x``) because the propagation engines keep their queues as
plain integer arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ContractViolation

# Binary images use these two levels only.
BG = 0
FG = 255

ELEM_DTYPES = {
    "u8": np.uint8,
    "u16": np.uint16,
    "f32": np.float32,
    "binary": np.uint8,
}

ELEM_KINDS = tuple(ELEM_DTYPES)


class Coord(NamedTuple):
    x: int
    y: int


def pack(x: int, y: int, width: int) -> int:
    return y * width + x


def unpack(idx: int, width: int) -> Coord:
    return Coord(idx % width, idx // width)


@dataclass
class Image2D:
    """A dense 2-D image.

    Attributes
    ----------
    width, height : int
        Grid dimensions, both >= 1.
    elem_kind : str
        One of ``u8``, ``u16``, ``f32``, ``binary``. Binary images are
        stored as uint8 restricted to {0, 255}.
    data : np.ndarray
        Shape ``(height, width)``, C-contiguous, dtype matching elem_kind.
    """

    width: int
    height: int
    elem_kind: str
    data: np.ndarray

    def __post_init__(self):
        if self.elem_kind not in ELEM_DTYPES:
            raise ContractViolation(f"unknown elem_kind {self.elem_kind!r}")
        if self.width < 1 or self.height < 1:
            raise ContractViolation("image dimensions must be >= 1")
        if self.data.shape != (self.height, self.width):
            raise ContractViolation(
                f"data shape {self.data.shape} does not match "
                f"(height, width)=({self.height}, {self.width})"
            )
        if self.data.dtype != ELEM_DTYPES[self.elem_kind]:
            raise ContractViolation(
                f"dtype {self.data.dtype} does not match elem_kind {self.elem_kind}"
            )

    @classmethod
    def zeros(cls, width: int, height: int, elem_kind: str = "u8") -> "Image2D":
        dt = ELEM_DTYPES.get(elem_kind)
        if dt is None:
            raise ContractViolation(f"unknown elem_kind {elem_kind!r}")
        return cls(width, height, elem_kind, np.zeros((height, width), dtype=dt))

    @classmethod
    def full(cls, width: int, height: int, value, elem_kind: str = "u8") -> "Image2D":
        img = cls.zeros(width, height, elem_kind)
        img.data[:] = value
        return img

    @classmethod
    def from_array(cls, arr: np.ndarray, elem_kind: str) -> "Image2D":
        """Wrap a 2-D array, validating binary images hold only {0, 255}."""
        dt = ELEM_DTYPES.get(elem_kind)
        if dt is None:
            raise ContractViolation(f"unknown elem_kind {elem_kind!r}")
        if arr.ndim != 2:
            raise ContractViolation(f"expected 2-D array, got shape {arr.shape}")
        a = np.ascontiguousarray(arr, dtype=dt)
        if elem_kind == "binary" and not np.isin(a, (BG, FG)).all():
            raise ContractViolation("binary image holds values outside {0, 255}")
        h, w = a.shape
        return cls(w, h, elem_kind, a)

    @property
    def dims(self) -> tuple[int, int]:
        return self.width, self.height

    def copy(self) -> "Image2D":
        return Image2D(self.width, self.height, self.elem_kind, self.data.copy())

    def get(self, p: Coord):
        return self.data[p[1], p[0]]

    def set(self, p: Coord, value):
        self.data[p[1], p[0]] = value


# Neighborhood offsets in raster order (top row left-to-right, then middle,
# then bottom). Every table below is a tuple of (dx, dy).
_OFFSETS_8 = ((-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1))
_OFFSETS_4 = ((0, -1), (-1, 0), (1, 0), (0, 1))


def _split_half(offsets):
    raster = tuple(o for o in offsets if o[1] < 0 or (o[1] == 0 and o[0] < 0))
    anti = tuple(o for o in offsets if o not in raster)
    return raster, anti


_HALF_8_RASTER, _HALF_8_ANTI = _split_half(_OFFSETS_8)
_HALF_4_RASTER, _HALF_4_ANTI = _split_half(_OFFSETS_4)

# Axis decomposition of the raster/antiraster halves: the row component holds
# the same-row offset, the column component the previous/next-row offsets.
_AXIS = {
    (8, "row", "forward"): ((-1, 0),),
    (8, "row", "backward"): ((1, 0),),
    (8, "col", "forward"): ((-1, -1), (0, -1), (1, -1)),
    (8, "col", "backward"): ((-1, 1), (0, 1), (1, 1)),
    (4, "row", "forward"): ((-1, 0),),
    (4, "row", "backward"): ((1, 0),),
    (4, "col", "forward"): ((0, -1),),
    (4, "col", "backward"): ((0, 1),),
}


@dataclass(frozen=True)
class StructuringElement:
    """Symmetric 4- or 8-connected neighborhood."""

    connectivity: int

    def __post_init__(self):
        if self.connectivity not in (4, 8):
            raise ContractViolation(
                f"connectivity must be 4 or 8, got {self.connectivity}"
            )

    @property
    def offsets(self) -> tuple[tuple[int, int], ...]:
        return _OFFSETS_8 if self.connectivity == 8 else _OFFSETS_4

    def half_offsets(self, order: str) -> tuple[tuple[int, int], ...]:
        if order == "raster":
            return _HALF_8_RASTER if self.connectivity == 8 else _HALF_4_RASTER
        if order == "antiraster":
            return _HALF_8_ANTI if self.connectivity == 8 else _HALF_4_ANTI
        raise ContractViolation(f"order must be raster or antiraster, got {order!r}")

    def axis_offsets(self, axis: str, direction: str) -> tuple[tuple[int, int], ...]:
        key = (self.connectivity, axis, direction)
        if key not in _AXIS:
            raise ContractViolation(f"bad axis/direction {axis!r}/{direction!r}")
        return _AXIS[key]


def _clip(p: Coord, offsets, width: int, height: int) -> list[Coord]:
    px, py = p
    out = []
    for dx, dy in offsets:
        x, y = px + dx, py + dy
        if 0 <= x < width and 0 <= y < height:
            out.append(Coord(x, y))
    return out


def neighbors(p: Coord, se: StructuringElement, width: int, height: int) -> list[Coord]:
    """All in-bounds neighbors of p, in raster order. Border cells simply
    have fewer neighbors; there is no padding."""
    return _clip(p, se.offsets, width, height)


def half_neighbors(
    p: Coord, se: StructuringElement, order: str, width: int, height: int
) -> list[Coord]:
    """Neighbors preceding p (order="raster") or following p
    (order="antiraster") in scan order, clipped to the grid."""
    return _clip(p, se.half_offsets(order), width, height)


def axis_half_neighbors(
    p: Coord,
    se: StructuringElement,
    axis: str,
    direction: str,
    width: int,
    height: int,
) -> list[Coord]:
    """The axis-aligned slice of a scan-order half neighborhood.

    Row scans see only the same-row predecessor/successor; column scans see
    the adjacent-row offsets. The forward row and column slices together
    reproduce exactly the raster half, with no overlap, so a pair of row and
    column sweeps visits every half-neighborhood edge once.
    """
    return _clip(p, se.axis_offsets(axis, direction), width, height)
