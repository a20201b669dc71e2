"""Neighborhood algebra and Image2D invariants."""

import numpy as np
import pytest

from gridwave import (
    BG,
    FG,
    ContractViolation,
    Coord,
    Image2D,
    StructuringElement,
    axis_half_neighbors,
    half_neighbors,
    neighbors,
)
from gridwave.grid import pack, unpack

SE4 = StructuringElement(4)
SE8 = StructuringElement(8)


def test_neighbors_8_interior_raster_order():
    got = neighbors(Coord(1, 1), SE8, 3, 3)
    assert got == [
        (0, 0), (1, 0), (2, 0),
        (0, 1), (2, 1),
        (0, 2), (1, 2), (2, 2),
    ]


def test_neighbors_8_corner_clipped():
    assert neighbors(Coord(0, 0), SE8, 3, 3) == [(1, 0), (0, 1), (1, 1)]


def test_neighbors_4_interior():
    assert neighbors(Coord(1, 1), SE4, 3, 3) == [(1, 0), (0, 1), (2, 1), (1, 2)]


def test_neighbors_1x1_empty():
    assert neighbors(Coord(0, 0), SE8, 1, 1) == []
    assert neighbors(Coord(0, 0), SE4, 1, 1) == []


def test_half_neighbors_raster_8():
    got = half_neighbors(Coord(1, 1), SE8, "raster", 3, 3)
    assert got == [(0, 0), (1, 0), (2, 0), (0, 1)]


def test_half_neighbors_antiraster_4():
    assert half_neighbors(Coord(1, 1), SE4, "antiraster", 3, 3) == [(2, 1), (1, 2)]


def test_half_neighbors_partition():
    # raster half + antiraster half = full neighborhood, no overlap
    for se in (SE4, SE8):
        for p in [Coord(0, 0), Coord(2, 1), Coord(4, 4), Coord(0, 3)]:
            full = set(neighbors(p, se, 5, 5))
            ra = set(half_neighbors(p, se, "raster", 5, 5))
            an = set(half_neighbors(p, se, "antiraster", 5, 5))
            assert ra | an == full
            assert not (ra & an)


def test_axis_half_row_forward_8():
    assert axis_half_neighbors(Coord(2, 2), SE8, "row", "forward", 5, 5) == [(1, 2)]


def test_axis_half_col_forward_4():
    assert axis_half_neighbors(Coord(2, 2), SE4, "col", "forward", 5, 5) == [(2, 1)]


def test_axis_half_row_forward_left_edge_empty():
    assert axis_half_neighbors(Coord(0, 2), SE8, "row", "forward", 5, 5) == []


def test_axis_decomposition_covers_half():
    # row+col forward slices tile the raster half exactly; same for backward.
    rng = np.random.default_rng(7)
    for _ in range(200):
        w, h = rng.integers(1, 7, size=2)
        se = SE4 if rng.random() < 0.5 else SE8
        p = Coord(int(rng.integers(0, w)), int(rng.integers(0, h)))
        for direction, order in (("forward", "raster"), ("backward", "antiraster")):
            row = axis_half_neighbors(p, se, "row", direction, w, h)
            col = axis_half_neighbors(p, se, "col", direction, w, h)
            assert set(row) | set(col) == set(half_neighbors(p, se, order, w, h))
            assert not (set(row) & set(col))


def test_structuring_element_rejects_bad_connectivity():
    with pytest.raises(ContractViolation):
        StructuringElement(6)


def test_image_from_array_binary_validation():
    ok = np.array([[BG, FG], [FG, BG]], dtype=np.uint8)
    img = Image2D.from_array(ok, "binary")
    assert img.dims == (2, 2)
    with pytest.raises(ContractViolation):
        Image2D.from_array(np.array([[0, 7]], dtype=np.uint8), "binary")


def test_image_shape_dtype_contract():
    with pytest.raises(ContractViolation):
        Image2D(2, 2, "u8", np.zeros((2, 3), dtype=np.uint8))
    with pytest.raises(ContractViolation):
        Image2D(3, 2, "u8", np.zeros((2, 3), dtype=np.uint16))
    with pytest.raises(ContractViolation):
        Image2D.zeros(4, 4, "u32")
    with pytest.raises(ContractViolation):
        Image2D.zeros(0, 4, "u8")


def test_image_get_set_and_copy():
    img = Image2D.zeros(3, 2, "u16")
    img.set(Coord(2, 1), 777)
    assert img.get(Coord(2, 1)) == 777
    dup = img.copy()
    dup.set(Coord(0, 0), 5)
    assert img.get(Coord(0, 0)) == 0


def test_pack_unpack_roundtrip():
    rng = np.random.default_rng(11)
    for _ in range(100):
        w = int(rng.integers(1, 50))
        h = int(rng.integers(1, 50))
        x = int(rng.integers(0, w))
        y = int(rng.integers(0, h))
        assert unpack(pack(x, y, w), w) == (x, y)
