import math

import pytest
from hypothesis import given, strategies as st

from dynamis.geometry import (
    Box, Disk, FatObject, box_contains, disk_in_cell, disks_intersect, objects_intersect,
    power_of_three, scale_disk, signed_distance, smallest_enclosing_disk_of_cell)

coord = st.floats(-1e3, 1e3, allow_nan=False)
radius = st.floats(1e-3, 1e2, allow_nan=False)


def test_tangent_disks_intersect():
    assert disks_intersect(Disk(0, 0, 0, 1), Disk(1, 2, 0, 1))
    assert not disks_intersect(Disk(0, 0, 0, 1), Disk(1, 2.0000001, 0, 1))


def test_concentric_disks_intersect():
    assert disks_intersect(Disk(0, 5, 5, 3), Disk(1, 5, 5, 0.1))


@given(coord, coord, radius, coord, coord, radius)
def test_intersection_symmetric(x1, y1, r1, x2, y2, r2):
    a, b = Disk(0, x1, y1, r1), Disk(1, x2, y2, r2)
    assert disks_intersect(a, b) == disks_intersect(b, a)
    assert disks_intersect(a, a)


def test_signed_distance():
    d = Disk(0, 0, 0, 1)
    assert signed_distance(d, (3, 4)) == 4.0
    assert signed_distance(d, (0, 0)) == -1.0


def test_scale_disk():
    s = scale_disk(Disk(3, 1, 2, 0.5), 3.0)
    assert (s.x, s.y, s.r, s.derived) == (1, 2, 1.5, True)
    with pytest.raises(ValueError):
        scale_disk(Disk(3, 1, 2, 0.5), 0.9)


def test_enclosing_disk_of_unit_cell():
    d = smallest_enclosing_disk_of_cell(Box((0.0, 0.0), 1.0))
    assert (d.x, d.y) == (0.5, 0.5)
    assert d.r == pytest.approx(math.sqrt(2) / 2)


@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(0.01, 50))
def test_enclosing_disk_covers_corners(x0, y0, s):
    d = smallest_enclosing_disk_of_cell(Box((x0, y0), s))
    for cx, cy in ((x0, y0), (x0 + s, y0), (x0, y0 + s), (x0 + s, y0 + s)):
        # the center is rounded once, so allow an ulp of the coordinates
        assert math.hypot(cx - d.x, cy - d.y) <= d.r + 1e-12 * (abs(x0) + abs(y0) + s)


def test_disk_in_cell_is_closed():
    c = Box((0.0, 0.0), 4.0)
    assert disk_in_cell(Disk(0, 1, 1, 1), c)
    assert disk_in_cell(Disk(0, 2, 2, 2), c)
    assert not disk_in_cell(Disk(0, 0.99, 1, 1), c)
    assert box_contains(c, (0, 0), (4, 4))
    assert not box_contains(c, (0, 0), (4.01, 4))


def test_power_of_three():
    assert power_of_three(0) == 1.0
    assert power_of_three(4) == 81.0
    assert power_of_three(-2) == 1 / 9
    assert power_of_three(-1) == 1 / 3


def test_boxes_touching_intersect():
    a = FatObject(0, "box", ((0, 0), (1, 1)))
    b = FatObject(1, "box", ((1, 0), (2, 1)))
    c = FatObject(2, "box", ((1.5, 1.5), (2, 2)))
    assert objects_intersect(a, b)
    assert not objects_intersect(a, c)


def test_box_in_three_dimensions():
    a = FatObject(0, "box", ((0, 0, 0), (1, 1, 1)))
    b = FatObject(1, "box", ((0.5, 0.5, 1.0), (2, 2, 2)))
    c = FatObject(2, "box", ((0.5, 0.5, 1.1), (2, 2, 2)))
    assert a.dim == 3 and a.size == 1.0
    assert objects_intersect(a, b) and not objects_intersect(a, c)


def test_fat_disk_and_box():
    disk = FatObject(0, "disk", ((0.0, 0.0), 1.0))
    near = FatObject(1, "box", ((1.0, -1.0), (2.0, 1.0)))
    corner = FatObject(2, "box", ((0.8, 0.8), (2.0, 2.0)))
    assert objects_intersect(disk, near)
    assert objects_intersect(near, disk)
    # distance to the corner is about 1.131
    assert not objects_intersect(disk, corner)


def test_polygons():
    tri = FatObject(0, "polygon", ((0, 0), (2, 0), (0, 2)))
    sq_far = FatObject.square(1, (2.0, 2.0), 1.0)
    sq_near = FatObject.square(2, (1.2, 1.2), 1.0)
    assert not objects_intersect(tri, sq_far)
    assert objects_intersect(tri, sq_near)
    inside = FatObject(3, "disk", ((0.3, 0.3), 0.01))
    assert objects_intersect(tri, inside)
    away = FatObject(4, "disk", ((2.0, 2.0), 0.5))
    # distance from (2,2) to the hypotenuse is sqrt(2)
    assert not objects_intersect(tri, away)


@given(coord, coord, radius, coord, coord, radius)
def test_fat_disks_match_plain_disks(x1, y1, r1, x2, y2, r2):
    a = FatObject(0, "disk", ((x1, y1), r1))
    b = FatObject(1, "disk", ((x2, y2), r2))
    assert objects_intersect(a, b) == disks_intersect(Disk(0, x1, y1, r1), Disk(1, x2, y2, r2))


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 3)), min_size=2, max_size=2))
def test_box_overlap_matches_interval_logic(bs):
    (x1, y1, s1), (x2, y2, s2) = bs
    a, b = FatObject.square(0, (x1, y1), s1), FatObject.square(1, (x2, y2), s2)
    expect = abs(x1 - x2) <= (s1 + s2) / 2 and abs(y1 - y2) <= (s1 + s2) / 2
    # the squares' corners are rounded, so only compare away from the boundary
    margin = min(abs(abs(x1 - x2) - (s1 + s2) / 2), abs(abs(y1 - y2) - (s1 + s2) / 2))
    if margin > 1e-9:
        assert objects_intersect(a, b) == expect


def test_unknown_kind():
    with pytest.raises(ValueError):
        FatObject(0, "blob", ())
