import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from dynamis.errors import CellExists, CellMissing, LevelOverflow, PointOutsideParent
from dynamis.geometry import Disk, box_contains
from dynamis.nonatree import (
    CellCoord, Nonatree, ancestor_at, bucket_of_radius, cell_box, cell_containing, child_index,
    is_ancestor, lca, locate_home_cell, qkey, side_of_level, tree_parity)

from nonatree_oracle import dfs_orders, expected_cells


# ------------------------------------------------------------ cell geometry


@pytest.mark.parametrize("i", [-5, -1, 0, 1, 2, 7])
def test_bucket_edges(i):
    top = 3.0 ** i / 4
    assert bucket_of_radius(top) == i
    assert bucket_of_radius(math.nextafter(top, math.inf)) == i + 1


@given(st.floats(1e-30, 1e30))
def test_bucket_brackets_radius(r):
    i = bucket_of_radius(r)
    assert side_of_level(i - 1) / 4 < r <= side_of_level(i) / 4


def test_bucket_rejects_bad_radius():
    for r in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            bucket_of_radius(r)


disk_st = st.builds(lambda x, y, e, f: Disk(0, x, y, 3.0 ** e * f),
                    st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.integers(-12, 8), st.floats(0.09, 0.25))


@given(disk_st)
def test_home_cell_contains_disk(d):
    c = locate_home_cell(d)
    assert c.level == bucket_of_radius(d.r)
    assert tree_parity(c.tree) == c.level % 2
    assert box_contains(cell_box(c), (d.x - d.r, d.y - d.r), (d.x + d.r, d.y + d.r))


def test_home_cell_first_shift_wins():
    # fits the unshifted cell [0,1]^2 and nothing forces a shift
    assert locate_home_cell(Disk(0, 0.5, 0.5, 0.2)) == CellCoord(0, 0, 0, 0)
    # straddles x = 1, so the half-shifted grid takes it
    assert locate_home_cell(Disk(0, 1.0, 0.5, 0.2)).tree == 1


@given(st.integers(0, 7), st.integers(-6, 6), st.floats(-500, 500), st.floats(-500, 500), st.integers(0, 6))
def test_ancestor_matches_point_location(k, lv, px, py, t):
    c = cell_containing(k, lv, (px, py))
    a = ancestor_at(c, lv + t)
    b = cell_box(a)
    cb = cell_box(c)
    # geometric containment of the cell box inside the claimed ancestor box
    tol = 1e-9 * b.side
    assert b.corner[0] - tol <= cb.corner[0] and cb.corner[0] + cb.side <= b.corner[0] + b.side + tol
    assert b.corner[1] - tol <= cb.corner[1] and cb.corner[1] + cb.side <= b.corner[1] + b.side + tol


@given(st.integers(0, 7), st.integers(-4, 4), st.tuples(st.floats(-300, 300), st.floats(-300, 300)),
       st.tuples(st.floats(-300, 300), st.floats(-300, 300)), st.integers(0, 3))
def test_lca_properties(k, lv, p, q, dl):
    lv = 2 * lv + tree_parity(k)
    a = cell_containing(k, lv, p)
    b = cell_containing(k, lv + 2 * dl, q)
    m = lca(a, b)
    if m is None:
        # unshifted axis: the cells lie in different quadrants
        assert k % 4 != 3
        return
    assert (m.level - tree_parity(k)) % 2 == 0
    assert is_ancestor(m, a) and is_ancestor(m, b)
    if m.level - 2 >= max(a.level, b.level):
        assert ancestor_at(a, m.level - 2) != ancestor_at(b, m.level - 2)


def test_is_ancestor_strict():
    c = CellCoord(0, 0, 4, 4)
    p = ancestor_at(c, 2)
    assert p == CellCoord(0, 2, 0, 0)
    assert is_ancestor(p, c, strict=True)
    assert is_ancestor(c, c) and not is_ancestor(c, c, strict=True)
    assert not is_ancestor(c, p)
    assert not is_ancestor(CellCoord(1, 2, 0, 0), c)


def test_child_index():
    p = CellCoord(0, 2, 0, 0)
    assert child_index(p, (4.5, 8.9)) == CellCoord(0, 0, 4, 8)
    assert child_index(p, (9.0, 9.0)) == CellCoord(0, 0, 8, 8)
    with pytest.raises(PointOutsideParent):
        child_index(p, (9.5, 1.0))


def test_qkey_flavors():
    c = CellCoord(0, 0, 4, 4)
    pre, post = qkey(c, "pre", 4), qkey(c, "post", 4)
    assert post == pre + (9,)
    with pytest.raises(ValueError):
        qkey(c, "pre", -2)
    with pytest.raises(ValueError):
        qkey(c, "mid", 4)


# ------------------------------------------------------------ stored tree


def build(disks, k):
    t = Nonatree(k)
    where = {}
    for d in disks:
        c = locate_home_cell(d)
        if c.tree != k:
            continue
        if c not in t:
            t.insert_cell(c)
        t.add_disk(c, d.id)
        where[d.id] = c
    return t, where


def remove(t, c, i):
    t.remove_disk(c, i)
    rec = t.record(c)
    if not rec.disks and len(rec.children) < 2:
        t.delete_cell(c)


def test_insert_cases():
    t = Nonatree(0)
    a = CellCoord(0, 0, 0, 0)
    d = t.insert_cell(a)
    assert d.touched == [a] and d.created == [a]
    t.add_disk(a, 1)
    # a second leaf in another slot of the same level-2 cell creates a branching cell
    b = CellCoord(0, 0, 5, 5)
    d = t.insert_cell(b)
    m = CellCoord(0, 2, 0, 0)
    assert d.created == [m, b]
    assert t.parent(a) == m and t.parent(b) == m
    t.add_disk(b, 2)
    # a cell above the branching cell is inserted between it and the root
    top = CellCoord(0, 4, 0, 0)
    d = t.insert_cell(top)
    assert d.touched == [top, m] and t.parent(m) == top
    t.add_disk(top, 3)
    # and a plain new child
    c = CellCoord(0, 2, 3, 3)
    t.insert_cell(c)
    t.add_disk(c, 4)
    assert t.parent(c) == top and set(t.children(top)) == {m, c}
    assert t.check_structure() == []
    with pytest.raises(CellExists):
        t.insert_cell(c)


def test_delete_cases():
    t = Nonatree(0)
    a, b, top = CellCoord(0, 0, 0, 0), CellCoord(0, 0, 5, 5), CellCoord(0, 4, 0, 0)
    for i, c in enumerate((a, b, top)):
        t.insert_cell(c)
        t.add_disk(c, i)
    m = CellCoord(0, 2, 0, 0)
    # removing leaf b leaves m with one child and no disks: m is spliced out
    t.remove_disk(b, 1)
    d = t.delete_cell(b)
    assert d.removed == [b, m]
    assert t.parent(a) == top
    # a 1-child relevant cell that loses its disk is spliced
    t.remove_disk(top, 2)
    d = t.delete_cell(top)
    assert d.removed == [top] and t.parent(a) is None
    assert t.check_structure() == []
    with pytest.raises(CellMissing):
        t.record(top)


def test_delete_refuses_busy_cells():
    t = Nonatree(0)
    a = CellCoord(0, 0, 0, 0)
    t.insert_cell(a)
    t.add_disk(a, 7)
    with pytest.raises(ValueError):
        t.delete_cell(a)


def test_level_overflow():
    t = Nonatree(0, max_depth=12)
    t.insert_cell(CellCoord(0, 0, 0, 0))
    with pytest.raises(LevelOverflow):
        t.insert_cell(CellCoord(0, -20, 0, 0))


def test_reference_level_grows():
    t = Nonatree(0)
    t.insert_cell(CellCoord(0, 0, 2, 2))
    t.add_disk(CellCoord(0, 0, 2, 2), 1)
    before = t.ref_level
    far = cell_containing(0, 0, (5000.0, 7000.0))
    t.insert_cell(far)
    t.add_disk(far, 2)
    assert t.ref_level > before and t.key_rebuilds >= 1
    assert t.check_structure() == []


def random_tree_disks(rng, n, k):
    out = []
    i = 0
    while len(out) < n:
        e = rng.randrange(-4, 5)
        r = 3.0 ** e * rng.uniform(0.09, 0.25)
        spread = 3.0 ** rng.randrange(0, 6)
        d = Disk(i, rng.uniform(-spread, spread), rng.uniform(-spread, spread), r)
        i += 1
        if locate_home_cell(d).tree == k:
            out.append(d)
    return out


def check_against_oracle(t, where, disks_by_id):
    relevant = set(where.values())
    cells = expected_cells(relevant, t.tree)
    assert set(t.cells) == cells
    pre, post = dfs_orders(cells)
    assert t.preorder() == pre
    assert sorted(cells, key=t.post_key) == post
    assert len(cells) <= 2 * len(where) + 1
    for c in cells:
        for x in cells:
            if is_ancestor(c, x, strict=True):
                for i in t.record(c).disks:
                    for j in t.record(x).disks:
                        assert disks_by_id[i].r > 3 * disks_by_id[j].r


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.integers(0, 7), st.integers(1, 40))
def test_random_trees_match_oracle(seed, k, n):
    rng = random.Random(seed)
    disks = random_tree_disks(rng, n, k)
    by_id = {d.id: d for d in disks}
    t, where = build(disks, k)
    assert t.check_structure() == []
    check_against_oracle(t, where, by_id)
    # delete half and compare again
    for i in rng.sample(sorted(where), len(where) // 2):
        remove(t, where.pop(i), i)
    assert t.check_structure() == []
    check_against_oracle(t, where, by_id)


@settings(max_examples=30)
@given(st.integers(0, 10**6), st.integers(0, 7))
def test_location_queries_match_brute_force(seed, k):
    rng = random.Random(seed)
    disks = random_tree_disks(rng, 25, k)
    t, where = build(disks, k)
    cells = list(t.cells)
    obs = set(rng.sample(cells, len(cells) // 2))
    for c in obs:
        t.add_obstacle(c)
    _, post = dfs_orders(set(cells))
    rank = {c: i for i, c in enumerate(post)}
    for _ in range(40):
        lv = 2 * rng.randrange(-3, 4) + tree_parity(k)
        spread = 3.0 ** rng.randrange(0, 6)
        q = cell_containing(k, lv, (rng.uniform(-spread, spread), rng.uniform(-spread, spread)))
        if rng.random() < 0.3:
            q = rng.choice(cells)
        anc = [c for c in cells if is_ancestor(c, q)]
        assert t.lowest_stored_ancestor(q) == (min(anc, key=lambda c: c.level) if anc else None)
        above = [c for c in obs if is_ancestor(c, q, strict=True)]
        assert t.lowest_obstacle_strictly_above(q) == (min(above, key=lambda c: c.level) if above else None)
        below = [c for c in obs if is_ancestor(q, c)]
        assert t.closest_obstacle_at_or_below(q) == (max(below, key=rank.get) if below else None)
