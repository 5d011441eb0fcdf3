"""Compressed nonatrees over shifted 3-adic grids.

Eight trees: four half-cell shifts times level parity.  A tree edge spans two
3x3 refinements (level i to i-2), so stored cells of one tree all share the
tree's level parity.  Cells are located in three ordered maps keyed by
Q-order digit strings: every stored cell (pre-order keys) and the obstacle
cells (pre-order and post-order keys).
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

from sortedcontainers import SortedDict

from .errors import CellExists, CellMissing, LevelOverflow, PointOutsideParent
from .geometry import Box, Disk, box_contains, power_of_three

# shifts in half-cell units, in the fixed scan order
TREE_SHIFTS: tuple[tuple[int, int], ...] = ((0, 0), (1, 0), (0, 1), (1, 1))
N_TREES = 8
MAX_DEPTH = 2048
_LOG3 = math.log(3.0)


def tree_index(shift_idx: int, parity: int) -> int:
    return 4 * parity + shift_idx


def tree_shift(k: int) -> tuple[int, int]:
    return TREE_SHIFTS[k % 4]


def tree_parity(k: int) -> int:
    return k // 4


class CellCoord(NamedTuple):
    tree: int
    level: int
    ix: int
    iy: int


def bucket_of_radius(r: float) -> int:
    """Unique i with 3**(i-1)/4 < r <= 3**i/4."""
    if not (r > 0.0) or math.isinf(r) or math.isnan(r):
        raise ValueError(f"radius must be positive and finite, got {r!r}")
    i = math.ceil((math.log(r) + math.log(4.0)) / _LOG3)
    while r > side_of_level(i) / 4.0:
        i += 1
    while r <= side_of_level(i - 1) / 4.0:
        i -= 1
    return i


def side_of_level(i: int) -> float:
    try:
        return power_of_three(i)
    except OverflowError:
        return math.inf


_POW3: list[int] = [1]


def _p3(n: int) -> int:
    while len(_POW3) <= n:
        _POW3.append(_POW3[-1] * 3)
    return _POW3[n]


def _lift(ix: int, h: int, steps: int) -> int:
    if steps == 0:
        return ix
    p = _p3(steps)
    return (2 * ix + h - h * p) // (2 * p)


def _is_fixed(ix: int, h: int) -> bool:
    return ix == -1 or (h == 0 and ix == 0)


def ancestor_at(c: CellCoord, level: int) -> CellCoord:
    """Geometric ancestor of c at any level >= c.level (parity not enforced)."""
    hx, hy = tree_shift(c.tree)
    t = level - c.level
    if t < 0:
        raise ValueError("ancestor level below cell level")
    return CellCoord(c.tree, level, _lift(c.ix, hx, t), _lift(c.iy, hy, t))


def tree_parent(c: CellCoord) -> CellCoord:
    return ancestor_at(c, c.level + 2)


def is_ancestor(a: CellCoord, b: CellCoord, strict: bool = False) -> bool:
    """True iff a contains b (a is b or an ancestor of b) in the same tree."""
    if a.tree != b.tree or a.level < b.level:
        return False
    if a.level == b.level:
        return not strict and a.ix == b.ix and a.iy == b.iy
    anc = ancestor_at(b, a.level)
    return anc.ix == a.ix and anc.iy == a.iy


def lca(a: CellCoord, b: CellCoord) -> CellCoord | None:
    """Lowest common ancestor at a level of the tree's parity; None when the
    cells sit in different quadrants of an unshifted tree."""
    if a.tree != b.tree:
        raise ValueError("cells of different trees")
    hx, hy = tree_shift(a.tree)
    lv = max(a.level, b.level)
    a = ancestor_at(a, lv)
    b = ancestor_at(b, lv)
    ax, ay, bx, by = a.ix, a.iy, b.ix, b.iy
    while ax != bx or ay != by:
        if _is_fixed(ax, hx) and _is_fixed(bx, hx) and _is_fixed(ay, hy) and _is_fixed(by, hy):
            return None
        ax, ay = (ax - hx) // 3, (ay - hy) // 3
        bx, by = (bx - hx) // 3, (by - hy) // 3
        lv += 1
    if (lv - tree_parity(a.tree)) % 2:
        ax, ay = (ax - hx) // 3, (ay - hy) // 3
        lv += 1
    return CellCoord(a.tree, lv, ax, ay)


def cell_box(c: CellCoord) -> Box:
    hx, hy = tree_shift(c.tree)
    s = side_of_level(c.level)
    return Box(((c.ix + 0.5 * hx) * s, (c.iy + 0.5 * hy) * s), s, c.level)


def cell_containing(tree: int, level: int, p: tuple[float, float]) -> CellCoord:
    hx, hy = tree_shift(tree)
    s = side_of_level(level)
    return CellCoord(tree, level, math.floor(p[0] / s - 0.5 * hx), math.floor(p[1] / s - 0.5 * hy))


def locate_home_cell(d: Disk) -> CellCoord:
    i = bucket_of_radius(d.r)
    parity = i & 1
    lo = (d.x - d.r, d.y - d.r)
    hi = (d.x + d.r, d.y + d.r)
    for si in range(4):
        c = cell_containing(tree_index(si, parity), i, (d.x, d.y))
        if box_contains(cell_box(c), lo, hi):
            return c
    raise ValueError(f"disk {d.id} fits no shifted cell at level {i}")


def child_index(parent: CellCoord, p: tuple[float, float]) -> CellCoord:
    """Tree child (two refinements down) of parent that contains point p."""
    box = cell_box(parent)
    if not box_contains(box, p, p):
        raise PointOutsideParent(f"{p} outside {parent}")
    hx, hy = tree_shift(parent.tree)
    c = cell_containing(parent.tree, parent.level - 2, p)
    # clamp against float rounding on the parent's boundary
    bx, by = 9 * parent.ix + 4 * hx, 9 * parent.iy + 4 * hy
    return c._replace(ix=min(max(c.ix, bx), bx + 8), iy=min(max(c.iy, by), by + 8))


def children_one_refinement(m: int, h: int) -> tuple[int, int, int]:
    return (3 * m + h, 3 * m + h + 1, 3 * m + h + 2)


# ------------------------------------------------------------------ Q-order


def converge_level(c: CellCoord) -> int:
    """Lowest level at or above c where its ancestor is the quadrant fixed point."""
    hx, hy = tree_shift(c.tree)
    ix, iy, lv = c.ix, c.iy, c.level
    while not (_is_fixed(ix, hx) and _is_fixed(iy, hy)):
        ix, iy = (ix - hx) // 3, (iy - hy) // 3
        lv += 1
    return lv


def qkey_digits(c: CellCoord, ref_level: int) -> tuple[int, ...]:
    """Quadrant digit then one base-9 digit per refinement from ref_level down."""
    if ref_level < c.level:
        raise ValueError("reference level below cell")
    if ref_level - c.level > MAX_DEPTH:
        raise LevelOverflow(f"{ref_level - c.level} refinements exceed {MAX_DEPTH}")
    hx, hy = tree_shift(c.tree)
    ix, iy = c.ix, c.iy
    digits = []
    for _ in range(ref_level - c.level):
        px, py = (ix - hx) // 3, (iy - hy) // 3
        digits.append(3 * (iy - 3 * py - hy) + (ix - 3 * px - hx))
        ix, iy = px, py
    if not (_is_fixed(ix, hx) and _is_fixed(iy, hy)):
        raise ValueError("reference level below convergence level")
    top = 2 * (1 if iy == 0 and hy == 0 else 0) + (1 if ix == 0 and hx == 0 else 0)
    digits.append(top)
    digits.reverse()
    return tuple(digits)


POST_SENTINEL = 9


def qkey(c: CellCoord, flavor: str, ref_level: int) -> tuple[int, ...]:
    k = qkey_digits(c, ref_level)
    if flavor == "pre":
        return k
    if flavor == "post":
        return k + (POST_SENTINEL,)
    raise ValueError(f"unknown flavor {flavor!r}")


# ------------------------------------------------------------ stored tree

ROOT = None


@dataclass(slots=True)
class CellRecord:
    coord: CellCoord
    parent: CellCoord | None = None
    children: dict = field(default_factory=dict)
    disks: list[int] = field(default_factory=list)
    pre: tuple = ()
    post: tuple = ()


@dataclass
class StructuralDelta:
    touched: list[CellCoord] = field(default_factory=list)
    created: list[CellCoord] = field(default_factory=list)
    removed: list[CellCoord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.touched)


class Nonatree:
    """One compressed nonatree with its cell index and obstacle indexes."""

    def __init__(self, tree: int, max_depth: int = MAX_DEPTH, ref_margin: int = 2):
        self.tree = tree
        self.max_depth = max_depth
        self.ref_margin = ref_margin
        self.ref_level: int | None = None
        self.cells: dict[CellCoord, CellRecord] = {}
        self.root_children: dict[int, CellCoord] = {}
        self.f_cells = SortedDict()
        self.f_obs = SortedDict()
        self.f_obs_post = SortedDict()
        self.map_ops = 0
        self.key_rebuilds = 0

    # -- keys

    def _ensure_ref(self, c: CellCoord) -> None:
        need = max(c.level, converge_level(c))
        if self.ref_level is not None and need <= self.ref_level:
            if self.ref_level - c.level > self.max_depth:
                raise LevelOverflow(f"cell {c} is {self.ref_level - c.level} refinements deep")
            return
        new_ref = need + self.ref_margin
        lowest = min([c.level] + [r.coord.level for r in self.cells.values()])
        if new_ref - lowest > self.max_depth:
            raise LevelOverflow(f"tree {self.tree} would span {new_ref - lowest} refinements")
        self.ref_level = new_ref
        if self.cells:
            self._rebuild_keys()

    def _rebuild_keys(self) -> None:
        self.key_rebuilds += 1
        obs = list(self.f_obs.values())
        self.f_cells.clear()
        self.f_obs.clear()
        self.f_obs_post.clear()
        for rec in self.cells.values():
            rec.pre = qkey_digits(rec.coord, self.ref_level)
            rec.post = rec.pre + (POST_SENTINEL,)
            self.f_cells[rec.pre] = rec.coord
        for c in obs:
            rec = self.cells[c]
            self.f_obs[rec.pre] = c
            self.f_obs_post[rec.post] = c

    def pre_key(self, c: CellCoord) -> tuple:
        rec = self.cells.get(c)
        if rec is not None:
            return rec.pre
        self._ensure_ref(c)
        return qkey_digits(c, self.ref_level)

    def post_key(self, c: CellCoord) -> tuple:
        rec = self.cells.get(c)
        if rec is not None:
            return rec.post
        return self.pre_key(c) + (POST_SENTINEL,)

    # -- basic access

    def __contains__(self, c: CellCoord) -> bool:
        return c in self.cells

    def __len__(self) -> int:
        return len(self.cells)

    def record(self, c: CellCoord) -> CellRecord:
        try:
            return self.cells[c]
        except KeyError:
            raise CellMissing(c) from None

    def children(self, c: CellCoord | None) -> list[CellCoord]:
        if c is None:
            return list(self.root_children.values())
        return list(self.cells[c].children.values())

    def parent(self, c: CellCoord) -> CellCoord | None:
        return self.cells[c].parent

    def is_leaf(self, c: CellCoord) -> bool:
        return not self.cells[c].children

    def _slot(self, a: CellCoord | None, c: CellCoord):
        if a is None:
            return self.pre_key(c)[0]
        s = ancestor_at(c, a.level - 2)
        return (s.ix, s.iy)

    def _child_map(self, a: CellCoord | None) -> dict:
        return self.root_children if a is None else self.cells[a].children

    def _store(self, c: CellCoord) -> CellRecord:
        rec = CellRecord(c)
        rec.pre = qkey_digits(c, self.ref_level)
        rec.post = rec.pre + (POST_SENTINEL,)
        self.cells[c] = rec
        self.f_cells[rec.pre] = c
        self.map_ops += 1
        return rec

    def _unstore(self, c: CellCoord) -> None:
        rec = self.cells.pop(c)
        del self.f_cells[rec.pre]
        self.map_ops += 1
        if rec.pre in self.f_obs:
            del self.f_obs[rec.pre]
            del self.f_obs_post[rec.post]
            self.map_ops += 2

    # -- structural updates

    def insert_cell(self, c: CellCoord) -> StructuralDelta:
        if c.tree != self.tree:
            raise ValueError("cell belongs to another tree")
        if c in self.cells:
            raise CellExists(c)
        self._ensure_ref(c)
        a = self.lowest_stored_ancestor(c)
        slot = self._slot(a, c)
        siblings = self._child_map(a)
        x = siblings.get(slot)
        rec = self._store(c)
        delta = StructuralDelta()
        if x is None:
            siblings[slot] = c
            rec.parent = a
            delta.touched = [c] if a is None else [a, c]
        elif is_ancestor(c, x):
            rec.children[self._slot(c, x)] = x
            self.cells[x].parent = c
            siblings[slot] = c
            rec.parent = a
            delta.touched = [c, x] if a is None else [a, c, x]
        else:
            m = lca(c, x)
            # parity rounding can lift m one level past the reference level
            self._ensure_ref(m)
            mrec = self._store(m)
            mrec.children[self._slot(m, c)] = c
            mrec.children[self._slot(m, x)] = x
            mrec.parent = a
            siblings[slot] = m
            rec.parent = m
            self.cells[x].parent = m
            delta.touched = [m, c, x] if a is None else [a, m, c, x]
            delta.created.append(m)
        delta.created.append(c)
        return delta

    def delete_cell(self, c: CellCoord) -> StructuralDelta:
        rec = self.record(c)
        if rec.disks:
            raise ValueError(f"cell {c} still holds disks")
        if len(rec.children) >= 2:
            raise ValueError(f"cell {c} merges subtrees and cannot be removed")
        p = rec.parent
        siblings = self._child_map(p)
        slot = self._slot(p, c)
        delta = StructuralDelta(removed=[c])
        if rec.children:
            (y,) = rec.children.values()
            siblings[slot] = y
            self.cells[y].parent = p
            self._unstore(c)
            delta.touched = [c, y] if p is None else [p, c, y]
            return delta
        del siblings[slot]
        self._unstore(c)
        delta.touched = [c] if p is None else [p, c]
        if p is not None:
            prec = self.cells[p]
            if not prec.disks and len(prec.children) == 1:
                (y,) = prec.children.values()
                pp = prec.parent
                psib = self._child_map(pp)
                psib[self._slot(pp, p)] = y
                self.cells[y].parent = pp
                self._unstore(p)
                delta.removed.append(p)
                delta.touched += [y] if pp is None else [pp, y]
        return delta

    def add_disk(self, c: CellCoord, disk_id: int) -> None:
        bisect.insort(self.record(c).disks, disk_id)

    def remove_disk(self, c: CellCoord, disk_id: int) -> None:
        disks = self.record(c).disks
        i = bisect.bisect_left(disks, disk_id)
        if i == len(disks) or disks[i] != disk_id:
            raise KeyError(disk_id)
        del disks[i]

    # -- location queries

    def _lowest_in(self, index: SortedDict, c: CellCoord, include_self: bool) -> CellCoord | None:
        key = self.pre_key(c)
        target = c
        while True:
            pos = index.bisect_right(key) if include_self else index.bisect_left(key)
            self.map_ops += 1
            if pos == 0:
                return None
            p = index.peekitem(pos - 1)[1]
            if is_ancestor(p, target, strict=not include_self):
                return p
            m = lca(p, target)
            if m is None:
                return None
            # every stored ancestor of target lies at or above lca(p, target)
            target, key, include_self = m, self.pre_key(m), True

    def lowest_stored_ancestor(self, c: CellCoord, obstacles: bool = False) -> CellCoord | None:
        """c itself if stored, else its lowest stored ancestor, else None (root)."""
        return self._lowest_in(self.f_obs if obstacles else self.f_cells, c, True)

    def lowest_obstacle_strictly_above(self, c: CellCoord) -> CellCoord | None:
        return self._lowest_in(self.f_obs, c, False)

    def closest_obstacle_at_or_below(self, c: CellCoord) -> CellCoord | None:
        key = self.post_key(c)
        pos = self.f_obs_post.bisect_right(key)
        self.map_ops += 1
        if pos == 0:
            return None
        p = self.f_obs_post.peekitem(pos - 1)[1]
        return p if is_ancestor(c, p) else None

    # -- obstacle registry

    def is_obstacle(self, c: CellCoord) -> bool:
        rec = self.cells.get(c)
        return rec is not None and rec.pre in self.f_obs

    def add_obstacle(self, c: CellCoord) -> None:
        rec = self.record(c)
        if rec.pre not in self.f_obs:
            self.f_obs[rec.pre] = c
            self.f_obs_post[rec.post] = c
            self.map_ops += 2

    def remove_obstacle(self, c: CellCoord) -> None:
        rec = self.record(c)
        if rec.pre in self.f_obs:
            del self.f_obs[rec.pre]
            del self.f_obs_post[rec.post]
            self.map_ops += 2

    def obstacles(self) -> list[CellCoord]:
        return list(self.f_obs.values())

    # -- inspection

    def preorder(self) -> list[CellCoord]:
        return list(self.f_cells.values())

    def disk_count(self) -> int:
        return sum(len(r.disks) for r in self.cells.values())

    def dump(self, flags: Callable[[CellCoord], Iterable[str]] | None = None) -> str:
        lines = []
        for c in self.f_cells.values():
            fl = list(flags(c)) if flags else []
            if self.cells[c].disks and "relevant" not in fl:
                fl.append("relevant")
            lines.append(f"{c.tree} {c.level} {c.ix} {c.iy} {'|'.join(fl) or '-'}")
        return "\n".join(lines) + ("\n" if lines else "")

    def check_structure(self) -> list[str]:
        """Consistency of links, compression and index contents (tests only)."""
        errs = []
        if len(self.f_cells) != len(self.cells):
            errs.append("F_c size mismatch")
        for c, rec in self.cells.items():
            if c.level % 2 != tree_parity(self.tree) % 2:
                errs.append(f"{c} has wrong level parity")
            if self.f_cells.get(rec.pre) != c:
                errs.append(f"{c} missing from F_c")
            if not rec.disks and len(rec.children) < 2:
                errs.append(f"{c} is neither relevant nor branching")
            p = rec.parent
            if p is not None:
                if not is_ancestor(p, c, strict=True):
                    errs.append(f"{c} parent {p} is not an ancestor")
                if self.cells[p].children.get(self._slot(p, c)) != c:
                    errs.append(f"{c} not linked from parent")
            elif self.root_children.get(self._slot(None, c)) != c:
                errs.append(f"{c} not linked from root")
            for slot, ch in rec.children.items():
                if self.cells[ch].parent != c or self._slot(c, ch) != slot:
                    errs.append(f"child link {c}->{ch} inconsistent")
        n_disks = self.disk_count()
        if len(self.cells) > 2 * n_disks + 1:
            errs.append(f"{len(self.cells)} cells for {n_disks} disks")
        return errs
