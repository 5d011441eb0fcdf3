"""Brute-force views of a compressed nonatree, built from geometry alone."""
import math

from dynamis.nonatree import ancestor_at, cell_box, converge_level, tree_shift


def expected_cells(relevant: set, tree: int) -> set:
    """Relevant cells plus every cell whose strict descendants among the
    relevant cells fall into at least two different child slots."""
    if not relevant:
        return set()
    top = max(max(c.level, converge_level(c)) for c in relevant) + 4
    slots: dict = {}
    for r in relevant:
        lv = r.level + 2
        while lv <= top:
            slots.setdefault(ancestor_at(r, lv), set()).add(ancestor_at(r, lv - 2))
            lv += 2
    return set(relevant) | {x for x, s in slots.items() if len(s) >= 2}


def stored_parent(c, cells: set, top: int):
    """Lowest strict ancestor of c in cells, by walking up the levels."""
    lv = c.level + 2
    while lv <= top:
        a = ancestor_at(c, lv)
        if a in cells:
            return a
        lv += 2
    return None


def _root_rank(c):
    hx, hy = tree_shift(c.tree)
    cx, cy = cell_box(c).center
    return 2 * (hy == 0 and cy >= 0) + (hx == 0 and cx >= 0)


def _child_rank(p, c):
    pb = cell_box(p)
    cx, cy = cell_box(c).center
    fx, fy = (cx - pb.corner[0]) / pb.side, (cy - pb.corner[1]) / pb.side
    digits = []
    for _ in range(p.level - c.level):
        gx, gy = math.floor(3 * fx), math.floor(3 * fy)
        digits.append(3 * gy + gx)
        fx, fy = 3 * fx - gx, 3 * fy - gy
    return tuple(digits)


def dfs_orders(cells: set) -> tuple[list, list]:
    top = max((max(c.level, converge_level(c)) for c in cells), default=0) + 4
    parent = {c: stored_parent(c, cells, top) for c in cells}
    kids = {c: [] for c in cells}
    roots = []
    for c, p in parent.items():
        (roots if p is None else kids[p]).append(c)
    pre, post = [], []

    def walk(c):
        pre.append(c)
        for x in sorted(kids[c], key=lambda x: _child_rank(c, x)):
            walk(x)
        post.append(c)

    for r in sorted(roots, key=_root_rank):
        walk(r)
    return pre, post
