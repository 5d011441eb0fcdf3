"""Disjointness queries through farthest-disk search, and the level tree over
one nonatree that answers "lowest ancestor cell holding a disk disjoint from
a probe".

A backend stores a multiset of disks.  ``disjoint_query(q)`` takes the disk
whose signed distance to q's center is largest (ties: smallest id) and returns
it when that distance exceeds q's radius; if the farthest disk meets q, all do.
"""
from __future__ import annotations

import math
from typing import Callable, Iterable

import numpy as np

from . import _kernels
from .errors import DuplicateId, UnknownId
from .geometry import Disk
from .nonatree import CellCoord, ancestor_at

BALANCE_ALPHA = 0.29


def _better(v: float, i: int, best_v: float, best_i: int) -> bool:
    return best_i < 0 or v > best_v or (v == best_v and i < best_i)


class LinearBackend:
    """Flat arrays with swap-delete; every query scans all disks."""

    name = "linear"
    __slots__ = ("_x", "_y", "_r", "_id", "_objs", "_pos", "_n", "queries")

    def __init__(self, capacity: int = 4):
        self._x = np.empty(capacity)
        self._y = np.empty(capacity)
        self._r = np.empty(capacity)
        self._id = np.empty(capacity, dtype=np.int64)
        self._objs: list[Disk] = []
        self._pos: dict[int, int] = {}
        self._n = 0
        self.queries = 0

    @classmethod
    def build(cls, disks: Iterable[Disk]) -> "LinearBackend":
        disks = list(disks)
        b = cls(max(4, len(disks)))
        for d in disks:
            b.insert(d)
        return b

    def __len__(self) -> int:
        return self._n

    def __contains__(self, disk_id: int) -> bool:
        return disk_id in self._pos

    def disks(self) -> list[Disk]:
        return list(self._objs)

    def insert(self, d: Disk) -> None:
        if d.id in self._pos:
            raise DuplicateId(d.id)
        n = self._n
        if n == self._x.shape[0]:
            cap = 2 * n
            for name in ("_x", "_y", "_r", "_id"):
                old = getattr(self, name)
                new = np.empty(cap, dtype=old.dtype)
                new[:n] = old
                setattr(self, name, new)
        self._x[n], self._y[n], self._r[n], self._id[n] = d.x, d.y, d.r, d.id
        self._objs.append(d)
        self._pos[d.id] = n
        self._n = n + 1

    def delete(self, disk_id: int) -> Disk:
        i = self._pos.pop(disk_id, None)
        if i is None:
            raise UnknownId(disk_id)
        last = self._n - 1
        gone = self._objs[i]
        if i != last:
            moved = self._objs[last]
            self._x[i], self._y[i], self._r[i], self._id[i] = self._x[last], self._y[last], self._r[last], self._id[last]
            self._objs[i] = moved
            self._pos[moved.id] = i
        self._objs.pop()
        self._n = last
        return gone

    def farthest(self, px: float, py: float) -> tuple[Disk | None, float]:
        n = self._n
        if n == 0:
            return None, -math.inf
        if n == 1:
            d = self._objs[0]
            dx, dy = d.x - px, d.y - py
            return d, math.sqrt(dx * dx + dy * dy) - d.r
        i, v = _kernels.ACTIVE.farthest(self._x, self._y, self._r, self._id, n, px, py)
        return self._objs[i], float(v)

    def disjoint_query(self, q: Disk) -> Disk | None:
        self.queries += 1
        d, v = self.farthest(q.x, q.y)
        return d if d is not None and v > q.r else None


class RebuildBackend:
    """Static spatial blocks rebuilt every ~sqrt(n) updates plus a small
    insertion buffer and tombstones.

    The canonical order is (radius, id); blocks are carved from it by median
    splits on the wider axis so that block bounding boxes are compact, which
    lets farthest queries skip blocks whose best possible value is too small.
    """

    name = "rebuild"

    def __init__(self):
        self._disks: dict[int, Disk] = {}
        self._buffer = LinearBackend()
        self._static_pos: dict[int, int] = {}
        self._dead = 0
        self._static: tuple | None = None
        self._static_objs: list[Disk] = []
        self.queries = 0
        self.rebuilds = 0
        self.scanned = 0

    @classmethod
    def build(cls, disks: Iterable[Disk]) -> "RebuildBackend":
        b = cls()
        for d in disks:
            if d.id in b._disks:
                raise DuplicateId(d.id)
            b._disks[d.id] = d
        b._rebuild()
        return b

    def __len__(self) -> int:
        return len(self._disks)

    def __contains__(self, disk_id: int) -> bool:
        return disk_id in self._disks

    def disks(self) -> list[Disk]:
        return list(self._disks.values())

    def insert(self, d: Disk) -> None:
        if d.id in self._disks:
            raise DuplicateId(d.id)
        self._disks[d.id] = d
        self._buffer.insert(d)
        self._maybe_rebuild()

    def delete(self, disk_id: int) -> Disk:
        d = self._disks.pop(disk_id, None)
        if d is None:
            raise UnknownId(disk_id)
        if disk_id in self._buffer:
            self._buffer.delete(disk_id)
        else:
            i = self._static_pos.pop(disk_id)
            self._static[-1][i] = False
            self._dead += 1
        self._maybe_rebuild()
        return d

    def _maybe_rebuild(self) -> None:
        churn = len(self._buffer) + self._dead
        if churn > max(4, math.isqrt(len(self._disks))):
            self._rebuild()

    def _rebuild(self) -> None:
        self.rebuilds += 1
        objs = sorted(self._disks.values(), key=lambda d: (d.r, d.id))
        self._buffer = LinearBackend()
        self._dead = 0
        m = len(objs)
        if m == 0:
            self._static = None
            self._static_objs = []
            self._static_pos = {}
            return
        xs = np.array([d.x for d in objs])
        ys = np.array([d.y for d in objs])
        size = max(8, math.isqrt(m))
        blocks: list[np.ndarray] = []
        stack = [np.arange(m)]
        while stack:
            idx = stack.pop()
            if idx.size <= size:
                blocks.append(idx)
                continue
            wx = xs[idx].max() - xs[idx].min()
            wy = ys[idx].max() - ys[idx].min()
            key = xs[idx] if wx >= wy else ys[idx]
            order = idx[np.argsort(key, kind="mergesort")]
            half = order.size // 2
            stack.append(order[half:])
            stack.append(order[:half])
        perm = np.concatenate(blocks)
        self._static_objs = [objs[i] for i in perm]
        sx, sy = xs[perm], ys[perm]
        sr = np.array([d.r for d in self._static_objs])
        sid = np.array([d.id for d in self._static_objs], dtype=np.int64)
        bounds = np.cumsum([0] + [b.size for b in blocks])
        bstart = bounds[:-1].astype(np.int64)
        bend = bounds[1:].astype(np.int64)
        bxlo = np.array([sx[s:e].min() for s, e in zip(bstart, bend)])
        bxhi = np.array([sx[s:e].max() for s, e in zip(bstart, bend)])
        bylo = np.array([sy[s:e].min() for s, e in zip(bstart, bend)])
        byhi = np.array([sy[s:e].max() for s, e in zip(bstart, bend)])
        brlo = np.array([sr[s:e].min() for s, e in zip(bstart, bend)])
        alive = np.ones(m, dtype=np.bool_)
        self._static = (bxlo, bxhi, bylo, byhi, brlo, bstart, bend, sx, sy, sr, sid, alive)
        self._static_pos = {d.id: i for i, d in enumerate(self._static_objs)}

    def farthest(self, px: float, py: float) -> tuple[Disk | None, float]:
        best, best_v = None, -math.inf
        if self._static is not None and len(self._static_pos):
            i, v, scanned = _kernels.ACTIVE.block_farthest(*self._static, px, py)
            self.scanned += int(scanned)
            if i >= 0:
                best, best_v = self._static_objs[i], float(v)
        d, v = self._buffer.farthest(px, py)
        if d is not None and _better(v, d.id, best_v, best.id if best else -1):
            best, best_v = d, v
        return best, best_v

    def disjoint_query(self, q: Disk) -> Disk | None:
        self.queries += 1
        d, v = self.farthest(q.x, q.y)
        return d if d is not None and v > q.r else None


BACKENDS: dict[str, Callable[[], object]] = {
    "linear": LinearBackend,
    "rebuild": RebuildBackend,
}


def make_backend(name: str):
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(BACKENDS)}") from None


# ------------------------------------------------------------------ level tree


class TcupNode:
    __slots__ = ("lo", "hi", "left", "right", "parent", "weight", "cells", "members")

    def __init__(self, lo: int, hi: int):
        self.lo = lo
        self.hi = hi
        self.left: TcupNode | None = None
        self.right: TcupNode | None = None
        self.parent: TcupNode | None = None
        self.weight = 0
        self.cells: dict = {}
        self.members: dict | None = None  # leaves only: id -> (disk, home cell)

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def leaves(self) -> list["TcupNode"]:
        if self.is_leaf:
            return [self]
        return self.left.leaves() + self.right.leaves()


class TcupTree:
    """Weight-balanced tree over the nonempty levels of one nonatree."""

    def __init__(self, backend_cls=LinearBackend, alpha: float = BALANCE_ALPHA):
        self.backend_cls = backend_cls
        self.alpha = alpha
        self.root: TcupNode | None = None
        self._leaves: dict[int, TcupNode] = {}
        self.backend_updates = 0
        self.backend_queries = 0
        self.rotations = 0
        self.rebuilt_disks = 0
        self.last_query_cost = 0
        self.last_update_touches = 0

    def __len__(self) -> int:
        return 0 if self.root is None else self.root.weight

    def levels(self) -> list[int]:
        return sorted(self._leaves)

    def height(self) -> int:
        def h(v):
            return 0 if v is None or v.is_leaf else 1 + max(h(v.left), h(v.right))
        return h(self.root)

    # -- backends

    @staticmethod
    def _key(c: CellCoord, level: int) -> tuple[int, int]:
        a = ancestor_at(c, level) if level != c.level else c
        return (a.ix, a.iy)

    def _backend_add(self, v: TcupNode, d: Disk, c: CellCoord) -> None:
        key = self._key(c, v.hi)
        b = v.cells.get(key)
        if b is None:
            b = v.cells[key] = self.backend_cls()
        b.insert(d)
        self.backend_updates += 1
        self.last_update_touches += 1

    def _backend_remove(self, v: TcupNode, d: Disk, c: CellCoord) -> None:
        key = self._key(c, v.hi)
        b = v.cells[key]
        b.delete(d.id)
        if not len(b):
            del v.cells[key]
        self.backend_updates += 1
        self.last_update_touches += 1

    def _rebuild_backends(self, v: TcupNode) -> None:
        groups: dict = {}
        for leaf in v.leaves():
            for d, c in leaf.members.values():
                groups.setdefault(self._key(c, v.hi), []).append(d)
        v.cells = {k: self.backend_cls.build(ds) for k, ds in groups.items()}
        self.rebuilt_disks += v.weight

    # -- structure helpers

    def _refresh_up(self, v: TcupNode | None, stale: set) -> None:
        while v is not None:
            lo, hi = v.left.lo, v.right.hi
            if hi != v.hi:
                stale.add(v)
            v.lo, v.hi = lo, hi
            v.weight = v.left.weight + v.right.weight
            v = v.parent

    def _replace_child(self, parent: TcupNode | None, old: TcupNode, new: TcupNode) -> None:
        new.parent = parent
        if parent is None:
            self.root = new
        elif parent.left is old:
            parent.left = new
        else:
            parent.right = new

    def _join(self, a: TcupNode, b: TcupNode) -> TcupNode:
        w = TcupNode(a.lo, b.hi)
        w.left, w.right = a, b
        a.parent = b.parent = w
        w.weight = a.weight + b.weight
        return w

    def _balanced_at(self, v: TcupNode) -> bool:
        if v.is_leaf:
            return True
        lim = self.alpha * v.weight
        return all(ch.is_leaf or ch.weight >= lim for ch in (v.left, v.right))

    def check_balance(self) -> list[str]:
        bad = []
        stack = [self.root] if self.root else []
        while stack:
            v = stack.pop()
            if v.is_leaf:
                if v.weight != len(v.members) or v.weight == 0:
                    bad.append(f"leaf {v.lo} weight {v.weight}")
                continue
            if v.weight != v.left.weight + v.right.weight:
                bad.append(f"node [{v.lo},{v.hi}] weight mismatch")
            if not self._balanced_at(v):
                bad.append(f"node [{v.lo},{v.hi}] unbalanced {v.left.weight}/{v.right.weight}")
            if v.left.hi >= v.right.lo or v.lo != v.left.lo or v.hi != v.right.hi:
                bad.append(f"node [{v.lo},{v.hi}] range disorder")
            stack += [v.left, v.right]
        return bad

    # -- updates

    def insert(self, d: Disk, c: CellCoord) -> None:
        self.last_update_touches = 0
        stale: set = set()
        leaf = self._leaves.get(c.level)
        if leaf is None:
            leaf = self._attach_leaf(c.level, stale)
        if d.id in leaf.members:
            raise DuplicateId(d.id)
        leaf.members[d.id] = (d, c)
        v = leaf
        while v is not None:
            if v.is_leaf:
                v.weight += 1
            else:
                v.weight = v.left.weight + v.right.weight
            if v not in stale:
                self._backend_add(v, d, c)
            v = v.parent
        for v in stale:
            self._rebuild_backends(v)
        self._rebalance_from(leaf.parent)

    def delete(self, disk_id: int, c: CellCoord) -> Disk:
        self.last_update_touches = 0
        leaf = self._leaves.get(c.level)
        if leaf is None or disk_id not in leaf.members:
            raise UnknownId(disk_id)
        d, home = leaf.members.pop(disk_id)
        v = leaf
        while v is not None:
            self._backend_remove(v, d, home)
            v.weight -= 1
            v = v.parent
        if not leaf.members:
            self._detach_leaf(leaf)
        else:
            self._rebalance_from(leaf.parent)
        return d

    def _attach_leaf(self, level: int, stale: set) -> TcupNode:
        leaf = TcupNode(level, level)
        leaf.members = {}
        self._leaves[level] = leaf
        stale.add(leaf)
        if self.root is None:
            self.root = leaf
            return leaf
        u = self.root
        while not u.is_leaf:
            u = u.left if level < u.right.lo else u.right
        parent = u.parent
        w = self._join(leaf, u) if level < u.lo else self._join(u, leaf)
        self._replace_child(parent, u, w)
        stale.add(w)
        self._refresh_up(parent, stale)
        return leaf

    def _detach_leaf(self, leaf: TcupNode) -> None:
        del self._leaves[leaf.lo]
        w = leaf.parent
        if w is None:
            self.root = None
            return
        sib = w.right if w.left is leaf else w.left
        self._replace_child(w.parent, w, sib)
        stale: set = set()
        self._refresh_up(sib.parent, stale)
        for v in stale:
            self._rebuild_backends(v)
        self._rebalance_from(sib.parent)

    # -- rebalancing

    def _rebalance_from(self, v: TcupNode | None) -> None:
        while v is not None:
            if not self._balanced_at(v):
                v = self._fix(v)
            v = v.parent

    def _fix(self, v: TcupNode) -> TcupNode:
        """Restore balance at v by a single or double rotation, falling back to
        rebuilding v's subtree; returns the node now occupying v's position."""
        heavy_left = v.left.weight > v.right.weight
        for shape in (self._single, self._double):
            parts = shape(v, heavy_left)
            if parts is None:
                continue
            top = self._assemble(parts)
            if self._all_balanced(top, parts):
                self.rotations += 1
                return self._install(v, top)
        leaves = v.leaves()
        top = self._build_balanced(leaves)
        return self._install(v, top)

    def _single(self, v: TcupNode, heavy_left: bool):
        if heavy_left:
            a = v.left
            if a.is_leaf:
                return None
            return (a.left, (a.right, v.right))
        a = v.right
        if a.is_leaf:
            return None
        return ((v.left, a.left), a.right)

    def _double(self, v: TcupNode, heavy_left: bool):
        if heavy_left:
            a = v.left
            if a.is_leaf or a.right.is_leaf:
                return None
            return ((a.left, a.right.left), (a.right.right, v.right))
        a = v.right
        if a.is_leaf or a.left.is_leaf:
            return None
        return ((v.left, a.left.left), (a.left.right, a.right))

    def _assemble(self, parts) -> TcupNode:
        if isinstance(parts, TcupNode):
            return parts
        left = self._assemble(parts[0])
        right = self._assemble(parts[1])
        w = TcupNode(left.lo, right.hi)
        w.left, w.right = left, right
        w.weight = left.weight + right.weight
        return w

    def _all_balanced(self, top: TcupNode, parts) -> bool:
        if isinstance(parts, TcupNode):
            return True
        return (self._balanced_at(top) and self._all_balanced(top.left, parts[0])
                and self._all_balanced(top.right, parts[1]))

    def _build_balanced(self, leaves: list[TcupNode]):
        if len(leaves) == 1:
            return leaves[0]
        weights = [l.weight for l in leaves]
        total = sum(weights)
        lim = self.alpha * total
        best, best_gap = None, None
        acc = 0
        for t in range(1, len(leaves)):
            acc += weights[t - 1]
            ok_left = t == 1 or acc >= lim
            ok_right = t == len(leaves) - 1 or total - acc >= lim
            if ok_left and ok_right:
                gap = abs(2 * acc - total)
                if best is None or gap < best_gap:
                    best, best_gap = t, gap
        # a valid split always exists: the first and last leaf cannot both hold
        # more than (1 - alpha) of the weight
        return (self._build_balanced(leaves[:best]), self._build_balanced(leaves[best:]))

    def _install(self, v: TcupNode, parts) -> TcupNode:
        top = parts if isinstance(parts, TcupNode) else None
        if top is None:
            top = self._assemble(parts)
        # v keeps its range and disks, so its backends carry over unchanged
        top.cells = v.cells
        self._replace_child(v.parent, v, top)
        self._link_and_build(top, top)
        return top

    def _link_and_build(self, v: TcupNode, top: TcupNode) -> None:
        if v.is_leaf:
            return
        for ch in (v.left, v.right):
            if ch.parent is not v:
                ch.parent = v
        for ch in (v.left, v.right):
            if not ch.is_leaf and not ch.cells and ch.weight:
                self._rebuild_backends(ch)
                self._link_and_build(ch, top)

    # -- queries

    def _start_leaf(self, level: int) -> TcupNode | None:
        u = self.root
        if u is None or level > u.hi:
            return None
        while not u.is_leaf:
            u = u.left if level <= u.left.hi else u.right
        return u

    def query(self, c_q: CellCoord, o_q: Disk) -> tuple[CellCoord, Disk] | None:
        """Lowest cell at or above c_q holding a disk disjoint from o_q."""
        self.last_query_cost = 0
        leaf = self._start_leaf(c_q.level)
        if leaf is None:
            return None
        cands = [leaf]
        v = leaf
        while v.parent is not None:
            if v.parent.left is v:
                cands.append(v.parent.right)
            v = v.parent
        for v in cands:
            hit = self._search(v, c_q, o_q)
            if hit is not None:
                return hit
        return None

    def _search(self, v: TcupNode, c_q: CellCoord, o_q: Disk):
        key = self._key(c_q, v.hi)
        b = v.cells.get(key)
        if b is None:
            return None
        self.backend_queries += 1
        self.last_query_cost += 1
        d = b.disjoint_query(o_q)
        if d is None:
            return None
        if v.is_leaf:
            return CellCoord(c_q.tree, v.lo, key[0], key[1]), d
        # an internal positive can come from a disk outside c_q's ancestor at
        # its own level, so confirm it in the children
        hit = self._search(v.left, c_q, o_q)
        if hit is None:
            hit = self._search(v.right, c_q, o_q)
        return hit
