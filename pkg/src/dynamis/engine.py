"""Arbitrary-radius disk engine.

Each of the eight nonatrees (a "shard") keeps an independent set S with
3-clearance, a set B of barrier disks, the map beta from obstacle cells to
barriers, and its obstacle registry.  Updates touch exactly one shard.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .dfn import make_backend
from .errors import CellOccupied, DuplicateId, NotPresent, UnknownId
from .geometry import DERIVED_ID, Disk, disks_intersect, scale_disk, smallest_enclosing_disk_of_cell
from .nonatree import (
    N_TREES,
    CellCoord,
    Nonatree,
    cell_box,
    is_ancestor,
    locate_home_cell,
    tree_parity,
)

CHANGELOG_CAP = 16
GREEDY_CAP = 64
CLEARANCE = 3.0

ChangeLog = list[tuple[int, str, int]]


@lru_cache(maxsize=1 << 16)
def obstacle_disk(c: CellCoord) -> Disk:
    """Three times the smallest disk enclosing cell c."""
    return scale_disk(smallest_enclosing_disk_of_cell(cell_box(c)), CLEARANCE)


def _accept_all(c: CellCoord) -> Disk:
    # probe of the synthetic bottom obstacle: every stored disk is "disjoint"
    cx, cy = cell_box(c).center
    return Disk(DERIVED_ID, cx, cy, -math.inf, derived=True)


def cell_label(c: CellCoord) -> str:
    return f"{c.level}:{c.ix}:{c.iy}"


@dataclass
class EngineStats:
    greedy_max_iters: int = 0
    greedy_cap_trips: int = 0
    changelog_max: int = 0
    changelog_cap_trips: int = 0
    clearance_violations: int = 0
    cases: dict = field(default_factory=lambda: dict.fromkeys(
        ("a", "b", "b_hit", "merge", "merge_hit", "c", "c_reassign", "c_promote", "purge_3d"), 0))


class Shard:
    def __init__(self, k: int, backend_cls):
        self.k = k
        self.tree = Nonatree(k)
        from .dfn import TcupTree
        self.tcup = TcupTree(backend_cls)
        self.s_at: dict[CellCoord, int] = {}
        self.b_at: dict[CellCoord, int] = {}
        self.beta: dict[CellCoord, int] = {}
        self.beta_of: dict[int, CellCoord] = {}
        self.kind: dict[CellCoord, str] = {}
        self.S: set[int] = set()
        self.B: set[int] = set()


class DiskEngine:
    """Approximate maximum independent set of dynamic disks of any radii."""

    def __init__(self, backend: str = "linear", instrument: bool = False):
        cls = make_backend(backend)
        self.backend = backend
        self.shards = [Shard(k, cls) for k in range(N_TREES)]
        self.disks: dict[int, Disk] = {}
        self.home: dict[int, CellCoord] = {}
        self.instrument = instrument
        self.stats = EngineStats()
        self.last_shard: int | None = None
        self._log: ChangeLog = []

    # ------------------------------------------------------------ queries

    def candidate_sets(self) -> list[set[int]]:
        return [sh.S for sh in self.shards]

    def approx_size(self) -> int:
        return max(len(sh.S) for sh in self.shards)

    def report(self) -> list[int]:
        best = max(range(N_TREES), key=lambda k: (len(self.shards[k].S), -k))
        return sorted(self.shards[best].S)

    def objects(self) -> dict[int, Disk]:
        return self.disks

    @staticmethod
    def intersects(a: Disk, b: Disk) -> bool:
        return disks_intersect(a, b)

    def __len__(self) -> int:
        return len(self.disks)

    # ------------------------------------------------------- subroutines

    def add_to_S(self, sh: Shard, d: Disk, c: CellCoord) -> None:
        if c in sh.s_at or c in sh.b_at:
            raise CellOccupied(c)
        sh.s_at[c] = d.id
        sh.S.add(d.id)
        sh.kind[c] = "true"
        sh.tree.add_obstacle(c)
        self._log.append((sh.k, "add", d.id))
        if self.instrument:
            self._check_local_clearance(sh, c)

    def remove_from_S(self, sh: Shard, d_id: int, c: CellCoord) -> None:
        if sh.s_at.get(c) != d_id:
            raise NotPresent(d_id)
        del sh.s_at[c]
        sh.S.discard(d_id)
        if self._merges(sh, c):
            sh.kind[c] = "merge"
        else:
            del sh.kind[c]
            sh.tree.remove_obstacle(c)
        self._log.append((sh.k, "remove", d_id))

    def _merges(self, sh: Shard, c: CellCoord) -> bool:
        n = 0
        for x in sh.tree.children(c):
            if sh.tree.closest_obstacle_at_or_below(x) is not None:
                n += 1
                if n == 2:
                    return True
        return False

    def _purge_beta(self, sh: Shard, c: CellCoord) -> None:
        b = sh.beta.pop(c, None)
        if b is None:
            return
        del sh.beta_of[b]
        del sh.b_at[self.home[b]]
        sh.B.discard(b)

    def _set_beta(self, sh: Shard, c: CellCoord, b: int) -> None:
        sh.beta[c] = b
        sh.beta_of[b] = c
        sh.b_at[self.home[b]] = b
        sh.B.add(b)

    def greedy_is(self, sh: Shard, c1: CellCoord | None, c2: CellCoord | None,
                  start: CellCoord) -> CellCoord | None:
        """Add disks bottom-up on the ascending path strictly between c1 and
        c2; returns the highest obstacle cell reached (c1 if none added).

        c1 None is the synthetic bottom below ``start``; c2 None is unbounded.
        """
        probe = obstacle_disk(c1) if c1 is not None else _accept_all(start)
        hit = sh.tcup.query(c1 if c1 is not None else start, probe)
        c_o = c1
        iters = 0
        while hit is not None:
            c_star, d = hit
            # the found cell must sit directly on the path above c_o
            if sh.tree.closest_obstacle_at_or_below(c_star) != c_o:
                break
            if c2 is not None and not is_ancestor(c2, c_star, strict=True):
                break
            iters += 1
            self.add_to_S(sh, d, c_star)
            c_o = c_star
            if iters > GREEDY_CAP:
                self.stats.greedy_cap_trips += 1
            hit = sh.tcup.query(c_o, obstacle_disk(c_o))
        self.stats.greedy_max_iters = max(self.stats.greedy_max_iters, iters)
        return c_o

    def update_is(self, sh: Shard, c: CellCoord) -> None:
        tree = sh.tree
        c_o = tree.closest_obstacle_at_or_below(c)
        if c_o is not None:
            self._purge_beta(sh, c_o)
        c_minus = tree.lowest_obstacle_strictly_above(c_o if c_o is not None else c)
        d_minus = sh.s_at.get(c_minus) if c_minus is not None else None
        cases = self.stats.cases
        if d_minus is None:
            cases["a"] += 1
            self.greedy_is(sh, c_o, c_minus, c)
            return
        dm = self.disks[d_minus]
        if self._merges(sh, c_minus):
            # c_minus stays an obstacle without d_minus, so a hit only drops d_minus
            cases["merge"] += 1
            top = self.greedy_is(sh, c_o, c_minus, c)
            if top is not None and disks_intersect(obstacle_disk(top), dm):
                cases["merge_hit"] += 1
                self.remove_from_S(sh, d_minus, c_minus)
            return
        if c_minus not in sh.beta:
            cases["b"] += 1
            top = self.greedy_is(sh, c_o, c_minus, c)
            if top is not None and disks_intersect(obstacle_disk(top), dm):
                cases["b_hit"] += 1
                self.remove_from_S(sh, d_minus, c_minus)
                self._set_beta(sh, top, d_minus)
            return
        cases["c"] += 1
        b = sh.beta[c_minus]
        c_b = self.home[b]
        self.remove_from_S(sh, d_minus, c_minus)
        top = self.greedy_is(sh, c_o, c_b, c)
        del sh.beta[c_minus]
        del sh.beta_of[b]
        if top is not None and disks_intersect(obstacle_disk(top), self.disks[b]):
            cases["c_reassign"] += 1
            sh.beta[top] = b
            sh.beta_of[b] = top
        else:
            cases["c_promote"] += 1
            del sh.b_at[c_b]
            sh.B.discard(b)
            self.add_to_S(sh, self.disks[b], c_b)

    # ------------------------------------------------------------ updates

    def insert(self, d: Disk) -> ChangeLog:
        if d.id in self.disks:
            raise DuplicateId(d.id)
        if d.derived or not (d.r > 0.0 and math.isfinite(d.r) and math.isfinite(d.x) and math.isfinite(d.y)):
            raise ValueError(f"invalid input disk {d!r}")
        c = locate_home_cell(d)
        sh = self.shards[c.tree]
        tree = sh.tree
        self._log = []
        self.last_shard = sh.k
        self.disks[d.id] = d
        self.home[d.id] = c
        if c in tree:
            tree.add_disk(c, d.id)
        else:
            tree.insert_cell(c)
            tree.add_disk(c, d.id)
            if tree.is_leaf(c):
                self.add_to_S(sh, d, c)
                p = tree.parent(c)
                if p is not None and sh.kind.get(p) != "merge" and self._merges(sh, p):
                    self._new_merge(sh, p, c)
        sh.tcup.insert(d, c)
        self.update_is(sh, c)
        return self._finish()

    def _new_merge(self, sh: Shard, p: CellCoord, c: CellCoord) -> None:
        tree = sh.tree
        # barriers whose ascending path now crosses p lose their meaning;
        # p equal to the barrier cell keeps it (strictly-between reading)
        for x in tree.children(p):
            if x == c:
                continue
            c_o = tree.closest_obstacle_at_or_below(x)
            if c_o is None or c_o not in sh.beta:
                continue
            c_b = self.home[sh.beta[c_o]]
            if is_ancestor(c_b, p, strict=True) and is_ancestor(p, c_o, strict=True):
                self.stats.cases["purge_3d"] += 1
                self._purge_beta(sh, c_o)
        if p in sh.s_at:
            self.remove_from_S(sh, sh.s_at[p], p)
        else:
            sh.kind[p] = "merge"
            tree.add_obstacle(p)
        self.update_is(sh, p)

    def delete(self, disk_id: int) -> ChangeLog:
        d = self.disks.get(disk_id)
        if d is None:
            raise UnknownId(disk_id)
        c = self.home[disk_id]
        sh = self.shards[c.tree]
        tree = sh.tree
        self._log = []
        self.last_shard = sh.k
        # S and barrier bookkeeping first, so structural removal never meets
        # a cell that still carries a role
        if sh.s_at.get(c) == disk_id:
            self.remove_from_S(sh, disk_id, c)
            self._purge_beta(sh, c)
        elif disk_id in sh.beta_of:
            self._purge_beta(sh, sh.beta_of[disk_id])
        sh.tcup.delete(disk_id, c)
        tree.remove_disk(c, disk_id)
        del self.disks[disk_id]
        del self.home[disk_id]
        target: CellCoord | None = c
        rec = tree.record(c)
        if not rec.disks and len(rec.children) < 2:
            p = rec.parent
            was_leaf = not rec.children
            self._forget_cell(sh, c)
            delta = tree.delete_cell(c)
            if not was_leaf:
                target = p
            elif p is not None and p in delta.removed:
                # p was a merge cell left with one child and no disks
                self._forget_cell(sh, p)
                target = delta.touched[-1]
            else:
                target = p
                if p is not None:
                    self._after_child_loss(sh, p)
        if target is not None:
            self.update_is(sh, target)
        return self._finish()

    def _forget_cell(self, sh: Shard, c: CellCoord) -> None:
        self._purge_beta(sh, c)
        if sh.kind.pop(c, None) is not None and c in sh.tree:
            sh.tree.remove_obstacle(c)

    def _after_child_loss(self, sh: Shard, p: CellCoord) -> None:
        tree = sh.tree
        if sh.kind.get(p) == "merge" and not self._merges(sh, p):
            self._forget_cell(sh, p)
        if tree.is_leaf(p) and p not in sh.s_at:
            rec = tree.record(p)
            self._forget_cell(sh, p)
            self.add_to_S(sh, self.disks[rec.disks[0]], p)

    def _finish(self) -> ChangeLog:
        log = self._log
        self._log = []
        self.stats.changelog_max = max(self.stats.changelog_max, len(log))
        if len(log) > CHANGELOG_CAP:
            self.stats.changelog_cap_trips += 1
        return log

    # ------------------------------------------------------ instrumentation

    def _check_local_clearance(self, sh: Shard, c: CellCoord) -> None:
        """A fresh obstacle may meet at most the S disk of the next obstacle above."""
        o = obstacle_disk(c)
        tree = sh.tree
        nxt = tree.lowest_obstacle_strictly_above(c)
        hits = []
        a = tree.parent(c)
        while a is not None:
            s = sh.s_at.get(a)
            if s is not None and disks_intersect(o, self.disks[s]):
                hits.append(a)
            a = tree.parent(a)
        if len(hits) > 1 or (hits and hits[0] != nxt):
            self.stats.clearance_violations += 1

    # ----------------------------------------------------------- auditing

    def check_invariants(self, k: int | None = None) -> list[str]:
        """Exhaustive check of the shard invariants; returns violation strings."""
        ks = range(N_TREES) if k is None else [k]
        out: list[str] = []
        for kk in ks:
            out += [f"tree {kk}: {m}" for m in self._audit_shard(self.shards[kk])]
        if k is None:
            owned = sum(sh.tree.disk_count() for sh in self.shards)
            if owned != len(self.disks):
                out.append(f"{owned} disks stored in trees, {len(self.disks)} live")
        return out

    def _audit_shard(self, sh: Shard) -> list[str]:
        errs: list[str] = list(sh.tree.check_structure())
        tree = sh.tree
        cells = tree.preorder()
        index = {c: i for i, c in enumerate(cells)}
        nc = len(cells)
        # strict ancestor matrix from parent links (links themselves checked above)
        above = np.zeros((nc, nc), dtype=np.bool_)
        for i, c in enumerate(cells):
            a = tree.parent(c)
            while a is not None:
                above[index[a], i] = True
                a = tree.parent(a)
        at_or_above = above | np.eye(nc, dtype=np.bool_)

        # inv 1-2: assignment
        ids, cidx = [], []
        for c in cells:
            for i in tree.record(c).disks:
                ids.append(i)
                cidx.append(index[c])
                d = self.disks.get(i)
                if d is None:
                    errs.append(f"disk {i} stored but not live")
                    continue
                if self.home.get(i) != c or locate_home_cell(d) != c:
                    errs.append(f"disk {i} stored at {c}, belongs at {locate_home_cell(d)}")
                if c.level % 2 != tree_parity(sh.k) % 2:
                    errs.append(f"disk {i} at wrong parity level {c.level}")
        if len(ids) != len(set(ids)):
            errs.append("a disk is stored twice")
        if len(sh.tcup) != len(ids):
            errs.append(f"level tree holds {len(sh.tcup)} disks, nonatree {len(ids)}")
        errs += [f"level tree: {m}" for m in sh.tcup.check_balance()]
        where = dict(zip(ids, cidx))

        # inv 3a-3b
        if sh.S & sh.B:
            errs.append(f"S and B share {sorted(sh.S & sh.B)}")
        if set(sh.s_at.values()) != sh.S or len(sh.s_at) != len(sh.S):
            errs.append("S registry inconsistent")
        if set(sh.b_at.values()) != sh.B or len(sh.b_at) != len(sh.B):
            errs.append("B registry inconsistent")
        for reg, name in ((sh.s_at, "S"), (sh.b_at, "B")):
            for c, i in reg.items():
                if c not in index or self.home.get(i) != c:
                    errs.append(f"{name} disk {i} not stored at {c}")
        both = set(sh.s_at) & set(sh.b_at)
        if both:
            errs.append(f"cells with two roles: {sorted(both)}")

        s_cells = [c for c in sh.s_at if c in index]
        s_disks = [self.disks[sh.s_at[c]] for c in s_cells]
        s_ci = np.array([index[c] for c in s_cells], dtype=np.int64)
        K = _kernels.ACTIVE.cross_intersect

        def arrs(ds):
            return (np.array([d.x for d in ds], dtype=float), np.array([d.y for d in ds], dtype=float),
                    np.array([d.r for d in ds], dtype=float))

        # inv 3c: independence and clearance against lower S cells
        if s_disks:
            sx, sy, sr = arrs(s_disks)
            hit = K(sx, sy, sr, sx, sy, sr)
            np.fill_diagonal(hit, False)
            if hit.any():
                i, j = np.argwhere(hit)[0]
                errs.append(f"S disks {s_disks[i].id} and {s_disks[j].id} intersect")
            ox, oy, orr = arrs([obstacle_disk(c) for c in s_cells])
            clash = K(sx, sy, sr, ox, oy, orr) & above[np.ix_(s_ci, s_ci)]
            if clash.any():
                i, j = np.argwhere(clash)[0]
                errs.append(f"S disk {s_disks[i].id} violates clearance of {s_cells[j]}")

        # inv 4a-4b: obstacle registry
        has_s = np.zeros(nc, dtype=np.bool_)
        has_s[s_ci] = True
        sub = has_s.copy()
        for c in reversed(cells):
            p = tree.parent(c)
            if p is not None and sub[index[c]]:
                sub[index[p]] = True
        expect = {}
        for c in cells:
            if has_s[index[c]]:
                expect[c] = "true"
            elif sum(1 for x in tree.children(c) if sub[index[x]]) >= 2:
                expect[c] = "merge"
        if expect != sh.kind:
            diff = sorted(set(expect.items()) ^ set(sh.kind.items()))
            errs.append(f"obstacle registry differs: {diff[:4]}")
        if set(tree.obstacles()) != set(sh.kind):
            errs.append("obstacle index differs from registry")
        if any(tree.f_obs_post.get(tree.record(c).post) != c for c in sh.kind if c in index):
            errs.append("post-order obstacle index incomplete")

        # inv 4c: beta is a bijection onto B along obstacle-free stretches
        if set(sh.beta.values()) != sh.B or len(sh.beta) != len(sh.B):
            errs.append("beta is not a bijection onto B")
        if any(sh.beta.get(c) != b for b, c in sh.beta_of.items()) or len(sh.beta_of) != len(sh.beta):
            errs.append("beta inverse map stale")
        role = {c for c in sh.kind} | set(sh.b_at)
        for c_o, b in sh.beta.items():
            c_b = self.home.get(b)
            if c_o not in sh.kind:
                errs.append(f"beta key {c_o} is not an obstacle")
                continue
            if c_b not in index or not above[index[c_b], index[c_o]]:
                errs.append(f"barrier {b} not above its obstacle {c_o}")
                continue
            between = above[index[c_b]] & above[:, index[c_o]]
            for x in np.flatnonzero(between):
                if cells[x] in role:
                    errs.append(f"role cell {cells[x]} between barrier {b} and {c_o}")
        if len(sh.B) > 2 * len(sh.S):
            errs.append(f"|B|={len(sh.B)} exceeds 2|S|={2 * len(sh.S)}")

        # inv 4d: barrier clearance against higher S disks
        b_cells = list(sh.b_at)
        if b_cells and s_disks:
            bx, by, br = arrs([obstacle_disk(c) for c in b_cells])
            bi = np.array([index[c] for c in b_cells if c in index], dtype=np.int64)
            if bi.size == len(b_cells):
                clash = K(bx, by, br, sx, sy, sr) & above[np.ix_(s_ci, bi)].T
                if clash.any():
                    i, j = np.argwhere(clash)[0]
                    errs.append(f"barrier cell {b_cells[i]} clearance meets S disk {s_disks[j].id}")

        # inv 5: domination
        rest = [i for i in ids if i not in sh.S]
        if rest:
            guards = list(sh.kind) + b_cells
            gi = np.array([index[c] for c in guards if c in index], dtype=np.int64)
            if not guards or gi.size != len(guards):
                errs.append(f"{len(rest)} disks undominated")
            else:
                rd = [self.disks[i] for i in rest]
                rx, ry, rr = arrs(rd)
                gx, gy, gr = arrs([obstacle_disk(c) for c in guards])
                ri = np.array([where[i] for i in rest], dtype=np.int64)
                ok = (K(rx, ry, rr, gx, gy, gr) & at_or_above[np.ix_(ri, gi)]).any(axis=1)
                for i in np.flatnonzero(~ok):
                    errs.append(f"disk {rd[i].id} undominated")
        return errs

    # --------------------------------------------------------------- dumps

    def snapshot(self) -> str:
        lines = []
        for sh in self.shards:
            lines.append(f"TREE {sh.k}")
            lines += [f"S {i}" for i in sorted(sh.S)]
            lines += [f"B {b} beta {cell_label(c)}" for c, b in sorted(sh.beta.items(), key=lambda t: t[1])]
            lines += [f"OBS {cell_label(c)} {kind}" for c, kind in
                      sorted(sh.kind.items(), key=lambda t: sh.tree.record(t[0]).pre)]
        return "\n".join(lines) + "\n"

    def dump_tree(self, k: int) -> str:
        sh = self.shards[k]

        def flags(c):
            fl = []
            if c in sh.kind:
                fl.append("obstacle")
            if c in sh.b_at:
                fl.append("barrier")
            return fl
        return sh.tree.dump(flags)
