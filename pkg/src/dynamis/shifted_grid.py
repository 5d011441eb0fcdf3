"""Comparable-size engine: 2^d shifted grids, one representative per nonempty cell.

Cells are half-open, closed on the low side of every axis.  An object fits a
cell when its bounding box starts inside the cell and ends strictly before the
next one, so representatives of distinct cells of one grid never touch.
"""
from __future__ import annotations

import itertools
import math
from typing import Sequence, Union

from sortedcontainers import SortedDict, SortedList

from .errors import AssignmentFailure, DuplicateId, UnknownId
from .geometry import Disk, FatObject, disks_intersect, objects_intersect

Shape = Union[Disk, FatObject]
CellKey = tuple[int, ...]
ChangeLog = list[tuple[int, str, int]]


class GridFamily:
    """The 2^d translates of a side-L grid by {0, L/2} per axis."""

    def __init__(self, dim: int, side: float):
        if dim < 1 or not side > 0:
            raise ValueError("need dim >= 1 and a positive side")
        self.dim = dim
        self.side = float(side)
        half = self.side / 2.0
        # x varies fastest: (0,0), (h,0), (0,h), (h,h) in the plane
        self.shifts: list[tuple[float, ...]] = [
            tuple(reversed(v)) for v in itertools.product((0.0, half), repeat=dim)
        ]

    def __len__(self) -> int:
        return len(self.shifts)

    def cell_key(self, k: int, point: Sequence[float]) -> CellKey:
        return tuple(math.floor((p - s) / self.side) for p, s in zip(point, self.shifts[k]))

    def cell_bounds(self, k: int, key: CellKey) -> tuple[tuple[float, ...], tuple[float, ...]]:
        lo = tuple(i * self.side + s for i, s in zip(key, self.shifts[k]))
        return lo, tuple(v + self.side for v in lo)

    def fits(self, k: int, key: CellKey, lo: Sequence[float], hi: Sequence[float]) -> bool:
        clo, chi = self.cell_bounds(k, key)
        return all(a <= l and h < b for a, b, l, h in zip(clo, chi, lo, hi))


def _extent(obj: Shape) -> tuple[tuple[float, ...], tuple[float, ...], tuple[float, ...]]:
    if isinstance(obj, Disk):
        return (obj.x - obj.r, obj.y - obj.r), (obj.x + obj.r, obj.y + obj.r), (obj.x, obj.y)
    return obj.lo, obj.hi, obj.center


class MapOpCounter:
    """Counts operations on the ordered maps and multisets."""

    __slots__ = ("total",)

    def __init__(self):
        self.total = 0


class ShiftedGridEngine:
    """Maintains S_k, one object per nonempty cell of grid k, for every k.

    ``kind="unit"`` takes unit disks (radius at most 1, side 4);
    ``kind="fat"`` takes fat objects of size in [r1, r2] (side 2*r2).
    """

    def __init__(self, kind: str = "unit", dim: int = 2, r1: float = 1.0, r2: float = 1.0):
        if kind == "unit":
            if dim != 2:
                raise ValueError("unit disks live in the plane")
            side = 4.0
        elif kind == "fat":
            if not 0 < r1 <= r2:
                raise ValueError("need 0 < r1 <= r2")
            side = 2.0 * r2
        else:
            raise ValueError(f"unknown engine kind {kind!r}")
        self.kind = kind
        self.r1, self.r2 = r1, r2
        self.grids = GridFamily(dim, side)
        n = len(self.grids)
        self.cells: list[SortedDict] = [SortedDict() for _ in range(n)]
        self.reps: list[dict[CellKey, int]] = [{} for _ in range(n)]
        self.S: list[set[int]] = [set() for _ in range(n)]
        self.objs: dict[int, Shape] = {}
        self.where: dict[int, tuple[int, CellKey]] = {}
        self.ops = MapOpCounter()
        self.last_update_ops = 0

    # ------------------------------------------------------------ assignment

    def assign_cell(self, obj: Shape) -> tuple[int, CellKey]:
        lo, hi, center = _extent(obj)
        if len(lo) != self.grids.dim:
            raise AssignmentFailure(f"object of dimension {len(lo)} in a {self.grids.dim}-d engine")
        for k in range(len(self.grids)):
            key = self.grids.cell_key(k, center)
            if self.grids.fits(k, key, lo, hi):
                return k, key
        raise AssignmentFailure(f"object {obj.id} fits no grid; it is larger than half a cell")

    # ------------------------------------------------------------ updates

    def insert(self, obj: Shape) -> ChangeLog:
        if obj.id in self.objs:
            raise DuplicateId(obj.id)
        if self.kind == "unit" and not (isinstance(obj, Disk) and obj.r <= 1.0):
            raise AssignmentFailure(f"object {obj.id} is not a unit disk")
        k, key = self.assign_cell(obj)
        before = self.ops.total
        cells = self.cells[k]
        members = cells.get(key)
        self.ops.total += 1
        log: ChangeLog = []
        if members is None:
            members = SortedList()
            cells[key] = members
            self.ops.total += 1
        members.add(obj.id)
        self.ops.total += 1
        if key not in self.reps[k]:
            self.reps[k][key] = obj.id
            self.S[k].add(obj.id)
            log.append((k, "add", obj.id))
        self.objs[obj.id] = obj
        self.where[obj.id] = (k, key)
        self.last_update_ops = self.ops.total - before
        return log

    def delete(self, obj_id: int) -> ChangeLog:
        if obj_id not in self.objs:
            raise UnknownId(obj_id)
        k, key = self.where.pop(obj_id)
        del self.objs[obj_id]
        before = self.ops.total
        cells = self.cells[k]
        members = cells[key]
        self.ops.total += 1
        members.remove(obj_id)
        self.ops.total += 1
        log: ChangeLog = []
        if self.reps[k][key] == obj_id:
            self.S[k].discard(obj_id)
            log.append((k, "remove", obj_id))
            if members:
                nxt = members[0]
                self.ops.total += 1
                self.reps[k][key] = nxt
                self.S[k].add(nxt)
                log.append((k, "add", nxt))
            else:
                del self.reps[k][key]
        if not members:
            del cells[key]
            self.ops.total += 1
        self.last_update_ops = self.ops.total - before
        return log

    # ------------------------------------------------------------ queries

    def candidate_sets(self) -> list[set[int]]:
        return self.S

    def approx_size(self) -> int:
        return max(len(s) for s in self.S)

    def report(self) -> list[int]:
        best = max(range(len(self.S)), key=lambda k: (len(self.S[k]), -k))
        return sorted(self.S[best])

    def objects(self) -> dict[int, Shape]:
        return self.objs

    @staticmethod
    def intersects(a: Shape, b: Shape) -> bool:
        if isinstance(a, Disk) and isinstance(b, Disk):
            return disks_intersect(a, b)
        return objects_intersect(a, b)

    def __len__(self) -> int:
        return len(self.objs)

    def check_invariants(self) -> list[str]:
        errs: list[str] = []
        seen: dict[int, tuple[int, CellKey]] = {}
        for k, cells in enumerate(self.cells):
            for key, members in cells.items():
                if not members:
                    errs.append(f"grid {k} keeps empty cell {key}")
                for i in members:
                    if i in seen:
                        errs.append(f"object {i} stored twice")
                    seen[i] = (k, key)
                rep = self.reps[k].get(key)
                if rep is None or rep not in members:
                    errs.append(f"grid {k} cell {key} lacks a representative")
            if set(self.reps[k]) != set(cells.keys()):
                errs.append(f"grid {k} representatives for empty cells")
            if self.S[k] != set(self.reps[k].values()) or len(self.S[k]) != len(cells):
                errs.append(f"grid {k} S disagrees with the cell count")
            reps = sorted(self.S[k])
            for a, b in itertools.combinations(reps, 2):
                if self.intersects(self.objs[a], self.objs[b]):
                    errs.append(f"grid {k} representatives {a} and {b} intersect")
        if seen != self.where or set(seen) != set(self.objs):
            errs.append("stored objects disagree with the id index")
        for i, obj in self.objs.items():
            if self.assign_cell(obj) != self.where.get(i):
                errs.append(f"object {i} sits in the wrong cell")
        return errs
