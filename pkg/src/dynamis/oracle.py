"""Ground truth for tests: exact MIS, packing probes and reference scans.

Nothing here is on an engine's update path; every routine favors being
obviously right over being fast.
"""
from __future__ import annotations

import itertools
import math
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import TooLarge
from .geometry import Disk, disks_intersect, signed_distance
from .nonatree import CellCoord, ancestor_at, locate_home_cell, side_of_level

MAX_EXACT = 30
PROBE_SEED = 20240917


class IntersectionGraph:
    """Vertices are object ids in increasing order; adjacency is closed intersection."""

    def __init__(self, objs: Iterable, intersects: Callable | None = None):
        self.objs = sorted(objs, key=lambda o: o.id)
        self.ids = [o.id for o in self.objs]
        n = len(self.objs)
        if intersects is None and all(isinstance(o, Disk) for o in self.objs):
            xs = np.array([o.x for o in self.objs], dtype=np.float64)
            ys = np.array([o.y for o in self.objs], dtype=np.float64)
            rs = np.array([o.r for o in self.objs], dtype=np.float64)
            mat = np.asarray(_kernels.ACTIVE.cross_intersect(xs, ys, rs, xs, ys, rs)).copy()
        else:
            meets = intersects or disks_intersect
            mat = np.zeros((n, n), dtype=bool)
            for i, j in itertools.combinations(range(n), 2):
                mat[i, j] = mat[j, i] = bool(meets(self.objs[i], self.objs[j]))
        np.fill_diagonal(mat, False)
        self.matrix = mat

    def __len__(self) -> int:
        return len(self.ids)

    def neighbors(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.matrix[i])]

    def masks(self) -> list[int]:
        return [sum(1 << j for j in self.neighbors(i)) for i in range(len(self))]

    def is_independent(self, idx: Iterable[int]) -> bool:
        idx = list(idx)
        return not self.matrix[np.ix_(idx, idx)].any()


def _greedy_size(adj: list[int], n: int) -> int:
    # min-degree greedy; only a lower bound to seed the search
    alive = (1 << n) - 1
    size = 0
    while alive:
        v = min((i for i in range(n) if alive >> i & 1), key=lambda i: (bin(adj[i] & alive).count("1"), i))
        alive &= ~((1 << v) | adj[v])
        size += 1
    return size


def exact_mis(objs: Sequence, intersects: Callable | None = None) -> set[int]:
    """A maximum independent set; among those, the lexicographically smallest
    sorted id tuple."""
    if len(objs) > MAX_EXACT:
        raise TooLarge(f"{len(objs)} objects, limit {MAX_EXACT}")
    g = IntersectionGraph(objs, intersects)
    n = len(g)
    if n == 0:
        return set()
    adj = g.masks()
    threshold = _greedy_size(adj, n) - 1
    mask = int(_kernels.ACTIVE.mis_search(np.array(adj, dtype=np.int64), n, threshold))
    if mask < 0:
        raise AssertionError("search missed a set as large as the greedy bound")
    return {g.ids[i] for i in range(n) if mask >> i & 1}


def brute_force_mis_size(objs: Sequence, intersects: Callable | None = None) -> int:
    """Exhaustive enumeration over all subsets; for cross-checks on small inputs."""
    g = IntersectionGraph(objs, intersects)
    adj = g.masks()
    best = 0
    for mask in range(1 << len(g)):
        size = bin(mask).count("1")
        if size <= best:
            continue
        if all(not (adj[i] & mask) for i in range(len(g)) if mask >> i & 1):
            best = size
    return best


# ------------------------------------------------------------ packing probes


def _lattice(lo: float, hi: float, extent: float, gap: float) -> list[float]:
    # starting points of disjoint closed intervals of length extent in [lo, hi]
    out = []
    x = lo
    while x + extent <= hi:
        out.append(x)
        x += extent + gap
    return out


def cell_packing_probe(level: int, samples: int, seed: int = PROBE_SEED,
                       radius: float | None = None) -> int:
    """Largest disjoint family of bucket-``level`` disks found inside one cell
    of side 3^level.  Proposals start with a square lattice of the smallest
    admissible radius (or the fixed ``radius``), then uniform random draws."""
    if samples <= 0:
        return 0
    side = side_of_level(level)
    r_lo, r_hi = side / 12.0, side / 4.0
    rng = np.random.default_rng(seed)
    if radius is None:
        # the bucket is open at its lower end
        r_min = math.nextafter(r_lo, math.inf)
        rs = rng.uniform(r_min, r_hi, samples)
        lat_r = r_min
    else:
        if not r_lo < radius <= r_hi:
            raise ValueError("radius outside the bucket")
        rs = np.full(samples, float(radius))
        lat_r = float(radius)
    cx = rng.uniform(0.0, 1.0, samples) * (side - 2 * rs) + rs
    cy = rng.uniform(0.0, 1.0, samples) * (side - 2 * rs) + rs
    starts = _lattice(0.0, side, 2 * lat_r, side * 1e-9)
    lat = [(x + lat_r, y + lat_r) for y in starts for x in starts][:samples]
    for t, (x, y) in enumerate(lat):
        cx[t], cy[t], rs[t] = x, y, lat_r
    return int(_kernels.ACTIVE.rsa_disks(cx, cy, rs))


def box_packing_probe(cell_side: float, s_min: float, s_max: float, dim: int,
                      samples: int, seed: int = PROBE_SEED) -> int:
    """Largest disjoint family of closed cubes with side in [s_min, s_max]
    found inside one closed cell of side ``cell_side``."""
    if samples <= 0:
        return 0
    rng = np.random.default_rng(seed)
    sides = rng.uniform(s_min, s_max, samples)
    lo = rng.uniform(0.0, 1.0, (samples, dim)) * (cell_side - sides)[:, None]
    starts = _lattice(0.0, cell_side, s_min, cell_side * 1e-9)
    lat = list(itertools.product(starts, repeat=dim))[:samples]
    for t, corner in enumerate(lat):
        lo[t] = corner
        sides[t] = s_min
    hi = lo + sides[:, None]
    return int(_kernels.ACTIVE.rsa_boxes(np.ascontiguousarray(lo), np.ascontiguousarray(hi)))


# --------------------------------------------------------- reference scans


def reference_greedy(disks: Sequence[Disk], tree: int | None = None) -> set[int]:
    """Bottom-up greedy over the levels of one nonatree: each home cell takes
    at most one disk, the smallest id not meeting any disk chosen so far."""
    homes = {d.id: locate_home_cell(d) for d in disks}
    if tree is None and disks:
        tree = homes[min(homes)].tree
    pool = sorted((d for d in disks if homes[d.id].tree == tree),
                  key=lambda d: (homes[d.id].level, homes[d.id].ix, homes[d.id].iy, d.id))
    chosen: list[Disk] = []
    filled: set[CellCoord] = set()
    for d in pool:
        c = homes[d.id]
        if c in filled or any(disks_intersect(d, e) for e in chosen):
            continue
        chosen.append(d)
        filled.add(c)
    return {d.id for d in chosen}


def tcup_scan(cells: Mapping[CellCoord, Iterable[Disk]], c_q: CellCoord,
              o_q: Disk) -> tuple[CellCoord, Disk] | None:
    """Lowest stored ancestor-or-self of c_q holding a disk disjoint from o_q,
    with the farthest such disk (ties: smallest id)."""
    above = sorted((c for c in cells if c.level >= c_q.level and ancestor_at(c_q, c.level) == c),
                   key=lambda c: c.level)
    for c in above:
        best: tuple[float, int, Disk] | None = None
        for d in cells[c]:
            v = signed_distance(d, (o_q.x, o_q.y))
            if best is None or v > best[0] or (v == best[0] and d.id < best[1]):
                best = (v, d.id, d)
        if best is not None and best[0] > o_q.r:
            return c, best[2]
    return None
