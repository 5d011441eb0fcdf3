"""Closed disks, axis-aligned cells and fat objects.

Tangency counts as intersection everywhere; containment is closed as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

Point = tuple[float, ...]

# ids of derived disks (obstacle and clearance disks) never collide with input ids
DERIVED_ID = -1


@dataclass(frozen=True, slots=True)
class Disk:
    id: int
    x: float
    y: float
    r: float
    derived: bool = field(default=False, compare=False)

    @property
    def center(self) -> Point:
        return (self.x, self.y)


@dataclass(frozen=True, slots=True)
class Box:
    """Axis-aligned hypercube given by its min corner and side length."""
    corner: Point
    side: float
    level: int | None = None

    @property
    def dim(self) -> int:
        return len(self.corner)

    @property
    def center(self) -> Point:
        h = self.side / 2.0
        return tuple(c + h for c in self.corner)


@dataclass(frozen=True, slots=True)
class FatObject:
    """A disk (ball in d dimensions), axis-aligned box or convex polygon with an integer id.

    ``payload`` is ``(center, radius)`` for disks, ``(lo, hi)`` for boxes and a
    tuple of vertices (counter-clockwise) for 2-d polygons.
    """
    id: int
    kind: str
    payload: tuple
    lo: Point = field(init=False, compare=False)
    hi: Point = field(init=False, compare=False)

    def __post_init__(self):
        if self.kind == "disk":
            c, r = self.payload
            lo = tuple(v - r for v in c)
            hi = tuple(v + r for v in c)
        elif self.kind == "box":
            lo, hi = (tuple(map(float, p)) for p in self.payload)
        elif self.kind == "polygon":
            xs = [v[0] for v in self.payload]
            ys = [v[1] for v in self.payload]
            lo, hi = (min(xs), min(ys)), (max(xs), max(ys))
        else:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def size(self) -> float:
        """Side of the smallest enclosing axis-aligned hypercube."""
        return max(h - l for l, h in zip(self.lo, self.hi))

    @property
    def center(self) -> Point:
        return tuple((l + h) / 2.0 for l, h in zip(self.lo, self.hi))

    @classmethod
    def square(cls, id: int, center: Sequence[float], side: float) -> "FatObject":
        h = side / 2.0
        return cls(id, "box", (tuple(c - h for c in center), tuple(c + h for c in center)))


def _hypot(dx: float, dy: float) -> float:
    # same operation order as the compiled kernels, so results match bit for bit
    return math.sqrt(dx * dx + dy * dy)


def disks_intersect(a: Disk, b: Disk) -> bool:
    return _hypot(a.x - b.x, a.y - b.y) <= a.r + b.r


def signed_distance(d: Disk, p: Sequence[float]) -> float:
    return _hypot(p[0] - d.x, p[1] - d.y) - d.r


def scale_disk(d: Disk, lam: float) -> Disk:
    if not lam >= 1.0:
        raise ValueError("scale factor must be at least 1")
    return Disk(DERIVED_ID, d.x, d.y, d.r * lam, derived=True)


def smallest_enclosing_disk_of_cell(c: Box) -> Disk:
    if c.dim != 2:
        raise ValueError("enclosing disk is defined for square cells")
    cx, cy = c.center
    return Disk(DERIVED_ID, cx, cy, c.side * math.sqrt(2.0) / 2.0, derived=True)


def disk_in_cell(d: Disk, c: Box) -> bool:
    x0, y0 = c.corner
    s = c.side
    return x0 <= d.x - d.r and d.x + d.r <= x0 + s and y0 <= d.y - d.r and d.y + d.r <= y0 + s


def box_contains(c: Box, lo: Sequence[float], hi: Sequence[float]) -> bool:
    """Closed containment of the bounding box [lo, hi] in cell c."""
    s = c.side
    return all(c0 <= l and h <= c0 + s for c0, l, h in zip(c.corner, lo, hi))


@lru_cache(maxsize=None)
def power_of_three(i: int) -> float:
    """3**i rounded once to the nearest double (exact for |i| small)."""
    if i >= 0:
        return float(3 ** i)
    return float(Fraction(1, 3 ** (-i)))


# ---------------------------------------------------------------- fat objects


def _point_box_dist2(p: Sequence[float], lo: Sequence[float], hi: Sequence[float]) -> float:
    acc = 0.0
    for v, l, h in zip(p, lo, hi):
        if v < l:
            acc += (l - v) * (l - v)
        elif v > h:
            acc += (v - h) * (v - h)
    return acc


def _polygon_of(o: FatObject) -> list[Point]:
    if o.kind == "polygon":
        return list(o.payload)
    (x0, y0), (x1, y1) = o.lo, o.hi
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def _axes(poly: list[Point]) -> list[Point]:
    out = []
    for i in range(len(poly)):
        (ax, ay), (bx, by) = poly[i], poly[(i + 1) % len(poly)]
        out.append((ay - by, bx - ax))
    return out


def _convex_overlap(p: list[Point], q: list[Point]) -> bool:
    # separating axis test for closed convex polygons
    for nx, ny in _axes(p) + _axes(q):
        pa = [nx * x + ny * y for x, y in p]
        qa = [nx * x + ny * y for x, y in q]
        if max(pa) < min(qa) or max(qa) < min(pa):
            return False
    return True


def _segment_dist2(p: Point, a: Point, b: Point) -> float:
    abx, aby = b[0] - a[0], b[1] - a[1]
    apx, apy = p[0] - a[0], p[1] - a[1]
    den = abx * abx + aby * aby
    t = 0.0 if den == 0.0 else max(0.0, min(1.0, (apx * abx + apy * aby) / den))
    dx, dy = apx - t * abx, apy - t * aby
    return dx * dx + dy * dy


def _point_in_convex(p: Point, poly: list[Point]) -> bool:
    sign = 0
    for i in range(len(poly)):
        a, b = poly[i], poly[(i + 1) % len(poly)]
        cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        if cross != 0.0:
            s = 1 if cross > 0 else -1
            if sign and s != sign:
                return False
            sign = s
    return True


def objects_intersect(a: FatObject, b: FatObject) -> bool:
    """Closed intersection test between two fat objects of the same dimension."""
    if a.kind == "box" and b.kind == "box":
        return all(la <= hb and lb <= ha for la, ha, lb, hb in zip(a.lo, a.hi, b.lo, b.hi))
    if a.kind == "disk" and b.kind == "disk":
        (ca, ra), (cb, rb) = a.payload, b.payload
        return math.sqrt(sum((u - v) * (u - v) for u, v in zip(ca, cb))) <= ra + rb
    if b.kind == "disk":
        a, b = b, a
    if a.kind == "disk":
        c, r = a.payload
        if b.kind == "box":
            return math.sqrt(_point_box_dist2(c, b.lo, b.hi)) <= r
        poly = _polygon_of(b)
        if _point_in_convex(tuple(c), poly):
            return True
        d2 = min(_segment_dist2(tuple(c), poly[i], poly[(i + 1) % len(poly)]) for i in range(len(poly)))
        return math.sqrt(d2) <= r
    if a.dim != 2:
        raise ValueError("polygons are two-dimensional")
    return _convex_overlap(_polygon_of(a), _polygon_of(b))
