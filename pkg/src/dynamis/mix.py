"""Publication layer: one explicit independent set with bounded churn.

The publisher mirrors the active candidate S_i while it stays within half of
the largest candidate.  Once ``2|S_i| <= max_j |S_j|`` it walks over to the
largest candidate one element at a time, spending at most ``10u`` published
changes per engine update.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .errors import InputNotIndependent
from .geometry import disks_intersect

Step = tuple[str, int]
DEFAULT_U = 16


def _assert_independent(ids: Iterable[int], objects: Mapping, intersects: Callable) -> None:
    for a, b in itertools.combinations(sorted(ids), 2):
        if intersects(objects[a], objects[b]):
            raise InputNotIndependent(f"{a} and {b} intersect")


def mix_steps(sa: Iterable[int], sb: Iterable[int], objects: Mapping,
              intersects: Callable = disks_intersect) -> list[Step]:
    """Single-element steps turning sa into sb, independent at every step.

    For each new element in increasing id, the current elements it meets are
    removed first; leftovers of sa are dropped at the end.
    """
    sa, sb = set(sa), set(sb)
    _assert_independent(sa, objects, intersects)
    _assert_independent(sb, objects, intersects)
    cur = set(sa)
    steps: list[Step] = []
    for b in sorted(sb - sa):
        ob = objects[b]
        for x in sorted(x for x in cur if intersects(objects[x], ob)):
            cur.discard(x)
            steps.append(("remove", x))
        cur.add(b)
        steps.append(("add", b))
    for x in sorted(cur - sb):
        steps.append(("remove", x))
    return steps


@dataclass
class MixStats:
    triggers: int = 0
    completions: int = 0
    wholesale: int = 0
    max_delta: int = 0
    # |S_j| / max_k |S_k| at each completion
    completion_ratios: list = field(default_factory=list)
    # (from, to, candidate sizes) at each trigger
    trigger_log: list = field(default_factory=list)


class MixPublisher:
    """Keeps the published set S over an engine exposing ``candidate_sets``,
    ``objects`` and ``intersects``."""

    def __init__(self, engine, u: int = DEFAULT_U):
        self.engine = engine
        self.u = u
        self.budget = 10 * u
        self.S: set[int] = set()
        self.active = 0
        self.target: int | None = None
        self.stats = MixStats()
        self._plan: list[int] = []
        self._plan_pos = 0
        self._lifo: list[int] = []
        self._delta: list[Step] = []
        # (target, index into the last delta) for each completion in the last update
        self.completed_at: list[tuple[int, int]] = []

    # ------------------------------------------------------------ queries

    def published(self) -> set[int]:
        return set(self.S)

    def published_size(self) -> int:
        return len(self.S)

    @property
    def transitioning(self) -> bool:
        return self.target is not None

    # ------------------------------------------------------------ updates

    def on_update(self, log: list[tuple[int, str, int]]) -> list[Step]:
        """Consume one engine update's ChangeLog; return the published delta."""
        self._delta = []
        self.completed_at = []
        cands = self.engine.candidate_sets()
        if self.target is None:
            # an engine log may add before it removes the disk it displaces;
            # publishing the net change with removals first keeps S independent
            si = cands[self.active]
            touched = sorted({x for k, _, x in log if k == self.active})
            for x in touched:
                if x in self.S and x not in si:
                    self._remove(x)
            for x in touched:
                if x in si and x not in self.S:
                    self._add(x)
        else:
            si, sj = cands[self.active], cands[self.target]
            for k, op, x in log:
                if k == self.target and op == "add":
                    self._lifo.append(x)
                elif op == "remove" and k in (self.active, self.target):
                    # deletions from S_i and S_j hit S directly
                    if x in self.S and x not in si and x not in sj:
                        self._remove(x)
            self._advance(cands)
        if self.target is None:
            self._maybe_trigger(cands)
        self.stats.max_delta = max(self.stats.max_delta, len(self._delta))
        return self._delta

    def _add(self, x: int) -> None:
        self.S.add(x)
        self._delta.append(("add", x))

    def _remove(self, x: int) -> None:
        self.S.discard(x)
        self._delta.append(("remove", x))

    def _maybe_trigger(self, cands: list[set[int]]) -> None:
        sizes = [len(s) for s in cands]
        j = max(range(len(sizes)), key=lambda k: (sizes[k], -k))
        # an empty engine has nothing to switch to
        if j == self.active or sizes[j] == 0 or 2 * sizes[self.active] > sizes[j]:
            return
        self.stats.triggers += 1
        self.stats.trigger_log.append((self.active, j, tuple(sizes)))
        sj = cands[j]
        left = self.budget - len(self._delta)
        if sizes[self.active] <= 3 * self.u and len(self.S ^ sj) <= left:
            self.stats.wholesale += 1
            for x in sorted(self.S - sj):
                self._remove(x)
            for x in sorted(sj - self.S):
                self._add(x)
            self._complete(cands, j)
            return
        self.target = j
        self._plan = sorted(sj - self.S)
        self._plan_pos = 0
        self._lifo = []
        self._advance(cands)

    def _next_step(self, sj: set[int]) -> Step | None:
        objs = self.engine.objects()
        meets = self.engine.intersects
        while self._plan_pos < len(self._plan):
            b = self._plan[self._plan_pos]
            if b not in sj or b in self.S:
                self._plan_pos += 1
                continue
            ob = objs[b]
            hit = [x for x in self.S if meets(objs[x], ob)]
            if hit:
                return ("remove", min(hit))
            self._plan_pos += 1
            return ("add", b)
        extra = self.S - sj
        if extra:
            return ("remove", min(extra))
        while self._lifo:
            q = self._lifo.pop()
            if q in sj and q not in self.S:
                return ("add", q)
        missing = sj - self.S
        if missing:
            return ("add", min(missing))
        return None

    def _advance(self, cands: list[set[int]]) -> None:
        sj = cands[self.target]
        while len(self._delta) < self.budget:
            step = self._next_step(sj)
            if step is None:
                self._complete(cands, self.target)
                return
            op, x = step
            if op == "add":
                self._add(x)
            else:
                self._remove(x)
        if self.S == sj:
            self._complete(cands, self.target)

    def _complete(self, cands: list[set[int]], j: int) -> None:
        top = max(len(s) for s in cands)
        self.stats.completions += 1
        self.completed_at.append((j, len(self._delta)))
        self.stats.completion_ratios.append(len(cands[j]) / top if top else 1.0)
        self.active = j
        self.target = None
        self._plan = []
        self._lifo = []
