"""Workload builders shared by the test modules."""
import itertools
import math
import random

from dynamis.geometry import Disk, FatObject, disks_intersect


def random_disk(rng: random.Random, i: int, model: str, span: float = 40.0) -> Disk:
    if model == "uniform":
        r = 0.05 * 200 ** rng.random()
        return Disk(i, rng.uniform(0, span), rng.uniform(0, span), r)
    if model == "clustered":
        hx, hy = [(5, 5), (20, 8), (12, 25)][rng.randrange(3)]
        return Disk(i, rng.gauss(hx, 2.0), rng.gauss(hy, 2.0), 0.02 * 300 ** rng.random())
    if model == "nested":
        j = rng.randrange(30)
        r = 50 * 3.0 ** (-j) * rng.uniform(0.7, 1.0)
        return Disk(i, 10 + rng.gauss(0, 1) * r, 10 + rng.gauss(0, 1) * r, r)
    raise ValueError(model)


def mixed_ops(seed: int, n_ops: int, max_live: int, make, p_delete: float = 0.45):
    """Yield ('I', obj) / ('D', id) with at most max_live live objects."""
    rng = random.Random(seed)
    live: list[int] = []
    nid = 0
    for _ in range(n_ops):
        if live and (rng.random() < p_delete or len(live) >= max_live):
            yield "D", live.pop(rng.randrange(len(live)))
        else:
            obj = make(rng, nid)
            nid += 1
            live.append(obj.id)
            yield "I", obj


def unit_disk(rng: random.Random, i: int, span: float = 12.0) -> Disk:
    return Disk(i, rng.uniform(0, span), rng.uniform(0, span), 1.0)


def fat_square(rng: random.Random, i: int, span: float = 14.0, s_min: float = 1.0, s_max: float = 2.0):
    return FatObject.square(i, (rng.uniform(0, span), rng.uniform(0, span)), rng.uniform(s_min, s_max))


def independent(objs, meets=disks_intersect) -> bool:
    return not any(meets(a, b) for a, b in itertools.combinations(objs, 2))


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)
