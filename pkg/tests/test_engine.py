import math
import random

import pytest

from dynamis.engine import CHANGELOG_CAP, GREEDY_CAP, DiskEngine, obstacle_disk
from dynamis.errors import DuplicateId, UnknownId
from dynamis.geometry import Disk, disks_intersect
from dynamis.nonatree import CellCoord

from helpers import independent, mixed_ops, random_disk


def shard_lines(e: DiskEngine, k: int) -> list[str]:
    lines = e.snapshot().splitlines()
    start = lines.index(f"TREE {k}") + 1
    end = next((i for i in range(start, len(lines)) if lines[i].startswith("TREE")), len(lines))
    return lines[start:end]


# Scripted scenarios.  All disks land in tree 0 (unshifted, even levels):
# level 0 cells have side 1, level 2 side 9, level 4 side 81, and the
# obstacle disk of a cell has radius 3 * side * sqrt(2) / 2.


def test_case_a_greedy_climbs():
    e = DiskEngine()
    assert e.insert(Disk(1, 0.5, 0.5, 0.2)) == [(0, "add", 1)]
    # level-2 disk far outside the 2.12-radius obstacle disk of cell 0:0:0
    assert e.insert(Disk(2, 7.0, 7.0, 1.0)) == [(0, "add", 2)]
    assert shard_lines(e, 0) == ["S 1", "S 2", "OBS 2:0:0 true", "OBS 0:0:0 true"]
    assert e.stats.cases["a"] >= 1
    assert e.check_invariants() == []


def test_case_b_makes_barrier_then_restores():
    e = DiskEngine()
    e.insert(Disk(2, 7.0, 7.0, 1.0))
    # a small disk below whose obstacle disk meets disk 2
    assert e.insert(Disk(3, 7.5, 6.5, 0.2)) == [(0, "add", 3), (0, "remove", 2)]
    assert shard_lines(e, 0) == ["S 3", "B 2 beta 0:7:6", "OBS 0:7:6 true"]
    assert e.stats.cases["b_hit"] == 1
    assert e.check_invariants() == []
    assert e.delete(3) == [(0, "remove", 3), (0, "add", 2)]
    assert shard_lines(e, 0) == ["S 2", "OBS 2:0:0 true"]
    assert e.check_invariants() == []


def test_case_c_reassigns_barrier():
    e = DiskEngine()
    e.insert(Disk(10, 40.0, 40.0, 10.0))
    assert e.insert(Disk(11, 40.5, 40.5, 1.0)) == [(0, "add", 11), (0, "remove", 10)]
    assert shard_lines(e, 0) == ["S 11", "B 10 beta 2:4:4", "OBS 2:4:4 true"]
    # the new obstacle at 0:40:40 still meets the barrier disk 10
    assert e.insert(Disk(12, 40.5, 40.5, 0.2)) == [(0, "add", 12), (0, "remove", 11)]
    assert shard_lines(e, 0) == ["S 12", "B 10 beta 0:40:40", "OBS 0:40:40 true"]
    assert e.stats.cases["c_reassign"] == 1
    assert e.check_invariants() == []


def test_case_c_promotes_barrier():
    e = DiskEngine()
    e.insert(Disk(20, 20.0, 20.0, 7.0))
    e.insert(Disk(21, 31.5, 31.5, 1.0))
    assert shard_lines(e, 0) == ["S 21", "B 20 beta 2:3:3", "OBS 2:3:3 true"]
    # obstacle of 0:33:33 meets disk 21 but not the barrier 20, which returns to S
    assert e.insert(Disk(22, 33.5, 33.5, 0.2)) == [(0, "add", 22), (0, "remove", 21), (0, "add", 20)]
    assert shard_lines(e, 0) == ["S 20", "S 22", "OBS 4:0:0 true", "OBS 0:33:33 true"]
    assert e.stats.cases["c_promote"] == 1
    assert e.check_invariants() == []


def test_branching_cell_becomes_merge_obstacle():
    e = DiskEngine()
    e.insert(Disk(1, 0.5, 0.5, 0.2))
    assert e.insert(Disk(2, 5.5, 5.5, 0.2)) == [(0, "add", 2)]
    assert shard_lines(e, 0) == ["S 1", "S 2", "OBS 2:0:0 merge", "OBS 0:0:0 true", "OBS 0:5:5 true"]
    assert e.check_invariants() == []
    # losing one side dissolves the merge cell with it
    assert e.delete(2) == [(0, "remove", 2)]
    assert shard_lines(e, 0) == ["S 1", "OBS 0:0:0 true"]
    assert e.check_invariants() == []


def test_obstacle_disk_radius():
    o = obstacle_disk(CellCoord(0, 2, 0, 0))
    assert (o.x, o.y) == (4.5, 4.5)
    assert o.r == pytest.approx(3 * 9 * math.sqrt(2) / 2)


def test_errors():
    e = DiskEngine()
    e.insert(Disk(1, 0, 0, 1))
    with pytest.raises(DuplicateId):
        e.insert(Disk(1, 5, 5, 1))
    with pytest.raises(UnknownId):
        e.delete(9)
    for bad in (Disk(2, 0, 0, 0.0), Disk(3, math.nan, 0, 1), Disk(4, 0, 0, math.inf), Disk(-1, 0, 0, 1, derived=True)):
        with pytest.raises(ValueError):
            e.insert(bad)
    assert len(e) == 1


def test_queries_on_empty_and_single():
    e = DiskEngine()
    assert e.approx_size() == 0 and e.report() == []
    e.insert(Disk(7, 3, 3, 0.5))
    assert e.approx_size() == 1 and e.report() == [7]
    assert sum(len(s) for s in e.candidate_sets()) == 1


@pytest.mark.parametrize("model", ["uniform", "clustered", "nested"])
def test_fuzz_audit_every_op(model):
    for seed in range(3):
        e = DiskEngine(instrument=True)
        for op, arg in mixed_ops(seed, 500, 70, lambda rng, i: random_disk(rng, i, model)):
            log = e.insert(arg) if op == "I" else e.delete(arg)
            assert len(log) <= CHANGELOG_CAP
            assert e.check_invariants(e.last_shard) == []
        assert e.check_invariants() == []
        st = e.stats
        assert st.greedy_cap_trips == 0 and st.changelog_cap_trips == 0
        assert st.greedy_max_iters <= GREEDY_CAP
        assert st.clearance_violations == 0


def test_candidates_are_independent_and_report_is_largest():
    e = DiskEngine()
    rng = random.Random(4)
    for i in range(300):
        e.insert(random_disk(rng, i, "uniform"))
    for s in e.candidate_sets():
        assert independent([e.disks[i] for i in s])
    best = e.report()
    assert len(best) == e.approx_size() == max(len(s) for s in e.candidate_sets())


def test_backends_agree():
    engines = [DiskEngine("linear"), DiskEngine("rebuild")]
    for op, arg in mixed_ops(9, 800, 150, lambda rng, i: random_disk(rng, i, "uniform")):
        logs = [en.insert(arg) if op == "I" else en.delete(arg) for en in engines]
        assert logs[0] == logs[1]
    assert engines[0].snapshot() == engines[1].snapshot()


def test_delete_all_empties_every_tree():
    e = DiskEngine()
    rng = random.Random(6)
    ids = []
    for i in range(200):
        e.insert(random_disk(rng, i, "nested"))
        ids.append(i)
    rng.shuffle(ids)
    for i in ids:
        e.delete(i)
    assert len(e) == 0 and e.approx_size() == 0
    for sh in e.shards:
        assert len(sh.tree) == 0 and not sh.B and not sh.kind and len(sh.tcup) == 0


def test_dominated_disks_meet_an_obstacle():
    e = DiskEngine()
    rng = random.Random(8)
    for i in range(150):
        e.insert(random_disk(rng, i, "clustered"))
    for sh in e.shards:
        guards = [obstacle_disk(c) for c in list(sh.kind) + list(sh.b_at)]
        for c in sh.tree.cells:
            for i in sh.tree.record(c).disks:
                if i not in sh.S:
                    assert any(disks_intersect(e.disks[i], g) for g in guards)
