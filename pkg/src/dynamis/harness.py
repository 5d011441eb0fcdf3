"""Trace replay, workload generation and benchmarks.

Trace lines: ``I <id> <cx> <cy> <r>``, ``D <id>``, ``Q`` (size), ``R``
(report), ``A`` (audit).  Blank lines and ``#`` comments are skipped.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import random
import sys
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import _kernels
from .engine import DiskEngine
from .errors import ParseError
from .geometry import Disk, FatObject
from .mix import MixPublisher
from .oracle import IntersectionGraph, exact_mis
from .shifted_grid import ShiftedGridEngine

CSV_COLUMNS = ("step", "op", "id", "changes", "published_delta", "approx_size", "published_size",
               "audit", "opt", "ratio_approx", "ratio_published", "report", "wall_us")
ENGINES = ("unit", "fat", "disks")
MODELS = ("uniform", "clustered", "adversarial-nested")
NESTED_LEVEL_CAP = 600
# fat traces carry squares of side 2r with side in [FAT_MIN_SIDE, FAT_MAX_SIDE]
FAT_MIN_SIDE, FAT_MAX_SIDE = 1.0, 2.0


def audit_every_default() -> int:
    return int(os.environ.get("DYNAMIS_AUDIT_EVERY", "16"))


# ------------------------------------------------------------------ traces


def parse_trace(lines: Iterable[str]) -> list[tuple]:
    cmds: list[tuple] = []
    live: set[int] = set()
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        op = parts[0]
        try:
            if op == "I":
                if len(parts) != 5:
                    raise ParseError(lineno, "insert takes id cx cy r")
                i = int(parts[1])
                cx, cy, r = (float(p) for p in parts[2:])
                if not (math.isfinite(cx) and math.isfinite(cy) and math.isfinite(r) and r > 0):
                    raise ParseError(lineno, "coordinates must be finite and r positive")
                if i in live:
                    raise ParseError(lineno, f"id {i} is already live")
                live.add(i)
                cmds.append(("I", i, cx, cy, r))
            elif op == "D":
                if len(parts) != 2:
                    raise ParseError(lineno, "delete takes one id")
                i = int(parts[1])
                if i not in live:
                    raise ParseError(lineno, f"id {i} is not live")
                live.discard(i)
                cmds.append(("D", i))
            elif op in ("Q", "R", "A"):
                if len(parts) != 1:
                    raise ParseError(lineno, f"{op} takes no arguments")
                cmds.append((op,))
            else:
                raise ParseError(lineno, f"unknown command {op!r}")
        except ValueError as e:
            if isinstance(e, ParseError):
                raise
            raise ParseError(lineno, str(e)) from None
    return cmds


def format_trace(cmds: Iterable[tuple]) -> str:
    out = []
    for c in cmds:
        if c[0] == "I":
            out.append(f"I {c[1]} {c[2]!r} {c[3]!r} {c[4]!r}")
        elif c[0] == "D":
            out.append(f"D {c[1]}")
        else:
            out.append(c[0])
    return "".join(s + "\n" for s in out)


def generate(model: str, n: int, churn: float = 0.0, radius_span: float = 1.0,
             seed: int = 0) -> list[tuple]:
    """Reproducible insert/delete trace with n inserts and round(churn*n) deletes.

    Radii are log-uniform in [1/radius_span, 1] except for the nested model,
    whose radii shrink by a factor of 3 per level over min(n/2, 600) levels
    and ignore radius_span.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    if n < 0 or not 0.0 <= churn <= 1.0 or not radius_span >= 1.0:
        raise ValueError("need n >= 0, churn in [0, 1] and radius span >= 1")
    rng = random.Random(seed)
    extent = 4.0 * math.sqrt(max(n, 1))
    if model == "clustered":
        hubs = [(rng.uniform(0, extent), rng.uniform(0, extent)) for _ in range(max(1, n // 50))]
    levels = min(max(1, (n + 1) // 2), NESTED_LEVEL_CAP)

    def make(i: int) -> tuple:
        if model == "adversarial-nested":
            # levels run from +levels/2 down to -levels/2 around the origin, so
            # coordinates shrink with the radius and squared distances stay
            # inside the normal double range
            j = i % levels
            s = 3.0 ** ((levels - 1) // 2 - j)
            r = s * rng.uniform(0.09, 0.24)
            return ("I", i, s * rng.uniform(-0.1, 0.1), s * rng.uniform(-0.1, 0.1), r)
        r = math.exp(-rng.uniform(0.0, math.log(radius_span)))
        if model == "uniform":
            return ("I", i, rng.uniform(0, extent), rng.uniform(0, extent), r)
        hx, hy = hubs[rng.randrange(len(hubs))]
        return ("I", i, rng.gauss(hx, 2.0), rng.gauss(hy, 2.0), r)

    deletes = round(churn * n)
    ins_left, del_left = n, deletes
    live: list[int] = []
    cmds: list[tuple] = []
    nxt = 0
    while ins_left or del_left:
        if del_left and live and (not ins_left or rng.random() < del_left / (del_left + ins_left)):
            cmds.append(("D", live.pop(rng.randrange(len(live)))))
            del_left -= 1
        else:
            cmds.append(make(nxt))
            live.append(nxt)
            nxt += 1
            ins_left -= 1
    return cmds


# ------------------------------------------------------------------ replay


def make_engine(kind: str, backend: str = "linear"):
    if kind == "unit":
        return ShiftedGridEngine("unit")
    if kind == "fat":
        return ShiftedGridEngine("fat", dim=2, r1=FAT_MIN_SIDE, r2=FAT_MAX_SIDE)
    if kind == "disks":
        return DiskEngine(backend=backend)
    raise ValueError(f"unknown engine {kind!r}")


def make_object(kind: str, i: int, cx: float, cy: float, r: float):
    if kind == "fat":
        return FatObject.square(i, (cx, cy), 2.0 * r)
    return Disk(i, cx, cy, r)


@dataclass
class RunReport:
    engine: str
    backend: str
    seed: int
    rows: list[dict] = field(default_factory=list)
    audit_failures: int = 0
    failures: list[str] = field(default_factory=list)

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow([row[c] if (timing or c != "wall_us") else "" for c in CSV_COLUMNS])
        return buf.getvalue()


def _fmt_ratio(num: int, den: int | None) -> str:
    return "" if not den else f"{num / den:.6f}"


def audit(engine, pub: MixPublisher, full: bool) -> list[str]:
    if isinstance(engine, DiskEngine):
        errs = engine.check_invariants(None if full else engine.last_shard)
    else:
        errs = engine.check_invariants()
    objs = engine.objects()
    published = sorted(pub.S)
    if any(i not in objs for i in published):
        errs.append("published set holds a dead id")
    else:
        g = IntersectionGraph([objs[i] for i in published],
                              None if isinstance(engine, DiskEngine) else engine.intersects)
        if not g.is_independent(range(len(g))):
            errs.append("published set is not independent")
    if pub.stats.max_delta > pub.budget:
        errs.append(f"published delta {pub.stats.max_delta} over budget {pub.budget}")
    return errs


def run(cmds: Sequence[tuple], engine_kind: str = "disks", backend: str = "linear", seed: int = 0,
        audit_every: int | None = None, oracle_limit: int = 22) -> RunReport:
    """Replay a parsed trace.  The engines are deterministic, so ``seed`` is only
    recorded in the report."""
    engine = make_engine(engine_kind, backend)
    pub = MixPublisher(engine)
    every = audit_every_default() if audit_every is None else audit_every
    rep = RunReport(engine_kind, backend, seed)
    updates = 0
    for step, cmd in enumerate(cmds):
        op = cmd[0]
        row = dict.fromkeys(CSV_COLUMNS, "")
        row.update(step=step, op=op)
        t0 = time.perf_counter_ns()
        if op in ("I", "D"):
            if op == "I":
                log = engine.insert(make_object(engine_kind, *cmd[1:]))
            else:
                log = engine.delete(cmd[1])
            delta = pub.on_update(log)
            row.update(id=cmd[1], changes=len(log), published_delta=len(delta))
            updates += 1
        elif op == "R":
            row["report"] = " ".join(map(str, engine.report()))
        wall = (time.perf_counter_ns() - t0) / 1000.0
        row.update(approx_size=engine.approx_size(), published_size=pub.published_size(),
                   wall_us=f"{wall:.1f}")
        periodic = op in ("I", "D") and every > 0 and updates % every == 0
        if op == "A" or periodic:
            errs = audit(engine, pub, full=(op == "A"))
            row["audit"] = "fail" if errs else "pass"
            if errs:
                rep.audit_failures += 1
                rep.failures.extend(f"step {step}: {e}" for e in errs)
        if op == "A" and len(engine) <= oracle_limit:
            opt = len(exact_mis(list(engine.objects().values()),
                                None if isinstance(engine, DiskEngine) else engine.intersects))
            row.update(opt=opt, ratio_approx=_fmt_ratio(engine.approx_size(), opt),
                       ratio_published=_fmt_ratio(pub.published_size(), opt))
        rep.rows.append(row)
    return rep


# ------------------------------------------------------------------ bench


def _slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) < 2:
        return 0.0
    return float(np.polyfit(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), 1)[0])


def _tree_ops(engine) -> int:
    if isinstance(engine, ShiftedGridEngine):
        return engine.ops.total
    return sum(sh.tree.map_ops for sh in engine.shards)


def _backend_queries(engine) -> int:
    if isinstance(engine, ShiftedGridEngine):
        return 0
    return sum(sh.tcup.backend_queries for sh in engine.shards)


def bench(sizes: Sequence[int], engine_kind: str = "unit", backend: str = "linear",
          seed: int = 0) -> tuple[list[dict], float]:
    """Insert n objects at constant density, then delete them all.

    Returns per-size rows and the least-squares slope of mean structure
    operations per update against log2(n).
    """
    rows = []
    for n in sizes:
        span = 1.0 if engine_kind != "disks" else 100.0
        cmds = generate("uniform", n, 1.0, span, seed)
        engine = make_engine(engine_kind, backend)
        t_ins: list[float] = []
        t_del: list[float] = []
        max_ops = 0
        for cmd in cmds:
            before = _tree_ops(engine)
            t0 = time.perf_counter_ns()
            if cmd[0] == "I":
                engine.insert(make_object(engine_kind, *cmd[1:]))
                t_ins.append(time.perf_counter_ns() - t0)
            else:
                engine.delete(cmd[1])
                t_del.append(time.perf_counter_ns() - t0)
            max_ops = max(max_ops, _tree_ops(engine) - before)
        all_t = np.array(t_ins + t_del, dtype=float) / 1000.0
        updates = max(1, len(cmds))
        rows.append(dict(
            n=n,
            mean_insert_us=f"{np.mean(t_ins) / 1000.0:.3f}" if t_ins else "",
            mean_delete_us=f"{np.mean(t_del) / 1000.0:.3f}" if t_del else "",
            p95_us=f"{np.percentile(all_t, 95):.3f}" if all_t.size else "",
            tree_ops=f"{_tree_ops(engine) / updates:.4f}",
            max_tree_ops=max_ops,
            backend_queries=f"{_backend_queries(engine) / updates:.4f}",
        ))
    xs = [math.log2(r["n"]) for r in rows if r["n"] > 0]
    ys = [float(r["tree_ops"]) for r in rows if r["n"] > 0]
    return rows, _slope(xs, ys)


def bench_kernels(n: int = 4096, repeat: int = 200, seed: int = 0) -> list[dict]:
    """Time the compiled and plain farthest-disk scans on the same data."""
    rng = np.random.default_rng(seed)
    xs, ys = rng.uniform(0, 100, n), rng.uniform(0, 100, n)
    rs = rng.uniform(0.1, 2.0, n)
    ids = np.arange(n, dtype=np.int64)
    out = []
    flavors = [("plain", _kernels.PLAIN)] + ([("numba", _kernels.JIT)] if _kernels.JIT else [])
    ref = None
    for name, ns in flavors:
        ns.farthest(xs, ys, rs, ids, n, 1.0, 2.0)
        t0 = time.perf_counter_ns()
        for t in range(repeat):
            res = ns.farthest(xs, ys, rs, ids, n, float(t), 2.0)
        us = (time.perf_counter_ns() - t0) / 1000.0 / repeat
        res = (int(res[0]), float(res[1]))
        ref = ref or res
        out.append(dict(kernel="farthest", flavor=name, n=n, us_per_call=f"{us:.2f}", agrees=res == ref))
    return out


# ------------------------------------------------------------------ CLI


def _write_rows(rows: list[dict], dest: str | None, stdout: TextIO) -> None:
    if not rows:
        return
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _emit(buf.getvalue(), dest, stdout)


def _emit(text: str, dest: str | None, stdout: TextIO) -> None:
    if dest and dest != "-":
        with open(dest, "w", newline="") as f:
            f.write(text)
    else:
        stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dynamis", description="Dynamic independent sets of disks and boxes.")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="replay a trace and emit per-op CSV")
    r.add_argument("--trace", required=True)
    r.add_argument("--engine", choices=ENGINES, default="disks")
    r.add_argument("--backend", choices=("linear", "rebuild"), default="linear")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--csv", default="-")
    r.add_argument("--audit-every", type=int, default=None)
    r.add_argument("--oracle-limit", type=int, default=22)
    r.add_argument("--no-timing", action="store_true", help="leave the wall_us column empty")

    g = sub.add_parser("gen", help="write a generated trace")
    g.add_argument("--model", choices=MODELS, default="uniform")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--churn", type=float, default=0.0)
    g.add_argument("--radius-span", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-")

    b = sub.add_parser("bench", help="update cost at growing sizes")
    b.add_argument("--sizes", required=True)
    b.add_argument("--engine", choices=ENGINES, default="unit")
    b.add_argument("--backend", choices=("linear", "rebuild"), default="linear")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--csv", default="-")

    k = sub.add_parser("bench-kernels", help="compiled vs plain kernel timings")
    k.add_argument("--n", type=int, default=4096)
    k.add_argument("--repeat", type=int, default=200)
    k.add_argument("--csv", default="-")
    return p


def main(argv: Sequence[str] | None = None, stdout: TextIO | None = None) -> int:
    out = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    if args.cmd == "run":
        try:
            with open(args.trace) as f:
                cmds = parse_trace(f)
        except ParseError as e:
            print(f"{args.trace}: {e}", file=sys.stderr)
            return 1
        rep = run(cmds, args.engine, args.backend, args.seed, args.audit_every, args.oracle_limit)
        _emit(rep.to_csv(timing=not args.no_timing), args.csv, out)
        for msg in rep.failures:
            print(msg, file=sys.stderr)
        return 2 if rep.audit_failures else 0
    if args.cmd == "gen":
        _emit(format_trace(generate(args.model, args.n, args.churn, args.radius_span, args.seed)),
              args.out, out)
        return 0
    if args.cmd == "bench":
        sizes = [int(s) for s in args.sizes.split(",") if s]
        if sizes != sorted(sizes):
            print("sizes must be ascending", file=sys.stderr)
            return 1
        rows, slope = bench(sizes, args.engine, args.backend, args.seed)
        _write_rows(rows, args.csv, out)
        print(f"slope of structure ops per update vs log2(n): {slope:.4f}", file=sys.stderr)
        return 0
    rows = bench_kernels(args.n, args.repeat)
    _write_rows(rows, args.csv, out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
