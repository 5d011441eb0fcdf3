"""Hot loops, compiled with numba when available.

Every kernel has a plain implementation that produces bit-identical results.
Setting ``DYNAMIS_DISABLE_NUMBA=1`` (or lacking numba) binds the plain
versions; both flavors stay reachable as ``JIT`` and ``PLAIN`` for the bench.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_DISABLED = os.environ.get("DYNAMIS_DISABLE_NUMBA", "") not in ("", "0")


# ---------------------------------------------------------------- farthest scan


def _farthest_loop(xs, ys, rs, ids, n, px, py):
    best = -1
    best_val = -np.inf
    for i in range(n):
        dx = xs[i] - px
        dy = ys[i] - py
        v = np.sqrt(dx * dx + dy * dy) - rs[i]
        if best < 0 or v > best_val or (v == best_val and ids[i] < ids[best]):
            best = i
            best_val = v
    return best, best_val


def _farthest_numpy(xs, ys, rs, ids, n, px, py):
    if n == 0:
        return -1, -np.inf
    dx = xs[:n] - px
    dy = ys[:n] - py
    vals = np.sqrt(dx * dx + dy * dy) - rs[:n]
    top = vals.max()
    tied = np.flatnonzero(vals == top)
    best = tied[np.argmin(ids[:n][tied])]
    return int(best), float(top)


def _block_farthest_loop(bxlo, bxhi, bylo, byhi, brlo, bstart, bend,
                         xs, ys, rs, ids, alive, px, py):
    nb = bxlo.shape[0]
    ub = np.empty(nb)
    for b in range(nb):
        ax = abs(px - bxlo[b])
        bx = abs(px - bxhi[b])
        mx = ax if ax > bx else bx
        ay = abs(py - bylo[b])
        by = abs(py - byhi[b])
        my = ay if ay > by else by
        ub[b] = np.sqrt(mx * mx + my * my) - brlo[b]
    order = np.argsort(-ub, kind="mergesort")
    best = -1
    best_val = -np.inf
    scanned = 0
    for t in range(nb):
        b = order[t]
        if best >= 0 and ub[b] < best_val:
            break
        for i in range(bstart[b], bend[b]):
            if not alive[i]:
                continue
            scanned += 1
            dx = xs[i] - px
            dy = ys[i] - py
            v = np.sqrt(dx * dx + dy * dy) - rs[i]
            if best < 0 or v > best_val or (v == best_val and ids[i] < ids[best]):
                best = i
                best_val = v
    return best, best_val, scanned


def _block_farthest_numpy(bxlo, bxhi, bylo, byhi, brlo, bstart, bend,
                          xs, ys, rs, ids, alive, px, py):
    mx = np.maximum(np.abs(px - bxlo), np.abs(px - bxhi))
    my = np.maximum(np.abs(py - bylo), np.abs(py - byhi))
    ub = np.sqrt(mx * mx + my * my) - brlo
    order = np.argsort(-ub, kind="mergesort")
    best = -1
    best_val = -np.inf
    scanned = 0
    for b in order:
        if best >= 0 and ub[b] < best_val:
            break
        lo, hi = bstart[b], bend[b]
        mask = alive[lo:hi]
        if not mask.any():
            continue
        idx = np.flatnonzero(mask) + lo
        scanned += idx.size
        dx = xs[idx] - px
        dy = ys[idx] - py
        vals = np.sqrt(dx * dx + dy * dy) - rs[idx]
        top = vals.max()
        tied = idx[vals == top]
        cand = int(tied[np.argmin(ids[tied])])
        if best < 0 or top > best_val or (top == best_val and ids[cand] < ids[best]):
            best = cand
            best_val = float(top)
    return best, best_val, scanned


# ------------------------------------------------------------ pairwise tests


def _cross_intersect_loop(ax, ay, ar, bx, by, br):
    out = np.zeros((ax.shape[0], bx.shape[0]), dtype=np.bool_)
    for i in range(ax.shape[0]):
        for j in range(bx.shape[0]):
            dx = ax[i] - bx[j]
            dy = ay[i] - by[j]
            out[i, j] = np.sqrt(dx * dx + dy * dy) <= ar[i] + br[j]
    return out


def _cross_intersect_numpy(ax, ay, ar, bx, by, br):
    dx = ax[:, None] - bx[None, :]
    dy = ay[:, None] - by[None, :]
    return np.sqrt(dx * dx + dy * dy) <= ar[:, None] + br[None, :]


# --------------------------------------------------------- exact MIS search


def _lowbit_index(x):
    i = 0
    while not (x >> i) & 1:
        i += 1
    return i


def _clique_cover(adj, cand):
    # greedy partition of cand into cliques; an upper bound on any independent subset
    cnt = 0
    rem = cand
    while rem:
        v = _lowbit_index(rem)
        rem &= ~(1 << v)
        grow = rem & adj[v]
        while grow:
            u = _lowbit_index(grow)
            rem &= ~(1 << u)
            grow &= ~(1 << u)
            grow &= adj[u]
        cnt += 1
    return cnt


def _mis_search(adj, n, threshold):
    """Include-first DFS in index order; returns the lexicographically first
    largest independent mask of size > threshold, or -1 when none exists."""
    full = (1 << n) - 1
    st_cand = [0] * (n + 2)
    st_cur = [0] * (n + 2)
    st_size = [0] * (n + 2)
    st_phase = [0] * (n + 2)
    best_size = threshold
    best_mask = -1
    top = 0
    st_cand[0] = full
    while top >= 0:
        cand = st_cand[top]
        cur = st_cur[top]
        size = st_size[top]
        phase = st_phase[top]
        if phase == 0:
            if cand == 0:
                if size > best_size:
                    best_size = size
                    best_mask = cur
                top -= 1
                continue
            if size + _clique_cover(adj, cand) <= best_size:
                top -= 1
                continue
            v = _lowbit_index(cand)
            st_phase[top] = 1
            top += 1
            st_cand[top] = cand & ~(1 << v) & ~adj[v]
            st_cur[top] = cur | (1 << v)
            st_size[top] = size + 1
            st_phase[top] = 0
        elif phase == 1:
            v = _lowbit_index(cand)
            st_phase[top] = 2
            rest = cand & ~(1 << v)
            if size + _clique_cover(adj, rest) <= best_size:
                continue
            top += 1
            st_cand[top] = rest
            st_cur[top] = cur
            st_size[top] = size
            st_phase[top] = 0
        else:
            top -= 1
    return best_mask


# --------------------------------------------------------- packing probe


def _rsa_disks_loop(xs, ys, rs):
    # random sequential adsorption: keep each proposal disjoint from those kept
    n = xs.shape[0]
    kept = np.zeros(n, dtype=np.int64)
    k = 0
    for i in range(n):
        ok = True
        for t in range(k):
            j = kept[t]
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            if np.sqrt(dx * dx + dy * dy) <= rs[i] + rs[j]:
                ok = False
                break
        if ok:
            kept[k] = i
            k += 1
    return k


def _rsa_boxes_loop(lo, hi):
    n = lo.shape[0]
    d = lo.shape[1]
    kept = np.zeros(n, dtype=np.int64)
    k = 0
    for i in range(n):
        ok = True
        for t in range(k):
            j = kept[t]
            overlap = True
            for a in range(d):
                if lo[i, a] > hi[j, a] or lo[j, a] > hi[i, a]:
                    overlap = False
                    break
            if overlap:
                ok = False
                break
        if ok:
            kept[k] = i
            k += 1
    return k


def _rsa_disks_numpy(xs, ys, rs):
    kx: list[float] = []
    ky: list[float] = []
    kr: list[float] = []
    for i in range(xs.shape[0]):
        if kx:
            ax, ay, ar = np.array(kx), np.array(ky), np.array(kr)
            dx = ax - xs[i]
            dy = ay - ys[i]
            if np.any(np.sqrt(dx * dx + dy * dy) <= ar + rs[i]):
                continue
        kx.append(xs[i])
        ky.append(ys[i])
        kr.append(rs[i])
    return len(kx)


def _rsa_boxes_numpy(lo, hi):
    keep: list[int] = []
    for i in range(lo.shape[0]):
        if keep:
            klo = lo[keep]
            khi = hi[keep]
            sep = (lo[i] > khi) | (klo > hi[i])
            if np.any(~sep.any(axis=1)):
                continue
        keep.append(i)
    return len(keep)


# --------------------------------------------------------------- binding


def _mis_plain(adj, n, threshold):
    # python ints avoid numpy scalar overhead in the interpreted path
    return int(_mis_search([int(a) for a in adj], n, threshold))


PLAIN = SimpleNamespace(
    farthest=_farthest_numpy,
    block_farthest=_block_farthest_numpy,
    cross_intersect=_cross_intersect_numpy,
    mis_search=_mis_plain,
    rsa_disks=_rsa_disks_numpy,
    rsa_boxes=_rsa_boxes_numpy,
)

if numba is not None:
    _jit = numba.njit(cache=True)
    # compiled twins of the search helpers; njit cannot call the plain ones
    @_jit
    def _lowbit_c(x):
        i = 0
        while not (x >> i) & 1:
            i += 1
        return i

    @_jit
    def _clique_cover_c(adj, cand):
        cnt = 0
        rem = cand
        while rem:
            v = _lowbit_c(rem)
            rem &= ~(1 << v)
            grow = rem & adj[v]
            while grow:
                u = _lowbit_c(grow)
                rem &= ~(1 << u)
                grow &= ~(1 << u)
                grow &= adj[u]
            cnt += 1
        return cnt

    @_jit
    def _mis_search_c(adj, n, threshold):
        full = (np.int64(1) << n) - 1
        st_cand = np.zeros(n + 2, dtype=np.int64)
        st_cur = np.zeros(n + 2, dtype=np.int64)
        st_size = np.zeros(n + 2, dtype=np.int64)
        st_phase = np.zeros(n + 2, dtype=np.int64)
        best_size = threshold
        best_mask = np.int64(-1)
        top = 0
        st_cand[0] = full
        while top >= 0:
            cand = st_cand[top]
            cur = st_cur[top]
            size = st_size[top]
            phase = st_phase[top]
            if phase == 0:
                if cand == 0:
                    if size > best_size:
                        best_size = size
                        best_mask = cur
                    top -= 1
                    continue
                if size + _clique_cover_c(adj, cand) <= best_size:
                    top -= 1
                    continue
                v = _lowbit_c(cand)
                st_phase[top] = 1
                top += 1
                st_cand[top] = cand & ~(np.int64(1) << v) & ~adj[v]
                st_cur[top] = cur | (np.int64(1) << v)
                st_size[top] = size + 1
                st_phase[top] = 0
            elif phase == 1:
                v = _lowbit_c(cand)
                st_phase[top] = 2
                rest = cand & ~(np.int64(1) << v)
                if size + _clique_cover_c(adj, rest) <= best_size:
                    continue
                top += 1
                st_cand[top] = rest
                st_cur[top] = cur
                st_size[top] = size
                st_phase[top] = 0
            else:
                top -= 1
        return best_mask

    JIT = SimpleNamespace(
        farthest=_jit(_farthest_loop),
        block_farthest=_jit(_block_farthest_loop),
        cross_intersect=_jit(_cross_intersect_loop),
        mis_search=_mis_search_c,
        rsa_disks=_jit(_rsa_disks_loop),
        rsa_boxes=_jit(_rsa_boxes_loop),
    )
else:  # pragma: no cover
    JIT = None

ACTIVE = PLAIN if (NUMBA_DISABLED or JIT is None) else JIT
USING_NUMBA = ACTIVE is JIT
