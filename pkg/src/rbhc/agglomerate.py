"""Agglomerative drivers: greedy (priority queue) and nearest-neighbour chain.

Both drivers work on a *store*: fixed-capacity arrays of live cluster state
indexed by slot. A store exposes

* ``row(slot, others)`` -- dissimilarities from one slot to many,
* ``merge(a, b)`` -- fold slot ``b`` into slot ``a``,
* ``node_id`` / ``sizes`` arrays.

A merged cluster reuses the slot of its left child, so memory stays O(n).
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .cluster import NEGATIVE_SLACK
from .expfam import FamilyDescriptor, generator, sufficient_stats
from .forest import Forest, MergeRecord


@dataclass
class RunStats:
    evaluations: int = 0
    chain_restarts: int = 0
    chain_cycles: int = 0


class SummaryStore:
    """Size / mean-statistic state for the small-variance dissimilarity."""

    def __init__(self, fam: FamilyDescriptor, stats: np.ndarray, stats_counter: Optional[RunStats] = None):
        n = len(stats)
        self.fam = fam
        self.sizes = np.ones(n)
        self.means = np.array(stats, dtype=float)
        # |c| phi(mean) cached per slot
        self.wphi = np.asarray(generator(fam, self.means), dtype=float).reshape(n)
        self.node_id = np.arange(n)
        self.counter = stats_counter if stats_counter is not None else RunStats()

    @classmethod
    def from_points(cls, fam, points, counter=None):
        return cls(fam, sufficient_stats(fam, points), counter)

    def row(self, a: int, others: np.ndarray) -> np.ndarray:
        self.counter.evaluations += len(others)
        na, nb = self.sizes[a], self.sizes[others]
        n = na + nb
        merged = (na * self.means[a] + nb[:, None] * self.means[others]) / n[:, None]
        d = (self.wphi[a] + self.wphi[others]) - n * generator(self.fam, merged)
        neg = d < 0
        if neg.any():
            scale = 1.0 + np.abs(self.wphi[a]) + np.abs(self.wphi[others[neg]])
            if np.any(d[neg] < -NEGATIVE_SLACK * scale):
                raise ArithmeticError("negative dissimilarity; generator is not convex on this data")
            d[neg] = 0.0
        return d

    def merge(self, a: int, b: int, new_id: int) -> None:
        na, nb = self.sizes[a], self.sizes[b]
        self.means[a] = (na * self.means[a] + nb * self.means[b]) / (na + nb)
        self.sizes[a] = na + nb
        self.wphi[a] = (na + nb) * generator(self.fam, self.means[a])
        self.node_id[a] = new_id


def _check_lambda(lam):
    if lam is None:
        return math.inf
    lam = float(lam)
    if not lam > 0:
        raise ValueError("lambda must be positive (or infinite)")
    return lam


def _prepare(points, fam):
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if fam.dim == 1 else X[None, :]
    if X.shape[0] == 0:
        raise ValueError("cannot cluster an empty dataset")
    return X


def greedy_merge(
    store,
    n: int,
    accept: Callable[[float], bool],
    max_merges: Optional[int] = None,
    on_merge: Optional[Callable[[int, int, float], dict]] = None,
) -> Forest:
    """Repeatedly merge the globally closest live pair.

    Stale heap entries (either endpoint already merged) are skipped when
    popped. Ties resolve to the lexicographically smallest (min id, max id).
    Stops when ``accept(d)`` is false for the closest pair, when one root
    remains, or after ``max_merges`` merges.
    """
    limit = n - 1 if max_merges is None else min(max_merges, n - 1)
    alive = np.zeros(2 * n, dtype=bool)
    alive[:n] = True
    slot_of = np.arange(2 * n)
    heap = []
    for i in range(n - 1):
        others = np.arange(i + 1, n)
        d = store.row(i, others)
        heap.extend(zip(d.tolist(), [i] * len(others), others.tolist()))
    heapq.heapify(heap)

    merges = []
    while len(merges) < limit and heap:
        d, lo, hi = heapq.heappop(heap)
        if not (alive[lo] and alive[hi]):
            continue
        if not accept(d):
            break
        a, b = slot_of[lo], slot_of[hi]
        new_id = n + len(merges)
        extra = on_merge(a, b, d) if on_merge else {}
        size = int(store.sizes[a] + store.sizes[b])
        store.merge(a, b, new_id)
        merges.append(MergeRecord(int(lo), int(hi), float(d), size, **extra))
        alive[lo] = alive[hi] = False
        alive[new_id] = True
        slot_of[new_id] = a
        live_ids = np.flatnonzero(alive[:new_id])
        if live_ids.size:
            others = slot_of[live_ids]
            dn = store.row(a, others)
            for dv, other in zip(dn.tolist(), live_ids.tolist()):
                heapq.heappush(heap, (dv, other, new_id))

    roots = np.flatnonzero(alive).tolist()
    return Forest(n, merges, roots)


def greedy_cluster(points, fam: FamilyDescriptor, lam=math.inf, stats: Optional[RunStats] = None) -> Forest:
    """Greedy agglomeration under the small-variance dissimilarity.

    Merging stops once the smallest remaining dissimilarity is >= ``lam``.
    """
    lam = _check_lambda(lam)
    X = _prepare(points, fam)
    store = SummaryStore.from_points(fam, X, stats)
    return greedy_merge(store, len(X), lambda d: d < lam)


def nnchain_merge(store, n: int, lam: float, stats: Optional[RunStats] = None) -> Forest:
    stats = stats if stats is not None else RunStats()
    active = np.ones(n, dtype=bool)
    in_chain = np.zeros(n, dtype=bool)
    chain: list = []
    merges = []
    retired = []

    while True:
        live = np.flatnonzero(active)
        if live.size == 0:
            break
        if not chain:
            if live.size == 1:
                retired.append(int(store.node_id[live[0]]))
                active[live[0]] = False
                continue
            stats.chain_restarts += 1
            chain.append(int(live[0]))
            in_chain[live[0]] = True

        top = chain[-1]
        others = live[live != top]
        if others.size == 0:
            # the chain's last cluster has nobody left to pair with
            chain.pop()
            in_chain[top] = False
            retired.append(int(store.node_id[top]))
            active[top] = False
            continue
        d = store.row(top, others)
        dmin = d.min()
        prev = chain[-2] if len(chain) >= 2 else -1
        if prev >= 0 and d[np.searchsorted(others, prev)] == dmin:
            a, b = prev, top
        else:
            cand = others[d == dmin]
            nxt = int(cand[np.argmin(store.node_id[cand])]) if cand.size > 1 else int(cand[0])
            if in_chain[nxt]:
                # only reachable when the dissimilarity is not reducible
                stats.chain_cycles += 1
                if stats.chain_cycles > 10 * n:
                    raise RuntimeError("nearest-neighbour chain failed to terminate")
                j = chain.index(nxt)
                for s in chain[j + 1:]:
                    in_chain[s] = False
                del chain[j + 1:]
            else:
                chain.append(nxt)
                in_chain[nxt] = True
            continue

        chain.pop()
        chain.pop()
        in_chain[a] = in_chain[b] = False
        ida, idb = int(store.node_id[a]), int(store.node_id[b])
        if dmin < lam:
            lo, hi = min(ida, idb), max(ida, idb)
            keep, drop = (a, b) if ida == lo else (b, a)
            size = int(store.sizes[a] + store.sizes[b])
            store.merge(keep, drop, n + len(merges))
            active[drop] = False
            merges.append(MergeRecord(lo, hi, float(dmin), size))
        else:
            active[a] = active[b] = False
            retired.extend((ida, idb))
            for s in chain:
                in_chain[s] = False
            chain.clear()

    return Forest(n, merges, sorted(retired))


def nnchain_cluster(points, fam: FamilyDescriptor, lam=math.inf, stats: Optional[RunStats] = None) -> Forest:
    """Nearest-neighbour-chain agglomeration with merge threshold ``lam``.

    Chains are grown until a reciprocal-nearest-neighbour pair appears. A
    pair closer than ``lam`` is merged and the chain resumes from the
    element below it; otherwise both clusters are retired as final and a
    fresh chain is started. With ``lam=inf`` this builds a full binary tree.
    The dissimilarity is treated as reducible even where it is not.
    Working memory is O(n): only one row of dissimilarities exists at a time.
    """
    lam = _check_lambda(lam)
    X = _prepare(points, fam)
    stats = stats if stats is not None else RunStats()
    store = SummaryStore.from_points(fam, X, stats)
    return nnchain_merge(store, len(X), lam, stats)
