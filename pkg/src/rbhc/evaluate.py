"""Partition agreement, the reducibility Monte-Carlo harness and baselines."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sps

from .agglomerate import greedy_merge
from .cluster import approx_dissimilarity, dissimilarity, merge_summaries
from .expfam import SingularGeneratorError
from .forest import Partition, extract_partition
from .synth import reducibility_triplet

THREADS_ENV = "RBHC_NUM_THREADS"


# ---------------------------------------------------------------------------
# adjusted Rand index


def _labels(p) -> np.ndarray:
    if isinstance(p, Partition):
        return p.labels
    return Partition.from_labels(list(p)).labels


def _comb2(x: np.ndarray) -> int:
    x = x.astype(np.int64)
    return int((x * (x - 1) // 2).sum())


def contingency_table(p1, p2) -> np.ndarray:
    a, b = _labels(p1), _labels(p2)
    if len(a) != len(b):
        raise ValueError("partitions cover different numbers of leaves")
    table = np.zeros((a.max(initial=-1) + 1, b.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def adjusted_rand_index(p1, p2) -> float:
    """Hubert-Arabie adjusted Rand index.

    Accepts ``Partition`` objects or plain label sequences. When both
    partitions are trivial in the same way (the index is 0/0) the result is 1.
    """
    table = contingency_table(p1, p2)
    n = int(table.sum())
    index = _comb2(table.ravel())
    sa = _comb2(table.sum(1))
    sb = _comb2(table.sum(0))
    total = n * (n - 1) // 2
    if total == 0:
        return 1.0
    # exact integers up to the final division keep the result bit-reproducible
    num = 2 * (index * total - sa * sb)
    den = (sa + sb) * total - 2 * sa * sb
    if den == 0:
        return 1.0
    return num / den


# ---------------------------------------------------------------------------
# reducibility trials


@dataclass
class TrialReport:
    d_star_01: float
    d_star_02: float
    d_star_12: float
    min_pair: Tuple[int, int]
    merged_check: float
    reducible: bool
    d_exact: float
    d_approx: float
    rel_error: float


def relative_error(exact: float, approx: float) -> float:
    """``2 |a - b| / (a + b)``, defined as 0 when both vanish."""
    s = exact + approx
    return 0.0 if s == 0 else 2.0 * abs(exact - approx) / s


def evaluate_triplet(fam, clusters, mu=None) -> TrialReport:
    """Reducibility check on the closest pair plus the approximation error.

    The approximation is measured on the pair (c0, c1) with the Hessian
    taken at ``mu``: the generating component's expected statistic when
    known, else the pair's merged mean.
    """
    c = clusters
    pairs = [(0, 1), (0, 2), (1, 2)]
    d = {p: dissimilarity(fam, c[p[0]], c[p[1]]) for p in pairs}
    i, j = min(pairs, key=lambda p: (d[p], p))
    k = 3 - i - j
    merged = merge_summaries(c[i], c[j])
    check = dissimilarity(fam, merged, c[k])
    cross = min(d[tuple(sorted((i, k)))], d[tuple(sorted((j, k)))])
    d_exact = d[(0, 1)]
    d_approx = approx_dissimilarity(fam, c[0], c[1], mu)
    return TrialReport(
        d[(0, 1)], d[(0, 2)], d[(1, 2)], (i, j), check, bool(check >= cross),
        d_exact, d_approx, relative_error(d_exact, d_approx),
    )


def reducibility_trial(family: str, beta: float = 1.0, seed: int = 0, trial: int = 0,
                       size_range: Tuple[int, int] = (20, 100)) -> TrialReport:
    """One triplet drawn on stream ``trial`` of ``seed``.

    Raises ``SingularGeneratorError`` or ``ArithmeticError`` if the sample
    leaves the generator's domain.
    """
    trip = reducibility_triplet(family, size_range, beta, seed, trial)
    return evaluate_triplet(trip.fam, trip.clusters, trip.true_mean)


@dataclass
class ReducibilityReport:
    family: str
    trials: int
    violations: int
    excluded: int
    mean_d_exact: float
    mean_d_approx: float
    mean_rel_error: float

    def to_dict(self) -> dict:
        return asdict(self)


def _trial_batch(args):
    family, beta, seed, size_range, start, stop = args
    out = []
    for t in range(start, stop):
        try:
            r = reducibility_trial(family, beta, seed, t, size_range)
        except (SingularGeneratorError, ArithmeticError):
            out.append(None)
            continue
        out.append((r.reducible, r.d_exact, r.d_approx, r.rel_error))
    return out


def worker_count(workers: Optional[int] = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


def _run_trials(family, beta, seed, size_range, trials, workers):
    workers = worker_count(workers)
    if workers == 1 or trials < 200:
        return _trial_batch((family, beta, seed, size_range, 0, trials))
    bounds = np.linspace(0, trials, workers * 4 + 1).astype(int)
    jobs = [(family, beta, seed, size_range, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(workers) as pool:
        parts = list(pool.map(_trial_batch, jobs))
    return [r for part in parts for r in part]


def _summarise(family, results) -> ReducibilityReport:
    ok = [r for r in results if r is not None]
    m = len(ok)

    def mean(vals):
        return math.fsum(vals) / m if m else math.nan

    return ReducibilityReport(
        family=family,
        trials=len(results),
        violations=sum(1 for r in ok if not r[0]),
        excluded=len(results) - m,
        mean_d_exact=mean(r[1] for r in ok),
        mean_d_approx=mean(r[2] for r in ok),
        mean_rel_error=mean(r[3] for r in ok),
    )


def run_reducibility(family: str, trials: int, seed: int = 0, beta: float = 1.0,
                     size_range: Tuple[int, int] = (20, 100), workers: Optional[int] = None) -> ReducibilityReport:
    """Aggregate ``trials`` independent triplets.

    Trials that hit a generator domain error are counted in ``excluded``
    and left out of every other field.
    """
    if trials < 0:
        raise ValueError("trials must be nonnegative")
    return _summarise(family, _run_trials(family, beta, seed, size_range, trials, workers))


@dataclass
class SweepCell:
    beta: float
    n_max: int
    trials: int
    excluded: int
    violations: int
    mean_rel_error: float


def error_decay_sweep(family: str, beta_grid: Sequence[float], max_size_grid: Sequence[int],
                      trials_per_cell: int, seed: int = 0, min_size: int = 20,
                      workers: Optional[int] = None) -> List[SweepCell]:
    """Mean relative error per (beta, n_max) cell.

    Cluster sizes are uniform on ``[min(min_size, n_max), n_max]``. Every
    cell reuses the same trial streams, so differences between cells are
    not masked by independent sampling noise.
    """
    if not len(beta_grid) or not len(max_size_grid):
        raise ValueError("grids must be nonempty")
    cells = []
    if trials_per_cell <= 0:
        return cells
    for n_max in max_size_grid:
        for beta in beta_grid:
            rng = (min(min_size, int(n_max)), int(n_max))
            rep = _summarise(family, _run_trials(family, float(beta), seed, rng, trials_per_cell, workers))
            cells.append(SweepCell(float(beta), int(n_max), rep.trials, rep.excluded, rep.violations,
                                   rep.mean_rel_error))
    return cells


def beta_trend(cells: Sequence[SweepCell]) -> dict:
    """Spearman correlation of mean error against beta, per n_max."""
    out = {}
    for n_max in sorted({c.n_max for c in cells}):
        row = [c for c in cells if c.n_max == n_max]
        errs = [c.mean_rel_error for c in row]
        if len(row) < 2 or len(set(errs)) < 2:
            # undefined for a constant column (beta-free families)
            out[n_max] = math.nan
            continue
        out[n_max] = float(sps.spearmanr([c.beta for c in row], errs)[0])
    return out


def sweep_to_csv(cells: Sequence[SweepCell]) -> str:
    lines = ["beta,n_max,trials,excluded,violations,mean_rel_error"]
    for c in cells:
        lines.append(f"{c.beta:.17g},{c.n_max},{c.trials},{c.excluded},{c.violations},{c.mean_rel_error:.17g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# classic linkage baselines

LINKAGES = ("single", "complete", "ward")


class LinkageStore:
    """Dense Lance-Williams store for the Euclidean baselines.

    Ward heights are the increase in within-cluster sum of squares.
    """

    def __init__(self, X: np.ndarray, linkage: str):
        if linkage not in LINKAGES:
            raise ValueError(f"linkage must be one of {LINKAGES}")
        self.linkage = linkage
        sq = (X * X).sum(1)
        D2 = np.maximum(sq[:, None] + sq[None, :] - 2 * X @ X.T, 0.0)
        self.D = D2 / 2.0 if linkage == "ward" else np.sqrt(D2)
        n = len(X)
        self.sizes = np.ones(n)
        self.node_id = np.arange(n)

    def row(self, a, others):
        return self.D[a, others]

    def merge(self, a, b, new_id):
        D, s = self.D, self.sizes
        if self.linkage == "single":
            new = np.minimum(D[a], D[b])
        elif self.linkage == "complete":
            new = np.maximum(D[a], D[b])
        else:
            na, nb = s[a], s[b]
            tot = na + nb + s
            new = ((na + s) * D[a] + (nb + s) * D[b] - s * D[a, b]) / tot
        D[a, :] = new
        D[:, a] = new
        D[a, a] = 0.0
        s[a] += s[b]
        self.node_id[a] = new_id


def baseline_forest(points, linkage: str, k: int = 1):
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    return greedy_merge(LinkageStore(X, linkage), n, lambda d: True, max_merges=n - k)


def baseline_cluster(points, linkage: str, k: int) -> Partition:
    """Euclidean single / complete / Ward clustering cut at ``k`` clusters."""
    return extract_partition(baseline_forest(points, linkage, k))
