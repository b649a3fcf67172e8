"""Synthetic mixture data and reducibility triplets.

Every draw comes from a counter-based generator keyed by ``(seed, stream)``,
so a trial's data does not depend on which other trials ran or in what order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .cluster import ClusterSummary
from .expfam import FamilyDescriptor, sufficient_stats

SYNTH_FAMILIES = ("poisson", "multinomial", "gaussian")


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator for the given seed and stream index."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))


@dataclass
class SynthSpec:
    """Mixture-generation settings.

    Defaults follow the 1,000-point / 6-cluster synthetic setting. The
    gaussian mean precision is ``mean_precision * Lambda`` where ``Lambda``
    is the component's Wishart-distributed precision.
    """

    family: str
    n: int = 1000
    k: int = 6
    dim: int = 1
    m: int = 10
    beta: float = 1.0
    seed: int = 0
    gamma_shape: float = 2.0
    gamma_rate: float = 0.05
    dirichlet: float = 0.5
    mean_precision: float = 0.08
    wishart_df: Optional[float] = None
    weights: Optional[Sequence[float]] = None
    stream: int = 0

    def __post_init__(self):
        if self.family not in SYNTH_FAMILIES:
            raise ValueError(f"unknown synthetic family {self.family!r}")
        if not (self.n >= self.k >= 1):
            raise ValueError("need n >= k >= 1")
        if self.dim < 1 or self.m < 1:
            raise ValueError("dim and m must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if min(self.gamma_shape, self.gamma_rate, self.dirichlet, self.mean_precision) <= 0:
            raise ValueError("hyperparameters must be positive")
        if self.wishart_df is None:
            self.wishart_df = self.dim + 3
        if self.wishart_df <= self.dim - 1:
            raise ValueError("wishart degrees of freedom must exceed dim - 1")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.k,) or np.any(w < 0) or w.sum() <= 0:
                raise ValueError("weights must be k nonnegative numbers with a positive sum")


def wishart_scale(dim: int, rng: np.random.Generator) -> np.ndarray:
    """``A A^T + d I`` with ``A`` standard normal."""
    A = rng.standard_normal((dim, dim))
    return A @ A.T + dim * np.eye(dim)


def draw_gaussian_component(dim, df, mean_precision, psi, rng):
    """Normal-Wishart draw: precision ~ W(df, psi), mean ~ N(0, (r precision)^-1)."""
    precision = np.atleast_2d(stats.wishart(df=df, scale=psi).rvs(random_state=rng))
    cov = np.linalg.inv(precision)
    cov = 0.5 * (cov + cov.T)
    mean = rng.multivariate_normal(np.zeros(dim), cov / mean_precision)
    return mean, cov


def generate(spec: SynthSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Draw ``(points, labels)`` from a random mixture."""
    rng = make_rng(spec.seed, spec.stream)
    w = np.full(spec.k, 1.0 / spec.k) if spec.weights is None else np.asarray(spec.weights, float)
    labels = rng.choice(spec.k, size=spec.n, p=w / w.sum())
    counts = np.bincount(labels, minlength=spec.k)

    if spec.family == "poisson":
        X = np.zeros((spec.n, spec.dim))
        rates = rng.gamma(spec.gamma_shape, 1.0 / spec.gamma_rate, size=(spec.k, spec.dim))
        for j in range(spec.k):
            X[labels == j] = rng.poisson(rates[j], size=(counts[j], spec.dim))
    elif spec.family == "multinomial":
        X = np.zeros((spec.n, spec.dim))
        q = rng.dirichlet(np.full(spec.dim, spec.dirichlet), size=spec.k)
        for j in range(spec.k):
            X[labels == j] = rng.multinomial(spec.m, q[j], size=counts[j])
    else:
        X = np.zeros((spec.n, spec.dim))
        psi = wishart_scale(spec.dim, rng)
        for j in range(spec.k):
            mean, cov = draw_gaussian_component(spec.dim, spec.wishart_df, spec.mean_precision, psi, rng)
            X[labels == j] = rng.multivariate_normal(mean, cov / spec.beta, size=counts[j])
    return X, labels


# ---------------------------------------------------------------------------
# reducibility triplets


@dataclass
class TripletConfig:
    """Per-family settings for the three-cluster reducibility experiment."""

    family: str
    dim: int
    m: int = 5
    gamma_shape: float = 2.0
    gamma_rate: float = 0.05
    dirichlet: float = 5.0
    mean_precision: float = 0.08
    wishart_df: Optional[float] = None
    fam: FamilyDescriptor = field(init=False)

    def __post_init__(self):
        if self.family not in SYNTH_FAMILIES:
            raise ValueError(f"unknown synthetic family {self.family!r}")
        if self.wishart_df is None:
            self.wishart_df = self.dim + 2
        family_id = {"poisson": "poisson", "multinomial": "multinomial", "gaussian": "gaussian_full"}[self.family]
        self.fam = FamilyDescriptor(family_id, self.dim, m=self.m if self.family == "multinomial" else None)


def default_triplet_config(family: str) -> TripletConfig:
    if family == "poisson":
        return TripletConfig("poisson", 1)
    if family == "multinomial":
        return TripletConfig("multinomial", 10, m=5)
    return TripletConfig("gaussian", 10)


@dataclass
class Triplet:
    fam: FamilyDescriptor
    clusters: list
    true_mean: np.ndarray
    sizes: Tuple[int, int, int]


def reducibility_triplet(
    family: str,
    size_range: Tuple[int, int] = (20, 100),
    beta: float = 1.0,
    seed: int = 0,
    stream: int = 0,
    config: Optional[TripletConfig] = None,
) -> Triplet:
    """Three clusters drawn from one component, with their summaries.

    Cluster sizes are uniform integers on ``size_range`` (inclusive).
    ``true_mean`` is the component's expected sufficient statistic.
    """
    lo, hi = size_range
    if not 1 <= lo <= hi:
        raise ValueError("size range must satisfy 1 <= low <= high")
    cfg = config or default_triplet_config(family)
    rng = make_rng(seed, stream)
    sizes = tuple(int(s) for s in rng.integers(lo, hi + 1, size=3))
    total = sum(sizes)
    d = cfg.dim

    if cfg.family == "poisson":
        rate = rng.gamma(cfg.gamma_shape, 1.0 / cfg.gamma_rate, size=d)
        X = rng.poisson(rate, size=(total, d)).astype(float)
        true_mean = rate
    elif cfg.family == "multinomial":
        q = rng.dirichlet(np.full(d, cfg.dirichlet))
        X = rng.multinomial(cfg.m, q, size=total).astype(float)
        true_mean = cfg.m * q
    else:
        psi = wishart_scale(d, rng)
        mean, cov = draw_gaussian_component(d, cfg.wishart_df, cfg.mean_precision, psi, rng)
        cov = cov / beta
        X = rng.multivariate_normal(mean, cov, size=total)
        true_mean = np.concatenate([mean, (cov + np.outer(mean, mean)).ravel()])

    T = sufficient_stats(cfg.fam, X)
    clusters = []
    start = 0
    for s in sizes:
        clusters.append(ClusterSummary(s, T[start:start + s].mean(axis=0), frozenset(range(start, start + s))))
        start += s
    return Triplet(cfg.fam, clusters, true_mean, sizes)
