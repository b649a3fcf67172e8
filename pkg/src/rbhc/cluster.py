"""Cluster summaries and the small-variance merge dissimilarity.

A cluster is summarised by its size and the mean of its members' sufficient
statistics. That is all the Jensen-gap dissimilarity

    d(c0, c1) = |c0| phi(t0) + |c1| phi(t1) - |c| phi(t)

needs, where ``t`` is the size-weighted mean of ``t0`` and ``t1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Optional

import numpy as np

from .expfam import (
    FamilyDescriptor,
    generator,
    generator_gradient,
    generator_quadratic_form,
    sufficient_stat,
)

# negative values above -NEGATIVE_SLACK * (1 + magnitude of the terms) are
# round-off and clamp to zero; anything lower means phi is not convex there
NEGATIVE_SLACK = 1e-12


@dataclass(frozen=True)
class ClusterSummary:
    size: int
    mean_stat: np.ndarray
    members: FrozenSet[int]

    def __post_init__(self):
        if self.size < 1 or self.size != len(self.members):
            raise ValueError("cluster size must equal the number of members and be >= 1")
        stat = np.array(self.mean_stat, dtype=float)
        stat.flags.writeable = False
        object.__setattr__(self, "mean_stat", stat)
        object.__setattr__(self, "members", frozenset(self.members))


def summary_from_point(fam: FamilyDescriptor, x, id: int) -> ClusterSummary:
    return ClusterSummary(1, sufficient_stat(fam, x), frozenset([id]))


def merged_mean(n0, t0, n1, t1):
    """Size-weighted mean, written so that swapping the arguments is bit-exact."""
    return (n0 * t0 + n1 * t1) / (n0 + n1)


def merge_summaries(s0: ClusterSummary, s1: ClusterSummary) -> ClusterSummary:
    if s0.members & s1.members:
        raise ValueError("cannot merge clusters that share members")
    mean = merged_mean(s0.size, s0.mean_stat, s1.size, s1.mean_stat)
    return ClusterSummary(s0.size + s1.size, mean, s0.members | s1.members)


def _canonical(s0, s1):
    # evaluate in a fixed order so d(a, b) and d(b, a) are bit-identical
    if min(s1.members) < min(s0.members):
        return s1, s0
    return s0, s1


def _clamp(value: float, scale: float = 0.0) -> float:
    if value < 0.0:
        if value < -NEGATIVE_SLACK * (1.0 + abs(scale)):
            raise ArithmeticError(f"dissimilarity is negative ({value:.3e}); generator is not convex here")
        return 0.0
    return value


def jensen_gap(fam: FamilyDescriptor, n0, t0, n1, t1):
    """Vectorised dissimilarity with no clamping.

    ``n1``/``t1`` may be stacks (shape ``(m,)`` and ``(m, D)``) evaluated
    against a single cluster ``n0``/``t0``.
    """
    n0 = np.asarray(n0, dtype=float)
    n1 = np.asarray(n1, dtype=float)
    t = merged_mean(n0[..., None], t0, n1[..., None], t1)
    return (n0 * generator(fam, t0) + n1 * generator(fam, t1)) - (n0 + n1) * generator(fam, t)


def dissimilarity(fam: FamilyDescriptor, s0: ClusterSummary, s1: ClusterSummary) -> float:
    """Small-variance merge cost of two clusters (nonnegative)."""
    s0, s1 = _canonical(s0, s1)
    value = float(jensen_gap(fam, s0.size, s0.mean_stat, s1.size, s1.mean_stat))
    scale = s0.size * generator(fam, s0.mean_stat) + s1.size * generator(fam, s1.mean_stat)
    return _clamp(value, scale)


def bregman_divergence(fam: FamilyDescriptor, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(generator(fam, x) - generator(fam, y) - np.dot(x - y, generator_gradient(fam, y)))


def dissimilarity_bregman_form(fam: FamilyDescriptor, s0: ClusterSummary, s1: ClusterSummary) -> float:
    """The same quantity as :func:`dissimilarity`, written as a size-weighted
    sum of Bregman divergences to the merged mean."""
    s0, s1 = _canonical(s0, s1)
    t = merged_mean(s0.size, s0.mean_stat, s1.size, s1.mean_stat)
    value = s0.size * bregman_divergence(fam, s0.mean_stat, t) + s1.size * bregman_divergence(
        fam, s1.mean_stat, t
    )
    return _clamp(value, (s0.size + s1.size) * generator(fam, t))


def approx_dissimilarity(
    fam: FamilyDescriptor,
    s0: ClusterSummary,
    s1: ClusterSummary,
    mu: Optional[np.ndarray] = None,
) -> float:
    """Second-order (Mahalanobis-Ward) approximation of :func:`dissimilarity`.

    The Hessian of the generator is taken at ``mu``; by default the merged
    mean of the two clusters.
    """
    s0, s1 = _canonical(s0, s1)
    if mu is None:
        mu = merged_mean(s0.size, s0.mean_stat, s1.size, s1.mean_stat)
    diff = s0.mean_stat - s1.mean_stat
    weight = s0.size * s1.size / (2.0 * (s0.size + s1.size))
    return max(0.0, float(weight * generator_quadratic_form(fam, mu, diff)))


def lance_williams_update(d01: float, d02: float, d12: float, n0: int, n1: int, n2: int) -> float:
    """Dissimilarity between ``c0 | c1`` and ``c2`` from the pre-merge values."""
    return ((n0 + n2) * d02 + (n1 + n2) * d12 - n2 * d01) / (n0 + n1 + n2)
