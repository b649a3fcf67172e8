"""Choosing the merge threshold lambda from a k-means pass."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .expfam import FamilyDescriptor, generator, sufficient_stats
from .synth import make_rng

CENTER_WEIGHTS = ("population", "singleton")


@dataclass(frozen=True)
class LambdaHeuristicConfig:
    """k-means settings; ``k = a * k_tilde`` centers are fitted."""

    k_tilde: int
    a: int = 4
    kmeans_iters: int = 100
    seed: int = 0
    center_weight: str = "population"

    def __post_init__(self):
        if self.k_tilde < 1 or self.a < 1:
            raise ValueError("k_tilde and a must be positive integers")
        if self.kmeans_iters < 1:
            raise ValueError("kmeans_iters must be positive")
        if self.center_weight not in CENTER_WEIGHTS:
            raise ValueError(f"center_weight must be one of {CENTER_WEIGHTS}")

    @property
    def k(self) -> int:
        return self.a * self.k_tilde


def _sq_dists(X, C):
    # ||x||^2 - 2 x.c + ||c||^2, floored at zero against cancellation
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = [int(rng.integers(n))]
    best = _sq_dists(X, X[centers])[:, 0]
    for _ in range(1, k):
        total = best.sum()
        if total > 0:
            idx = int(rng.choice(n, p=best / total))
        else:
            idx = int(rng.integers(n))
        centers.append(idx)
        best = np.minimum(best, _sq_dists(X, X[idx:idx + 1])[:, 0])
    return X[centers].copy()


def kmeans(X, k: int, iters: int = 100, seed: int = 0, tol: float = 1e-8) -> Tuple[np.ndarray, np.ndarray]:
    """Euclidean Lloyd iterations from k-means++ seeding.

    Returns ``(centers, labels)``. An emptied cluster is reseeded at the point
    farthest from its current center. Stops when no center moves more than
    ``tol`` or after ``iters`` rounds.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points n={n}")
    rng = make_rng(seed, 0)
    C = kmeans_pp_init(X, k, rng)
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        D = _sq_dists(X, C)
        labels = D.argmin(axis=1)
        counts = np.bincount(labels, minlength=k)
        newC = np.zeros_like(C)
        np.add.at(newC, labels, X)
        filled = counts > 0
        newC[filled] /= counts[filled, None]
        for j in np.flatnonzero(~filled):
            far = int(D[np.arange(n), labels].argmax())
            newC[j] = X[far]
            D[far, labels[far]] = 0.0
            labels[far] = j
        move = np.sqrt(((newC - C) ** 2).sum(1)).max()
        C = newC
        if move < tol:
            break
    labels = _sq_dists(X, C).argmin(axis=1)
    return C, labels


def center_dissimilarities(fam: FamilyDescriptor, sizes: np.ndarray, means: np.ndarray) -> np.ndarray:
    """d* for every unordered pair of summaries, in ``triu`` order."""
    i, j = np.triu_indices(len(sizes), k=1)
    n0, n1 = sizes[i], sizes[j]
    merged = (n0[:, None] * means[i] + n1[:, None] * means[j]) / (n0 + n1)[:, None]
    wphi = sizes * generator(fam, means)
    d = wphi[i] + wphi[j] - (n0 + n1) * generator(fam, merged)
    return np.maximum(d, 0.0)


def select_lambda(points, fam: FamilyDescriptor, cfg: LambdaHeuristicConfig) -> float:
    """Mean d* over all pairs of k-means centers.

    Each center is summarised by the mean sufficient statistic of its
    members; its size is the member count (``center_weight="population"``)
    or 1 (``"singleton"``).
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = len(X), cfg.k
    if k > n:
        raise ValueError(f"a * k_tilde = {k} exceeds the number of points n={n}")
    if k < 2:
        raise ValueError("need at least two centers (a * k_tilde >= 2)")
    _, labels = kmeans(X, k, cfg.kmeans_iters, cfg.seed)
    T = sufficient_stats(fam, X)
    counts = np.bincount(labels, minlength=k).astype(float)
    means = np.zeros((k, T.shape[1]))
    np.add.at(means, labels, T)
    keep = counts > 0
    means = means[keep] / counts[keep, None]
    sizes = counts[keep] if cfg.center_weight == "population" else np.ones(int(keep.sum()))
    if len(sizes) < 2:
        lam = 0.0
    else:
        lam = float(np.mean(center_dissimilarities(fam, sizes, means)))
    if lam == 0.0:
        warnings.warn("selected lambda is 0: all k-means centers coincide", RuntimeWarning, stacklevel=2)
    return lam
