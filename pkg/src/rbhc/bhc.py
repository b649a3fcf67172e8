"""Exact Bayesian hierarchical clustering for three conjugate families.

Everything is carried in log space. A node keeps additive evidence
statistics so the marginal likelihood of a merged cluster is O(d) to compute.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, gammaln

from .forest import Forest, MergeRecord

PRIOR_FAMILIES = ("gamma_poisson", "dirichlet_multinomial", "gaussian_known_var")
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ConjugatePrior:
    """Conjugate prior over the likelihood parameter.

    * ``gamma_poisson``: Poisson rate ~ Gamma(shape ``a``, rate ``b``), per dimension.
    * ``dirichlet_multinomial``: category probabilities ~ Dir(``concentration``).
    * ``gaussian_known_var``: x ~ N(mu, ``sigma2`` I), mu ~ N(``mean``, ``rho2`` I).
    """

    family: str
    a: float = 2.0
    b: float = 0.05
    concentration: Optional[np.ndarray] = None
    sigma2: float = 1.0
    mean: Optional[np.ndarray] = None
    rho2: float = 1.0

    def __post_init__(self):
        if self.family not in PRIOR_FAMILIES:
            raise ValueError(f"unknown prior family {self.family!r}")
        if self.family == "gamma_poisson" and not (self.a > 0 and self.b > 0):
            raise ValueError("gamma prior needs a > 0 and b > 0")
        if self.family == "dirichlet_multinomial":
            if self.concentration is None:
                raise ValueError("dirichlet prior needs a concentration vector")
            conc = np.array(self.concentration, dtype=float)
            if np.any(conc <= 0):
                raise ValueError("dirichlet concentration must be positive")
            object.__setattr__(self, "concentration", conc)
        if self.family == "gaussian_known_var":
            if not (self.sigma2 > 0 and self.rho2 > 0):
                raise ValueError("gaussian prior needs sigma2 > 0 and rho2 > 0")
            if self.mean is not None:
                object.__setattr__(self, "mean", np.atleast_1d(np.array(self.mean, dtype=float)))

    def scaled(self, beta: float) -> "ConjugatePrior":
        """Same prior with the likelihood variance divided by ``beta``."""
        if self.family != "gaussian_known_var":
            raise ValueError("only the gaussian likelihood has a variance scale here")
        return ConjugatePrior(self.family, sigma2=self.sigma2 / beta, mean=self.mean, rho2=self.rho2)


# ---------------------------------------------------------------------------
# additive evidence statistics


@dataclass
class Evidence:
    """Sufficient statistics for the closed-form marginal of one cluster.

    ``count`` is the number of points; ``total`` is the sum (poisson,
    multinomial) or mean (gaussian) of observations; ``extra`` is the sum
    of log base-measure terms (poisson, multinomial) or the per-dimension
    sum of squared deviations from the mean (gaussian).
    """

    count: int
    total: np.ndarray
    extra: np.ndarray | float


def evidence_of(prior: ConjugatePrior, points) -> Evidence:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise ValueError("evidence of an empty cluster is undefined")
    if not np.all(np.isfinite(X)):
        raise ValueError("observations must be finite")
    if prior.family == "gamma_poisson":
        if np.any(X < 0) or np.any(X != np.round(X)):
            raise ValueError("poisson observations must be nonnegative integers")
        return Evidence(len(X), X.sum(axis=0), float(gammaln(X + 1).sum()))
    if prior.family == "dirichlet_multinomial":
        if np.any(X < 0) or np.any(X != np.round(X)):
            raise ValueError("multinomial observations must be nonnegative integer counts")
        if X.shape[1] != len(prior.concentration):
            raise ValueError("observation length does not match the dirichlet concentration")
        # log multinomial coefficient of each row
        coef = gammaln(X.sum(axis=1) + 1) - gammaln(X + 1).sum(axis=1)
        return Evidence(len(X), X.sum(axis=0), float(coef.sum()))
    mean = X.mean(axis=0)
    return Evidence(len(X), mean, ((X - mean) ** 2).sum(axis=0))


def combine(prior: ConjugatePrior, e0: Evidence, e1: Evidence) -> Evidence:
    n = e0.count + e1.count
    if prior.family != "gaussian_known_var":
        return Evidence(n, e0.total + e1.total, e0.extra + e1.extra)
    # pairwise mean / scatter update
    delta = e1.total - e0.total
    mean = e0.total + delta * (e1.count / n)
    scatter = e0.extra + e1.extra + delta**2 * (e0.count * e1.count / n)
    return Evidence(n, mean, scatter)


def log_marginal_from_evidence(prior: ConjugatePrior, ev: Evidence) -> float:
    n = ev.count
    if prior.family == "gamma_poisson":
        a, b = prior.a, prior.b
        s = ev.total
        per_dim = a * math.log(b) - gammaln(a) + gammaln(a + s) - (a + s) * math.log(b + n)
        return float(np.sum(per_dim) - ev.extra)
    if prior.family == "dirichlet_multinomial":
        alpha = prior.concentration
        value = (
            gammaln(alpha.sum())
            - gammaln(alpha.sum() + ev.total.sum())
            + np.sum(gammaln(alpha + ev.total) - gammaln(alpha))
        )
        return float(value + ev.extra)
    s2, r2 = prior.sigma2, prior.rho2
    m = prior.mean if prior.mean is not None else np.zeros_like(ev.total)
    quad = ev.extra + n * (ev.total - m) ** 2 * s2 / (s2 + n * r2)
    per_dim = -0.5 * n * (_LOG_2PI + math.log(s2)) - 0.5 * math.log1p(n * r2 / s2) - quad / (2 * s2)
    return float(np.sum(per_dim))


def log_marginal(prior: ConjugatePrior, points) -> float:
    """Log evidence of a cluster with the likelihood parameter integrated out."""
    return log_marginal_from_evidence(prior, evidence_of(prior, points))


# ---------------------------------------------------------------------------
# nodes and merges


@dataclass
class BhcNode:
    members: frozenset
    evidence: Evidence
    log_phi_tree: float
    log_phi_h: float
    log_gamma: float
    children: Optional[tuple] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.evidence.count


def leaf_node(prior: ConjugatePrior, x, id: int, log_alpha: float = 0.0) -> BhcNode:
    ev = evidence_of(prior, np.atleast_1d(np.asarray(x, dtype=float))[None, :])
    log_h = log_alpha + log_marginal_from_evidence(prior, ev)
    return BhcNode(frozenset([id]), ev, log_h, log_h, log_alpha)


def _merge_terms(prior, n0: BhcNode, n1: BhcNode, log_alpha: float):
    ev = combine(prior, n0.evidence, n1.evidence)
    log_prior_h = log_alpha + gammaln(ev.count)
    log_h = log_prior_h + log_marginal_from_evidence(prior, ev)
    # log of phi(T0) phi(T1) / phi(H): the BHC dissimilarity
    log_ratio = n0.log_phi_tree + n1.log_phi_tree - log_h
    return ev, log_prior_h, log_h, log_ratio


def merge_nodes(prior: ConjugatePrior, n0: BhcNode, n1: BhcNode, log_alpha: float):
    """Log-space merge; returns ``(node, log_ratio)``."""
    if n0.members & n1.members:
        raise ValueError("cannot merge nodes that share members")
    ev, log_prior_h, log_h, log_ratio = _merge_terms(prior, n0, n1, log_alpha)
    node = BhcNode(
        n0.members | n1.members,
        ev,
        float(np.logaddexp(log_h, n0.log_phi_tree + n1.log_phi_tree)),
        float(log_h),
        float(np.logaddexp(log_prior_h, n0.log_gamma + n1.log_gamma)),
        (n0, n1),
    )
    return node, float(log_ratio)


def posterior_from_log_ratio(log_ratio: float) -> float:
    return float(expit(-log_ratio))


def bhc_merge(n0: BhcNode, n1: BhcNode, alpha: float, prior: ConjugatePrior):
    """Merge two nodes; returns ``(node, merge_posterior)``.

    The posterior is ``1 / (1 + ratio)`` where ``ratio`` is the BHC
    dissimilarity, formed from its logarithm.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    node, log_ratio = merge_nodes(prior, n0, n1, math.log(alpha))
    return node, posterior_from_log_ratio(log_ratio)


class BhcStore:
    """Greedy-driver store over BHC nodes; row values are log-ratios."""

    def __init__(self, prior: ConjugatePrior, X: np.ndarray, log_alpha: float):
        self.prior = prior
        self.log_alpha = log_alpha
        self.nodes = [leaf_node(prior, X[i], i, log_alpha) for i in range(len(X))]
        self.sizes = np.ones(len(X))
        self.node_id = np.arange(len(X))

    def log_ratio(self, a: int, b: int) -> float:
        return float(_merge_terms(self.prior, self.nodes[a], self.nodes[b], self.log_alpha)[3])

    def row(self, a: int, others: np.ndarray) -> np.ndarray:
        return np.array([self.log_ratio(a, int(b)) for b in others], dtype=float)

    def merge(self, a: int, b: int, new_id: int) -> None:
        self.nodes[a], _ = merge_nodes(self.prior, self.nodes[a], self.nodes[b], self.log_alpha)
        self.nodes[b] = None
        self.sizes[a] += self.sizes[b]
        self.node_id[a] = new_id


def default_prior(family: str, points=None, **overrides) -> ConjugatePrior:
    """Hyperparameter defaults: Gamma(2, 0.05), uniform Dirichlet, empirical-mean Gaussian."""
    if family == "gamma_poisson":
        return ConjugatePrior(family, **{"a": 2.0, "b": 0.05, **overrides})
    if family == "dirichlet_multinomial":
        d = np.asarray(points).shape[1]
        return ConjugatePrior(family, **{"concentration": np.ones(d), **overrides})
    mean = np.asarray(points, dtype=float).mean(axis=0) if points is not None else None
    return ConjugatePrior(family, **{"mean": mean, **overrides})


def _as_matrix(points):
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise ValueError("cannot cluster an empty dataset")
    return X


def bhc_greedy(points, prior: ConjugatePrior, alpha: float, cut: bool = True, store_out: list | None = None) -> Forest:
    """Greedy BHC tree; every merge records its posterior.

    Heights are the log BHC dissimilarities. With ``cut=True`` agglomeration
    stops once the smallest dissimilarity exceeds 1 (posterior below 0.5),
    so the roots are the output clusters.
    """
    from .agglomerate import greedy_merge

    X = _as_matrix(points)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    store = BhcStore(prior, X, math.log(alpha))
    accept = (lambda d: d <= 0.0) if cut else (lambda d: True)
    forest = greedy_merge(store, len(X), accept)
    for rec in forest.merges:
        rec.merge_posterior = posterior_from_log_ratio(rec.height)
    if store_out is not None:
        store_out.append(store)
    return forest


def cut_tree(forest: Forest, threshold: float = 0.5) -> Forest:
    """Top-down cut: a node stays whole when its merge posterior >= threshold."""
    n = forest.leaf_count
    keep = []
    stack = list(forest.roots)
    while stack:
        v = stack.pop()
        if v >= n and forest.merges[v - n].merge_posterior < threshold:
            rec = forest.merges[v - n]
            stack.extend((rec.left, rec.right))
        else:
            keep.append(v)
    kept = set()
    frontier = [v for v in keep if v >= n]
    while frontier:
        u = frontier.pop()
        kept.add(u)
        rec = forest.merges[u - n]
        frontier.extend(c for c in (rec.left, rec.right) if c >= n)
    remap = {i: i for i in range(n)}
    merges = []
    for k, rec in enumerate(forest.merges):
        if n + k in kept:
            remap[n + k] = n + len(merges)
            merges.append(
                MergeRecord(remap[rec.left], remap[rec.right], rec.height, rec.new_size, rec.merge_posterior)
            )
    return Forest(n, merges, sorted(remap[v] for v in keep))


# ---------------------------------------------------------------------------
# small-variance agreement probe


@dataclass
class AgreementRow:
    beta: float
    datasets: int
    argmin_agreement: float
    cut_agreement: float


def probe_log_alpha(beta: float, lam: float, d: int, exponent: float = 1.0) -> float:
    """``log alpha`` for ``alpha = beta^(exponent * d/2) exp(-beta lam)``.

    The evidence ratio of two clusters carries a ``beta^(-d/2)`` factor, so
    ``exponent=1`` cancels it and leaves ``exp(beta (d_star - lam))`` times a
    beta-free constant.
    """
    return 0.5 * exponent * d * math.log(beta) - beta * lam


def probe_dataset(X, sigma2: float, lam: float, beta: float, rho2: float = 100.0, alpha_exponent: float = 1.0):
    """Replay the thresholded small-variance greedy path on one dataset.

    At every step all live pairs are scored twice: by the small-variance
    dissimilarity and by the exact BHC log-ratio with likelihood variance
    ``sigma2 / beta`` and alpha from :func:`probe_log_alpha`. Returns
    ``(argmin_agrees, cut_agrees)``. Argmin agreement tolerates ties in the
    small-variance value; cut agreement requires
    ``ratio >= 1  <=>  d_star >= lam`` for every scored pair.
    """
    from .cluster import dissimilarity, merge_summaries, summary_from_point
    from .expfam import FamilyDescriptor

    X = _as_matrix(X)
    n, d = X.shape
    fam = FamilyDescriptor("gaussian_spherical", d, sigma2=sigma2)
    prior = ConjugatePrior("gaussian_known_var", sigma2=sigma2 / beta, mean=X.mean(axis=0), rho2=rho2)
    log_alpha = probe_log_alpha(beta, lam, d, alpha_exponent)
    nodes = [leaf_node(prior, X[i], i, log_alpha) for i in range(n)]
    summaries = [summary_from_point(fam, X[i], i) for i in range(n)]
    argmin_ok = cut_ok = True
    while len(nodes) > 1:
        pairs = [(i, j) for i in range(len(nodes)) for j in range(i + 1, len(nodes))]
        dstar = np.array([dissimilarity(fam, summaries[i], summaries[j]) for i, j in pairs])
        logr = np.array([_merge_terms(prior, nodes[i], nodes[j], log_alpha)[3] for i, j in pairs])
        cut_ok &= bool(np.all((logr >= 0) == (dstar >= lam)))
        best = int(np.argmin(dstar))
        argmin_ok &= bool(dstar[int(np.argmin(logr))] == dstar[best])
        if dstar[best] >= lam:
            break
        i, j = pairs[best]
        nodes[i], _ = merge_nodes(prior, nodes[i], nodes[j], log_alpha)
        summaries[i] = merge_summaries(summaries[i], summaries[j])
        del nodes[j], summaries[j]
    return argmin_ok, cut_ok


def asymptotic_agreement_probe(datasets, sigma2: float, lam: float, beta_grid, rho2: float = 100.0,
                               alpha_exponent: float = 1.0) -> list:
    """Fraction of datasets whose exact-BHC decisions match the small-variance
    decisions, for each ``beta`` in ``beta_grid`` (see :func:`probe_dataset`)."""
    rows = []
    for beta in beta_grid:
        results = [probe_dataset(X, sigma2, lam, beta, rho2, alpha_exponent) for X in datasets]
        k = len(results)
        rows.append(
            AgreementRow(
                float(beta),
                k,
                sum(r[0] for r in results) / k if k else 1.0,
                sum(r[1] for r in results) / k if k else 1.0,
            )
        )
    return rows
