"""Random in-domain data for property tests."""
import numpy as np

from rbhc.cluster import ClusterSummary
from rbhc.expfam import FamilyDescriptor, sufficient_stats

FAMILY_CASES = {
    "gaussian_spherical": FamilyDescriptor("gaussian_spherical", 3, sigma2=0.7),
    "gaussian_full": FamilyDescriptor("gaussian_full", 2),
    "poisson": FamilyDescriptor("poisson", 2),
    "multinomial": FamilyDescriptor("multinomial", 4, m=6),
}


def random_points(fam, n, rng):
    if fam.family == "poisson":
        return rng.poisson(rng.gamma(2.0, 5.0, size=fam.dim), size=(n, fam.dim)).astype(float)
    if fam.family == "multinomial":
        return rng.multinomial(fam.m, rng.dirichlet(np.ones(fam.dim)), size=n).astype(float)
    A = np.eye(fam.dim) + 0.3 * rng.normal(size=(fam.dim, fam.dim))
    return rng.normal(size=fam.dim) * 2 + rng.normal(size=(n, fam.dim)) @ A


def random_summary(fam, rng, start=0, max_size=30):
    n = int(rng.integers(1, max_size + 1))
    T = sufficient_stats(fam, random_points(fam, n, rng))
    return ClusterSummary(n, T.mean(axis=0), frozenset(range(start, start + n)))


def random_summaries(fam, rng, k, max_size=30):
    out, start = [], 0
    for _ in range(k):
        s = random_summary(fam, rng, start, max_size)
        out.append(s)
        start += s.size
    return out


# acceptance verdicts, keyed by criterion number then part name
ACCEPTANCE = {}


def record(criterion, ok, detail, part=""):
    ACCEPTANCE.setdefault(criterion, {})[part] = (bool(ok), detail)
    return ok


def acceptance_lines():
    lines = []
    for c in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[c]
        verdict = "PASS" if all(ok for ok, _ in parts.values()) else "FAIL"
        detail = "; ".join(f"{p}: {d}" if p else d for p, (_, d) in parts.items())
        lines.append(f"criterion {c:>2}: {verdict}  {detail}")
    return lines
