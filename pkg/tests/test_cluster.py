import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import FAMILY_CASES, random_summaries
from rbhc.cluster import (
    ClusterSummary,
    approx_dissimilarity,
    dissimilarity,
    dissimilarity_bregman_form,
    lance_williams_update,
    merge_summaries,
    summary_from_point,
)
from rbhc.expfam import FamilyDescriptor, SmoothingConfig, generator

POIS = FamilyDescriptor("poisson", 1, smoothing=SmoothingConfig())
WARD = FamilyDescriptor("gaussian_spherical", 1, sigma2=1.0)


def S(size, stat, start=0):
    return ClusterSummary(size, np.atleast_1d(np.asarray(stat, dtype=float)), frozenset(range(start, start + size)))


def test_summary_from_point():
    s = summary_from_point(FamilyDescriptor("gaussian_spherical", 2), [0, 0], 7)
    assert (s.size, s.mean_stat.tolist(), s.members) == (1, [0.0, 0.0], frozenset({7}))
    s = summary_from_point(FamilyDescriptor("multinomial", 3, m=2), [1, 0, 1], 4)
    assert s.mean_stat.tolist() == [1, 0, 1]
    assert summary_from_point(POIS, [3], 0).mean_stat.tolist() == [3.0]


def test_merge_summaries():
    m = merge_summaries(S(1, 2, 0), S(1, 4, 1))
    assert (m.size, m.mean_stat.tolist()) == (2, [3.0])
    m = merge_summaries(S(2, [0, 0], 0), S(1, [3, 3], 2))
    assert (m.size, m.mean_stat.tolist()) == (3, [1.0, 1.0])
    with pytest.raises(ValueError):
        merge_summaries(S(2, 1, 0), S(2, 1, 1))


def test_summary_size_must_match_members():
    with pytest.raises(ValueError):
        ClusterSummary(2, np.zeros(1), frozenset({0}))


def test_poisson_singletons_both_forms():
    exact = 2 * np.log(2) + 4 * np.log(4) - 6 * np.log(3)
    assert dissimilarity(POIS, S(1, 2, 0), S(1, 4, 1)) == pytest.approx(exact, rel=1e-12)
    assert dissimilarity(POIS, S(1, 2, 0), S(1, 4, 1)) == pytest.approx(0.33980, abs=5e-6)
    assert dissimilarity_bregman_form(POIS, S(1, 2, 0), S(1, 4, 1)) == pytest.approx(exact, rel=1e-12)


def test_gaussian_spherical_ward_value():
    fam = FamilyDescriptor("gaussian_spherical", 2)
    a = summary_from_point(fam, [0, 0], 0)
    b = summary_from_point(fam, [2, 0], 1)
    assert dissimilarity(fam, a, b) == pytest.approx(1.0, rel=1e-12)
    assert dissimilarity_bregman_form(fam, a, b) == pytest.approx(1.0, rel=1e-12)


def test_multinomial_smoothed_singletons():
    # direct evaluation: 2 phi(2,0) - 2 phi(1,1) on the blended statistics
    fam = FamilyDescriptor("multinomial", 2, m=2)
    a = summary_from_point(fam, [2, 0], 0)
    b = summary_from_point(fam, [0, 2], 1)
    s = np.array([1.9, 0.1])
    direct = 2 * np.sum(s * np.log(s / 2)) - 2 * 2 * np.log(0.5)
    assert dissimilarity(fam, a, b) == pytest.approx(direct, rel=1e-12)
    assert dissimilarity(fam, a, b) == pytest.approx(1.97853, abs=5e-6)


@pytest.mark.parametrize("name", sorted(FAMILY_CASES))
def test_equal_means_give_zero(name):
    fam = FAMILY_CASES[name]
    s0 = random_summaries(fam, np.random.default_rng(0), 1)[0]
    s1 = ClusterSummary(5, s0.mean_stat, frozenset(range(1000, 1005)))
    assert dissimilarity(fam, s0, s1) == pytest.approx(0.0, abs=1e-9)
    assert dissimilarity_bregman_form(fam, s0, s1) == pytest.approx(0.0, abs=1e-9)
    assert approx_dissimilarity(fam, s0, s1) == 0.0


def test_approx_poisson_example():
    mu = np.array([3.0])
    a = approx_dissimilarity(POIS, S(1, 2, 0), S(1, 4, 1), mu)
    assert a == pytest.approx(1 / 3, rel=1e-12)
    exact = dissimilarity(POIS, S(1, 2, 0), S(1, 4, 1))
    assert 2 * abs(exact - a) / (exact + a) == pytest.approx(0.019, abs=5e-4)


def test_lance_williams_examples():
    assert lance_williams_update(1, 9, 4, 1, 1, 1) == pytest.approx(25 / 3)
    merged = merge_summaries(S(1, 0, 0), S(1, 2, 1))
    assert approx_dissimilarity(WARD, merged, S(1, 6, 2)) == pytest.approx(25 / 3, rel=1e-12)
    assert lance_williams_update(0, 0, 0, 3, 4, 5) == 0
    assert lance_williams_update(1, 1, 1, 1, 1, 1) == pytest.approx(1.0)


@pytest.mark.parametrize("name", sorted(FAMILY_CASES))
def test_symmetry_is_bit_exact(name):
    fam = FAMILY_CASES[name]
    rng = np.random.default_rng(6)
    for _ in range(50):
        a, b = random_summaries(fam, rng, 2)
        assert dissimilarity(fam, a, b) == dissimilarity(fam, b, a)
        assert dissimilarity(fam, a, b) >= 0


@pytest.mark.parametrize("name", sorted(FAMILY_CASES))
def test_affine_gauge_invariance(name):
    fam = FAMILY_CASES[name]
    rng = np.random.default_rng(7)
    for _ in range(50):
        a, b = random_summaries(fam, rng, 2)
        shift = rng.normal(size=fam.stat_size)
        const = rng.normal()

        def phi(t):
            return generator(fam, t) + shift @ t + const

        t = (a.size * a.mean_stat + b.size * b.mean_stat) / (a.size + b.size)
        gauged = a.size * phi(a.mean_stat) + b.size * phi(b.mean_stat) - (a.size + b.size) * phi(t)
        assert gauged == pytest.approx(dissimilarity(fam, a, b), rel=1e-9, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=2, max_size=2),
    st.lists(st.floats(-50, 50), min_size=2, max_size=2),
    st.integers(1, 50),
    st.integers(1, 50),
    st.floats(0.1, 10),
)
def test_ward_identity(x0, x1, n0, n1, sigma2):
    fam = FamilyDescriptor("gaussian_spherical", 2, sigma2=sigma2)
    a = S(n0, x0, 0)
    b = S(n1, x1, n0)
    diff = np.subtract(x0, x1)
    ward = n0 * n1 / (n0 + n1) * (diff @ diff) / (2 * sigma2)
    assert dissimilarity(fam, a, b) == pytest.approx(ward, rel=1e-9, abs=1e-9)
    assert approx_dissimilarity(fam, a, b) == pytest.approx(ward, rel=1e-12, abs=1e-12)


def test_negative_dissimilarity_beyond_round_off_raises():
    from rbhc.cluster import _clamp

    assert _clamp(-1e-13, 0.0) == 0.0
    assert _clamp(-1e-9, 1e6) == 0.0
    with pytest.raises(ArithmeticError):
        _clamp(-1e-6, 1.0)
