import math

import numpy as np
import pytest

from helpers import FAMILY_CASES, random_points
from rbhc.expfam import (
    FamilyDescriptor,
    SingularGeneratorError,
    SmoothingConfig,
    generator,
    generator_gradient,
    generator_hessian,
    generator_quadratic_form,
    numerical_gradient,
    numerical_hessian,
    sufficient_stat,
    sufficient_stats,
)

NONE = SmoothingConfig()


def test_sufficient_stat_identity_families():
    assert sufficient_stat(FamilyDescriptor("poisson", 1), [3]).tolist() == [3.0]
    assert sufficient_stat(FamilyDescriptor("gaussian_spherical", 2), [1, 2]).tolist() == [1.0, 2.0]


def test_sufficient_stat_gaussian_full_is_mean_and_outer_product():
    t = sufficient_stat(FamilyDescriptor("gaussian_full", 2), [1, 2])
    assert t.tolist() == [1, 2, 1, 2, 2, 4]


def test_sufficient_stats_rejects_bad_observations():
    with pytest.raises(ValueError):
        sufficient_stats(FamilyDescriptor("poisson", 1), [[1.5]])
    with pytest.raises(ValueError):
        sufficient_stats(FamilyDescriptor("multinomial", 2, m=3), [[1, 1]])
    with pytest.raises(ValueError):
        sufficient_stats(FamilyDescriptor("gaussian_spherical", 1), [[np.nan]])


def test_descriptor_validation():
    with pytest.raises(ValueError):
        FamilyDescriptor("gaussian_spherical", 2, sigma2=0.0)
    with pytest.raises(ValueError):
        FamilyDescriptor("multinomial", 3)
    with pytest.raises(ValueError):
        FamilyDescriptor("poisson", 0)
    with pytest.raises(ValueError):
        FamilyDescriptor("poisson", 1, beta=-1.0)
    with pytest.raises(ValueError):
        FamilyDescriptor("laplace", 1)
    with pytest.raises(ValueError):
        SmoothingConfig("shift", 1.5, np.ones(1))


def test_poisson_generator_values():
    assert generator(FamilyDescriptor("poisson", 1, smoothing=NONE), [3.0]) == pytest.approx(3 * math.log(3) - 3)
    assert generator(FamilyDescriptor("poisson", 1, smoothing=NONE), [3.0]) == pytest.approx(0.29584, abs=5e-6)
    # default smoothing shifts by 0.01
    assert generator(FamilyDescriptor("poisson", 1), [0.0]) == pytest.approx(0.01 * math.log(0.01) - 0.01)
    assert generator(FamilyDescriptor("poisson", 1), [0.0]) == pytest.approx(-0.05605, abs=5e-6)


def test_multinomial_blend_value_at_boundary():
    fam = FamilyDescriptor("multinomial", 2, m=2)
    s = np.array([1.9, 0.1])
    assert generator(fam, [2.0, 0.0]) == pytest.approx(float(np.sum(s * np.log(s / 2))))
    assert generator(fam, [2.0, 0.0]) == pytest.approx(-0.39703, abs=5e-6)


def test_multinomial_without_smoothing_is_finite_at_zero_counts_but_not_differentiable():
    fam = FamilyDescriptor("multinomial", 2, m=2, smoothing=NONE)
    assert generator(fam, [2.0, 0.0]) == 0.0
    with pytest.raises(SingularGeneratorError):
        generator_gradient(fam, [2.0, 0.0])


def test_gaussian_full_singular_without_smoothing():
    fam = FamilyDescriptor("gaussian_full", 2, smoothing=NONE)
    with pytest.raises(SingularGeneratorError):
        generator(fam, sufficient_stat(fam, [1.0, 2.0]))
    # with the default 0.01 I shift a single point is in the domain
    smooth = FamilyDescriptor("gaussian_full", 2)
    assert generator(smooth, sufficient_stat(smooth, [1.0, 2.0])) == pytest.approx(-math.log(0.01))


def test_gaussian_full_value_is_half_negative_logdet():
    fam = FamilyDescriptor("gaussian_full", 2, smoothing=NONE)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 2))
    t = sufficient_stats(fam, X).mean(axis=0)
    cov = np.cov(X.T, bias=True)
    assert generator(fam, t) == pytest.approx(-0.5 * np.log(np.linalg.det(cov)), rel=1e-12)


def test_hessian_examples():
    fam = FamilyDescriptor("gaussian_spherical", 3)
    np.testing.assert_array_equal(generator_hessian(fam, [1.0, -2.0, 5.0]), np.eye(3))
    pois = FamilyDescriptor("poisson", 1, smoothing=NONE)
    assert generator_hessian(pois, [2.0])[0, 0] == 0.5


def test_generator_broadcasts_over_stacks():
    fam = FAMILY_CASES["gaussian_full"]
    T = sufficient_stats(fam, random_points(fam, 6, np.random.default_rng(1)))
    stacked = generator(fam, T)
    assert stacked.shape == (6,)
    assert np.allclose(stacked, [generator(fam, t) for t in T], rtol=0, atol=1e-12)


def _interior_points(fam, rng, count):
    # means of 10+ points: strictly inside every domain and well conditioned,
    # so the finite-difference step stays in the quadratic regime
    out = []
    for _ in range(count):
        n = int(rng.integers(10, 40))
        out.append(sufficient_stats(fam, random_points(fam, n, rng)).mean(axis=0))
    return out


@pytest.mark.parametrize("name", sorted(FAMILY_CASES))
def test_gradient_matches_finite_differences(name):
    fam = FAMILY_CASES[name]
    rng = np.random.default_rng(2)
    for t in _interior_points(fam, rng, 100):
        g = generator_gradient(fam, t)
        fd = numerical_gradient(fam, t)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(g))


@pytest.mark.parametrize("name", sorted(FAMILY_CASES))
def test_hessian_matches_finite_differences_and_is_symmetric(name):
    fam = FAMILY_CASES[name]
    rng = np.random.default_rng(3)
    for t in _interior_points(fam, rng, 10):
        H = generator_hessian(fam, t)
        np.testing.assert_allclose(H, H.T, rtol=0, atol=1e-12)
        fd = numerical_hessian(fam, t)
        assert np.abs(H - fd).max() <= 1e-4 * max(1.0, np.abs(H).max())


@pytest.mark.parametrize("name", sorted(FAMILY_CASES))
def test_quadratic_form_matches_hessian(name):
    fam = FAMILY_CASES[name]
    rng = np.random.default_rng(4)
    for t in _interior_points(fam, rng, 20):
        v = rng.normal(size=t.size)
        H = generator_hessian(fam, t)
        assert generator_quadratic_form(fam, t, v) == pytest.approx(v @ H @ v, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("name", sorted(FAMILY_CASES))
def test_midpoint_convexity(name):
    fam = FAMILY_CASES[name]
    rng = np.random.default_rng(5)
    pts = []
    for _ in range(2000):
        n = int(rng.integers(1, 20))
        pts.append(sufficient_stats(fam, random_points(fam, n, rng)).mean(axis=0))
    for t0, t1 in zip(pts[::2], pts[1::2]):
        if np.array_equal(t0, t1):
            continue
        assert 0.5 * generator(fam, t0) + 0.5 * generator(fam, t1) > generator(fam, 0.5 * (t0 + t1))


def test_multinomial_blend_is_total_on_counts():
    fam = FamilyDescriptor("multinomial", 3, m=4)
    for a in range(5):
        for b in range(5 - a):
            v = generator(fam, [a, b, 4 - a - b])
            assert math.isfinite(v)
