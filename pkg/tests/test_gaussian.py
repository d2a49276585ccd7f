import numpy as np
import pytest

from shiftgen import (ConfigurationError, GaussianSampler, NumericalError, PointSet, VariogramModel,
                      cov_from_variogram, sample_gaussian)
from shiftgen.gaussian import _chol_with_jitter


def test_cov_examples():
    m = VariogramModel()
    assert cov_from_variogram(1.0, 1.0, m) == pytest.approx(1.0)
    assert cov_from_variogram(1.0, 2.0, m) == pytest.approx(1.0)
    assert cov_from_variogram(-1.0, 2.0, m) == pytest.approx(0.0)
    assert cov_from_variogram(0.0, 3.0, m) == 0.0


def test_variogram_validation():
    with pytest.raises(ConfigurationError):
        VariogramModel(theta=-1.0)
    with pytest.raises(ConfigurationError):
        VariogramModel(hurst=1.5)


def test_pinned_at_origin_and_repeated_sites():
    g = GaussianSampler()
    pts = PointSet.of([0.0, 1.5, 1.5, -2.0])
    w = g.sample(pts, 500, np.random.default_rng(1))
    assert np.all(w[:, 0] == 0.0)
    assert np.array_equal(w[:, 1], w[:, 2])


def test_moments_match_covariance():
    m = VariogramModel(theta=2.0, hurst=0.35)
    g = GaussianSampler(m)
    sites = PointSet.of([0.5, 1.0, -2.0, 3.0])
    w = g.sample(sites, 100_000, np.random.default_rng(2))[:, :, 0]
    emp = np.cov(w, rowvar=False)
    for i, s in enumerate(sites.points[:, 0]):
        for j, t in enumerate(sites.points[:, 0]):
            c = cov_from_variogram(s, t, m)
            se = np.sqrt((c * c + cov_from_variogram(s, s, m) * cov_from_variogram(t, t, m)) / 100_000)
            assert abs(emp[i, j] - c) < 5 * se
    inc = w[:, 3] - w[:, 2]
    assert inc.var() == pytest.approx(m(5.0), rel=0.02)


def test_factor_is_psd_and_reused_block_matches_direct():
    g = GaussianSampler()
    pts = np.array([[-1.0], [0.5], [1.0], [2.5], [4.0]])
    direct = g.factor(pts, prefix=0)
    reused = g.factor(pts, prefix=3)
    assert np.allclose(direct, reused, atol=1e-10)
    c = direct @ direct.T
    assert np.min(np.linalg.eigvalsh(c)) > -1e-10


def test_determinism():
    g = GaussianSampler()
    sites = PointSet.of([1.0, 2.0])
    a = sample_gaussian(sites, g, np.random.default_rng(7))
    b = sample_gaussian(sites, g, np.random.default_rng(7))
    assert a == b


def test_indefinite_matrix_raises():
    c = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NumericalError, match="eigenvalue"):
        _chol_with_jitter(c, 1e-10)


def test_cross_correlation_rejected():
    with pytest.raises(ConfigurationError):
        GaussianSampler(independent_components=False)


def test_vector_components_independent():
    g = GaussianSampler()
    w = g.sample(PointSet.of([1.0]), 50_000, np.random.default_rng(3), dim_d=2)
    assert abs(np.corrcoef(w[:, 0, 0], w[:, 0, 1])[0, 1]) < 0.03
