import numpy as np
import pytest
from scipy import stats

import probdist
from errors import DomainError
from probdist import BetaParams, CopulaSpec, NormalParams


def test_normal_cdf():
    assert probdist.normal_cdf(0.0) == 0.5
    assert probdist.normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)
    for z in (0.3, 1.1, 2.7):
        assert probdist.normal_cdf(-z) == pytest.approx(1 - probdist.normal_cdf(z), abs=1e-15)


def test_normal_inv_cdf():
    assert probdist.normal_inv_cdf(0.5) == 0.0
    assert probdist.normal_inv_cdf(0.975) == pytest.approx(1.959964, abs=1e-6)
    assert probdist.normal_inv_cdf(0.99) == pytest.approx(2.326348, abs=1e-6)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_normal_inv_cdf_domain(p):
    with pytest.raises(DomainError):
        probdist.normal_inv_cdf(p)


def test_normal_round_trip():
    for p in (np.arange(1000) + 0.5) / 1000:
        assert probdist.normal_cdf(probdist.normal_inv_cdf(p)) == pytest.approx(p, abs=1e-10)


def test_normal_quantile_clamped():
    params = NormalParams(0.5, 0.3)
    q = probdist.normal_quantile_clamped(np.array([1e-6, 0.5, 1 - 1e-6]), params)
    assert q.tolist() == [0.0, 0.5, 1.0]


def test_beta_uniform_identity():
    uniform = BetaParams(1.0, 1.0)
    for p in (0.01, 0.3, 0.77):
        assert probdist.beta_inv_cdf(p, uniform) == pytest.approx(p, abs=1e-12)


def test_beta_quantile_monotone():
    params = BetaParams(15.0, 6.0)
    assert probdist.beta_inv_cdf(0.9, params) > probdist.beta_inv_cdf(0.5, params)
    assert params.mean == pytest.approx(15 / 21)


def test_beta_round_trip():
    params = BetaParams(15.0, 6.0)
    for p in (np.arange(1000) + 0.5) / 1000:
        assert probdist.beta_cdf(probdist.beta_inv_cdf(p, params), params) == pytest.approx(p, abs=1e-8)


def test_beta_cdf_clamps():
    params = BetaParams(15.0, 6.0)
    assert probdist.beta_cdf(-0.5, params) == 0.0
    assert probdist.beta_cdf(1.5, params) == 1.0
    with pytest.raises(DomainError):
        probdist.beta_cdf(float("nan"), params)


def test_parameter_validation():
    with pytest.raises(DomainError):
        NormalParams(0.5, 0.0)
    with pytest.raises(DomainError):
        BetaParams(0.0, 1.0)
    with pytest.raises(DomainError):
        CopulaSpec(1.0)
    with pytest.raises(DomainError):
        probdist.beta_inv_cdf(1.0, BetaParams(2.0, 2.0))


def test_copula_independent():
    u = probdist.sample_gaussian_copula(CopulaSpec(0.0), 10000, 7)
    z = stats.norm.ppf(u)
    assert abs(np.corrcoef(z[:, 0], z[:, 1])[0, 1]) < 0.03


def test_copula_correlation():
    u = probdist.sample_gaussian_copula(CopulaSpec(0.15), 10000, 7)
    z = stats.norm.ppf(u)
    assert np.corrcoef(z[:, 0], z[:, 1])[0, 1] == pytest.approx(0.15, abs=0.03)


def test_copula_comonotone_limit():
    u = probdist.sample_gaussian_copula(CopulaSpec(0.999), 10000, 7)
    assert stats.spearmanr(u[:, 0], u[:, 1]).statistic > 0.99


def test_copula_marginals_uniform():
    u = probdist.sample_gaussian_copula(CopulaSpec(0.15), 10000, 11)
    assert u.shape == (10000, 2)
    assert np.all((u > 0) & (u < 1))
    for col in range(2):
        assert stats.kstest(u[:, col], "uniform").statistic < 0.02


def test_copula_determinism():
    a = probdist.sample_gaussian_copula(CopulaSpec(0.15), 100, 42)
    b = probdist.sample_gaussian_copula(CopulaSpec(0.15), 100, 42)
    c = probdist.sample_gaussian_copula(CopulaSpec(0.15), 100, 43)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_copula_needs_samples():
    with pytest.raises(DomainError):
        probdist.sample_gaussian_copula(CopulaSpec(0.0), 0, 1)


def test_seeds():
    assert probdist.spawn_seeds(5, 3) == probdist.spawn_seeds(5, 3)
    assert len(set(probdist.spawn_seeds(5, 3))) == 3
    assert all(0 <= s <= probdist.SEED_MAX for s in probdist.spawn_seeds(5, 3))
    with pytest.raises(DomainError):
        probdist.make_rng(-1)
    with pytest.raises(DomainError):
        probdist.make_rng(probdist.SEED_MAX + 1)
