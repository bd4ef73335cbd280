import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from rsdesign.error_models import (ErrorModel, Family, ModelError, elemental_info,
                                   log_density, log_density_weighted, moment_table,
                                   observed_info, sample, score)
from fd_check import FD_MODELS, FD_TOL, fd_discrepancies

MODELS = [ErrorModel.gnd(2.0), ErrorModel.gnd(3.5, 2.0), ErrorModel.gnd(10.0),
          ErrorModel.cauchy(1.0), ErrorModel.cauchy(0.7)]


class TestConstruction:
    def test_rejects_small_shape(self):
        with pytest.raises(ModelError, match="zeta"):
            ErrorModel.gnd(1.5)

    @pytest.mark.parametrize("kwargs", [{"tau": 0.0}, {"tau": -1.0}, {"tau": float("nan")}])
    def test_rejects_bad_scale(self, kwargs):
        with pytest.raises(ModelError):
            ErrorModel.cauchy(**kwargs)

    def test_rejects_bad_gamma_parameters(self):
        with pytest.raises(ModelError, match="beta"):
            ErrorModel.hetero_normal_gamma(1.0, 0.0)

    def test_dict_round_trip(self):
        for m in MODELS + [ErrorModel.hetero_normal_gamma(0.25, 0.5)]:
            assert ErrorModel.from_dict(m.to_dict()) == m

    def test_location_density_unavailable_for_gamma_precision_model(self):
        m = ErrorModel.hetero_normal_gamma(1.0, 1.0)
        with pytest.raises(ModelError):
            log_density(m, 0.0)
        with pytest.raises(ModelError):
            score(m, 0.0)


class TestDensities:
    def test_gnd10_against_trapezoid_normalizer(self):
        # oracle: normalizing constant from a 4e6-node trapezoid rule on [-8, 8]
        assert_allclose(log_density(ErrorModel.gnd(10.0), 0.5), -0.8736309048495104,
                        rtol=1e-9)

    def test_gnd_scaled_against_trapezoid_normalizer(self):
        assert_allclose(log_density(ErrorModel.gnd(3.5, 2.0), -1.3), -1.701845097260644,
                        rtol=1e-9)

    def test_normal_case_matches_scipy(self):
        from scipy import stats
        x = np.linspace(-4, 4, 9)
        assert_allclose(log_density(ErrorModel.gnd(2.0, 1.5), x),
                        stats.norm(scale=1.5).logpdf(x), rtol=1e-12)

    def test_cauchy_matches_scipy(self):
        from scipy import stats
        x = np.linspace(-30, 30, 13)
        assert_allclose(log_density(ErrorModel.cauchy(2.0), x),
                        stats.cauchy(scale=2.0).logpdf(x), rtol=1e-12)

    @pytest.mark.parametrize("model", MODELS, ids=str)
    def test_density_integrates_to_one(self, model):
        total, _ = integrate.quad(lambda e: math.exp(log_density(model, e)), -np.inf, np.inf,
                                  limit=400, epsabs=1e-12)
        assert_allclose(total, 1.0, rtol=1e-7)

    def test_weighted_density(self):
        val = log_density_weighted(None, 0.5, 4.0)
        assert_allclose(val, 0.5 * math.log(4.0 / (2 * math.pi)) - 0.5)

    def test_non_finite_residual_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            score(ErrorModel.cauchy(), [0.0, np.inf])


class TestDerivatives:
    @pytest.mark.parametrize("model", FD_MODELS, ids=str)
    def test_score_and_info_match_finite_differences(self, model):
        score_gap, info_gap = fd_discrepancies(model)
        assert score_gap <= FD_TOL
        assert info_gap <= FD_TOL

    def test_cauchy_info_changes_sign(self):
        i = observed_info(ErrorModel.cauchy(1.0), [0.5, 1.0, 2.0])
        assert i[0] > 0 and abs(i[1]) < 1e-15 and i[2] < 0


class TestMoments:
    def test_cauchy_closed_forms(self):
        m = ErrorModel.cauchy(1.0)
        t = moment_table(m)
        assert elemental_info(m) == 0.5
        assert_allclose(t.nu_20, 0.5, rtol=1e-9)
        assert_allclose(t.gamma_alt, math.sqrt(2.5), rtol=1e-8)
        assert abs(t.nu_11) < 1e-12

    def test_cauchy_mu_scales_with_tau(self):
        assert_allclose(elemental_info(ErrorModel.cauchy(3.0)), 1 / 18)

    def test_normal_has_no_information_spread(self):
        t = moment_table(ErrorModel.gnd(2.0, 0.5))
        assert_allclose(t.mu, 4.0, rtol=1e-14)
        assert t.gamma_alt == 0.0

    @pytest.mark.parametrize("model", MODELS, ids=str)
    def test_mu_equals_expected_squared_score(self, model):
        t = moment_table(model)
        assert_allclose(t.nu_20, t.mu, rtol=1e-8)

    def test_gnd10_values(self):
        # oracle: direct quadrature of the observed information against the density
        m = ErrorModel.gnd(10.0)
        dens = lambda e: math.exp(log_density(m, e))
        mu, _ = integrate.quad(lambda e: observed_info(m, e) * dens(e), -8, 8, points=[0],
                               epsrel=1e-12, limit=200)
        second, _ = integrate.quad(lambda e: observed_info(m, e) ** 2 * dens(e), -8, 8,
                                   points=[0], epsrel=1e-12, limit=200)
        t = moment_table(m)
        assert_allclose(t.mu, mu, rtol=1e-9)
        assert_allclose(t.gamma_alt, math.sqrt(second / mu**2 - 1), rtol=1e-7)
        assert_allclose(t.gamma_alt ** 2, 6.5697, atol=5e-4)

    def test_gamma_precision_closed_forms(self):
        t = moment_table(ErrorModel.hetero_normal_gamma(0.25, 0.5))
        assert t.mu == 0.5
        assert_allclose(t.gamma_alt, 2.0)

    def test_symmetric_laws_give_equal_gamma_variants(self):
        # the closed-form coefficient agrees with the direct standard deviation
        # once the mean information is subtracted under symmetry
        t = moment_table(ErrorModel.gnd(3.5, 2.0))
        assert abs(t.nu_11) < 1e-10


class TestSampling:
    @pytest.mark.parametrize("model", [ErrorModel.gnd(10.0), ErrorModel.gnd(3.0, 2.0)], ids=str)
    def test_gnd_sampler_matches_density(self, model, rng):
        from scipy import stats
        draws = sample(model, rng, 20000)
        cdf = np.vectorize(lambda x: integrate.quad(
            lambda e: math.exp(log_density(model, e)), -50 * model.tau, x, limit=200)[0])
        res = stats.kstest(draws[:3000], cdf)
        assert res.pvalue > 1e-3

    def test_cauchy_sampler_median_and_quartiles(self, rng):
        draws = sample(ErrorModel.cauchy(2.0), rng, 40000)
        assert_allclose(np.quantile(draws, [0.25, 0.5, 0.75]), [-2.0, 0.0, 2.0], atol=0.08)

    def test_gamma_precision_sampler(self, rng):
        a, e = sample(ErrorModel.hetero_normal_gamma(2.0, 4.0), rng, 50000)
        assert_allclose(a.mean(), 0.5, rtol=0.02)
        assert_allclose(np.mean(a * e * e), 1.0, rtol=0.03)

    def test_sampler_is_reproducible(self):
        m = ErrorModel.gnd(10.0)
        a = sample(m, np.random.default_rng(3), 5)
        b = sample(m, np.random.default_rng(3), 5)
        assert np.array_equal(a, b)


@given(st.floats(2.0, 12.0), st.floats(0.2, 5.0))
def test_gnd_closed_form_mu_matches_quadrature(zeta, tau):
    m = ErrorModel.gnd(zeta, tau)
    dens = lambda e: math.exp(log_density(m, e))
    mu, _ = integrate.quad(lambda e: observed_info(m, e) * dens(e), -60 * tau, 60 * tau,
                           points=[0.0], epsrel=1e-11, limit=400)
    assert_allclose(elemental_info(m), mu, rtol=1e-7)
