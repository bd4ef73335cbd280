import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from rsdesign.error_models import ErrorModel, score, sample
from rsdesign.estimation import mle_location, mle_theta, weighted_location


def loglik(model, y, t):
    from rsdesign.error_models import log_density
    return log_density(model, np.asarray(y) - t).sum()


def test_cauchy_three_points_against_bisection():
    # oracle: brentq on the score over [0, 0.5]
    assert_allclose(mle_location(ErrorModel.cauchy(), [0.0, 0.0, 5.0]), 0.098898507884693,
                    rtol=1e-10)


def test_gnd4_against_bisection():
    y = [0.3, -1.1, 2.0, 0.4]
    assert_allclose(mle_location(ErrorModel.gnd(4.0), y), 0.44975845169420425, rtol=1e-10)


def test_normal_is_mean():
    assert mle_location(ErrorModel.gnd(2.0), [1.0, 2.0, 6.0]) == 3.0


def test_single_response():
    assert mle_location(ErrorModel.cauchy(), [4.2]) == 4.2


def test_empty_rejected():
    with pytest.raises(ValueError):
        mle_location(ErrorModel.cauchy(), [])


def test_details():
    x, s, it = mle_location(ErrorModel.gnd(10.0), [0.1, 0.7, -0.3], return_details=True)
    assert abs(s) < 1e-8 and it >= 1


def test_weighted_location():
    assert_allclose(weighted_location([1.0, 3.0], [1.0, 3.0]), 2.5)


@given(st.lists(st.floats(-20, 20), min_size=2, max_size=12))
def test_cauchy_estimate_is_global_maximum(ys):
    m = ErrorModel.cauchy(1.0)
    y = np.asarray(ys)
    x = mle_location(m, y)
    grid = np.linspace(y.min() - 2, y.max() + 2, 20001)
    best = max(loglik(m, y, t) for t in grid[::50])
    dense = np.max([loglik(m, y, t) for t in grid[np.argsort(
        [-loglik(m, y, t) for t in grid[::50]])[:3] * 50]])
    assert loglik(m, y, x) >= max(best, dense) - 1e-9
    assert abs(score(m, y - x).sum()) < 1e-8 * (1 + y.size)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=10), st.floats(-100, 100))
def test_location_equivariance(ys, shift):
    m = ErrorModel.gnd(10.0)
    y = np.asarray(ys)
    assert_allclose(mle_location(m, y + shift), mle_location(m, y) + shift, atol=1e-8)


@pytest.mark.parametrize("value", [0.0, 2.0, -37.5])
def test_tied_responses_with_flat_likelihood(value):
    # the score vanishes like (eta - y)**9, so a small score alone is not convergence
    m = ErrorModel.gnd(10.0)
    assert_allclose(mle_location(m, [value] * 3), value, atol=1e-10)


class TestTheta:
    def test_saturated_design_maps_group_estimates(self, rng):
        m = ErrorModel.cauchy(1.0)
        support = np.array([[1.0, -1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
        idx = np.repeat([0, 1, 2], 5)
        X = support[idx]
        y = X @ np.array([1.0, 1.0, 1.0]) + sample(m, rng, idx.size)
        fit = mle_theta(m, X, y)
        eta = [mle_location(m, y[idx == i]) for i in range(3)]
        assert_allclose(support @ fit.theta_hat, eta, rtol=1e-12, atol=1e-12)
        assert fit.final_gradient_norm < 1e-6

    def test_overdetermined_design_gradient_vanishes(self, rng):
        m = ErrorModel.gnd(4.0)
        x = np.linspace(-1, 1, 7)
        X = np.repeat(np.vander(x, 2, increasing=True), 3, axis=0)
        y = X @ np.array([0.5, -2.0]) + sample(m, rng, X.shape[0])
        fit = mle_theta(m, X, y)
        assert fit.converged and fit.final_gradient_norm <= 1e-8 * (1 + y.size)

    def test_gamma_precision_is_weighted_least_squares(self, rng):
        m = ErrorModel.hetero_normal_gamma(1.0, 1.0)
        X = np.array([[1.0, 1.0], [1.0, 0.0], [1.0, 1.0], [1.0, 0.0]])
        a = np.array([0.5, 2.0, 1.5, 1.0])
        y = np.array([1.0, 0.2, 1.4, -0.3])
        fit = mle_theta(m, X, y, a)
        W = np.diag(a)
        assert_allclose(fit.theta_hat, np.linalg.solve(X.T @ W @ X, X.T @ W @ y))

    def test_rank_deficient(self):
        with pytest.raises(np.linalg.LinAlgError):
            mle_theta(ErrorModel.cauchy(), np.ones((4, 2)), np.zeros(4))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mle_theta(ErrorModel.cauchy(), np.eye(2), np.zeros(3))
