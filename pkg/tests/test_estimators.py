import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlo_mcmc.estimators import (
    PriorZero,
    SizeRule,
    concentration_bound,
    estimator_variance,
    lambda_full,
    lambda_star,
    lambda_star_variance,
    psi_threshold,
    required_size_estimate,
    required_size_full,
    subsampled_loglik,
)
from mlo_mcmc.models import ModelSpec, as_data, full_loglik, gaussian_mean_model, gaussian_precision_model, logistic_model
from mlo_mcmc.samplers import RandomWalk
from mlo_mcmc.weights import mlo_weights, uniform_weights, weights_from_scores

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def _flat(model: ModelSpec) -> ModelSpec:
    from dataclasses import replace

    return replace(model, log_prior=lambda theta: 0.0)


def _toy_cases():
    rng = np.random.default_rng(20)
    cases = []
    for n in (1, 2, 3, 4):
        x = as_data(rng.normal(0.5, 1.3, n))
        cases.append(("mean", gaussian_mean_model(), x, np.array([0.3]), np.array([0.9])))
        cases.append(("precision", gaussian_precision_model(), x, np.array([-0.2]), np.array([0.4])))
        z = rng.standard_normal((n, 2))
        y = np.array([1.0, 0.0, 0.0, 1.0])[:n]
        cases.append(("logistic", logistic_model(n_covariates=2), np.column_stack([z, y]), np.array([0.4, -0.6]), np.array([1.1, 0.2])))
    return cases


def _enumerate(weights, r):
    """Every ordered index tuple with its probability under draws with replacement."""
    for tup in itertools.product(range(weights.n), repeat=r):
        yield np.array(tup), float(np.prod(weights.eta[list(tup)]))


def _skewed_weights(model, data, theta):
    # not MLO at theta, and never uniform, so the enumeration checks real reweighting
    n = data.shape[0]
    scores = np.abs(model.log_density(data, theta)) + np.arange(1, n + 1)
    return weights_from_scores(scores)


TOY = _toy_cases()
TOY_IDS = [f"{name}-n{data.shape[0]}" for name, _, data, _, _ in TOY]


class TestEnumeration:
    @pytest.mark.parametrize("case", TOY, ids=TOY_IDS)
    @pytest.mark.parametrize("r", [1, 2, 3])
    def test_unbiased(self, case, r):
        _, m, data, theta, _ = case
        w = _skewed_weights(m, data, theta)
        expect = sum(p * subsampled_loglik(m, data, idx, w, theta) for idx, p in _enumerate(w, r))
        assert expect == pytest.approx(full_loglik(m, data, theta), abs=1e-12)

    @pytest.mark.parametrize("case", TOY, ids=TOY_IDS)
    @pytest.mark.parametrize("r", [1, 2, 3])
    def test_variance(self, case, r):
        _, m, data, theta, _ = case
        w = _skewed_weights(m, data, theta)
        ell = full_loglik(m, data, theta)
        var = sum(p * (subsampled_loglik(m, data, idx, w, theta) - ell) ** 2 for idx, p in _enumerate(w, r))
        assert estimator_variance(m, data, w, theta) / r == pytest.approx(var, abs=1e-12)

    @pytest.mark.parametrize("case", TOY, ids=TOY_IDS)
    def test_lambda_star_unbiased(self, case):
        _, m, data, theta, theta_prime = case
        w = _skewed_weights(m, data, theta)
        expect = sum(p * lambda_star(m, data, idx, w, theta, theta_prime) for idx, p in _enumerate(w, 2))
        assert expect == pytest.approx(lambda_full(m, data, theta, theta_prime), abs=1e-12)

    @pytest.mark.parametrize("case", TOY, ids=TOY_IDS)
    def test_size_estimate_unbiased_under_mlo_weights(self, case):
        _, m, data, theta, theta_prime = case
        theta_hat = 0.5 * (theta + theta_prime)
        w = mlo_weights(m, data, theta_hat)
        rule = SizeRule()
        args = (m, data)
        target = required_size_full(*args, theta, theta_prime, theta_hat, 0.1, rule, rounded=False)
        mean = sum(
            p * required_size_estimate(*args, idx, w, theta, theta_prime, 0.1, rule, rounded=False)
            for idx, p in _enumerate(w, 2)
        )
        assert mean == pytest.approx(target, rel=1e-12)


class TestSubsampledLoglik:
    def test_uniform_reduces_to_plain_mean(self):
        m = gaussian_mean_model()
        data = as_data([0.5, 1.0, 4.0, -2.0])
        idx = np.array([0, 2, 2])
        plain = np.mean(m.log_density(data[idx], np.array([1.0])))
        assert subsampled_loglik(m, data, idx, uniform_weights(4), [1.0]) == pytest.approx(plain, rel=1e-15)

    @pytest.mark.parametrize("r", [1, 4])
    def test_single_point(self, r):
        m = gaussian_mean_model()
        data = as_data([0.3])
        idx = np.zeros(r, dtype=int)
        assert subsampled_loglik(m, data, idx, uniform_weights(1), [1.2]) == full_loglik(m, data, [1.2])


class TestLambda:
    def test_identity_is_zero(self):
        m, data = gaussian_mean_model(), as_data([1.0, 2.0, 3.0])
        assert lambda_full(m, data, [2.0], [2.0]) == 0.0
        w = mlo_weights(m, data, [2.0])
        assert lambda_star(m, data, np.array([0, 2]), w, [1.7], [1.7]) == 0.0

    def test_antisymmetry(self):
        m, data = gaussian_mean_model(), as_data([1.0, 2.0, 3.0])
        assert lambda_full(m, data, [2.0], [2.5]) == -lambda_full(m, data, [2.5], [2.0])

    def test_hand_value(self):
        m, data = gaussian_mean_model(), as_data([1.0, 2.0, 3.0])
        # mean of -(x-2.5)^2/2 + (x-2)^2/2 over {1, 2, 3}
        terms = [-0.5 * (x - 2.5) ** 2 + 0.5 * (x - 2.0) ** 2 for x in (1.0, 2.0, 3.0)]
        expected = math.fsum(terms) / 3
        assert expected == pytest.approx(-0.125, abs=1e-15)
        assert lambda_full(m, data, [2.0], [2.5]) == pytest.approx(expected, abs=1e-15)

    def test_uniform_star_is_difference_of_plain_means(self):
        m, data = gaussian_mean_model(), as_data([1.0, 2.0, 3.0, 7.0])
        idx = np.array([3, 1, 1])
        plain = np.mean(m.log_density(data[idx], np.array([2.5]))) - np.mean(m.log_density(data[idx], np.array([2.0])))
        assert lambda_star(m, data, idx, uniform_weights(4), [2.0], [2.5]) == pytest.approx(plain, abs=1e-14)


class TestPsi:
    def test_equal_priors_u_one(self):
        m = _flat(gaussian_mean_model())
        assert psi_threshold(1.0, m, None, [0.0], [1.0], 10) == 0.0

    def test_flat_prior_hand_value(self):
        m = _flat(gaussian_mean_model())
        assert psi_threshold(0.5, m, None, [0.0], [1.0], 100) == pytest.approx(math.log(0.5) / 100, rel=1e-15)

    def test_symmetric_kernel_cancels(self):
        m = gaussian_mean_model(0.0, 3.0)
        expected = (math.log(0.3) + m.log_prior(np.array([0.2])) - m.log_prior(np.array([1.5]))) / 7
        assert psi_threshold(0.3, m, RandomWalk(0.4), [0.2], [1.5], 7) == pytest.approx(expected, rel=1e-14)
        assert psi_threshold(0.3, m, None, [0.2], [1.5], 7) == pytest.approx(expected, rel=1e-14)

    def test_asymmetric_kernel(self):
        class Shifted:
            # q(to | frm) = N(to; frm + 0.5, 1)
            def log_q(self, to, frm):
                return float(-HALF_LOG_2PI - 0.5 * np.sum((np.asarray(to) - np.asarray(frm) - 0.5) ** 2))

        m = _flat(gaussian_mean_model())
        # log q(1|0) - log q(0|1) = -(0.5)^2/2 + (1.5)^2/2 = 1
        assert psi_threshold(1.0, m, Shifted(), [0.0], [1.0], 4) == pytest.approx(0.25, rel=1e-14)

    def test_prior_zero(self):
        from dataclasses import replace

        m = replace(gaussian_mean_model(), log_prior=lambda th: 0.0 if th[0] > 0 else -math.inf)
        with pytest.raises(PriorZero):
            psi_threshold(0.5, m, None, [1.0], [-1.0], 10)

    @pytest.mark.parametrize("u", [0.0, 1.5, -0.1])
    def test_u_domain(self, u):
        with pytest.raises(ValueError):
            psi_threshold(u, gaussian_mean_model(), None, [0.0], [1.0], 10)


def test_accept_test_equivalence():
    """[alpha > u] computed from the raw likelihood ratio agrees with [lambda_full > psi]."""
    rng = np.random.default_rng(21)
    m = gaussian_mean_model(0.0, 3.0)
    for _ in range(1000):
        n = int(rng.integers(1, 6))
        data = as_data(rng.normal(0, 1, n))
        theta, theta_prime = rng.normal(0, 1, 1), rng.normal(0, 1, 1)
        u = 1.0 - rng.random()
        lik = np.prod(np.exp(m.log_density(data, theta)))
        lik_prime = np.prod(np.exp(m.log_density(data, theta_prime)))
        alpha = min(1.0, lik_prime * math.exp(m.log_prior(theta_prime)) / (lik * math.exp(m.log_prior(theta))))
        psi = psi_threshold(u, m, None, theta, theta_prime, n)
        assert (alpha > u) == (lambda_full(m, data, theta, theta_prime) > psi)


class TestVariances:
    def test_single_point_variance_zero(self):
        m = gaussian_mean_model()
        assert estimator_variance(m, as_data([0.4]), uniform_weights(1), [1.0]) == 0.0

    def test_identical_rows_variance_zero(self):
        m = gaussian_mean_model()
        assert estimator_variance(m, as_data([0.4] * 4), uniform_weights(4), [1.0]) == pytest.approx(0.0, abs=1e-15)

    def test_lambda_star_variance_identity(self):
        m, data = gaussian_mean_model(), as_data([0.5, 1.5, 3.0])
        w = mlo_weights(m, data, [1.0])
        assert lambda_star_variance(m, data, w, [1.3], [1.3], 5) == 0.0

    def test_lambda_star_variance_inverse_r(self):
        m, data = gaussian_mean_model(), as_data([0.5, 1.5, 3.0, -1.0])
        w = mlo_weights(m, data, [1.0])
        v10 = lambda_star_variance(m, data, w, [1.0], [1.2], 10)
        v50 = lambda_star_variance(m, data, w, [1.0], [1.2], 50)
        assert v10 == pytest.approx(5 * v50, rel=1e-15)

    def test_lambda_star_variance_matches_written_form(self):
        # (1/r) (1/n) sum d^2 / |log p(x|theta_hat)| * (1/n) sum |log p(x|theta_hat)|
        m, data = gaussian_mean_model(), as_data([0.5, 1.5, 3.0, -1.0, 2.2])
        theta_hat = m.mle(data)
        w = mlo_weights(m, data, theta_hat)
        d = m.log_density(data, np.array([0.9])) - m.log_density(data, np.array([1.1]))
        s = np.abs(m.log_density(data, theta_hat))
        expected = np.mean(d * d / s) * np.mean(s) / 3
        assert lambda_star_variance(m, data, w, [0.9], [1.1], 3) == pytest.approx(expected, rel=1e-13)

    def test_lambda_star_variance_two_point_hand_case(self):
        # data {-1, 1}, theta=-1/2 -> 1/2: differences are {-1, 1}, so Lambda_n = 0
        # and the second moment coincides with the variance of the difference terms
        m, data = gaussian_mean_model(), as_data([-1.0, 1.0])
        w = mlo_weights(m, data, m.mle(data))
        np.testing.assert_allclose(w.eta, [0.5, 0.5])
        d = m.log_density(data, np.array([-0.5])) - m.log_density(data, np.array([0.5]))
        np.testing.assert_allclose(d, [1.0, -1.0], atol=1e-15)
        # variance of a single weighted draw of d_I / (n eta_I) = d_I: (1 + 1)/2 - 0 = 1
        assert lambda_star_variance(m, data, w, [-0.5], [0.5], 1) == pytest.approx(1.0, abs=1e-15)
        # the same number through the generic variance routine on the difference terms
        diff_model = ModelSpec(
            name="difference",
            param_dim=1,
            log_density=lambda x, th: m.log_density(x, np.array([-0.5])) - m.log_density(x, np.array([0.5])),
            log_prior=lambda th: 0.0,
            mle=lambda x: np.zeros(1),
            grad_loglik=lambda x, th: np.zeros(1),
        )
        assert estimator_variance(diff_model, data, w, [0.0]) == pytest.approx(1.0, abs=1e-15)


class TestRequiredSizes:
    def setup_method(self):
        rng = np.random.default_rng(22)
        self.m = gaussian_mean_model()
        self.data = as_data(rng.normal(0.0, 1.0, 5))
        self.theta_hat = self.m.mle(self.data)

    def test_identity_gives_one(self):
        rule = SizeRule()
        th = self.theta_hat
        assert required_size_full(self.m, self.data, th, th, th, 0.01, rule) == 1
        w = mlo_weights(self.m, self.data, th)
        assert required_size_estimate(self.m, self.data, np.array([0, 1]), w, th, th, 0.01, rule) == 1

    def test_doubling_c_divides_by_four(self):
        rule = SizeRule()
        args = (self.m, self.data, self.theta_hat, self.theta_hat + 0.3, self.theta_hat)
        a = required_size_full(*args, 0.01, rule, rounded=False)
        b = required_size_full(*args, 0.02, rule, rounded=False)
        assert a == pytest.approx(4 * b, rel=1e-14)
        w = mlo_weights(self.m, self.data, self.theta_hat)
        idx = np.array([0, 3, 4])
        est = (self.m, self.data, idx, w, self.theta_hat, self.theta_hat + 0.3)
        assert required_size_estimate(*est, 0.01, rule, rounded=False) == pytest.approx(
            4 * required_size_estimate(*est, 0.02, rule, rounded=False), rel=1e-14
        )

    def test_consistent_with_lambda_star_variance(self):
        rule = SizeRule(delta=0.05)
        th, tp = self.theta_hat, self.theta_hat + 0.2
        w = mlo_weights(self.m, self.data, self.theta_hat)
        v = lambda_star_variance(self.m, self.data, w, th, tp, 7) * 7
        expected = math.ceil((rule.z_crit / 0.05) ** 2 * v)
        assert required_size_full(self.m, self.data, th, tp, self.theta_hat, 0.05, rule) == expected

    def test_z_crit_default(self):
        assert SizeRule().z_crit == pytest.approx(1.959964, abs=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(1e-4, 1.0), st.floats(1e-4, 1.0), st.floats(0.001, 0.5), st.floats(0.001, 0.5))
    def test_monotone(self, c1, c2, d1, d2):
        m, data, th = self.m, self.data, self.theta_hat
        tp = th + 0.5
        lo_c, hi_c = sorted((c1, c2))
        rule = SizeRule()
        assert required_size_full(m, data, th, tp, th, hi_c, rule) <= required_size_full(m, data, th, tp, th, lo_c, rule)
        # smaller delta means a larger critical value
        small_d, big_d = sorted((d1, d2))
        assert required_size_full(m, data, th, tp, th, 0.1, SizeRule(delta=big_d)) <= required_size_full(
            m, data, th, tp, th, 0.1, SizeRule(delta=small_d)
        )

    def test_non_positive_c(self):
        with pytest.raises(ValueError):
            required_size_full(self.m, self.data, [0.0], [1.0], [0.0], 0.0, SizeRule())

    @pytest.mark.parametrize("kwargs", [{"delta": 0.0}, {"delta": 1.0}, {"r_max": 0}])
    def test_rule_domain(self, kwargs):
        with pytest.raises(ValueError):
            SizeRule(**kwargs)


class TestConcentrationBound:
    def test_identity_is_zero(self):
        m, data = gaussian_mean_model(), as_data([0.0, 1.0, 2.0, 3.0])
        assert concentration_bound(m, data, [1.0], [1.0], 2, 0.05) == 0.0

    def test_hand_case(self):
        m, data = gaussian_mean_model(), as_data([0.0, 1.0, 2.0, 3.0])
        # d_i = (x-1)^2/2 - (x-2)^2/2 = x - 3/2, so C = max |x - 3/2| = 3/2
        c = 1.5
        r, delta = 2, 0.1
        expected = c * math.sqrt(2 * (1 - 1 / 4) * math.log(2 / delta) / r)
        assert concentration_bound(m, data, [1.0], [2.0], r, delta) == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("r", [0, 5])
    def test_r_domain(self, r):
        m, data = gaussian_mean_model(), as_data([0.0, 1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            concentration_bound(m, data, [1.0], [2.0], r, 0.05)

    def test_delta_domain(self):
        m, data = gaussian_mean_model(), as_data([0.0, 1.0])
        with pytest.raises(ValueError):
            concentration_bound(m, data, [1.0], [2.0], 1, 1.0)
