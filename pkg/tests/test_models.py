import numpy as np
import pytest

import curemark as cm
from curemark.exceptions import ConfigurationError, ModelKindError, NumericError

from oracles import (enumerate_observed_lik, enumerate_observed_lik_via_complete,
                     numerical_gradient, poisson_tail_cutoff, random_lcrm_instance)


@pytest.fixture
def two_piece():
    return cm.TimePartition(np.array([1.0]))


def lcrm_equal_weights():
    return cm.LcrmParams(beta=[0.0], theta=[0.5, 2.0], phi=np.zeros((1, 2)), lam=[0.5, 2.0])


class TestSurvivalAt:
    def test_all_models_start_at_one(self, two_piece):
        x, z = [0.3], [1.0, 0.3]
        lam = [0.5, 2.0]
        models = [
            cm.CoxParams([0.2], lam),
            cm.CisParams([0.2], lam),
            cm.PhphParams([0.2], [-0.1], lam),
            cm.LacrParams([0.2], lam),
            lcrm_equal_weights(),
        ]
        for m in models:
            assert cm.survival_at(m, 0.0, x, z, two_piece) == 1.0

    def test_lcrm_large_t_mixture_limit(self, two_piece):
        params = lcrm_equal_weights()
        expected = 0.5 * np.exp(-0.5) + 0.5 * np.exp(-2.0)
        s = cm.survival_at(params, 1e6, [0.0], [1.0, 0.0], two_piece)
        assert s == pytest.approx(expected, abs=1e-9)
        assert expected == pytest.approx(0.37093, abs=5e-6)

    def test_lcrm_equal_theta_reduces_to_phph(self, two_piece):
        # equal cure parameters collapse the mixture onto the double-PH form
        part0 = cm.TimePartition(np.zeros(0))
        lam = [np.log(2.0)]
        s = cm.marginal_survival(np.array([1.0, 1.0]), np.zeros((1, 2)), np.zeros(1),
                                 lam, 1.0, [0.0], [1.0, 0.0], part0)
        assert s == pytest.approx(np.exp(-0.5), abs=1e-12)
        phph = cm.PhphParams([0.0], [0.0], lam)
        assert s == pytest.approx(cm.survival_at(phph, 1.0, [0.0], [1.0], part0), abs=1e-12)

    def test_monotone_in_t_for_every_model(self, two_piece):
        rng = np.random.default_rng(7)
        grid = np.linspace(0.0, 6.0, 200)
        for _ in range(50):
            lam = rng.uniform(0.2, 2.0, 2)
            beta = rng.normal(0.0, 0.5, 1)
            theta = np.sort(rng.uniform(0.2, 3.0, 2))
            theta[1] += 0.01
            phi = rng.normal(0.0, 1.0, (1, 2))
            x = rng.normal(0.0, 1.0, 1)
            z = np.array([1.0, rng.normal()])
            models = [
                cm.CoxParams(beta, lam),
                cm.CisParams(beta, lam),
                cm.PhphParams(beta, rng.normal(0.0, 0.5, 1), lam),
                cm.LacrParams(beta, lam),
                cm.LcrmParams(beta, theta, phi, lam),
            ]
            for m in models:
                vals = cm.survival_at(m, grid, x, z, two_piece)
                assert np.all(np.diff(vals) <= 1e-12)

    def test_dimension_mismatch(self, two_piece):
        with pytest.raises(ConfigurationError):
            cm.survival_at(cm.CoxParams([0.1, 0.2], [0.5, 2.0]), 1.0, [0.3], [1.0], two_piece)


class TestConditionalSurvival:
    def test_values(self):
        part0 = cm.TimePartition(np.zeros(0))
        assert cm.conditional_survival(1.0, [0.0], 0.0, [0.0], part0, [1.0]) == 1.0
        s = cm.conditional_survival(1.0, [0.0], np.log(2.0), [0.0], part0, [1.0])
        assert s == pytest.approx(np.exp(-0.5), abs=1e-12)
        s_inf = cm.conditional_survival(1.7, [0.0], np.inf, [0.0], part0, [1.0])
        assert s_inf == pytest.approx(np.exp(-1.7), abs=1e-14)


class TestMembershipProbs:
    def test_uniform_when_zero(self):
        probs = cm.membership_probs(np.zeros((2, 3)), [1.0, 0.5, -0.5])
        assert np.allclose(probs, 1.0 / 3.0)

    def test_forced_ratio(self):
        probs = cm.membership_probs(np.array([[np.log(3.0), 0.0]]), [1.0, 0.0])
        assert np.allclose(probs, [0.75, 0.25], atol=1e-15)

    def test_three_group_oracle(self):
        # z'phi = (1, -1, 0): explicit normalization
        phi = np.array([[1.0], [-1.0]])
        probs = cm.membership_probs(phi, [1.0])
        raw = np.exp([1.0, -1.0, 0.0])
        assert np.allclose(probs, raw / raw.sum(), atol=1e-15)
        assert probs == pytest.approx([0.6652, 0.0900, 0.2447], abs=5e-5)

    def test_sums_to_one(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            G = rng.integers(1, 5)
            q = rng.integers(0, 3)
            phi = rng.normal(0.0, 2.0, (G - 1, q + 1))
            z = np.concatenate(([1.0], rng.normal(0.0, 1.0, q)))
            assert cm.membership_probs(phi, z).sum() == pytest.approx(1.0, abs=1e-12)


class TestCureRate:
    def test_cox_convention_zero(self):
        assert cm.cure_rate(cm.CoxParams([0.5], [1.0]), [1.0], [1.0]) == 0.0

    def test_cis_value(self):
        assert cm.cure_rate(cm.CisParams([0.5], [1.0]), [0.0], [1.0]) == pytest.approx(np.exp(-1.0))

    def test_lcrm_value(self):
        params = lcrm_equal_weights()
        expected = 0.5 * np.exp(-0.5) + 0.5 * np.exp(-2.0)
        assert cm.cure_rate(params, [0.0], [1.0, 0.0]) == pytest.approx(expected, abs=1e-15)

    def test_matches_survival_limit(self, two_piece):
        rng = np.random.default_rng(13)
        for _ in range(20):
            theta = np.sort(rng.uniform(0.1, 3.0, 3))
            theta += np.arange(3) * 1e-3
            params = cm.LcrmParams(rng.normal(0.0, 0.3, 1), theta,
                                   rng.normal(0.0, 1.0, (2, 2)), rng.uniform(0.3, 2.0, 2))
            x = rng.normal(0.0, 1.0, 1)
            z = np.array([1.0, rng.normal()])
            t_big = 100.0 / np.exp(x @ params.beta)  # H0* t >= 40 regardless of risk
            s = cm.survival_at(params, float(t_big * 40), x, z, two_piece)
            assert s == pytest.approx(cm.cure_rate(params, x, z), abs=1e-12)


class TestObservedLoglik:
    def test_empty_dataset(self, two_piece):
        data = cm.Dataset(np.zeros(0), np.zeros(0, dtype=int), np.zeros((0, 1)), np.ones((0, 1)))
        assert cm.observed_loglik(lcrm_equal_weights(), data, two_piece) == 0.0

    def test_single_group_equals_censored_conditional(self, two_piece):
        # G = 1 mixture is the plain censored-data likelihood of the
        # conditional survival law with scalar theta
        rng = np.random.default_rng(17)
        n = 8
        data = cm.Dataset(rng.uniform(0.1, 3.0, n), rng.integers(0, 2, n),
                          rng.normal(size=(n, 1)), np.ones((n, 1)))
        theta = 0.8
        lam = np.array([0.6, 1.4])
        beta = np.array([0.4])
        params = cm.LcrmParams(beta, [theta], np.zeros((0, 1)), lam)
        got = cm.observed_loglik(params, data, two_piece)
        expected = 0.0
        for i in range(n):
            t = data.time[i]
            h = cm.cumulative_hazard(t, two_piece, lam)
            risk = np.exp(data.x[i] @ beta)
            frac = -np.expm1(-risk * h)
            s = np.exp(-theta * frac)
            dec = cm.interval_decompose(t, two_piece)
            dens = theta * risk * lam[dec.index - 1] * np.exp(-risk * h) * s
            expected += np.log(dens) if data.event[i] == 1 else np.log(s)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_matches_enumeration_oracle_random_instances(self):
        rng = np.random.default_rng(23)
        for _ in range(12):
            n = int(rng.integers(1, 6))
            G = int(rng.integers(1, 4))
            J = int(rng.integers(1, 4))
            params, data, partition = random_lcrm_instance(rng, n=n, G=G, J=J)
            got = np.exp(cm.observed_loglik(params, data, partition))
            expected = enumerate_observed_lik(params, data, partition)
            assert got == pytest.approx(expected, rel=1e-8)

    def test_overflow_reports_record(self, two_piece):
        data = cm.Dataset([0.5, 1.5], [1, 0], [[0.0], [800.0]], [[1.0], [1.0]])
        params = cm.LcrmParams([1.0], [0.5, 2.0], np.zeros((1, 1)), [0.5, 2.0])
        with pytest.raises(NumericError) as err:
            cm.observed_loglik(params, data, two_piece)
        assert err.value.index == 1

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(29)
        for _ in range(5):
            params, data, partition = random_lcrm_instance(rng, n=6, G=2, J=2)
            grad = cm.observed_loglik_grad(params, data, partition)

            def pack(p):
                return np.concatenate([p.beta, p.theta, p.phi.ravel(), p.lam])

            def unpack(v):
                p_, G = params.beta.size, params.theta.size
                beta = v[:p_]
                theta = v[p_:p_ + G]
                nphi = params.phi.size
                phi = v[p_ + G:p_ + G + nphi].reshape(params.phi.shape)
                lam = v[p_ + G + nphi:]
                return beta, theta, phi, lam

            def f(v):
                beta, theta, phi, lam = unpack(v)
                probe = cm.LcrmParams(beta, theta, phi, lam)
                return cm.observed_loglik(probe, data, partition)

            flat_grad = np.concatenate([grad["beta"], grad["theta"], grad["phi"].ravel(), grad["lam"]])
            fd = numerical_gradient(f, pack(params), eps=1e-6)
            assert np.allclose(flat_grad, fd, rtol=1e-5, atol=1e-7)


class TestCompleteLoglik:
    def test_event_without_cells_is_rejected(self, two_piece):
        data = cm.Dataset([0.5], [1], [[0.0]], [[1.0]])
        params = cm.LcrmParams([0.0], [0.5, 2.0], np.zeros((1, 1)), [0.5, 2.0])
        latent = cm.LatentState(N=[0], g=[0])
        assert cm.complete_loglik(params, latent, data, two_piece) == -np.inf

    def test_censored_zero_count_term(self, two_piece):
        # single censored subject with no cells: -theta_k + log w_k
        data = cm.Dataset([0.5], [0], [[0.3]], [[1.0, 0.2]])
        params = cm.LcrmParams([0.1], [0.5, 2.0], np.array([[0.4, -0.3]]), [0.5, 2.0])
        for k in range(2):
            latent = cm.LatentState(N=[0], g=[k])
            got = cm.complete_loglik(params, latent, data, two_piece)
            w = cm.membership_probs(params.phi, data.z[0])
            assert got == pytest.approx(-params.theta[k] + np.log(w[k]), abs=1e-12)

    def test_sums_to_observed_over_latent_grid(self):
        # joint (N, g) grid enumeration at n = 3; small theta keeps the
        # count grid tractable while the tail mass stays below 1e-10
        rng = np.random.default_rng(31)
        for _ in range(2):
            params, data, partition = random_lcrm_instance(rng, n=3, G=2, J=2)
            theta = np.sort(rng.uniform(0.1, 0.9, 2))
            theta[1] += 0.05
            params = cm.LcrmParams(params.beta, theta, params.phi, params.lam)
            n_max = poisson_tail_cutoff(float(params.theta.max()), 1e-10) - 6
            total = enumerate_observed_lik_via_complete(params, data, partition, n_max)
            assert total == pytest.approx(np.exp(cm.observed_loglik(params, data, partition)),
                                          rel=1e-8)


class TestParamValidation:
    def test_theta_order_enforced(self):
        with pytest.raises(ConfigurationError):
            cm.LcrmParams([0.0], [2.0, 1.0], np.zeros((1, 1)), [1.0])
        with pytest.raises(ConfigurationError):
            cm.LcrmParams([0.0], [1.0, 1.0], np.zeros((1, 1)), [1.0])

    def test_phi_rows_must_match(self):
        with pytest.raises(ConfigurationError):
            cm.LcrmParams([0.0], [1.0, 2.0], np.zeros((2, 1)), [1.0])

    def test_dataset_validation(self):
        with pytest.raises(ConfigurationError):
            cm.Dataset([0.0], [1], [[1.0]], [[1.0]])
        with pytest.raises(ConfigurationError):
            cm.Dataset([1.0], [2], [[1.0]], [[1.0]])
        with pytest.raises(ConfigurationError):
            cm.Dataset([1.0], [1], [[1.0]], [[0.5]])

    def test_latent_bounds_checked(self, two_piece):
        data = cm.Dataset([0.5], [0], [[0.0]], [[1.0]])
        params = cm.LcrmParams([0.0], [0.5, 2.0], np.zeros((1, 1)), [0.5, 2.0])
        with pytest.raises(ConfigurationError):
            cm.complete_loglik(params, cm.LatentState(N=[1], g=[5]), data, two_piece)

    def test_complete_loglik_needs_mixture(self, two_piece):
        data = cm.Dataset([0.5], [0], [[0.0]], [[1.0]])
        with pytest.raises(ModelKindError):
            cm.complete_loglik(cm.CoxParams([0.0], [0.5, 2.0]),
                               cm.LatentState(N=[1], g=[0]), data, two_piece)
