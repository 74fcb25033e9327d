import numpy as np
import pytest
from scipy.special import gammainc
from scipy.stats import chisquare, gamma as gamma_dist, kstest, poisson

import curemark as cm
from curemark.exceptions import ConfigurationError, ProprietyError
from curemark.gibbs import _zero_truncated_poisson


def clone_dataset(n, time=np.log(2.0), event=1, x=0.0, z_extra=0.0):
    return cm.Dataset(np.full(n, time), np.full(n, event, dtype=int),
                      np.full((n, 1), x), np.column_stack((np.ones(n), np.full(n, z_extra))))


def make_sampler(data, theta0, cfg=None, **prior_kw):
    spec = cm.PriorSpec(theta0=np.asarray(theta0), **prior_kw)
    cfg = cfg or cm.McmcConfig(total_iterations=100, burn_in=10, thin=1, seed=1)
    part = cm.TimePartition(np.zeros(0))
    return cm.LcrmSampler(data, part, spec, cfg, check=False)


class TestTruncatedGamma:
    def test_support(self):
        rng = np.random.default_rng(0)
        draws = [cm.sample_truncated_gamma(rng, 2.0, 1.0, 2.0, 3.0) for _ in range(500)]
        assert all(2.0 < d < 3.0 for d in draws)

    @pytest.mark.parametrize("shape,rate,lo,hi", [
        (1.0, 1.0, 0.0, np.inf),
        (2.5, 1.3, 0.5, 2.0),
        (0.16, 1.5, 0.0, 0.4),
        (4.0, 0.5, 10.0, np.inf),     # right-tail truncation
        (3.0, 2.0, 0.0, 0.05),        # tiny left interval
    ])
    def test_ks_against_cdf_oracle(self, shape, rate, lo, hi):
        rng = np.random.default_rng(99)
        draws = np.array([cm.sample_truncated_gamma(rng, shape, rate, lo, hi)
                          for _ in range(4000)])
        f_lo = gammainc(shape, rate * lo)
        f_hi = gammainc(shape, rate * hi) if np.isfinite(hi) else 1.0

        def cdf(x):
            return (gammainc(shape, rate * np.asarray(x)) - f_lo) / (f_hi - f_lo)

        assert kstest(draws, cdf).pvalue > 0.01

    def test_unreachable_interval_raises(self):
        rng = np.random.default_rng(1)
        with pytest.raises(cm.NumericError):
            cm.sample_truncated_gamma(rng, 2.0, 1.0, 400.0, 400.0 + 1e-9, max_rejects=50)


class TestZeroTruncatedPoisson:
    def test_support_and_pmf(self):
        rng = np.random.default_rng(3)
        mu = 1.7
        draws = _zero_truncated_poisson(rng, np.full(100_000, mu))
        assert draws.min() >= 1
        kmax = int(poisson.ppf(1.0 - 5e-4, mu))  # pooled tail keeps cells well filled
        counts = np.bincount(np.minimum(draws, kmax), minlength=kmax + 1)[1:]
        pmf = poisson.pmf(np.arange(1, kmax), mu) / (1 - np.exp(-mu))
        expected = np.append(pmf, 1.0 - pmf.sum())
        res = chisquare(counts, expected * draws.size)
        assert res.pvalue > 0.01


class TestLatentCountConditional:
    def test_degenerate_event(self):
        sampler = make_sampler(clone_dataset(50, time=50.0), [2.6])
        sampler.set_state(theta=[2.6], lam=[1.0])
        sampler.sample_latent_counts()  # q ~ 2.6 exp(-50) ~ 0
        assert np.all(sampler.N == 1)

    def test_censored_fully_decayed(self):
        data = clone_dataset(50, time=60.0, event=0)
        sampler = make_sampler(data, [2.0])
        sampler.set_state(theta=[2.0], lam=[1.0])
        sampler.sample_latent_counts()
        assert np.all(sampler.N == 0)

    def test_chi_square_against_enumerated_pmf(self):
        # event subjects with q = theta exp(-H) = 1.3: N - 1 ~ Poisson(1.3)
        n = 100_000
        sampler = make_sampler(clone_dataset(n, time=np.log(2.0)), [2.6])
        sampler.set_state(theta=[2.6], lam=[1.0])
        sampler.sample_latent_counts()
        draws = sampler.N
        assert draws.min() >= 1
        q = 1.3
        kmax = int(poisson.ppf(1.0 - 5e-4, q))  # pooled tail keeps cells well filled
        shifted = np.minimum(draws - 1, kmax)
        counts = np.bincount(shifted, minlength=kmax + 1)
        pmf = poisson.pmf(np.arange(kmax), q)
        expected = np.concatenate((pmf, [1.0 - pmf.sum()]))
        res = chisquare(counts, expected * n)
        assert res.pvalue > 0.01


class TestMembershipConditional:
    def test_single_group(self):
        sampler = make_sampler(clone_dataset(20), [1.0])
        sampler.sample_memberships()
        assert np.all(sampler.g == 0)

    def test_two_group_probability(self):
        n = 100_000
        sampler = make_sampler(clone_dataset(n, event=0), [0.1, 2.0])
        sampler.set_state(theta=[0.1, 2.0], phi=np.zeros((1, 2)), N=np.zeros(n))
        sampler.sample_memberships()
        p1 = np.exp(-0.1) / (np.exp(-0.1) + np.exp(-2.0))
        assert p1 == pytest.approx(0.8699, abs=5e-5)
        got = (sampler.g == 0).mean()
        se = np.sqrt(p1 * (1 - p1) / n)
        assert abs(got - p1) < 3 * se

    def test_frequencies_match_enumeration(self):
        n = 100_000
        theta = np.array([0.4, 1.1, 2.7])
        phi = np.array([[0.6, 0.0], [-0.4, 0.0]])
        sampler = make_sampler(clone_dataset(n, event=0), [0.4, 1.1, 2.7])
        sampler.set_state(theta=theta, phi=phi, N=np.full(n, 2))
        sampler.sample_memberships()
        logits = np.array([0.6, -0.4, 0.0]) + 2 * np.log(theta) - theta
        probs = np.exp(logits - logits.max())
        probs /= probs.sum()
        counts = np.bincount(sampler.g, minlength=3)
        for k in range(3):
            se = np.sqrt(probs[k] * (1 - probs[k]) / n)
            assert abs(counts[k] / n - probs[k]) < 3 * se


class TestThetaConditional:
    def test_prior_only_mean(self):
        data = clone_dataset(0)
        sampler = make_sampler(data, [1.0], theta_a=[1.0], theta_b=[1.0],
                               cfg=cm.McmcConfig(total_iterations=10, burn_in=1, thin=1, seed=3))
        draws = np.empty(100_000)
        for i in range(draws.size):
            sampler.sample_theta()
            draws[i] = sampler.theta[0]
        assert abs(draws.mean() - 1.0) < 0.01
        assert kstest(draws[::10], gamma_dist(1.0, scale=1.0).cdf).pvalue > 0.01

    def test_truncation_support(self):
        sampler = make_sampler(clone_dataset(0), [1.0, 2.5, 4.0])
        for _ in range(200):
            sampler.set_state(theta=[2.0, 2.5, 3.0])
            sampler.sample_theta()
            assert np.all(np.diff(sampler.theta) > 0)

    def test_ks_against_truncated_cdf(self):
        # first component's conditional given a fixed right neighbor
        spec_a, spec_b = 1.3, 0.9
        sampler = make_sampler(clone_dataset(0), [0.5, 2.0],
                               theta_a=[spec_a, 1.0], theta_b=[spec_b, 1.0])
        m = 20_000
        draws = np.empty(m)
        for i in range(m):
            sampler.set_state(theta=[0.5, 2.0])
            sampler.sample_theta()
            draws[i] = sampler.theta[0]
        f_hi = gammainc(spec_a, spec_b * 2.0)

        def cdf(x):
            return gammainc(spec_a, spec_b * np.asarray(x)) / f_hi

        assert draws.max() < 2.0
        assert kstest(draws, cdf).pvalue > 0.01


class TestLambdaConditional:
    def test_prior_only(self):
        sampler = make_sampler(clone_dataset(0), [1.0], a0=2.0, b0=4.0)
        m = 50_000
        draws = np.empty(m)
        for i in range(m):
            sampler.sample_lambda()
            draws[i] = sampler.lam[0]
        assert abs(draws.mean() - 0.5) < 3 * np.sqrt(2.0 / 16.0 / m)

    def test_single_subject_conjugacy(self):
        # one event, two cells, unit hazard window: gamma(a0 + 1, b0 + N y)
        data = clone_dataset(1, time=0.5, event=1)
        sampler = make_sampler(data, [1.0], a0=1.0, b0=1.0)
        sampler.set_state(beta=[0.0], N=[2])
        m = 100_000
        draws = np.empty(m)
        for i in range(m):
            sampler.sample_lambda()
            draws[i] = sampler.lam[0]
        # gamma(2, 2): mean 1, sd 1/sqrt(2)
        assert abs(draws.mean() - 1.0) < 0.02

    def test_cured_subjects_carry_no_exposure(self):
        data = clone_dataset(40, time=1.0, event=0)
        sampler = make_sampler(data, [1.0], a0=1.5, b0=2.0)
        sampler.set_state(N=np.zeros(40))
        m = 50_000
        draws = np.empty(m)
        for i in range(m):
            sampler.sample_lambda()
            draws[i] = sampler.lam[0]
        # d_j = 0 and no exposure: the conditional is the prior gamma(1.5, 2)
        assert abs(draws.mean() - 0.75) < 3 * np.sqrt(1.5 / 4.0 / m)


class TestMetropolisBlocks:
    def test_tiny_scale_accepts(self):
        data = clone_dataset(30)
        sampler = make_sampler(data, [1.0],
                               cfg=cm.McmcConfig(total_iterations=100, burn_in=10, thin=1,
                                                 seed=2, beta_scale=1e-8, adapt=False))
        sampler._counting = True
        for _ in range(200):
            sampler.mh_update_beta()
        acc, tot = sampler._accept["beta"]
        assert tot == 200
        assert acc / tot > 0.95

    def test_prior_only_beta_moments(self):
        data = cm.Dataset(np.full(0, 1.0), np.zeros(0, dtype=int), np.zeros((0, 1)),
                          np.ones((0, 1)))
        sampler = make_sampler(data, [1.0], c01=1.0,
                               cfg=cm.McmcConfig(total_iterations=10, burn_in=1, thin=1,
                                                 seed=5, beta_scale=2.0, adapt=False))
        m = 100_000
        draws = np.empty(m)
        for i in range(m):
            sampler.mh_update_beta()
            draws[i] = sampler.beta[0]
        ess = cm.effective_sample_size(draws)
        assert abs(draws.mean()) < 4.0 / np.sqrt(ess)
        assert abs(draws.var() - 1.0) < 4.0 * np.sqrt(2.0 / ess)

    def test_prior_only_phi_moments(self):
        data = cm.Dataset(np.full(0, 1.0), np.zeros(0, dtype=int), np.zeros((0, 0)),
                          np.ones((0, 1)))
        sampler = make_sampler(data, [0.5, 2.0], c02=3.0,
                               cfg=cm.McmcConfig(total_iterations=10, burn_in=1, thin=1,
                                                 seed=7, phi_scale=3.0, adapt=False))
        m = 100_000
        draws = np.empty(m)
        for i in range(m):
            sampler.mh_update_phi()
            draws[i] = sampler.phi[0, 0]
        ess = cm.effective_sample_size(draws)
        assert abs(draws.mean()) < 4.0 * np.sqrt(3.0 / ess)
        assert abs(draws.var() - 3.0) < 4.0 * np.sqrt(2.0 * 9.0 / ess)

    def test_phi_reference_block_stays_pinned(self):
        params = cm.LcrmParams([0.2], [0.4, 1.5], np.array([[0.8, -0.5]]), [0.7])
        part = cm.TimePartition(np.zeros(0))
        data, _ = cm.simulate_lcrm(params, part, 120, seed=11)
        spec = cm.PriorSpec.default(2)
        cfg = cm.McmcConfig(total_iterations=300, burn_in=50, thin=1, seed=12)
        sampler = cm.LcrmSampler(data, part, spec, cfg, check=False)
        for _ in range(50):
            sampler.sweep()
            assert np.all(sampler.zphi[:, -1] == 0.0)
            assert sampler.phi.shape == (1, 2)

    def test_phi_sign_recovery(self):
        # strongly separated memberships: the fitted coefficient block points
        # the same way as the generator in nearly every replicate
        hits = 0
        part = cm.TimePartition(np.zeros(0))
        for rep in range(20):
            gen = cm.LcrmParams(np.zeros(0), [0.2, 3.0], np.array([[0.0, 2.5]]), [1.0])
            cov = cm.CovariateSpec(p=0, q=1, share=False)
            data, _ = cm.simulate_lcrm(gen, part, 250, covariates=cov, seed=100 + rep)
            spec = cm.PriorSpec.elicited([0.8, 0.2], c0=2.5)
            cfg = cm.McmcConfig(total_iterations=1500, burn_in=500, thin=2, seed=rep)
            archive = cm.run_chain("lcrm", data, part, spec, cfg, check=False)
            slope = archive.params["phi"][:, 0, 1].mean()
            hits += slope > 0
        assert hits >= 19


class TestBetaSymmetry:
    def test_covariate_flip_antisymmetry(self):
        # mirrored datasets give mirrored posterior means up to MC error
        part = cm.TimePartition(np.zeros(0))
        gen = cm.LcrmParams([0.8], [0.5, 2.5], np.array([[0.3, 0.0]]), [1.0])
        data, _ = cm.simulate_lcrm(gen, part, 400, seed=17)
        flipped = cm.Dataset(data.time, data.event, -data.x, data.z)
        spec = cm.PriorSpec.default(2)
        cfg = cm.McmcConfig(total_iterations=3000, burn_in=1000, thin=2, seed=21)
        a1 = cm.run_chain("lcrm", data, part, spec, cfg, check=False)
        a2 = cm.run_chain("lcrm", flipped, part, spec, cfg, check=False)
        m1 = a1.params["beta"][:, 0]
        m2 = a2.params["beta"][:, 0]
        se = np.sqrt(m1.var() / cm.effective_sample_size(m1)
                     + m2.var() / cm.effective_sample_size(m2))
        assert abs(m1.mean() + m2.mean()) < 4 * se


class TestRunChain:
    def _quick_fit_inputs(self, seed=3):
        params = cm.LcrmParams([0.5], [0.4, 1.8], np.array([[0.5, -0.6]]), [0.6, 1.2])
        part = cm.TimePartition(np.array([1.0]))
        data, _ = cm.simulate_lcrm(params, part, 150, seed=seed)
        return data, part

    def test_single_draw_accounting(self):
        data, part = self._quick_fit_inputs()
        cfg = cm.McmcConfig(total_iterations=55, burn_in=50, thin=5, seed=1)
        archive = cm.run_chain("lcrm", data, part, cm.PriorSpec.default(2), cfg, check=False)
        assert archive.n_draws == 1

    def test_determinism_bit_identical(self, tmp_path):
        data, part = self._quick_fit_inputs()
        cfg = cm.McmcConfig(total_iterations=300, burn_in=100, thin=2, seed=9)
        a1 = cm.run_chain("lcrm", data, part, cm.PriorSpec.default(2), cfg, check=False)
        a2 = cm.run_chain("lcrm", data, part, cm.PriorSpec.default(2), cfg, check=False)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        a1.save(d1)
        a2.save(d2)
        assert (d1 / "draws.csv").read_bytes() == (d2 / "draws.csv").read_bytes()
        assert (d1 / "subject_loglik.csv").read_bytes() == (d2 / "subject_loglik.csv").read_bytes()
        assert (d1 / "meta.json").read_bytes() == (d2 / "meta.json").read_bytes()

    def test_invariants_hold_along_chain(self):
        data, part = self._quick_fit_inputs()
        spec = cm.PriorSpec.default(3)
        cfg = cm.McmcConfig(total_iterations=100, burn_in=10, thin=1, seed=13)
        sampler = cm.LcrmSampler(data, part, spec, cfg, check=False)
        for _ in range(100):
            sampler.sweep()
            assert np.all(np.diff(sampler.theta) > 0)
            assert np.all(sampler.N >= sampler.nu)

    def test_propriety_gate(self):
        data = cm.Dataset([0.5, 0.6], [1, 1], [[0.1], [0.2]], [[1.0, 0.1], [1.0, 0.2]])
        part = cm.TimePartition(np.array([2.0]))  # second interval has no events
        cfg = cm.McmcConfig(total_iterations=20, burn_in=10, thin=1, seed=1)
        with pytest.raises(ProprietyError):
            cm.run_chain("lcrm", data, part, cm.PriorSpec.default(1), cfg)
        with pytest.warns(UserWarning):
            cm.run_chain("lcrm", data, part, cm.PriorSpec.default(1), cfg, force=True)

    def test_reduced_models_run_and_archive(self):
        data, part = self._quick_fit_inputs()
        cfg = cm.McmcConfig(total_iterations=120, burn_in=40, thin=2, seed=2)
        for kind in ("cox", "cis", "phph", "lacr"):
            archive = cm.run_chain(kind, data, part, cm.PriorSpec.default(1), cfg, check=False)
            assert archive.kind == kind
            assert archive.n_draws == 40
            assert np.all(np.isfinite(archive.loglik))
            mean_params = archive.mean_params()
            got = cm.observed_loglik(mean_params, data, part)
            assert np.isfinite(got)

    def test_unknown_kind(self):
        data, part = self._quick_fit_inputs()
        with pytest.raises(ConfigurationError):
            cm.run_chain("weibull", data, part, cm.PriorSpec.default(1),
                         cm.McmcConfig(total_iterations=10, burn_in=5, thin=1))

    def test_adaptation_freezes_after_burn_in(self):
        data, part = self._quick_fit_inputs()
        spec = cm.PriorSpec.default(2)
        cfg = cm.McmcConfig(total_iterations=400, burn_in=200, thin=1, seed=4)
        sampler = cm.LcrmSampler(data, part, spec, cfg, check=False)
        for it in range(1, 201):
            sampler._adapting = it <= 200
            sampler.sweep()
        frozen = {k: v.scale for k, v in sampler._scales.items()}
        sampler._adapting = False
        for _ in range(100):
            sampler.sweep()
        assert {k: v.scale for k, v in sampler._scales.items()} == frozen
