"""Data-augmented MCMC for the mixture cure model at a fixed number of
groups, plus matching samplers for the four comparator models.

Update blocks for the mixture model, swept in a fixed systematic scan:

    N       shifted Poisson, exact full conditional
    g       categorical over groups, exact full conditional
    theta   order-truncated gammas, exact full conditionals drawn k = 1..G
    lambda  independent gammas, exact full conditionals
    beta    Gaussian random-walk Metropolis on the complete-data conditional
    phi     per-group Gaussian random-walk Metropolis (last group pinned at 0)

The random-walk scales adapt toward a target acceptance rate during burn-in
only; the post-burn-in kernel is fixed, which preserves the invariant
distribution. One sampler instance owns its state exclusively; independent
chains with distinct seeds may run concurrently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, gammainc, gammaincc, gammainccinv, gammaincinv
from scipy.stats import poisson as poisson_dist

from . import hazard as hz
from .archive import SampleArchive
from .exceptions import ConfigurationError, NumericError, ProprietyError
from .models import Dataset, lcrm_subject_logliks_core, row_logsumexp, subject_logliks
from .models import CisParams, CoxParams, LacrParams, LcrmParams, PhphParams
from .priors import PriorSpec, check_propriety


@dataclass(frozen=True)
class McmcConfig:
    """Chain length, seed and proposal settings.

    The default lengths mirror the reference analysis: 100,000 sweeps, the
    first 4000 discarded, every 5th of the rest stored.
    """

    total_iterations: int = 100_000
    burn_in: int = 4_000
    thin: int = 5
    seed: int = 0
    beta_scale: float = 0.1
    phi_scale: float = 0.25
    adapt: bool = True
    target_accept: float = 0.30

    def __post_init__(self):
        if self.burn_in >= self.total_iterations:
            raise ConfigurationError("burn_in must be smaller than total_iterations")
        if self.thin < 1:
            raise ConfigurationError("thin must be at least 1")
        if self.beta_scale <= 0.0 or self.phi_scale <= 0.0:
            raise ConfigurationError("proposal scales must be positive")
        if not 0.0 < self.target_accept < 1.0:
            raise ConfigurationError("target acceptance rate must lie in (0, 1)")

    @property
    def n_stored(self) -> int:
        return (self.total_iterations - self.burn_in) // self.thin

    @classmethod
    def quick(cls, seed: int = 0, **kw) -> "McmcConfig":
        """CI-sized profile; statistically insufficient for real inference."""
        return cls(total_iterations=2_000, burn_in=500, thin=2, seed=seed, **kw)

    @classmethod
    def quick_extended(cls, seed: int = 0, **kw) -> "McmcConfig":
        """Reduced profile for simulation studies (20,000 sweeps)."""
        return cls(total_iterations=20_000, burn_in=4_000, thin=5, seed=seed, **kw)


def sample_truncated_gamma(rng: np.random.Generator, shape: float, rate: float,
                           lo: float = 0.0, hi: float = np.inf,
                           max_rejects: int = 10_000) -> float:
    """Draw from gamma(shape, rate) restricted to (lo, hi).

    Uses inverse-CDF sampling on the regularized incomplete-gamma scale,
    switching to the upper-tail scale when both endpoints sit deep in the
    right tail. When the interval mass is numerically zero on either scale,
    falls back to rejection and raises after ``max_rejects`` failures.
    """
    if not (shape > 0.0 and rate > 0.0):
        raise ConfigurationError("truncated gamma needs positive shape and rate")
    if not lo < hi:
        raise ConfigurationError("empty truncation interval")
    lo = max(lo, 0.0)
    f_lo = float(gammainc(shape, rate * lo)) if lo > 0.0 else 0.0
    if f_lo > 0.99:
        q_lo = float(gammaincc(shape, rate * lo))
        q_hi = float(gammaincc(shape, rate * hi)) if np.isfinite(hi) else 0.0
        if q_lo - q_hi > 1e-14:
            u = q_hi + rng.random() * (q_lo - q_hi)
            x = float(gammainccinv(shape, u)) / rate
            return _clip_open(x, lo, hi)
    else:
        f_hi = float(gammainc(shape, rate * hi)) if np.isfinite(hi) else 1.0
        if f_hi - f_lo > 1e-14:
            u = f_lo + rng.random() * (f_hi - f_lo)
            x = float(gammaincinv(shape, u)) / rate
            return _clip_open(x, lo, hi)
    for _ in range(max_rejects):
        x = rng.gamma(shape, 1.0 / rate)
        if lo < x < hi:
            return x
    raise NumericError(
        f"truncated gamma(shape={shape:g}, rate={rate:g}) has no numerically "
        f"reachable mass on ({lo:g}, {hi:g}) after {max_rejects} rejections")


def _clip_open(x: float, lo: float, hi: float) -> float:
    if x <= lo:
        return np.nextafter(lo, np.inf)
    if x >= hi:
        return np.nextafter(hi, -np.inf)
    return x


class _AdaptiveScale:
    """Robbins-Monro scale adaptation toward a target acceptance rate."""

    def __init__(self, scale: float, target: float):
        self.log_scale = float(np.log(scale))
        self.target = target
        self.t = 0

    @property
    def scale(self) -> float:
        return float(np.exp(self.log_scale))

    def update(self, accepted: bool) -> None:
        self.t += 1
        step = min(0.5, self.t ** -0.6)
        self.log_scale += step * ((1.0 if accepted else 0.0) - self.target)


def _zero_truncated_poisson(rng: np.random.Generator, mu: np.ndarray) -> np.ndarray:
    """Vectorized inverse-CDF draw from Poisson(mu) conditioned on N >= 1."""
    mu = np.asarray(mu, dtype=float)
    p0 = np.exp(-mu)
    v = p0 + rng.random(mu.shape) * (1.0 - p0)
    v = np.clip(v, np.nextafter(p0, 1.0), np.nextafter(1.0, 0.0))
    return poisson_dist.ppf(v, mu).astype(np.int64)


class _ChainBase:
    """Shared precomputation, Metropolis helper and the run loop."""

    kind = "?"

    def __init__(self, data: Dataset, partition: hz.TimePartition, spec: PriorSpec,
                 cfg: McmcConfig, rng: np.random.Generator | None = None,
                 check: bool = True, force: bool = False):
        if check:
            report = check_propriety(data, partition, spec)
            if not report.passes:
                msg = f"propriety conditions failed: {', '.join(report.failed_conditions)}"
                if not force:
                    raise ProprietyError(msg, report=report)
                warnings.warn(msg + " (forced run)", stacklevel=2)
        self.data = data
        self.partition = partition
        self.spec = spec
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.expo = hz.exposure_matrix(data.time, partition)
        self.idx0 = np.searchsorted(partition.cuts, data.time, side="left")
        self.nu = data.event
        self.nu_f = data.event.astype(float)
        self.d = np.bincount(self.idx0[self.nu == 1], minlength=partition.n_intervals).astype(float)
        self.J = partition.n_intervals
        self._scales: dict[str, _AdaptiveScale] = {}
        self._accept: dict[str, list] = {}
        self._adapting = False
        self._counting = False

    # -- Metropolis ---------------------------------------------------------

    def _scale(self, name: str, initial: float) -> _AdaptiveScale:
        if name not in self._scales:
            self._scales[name] = _AdaptiveScale(initial, self.cfg.target_accept)
            self._accept[name] = [0, 0]
        return self._scales[name]

    def _metropolis(self, name: str, initial_scale: float, current: np.ndarray, logp) -> np.ndarray:
        adaptive = self._scale(name, initial_scale)
        proposal = current + adaptive.scale * self.rng.standard_normal(current.shape)
        lp_cur = logp(current)
        lp_prop = logp(proposal)
        logu = np.log(self.rng.random())
        accepted = np.isfinite(lp_prop) and logu < lp_prop - lp_cur
        if self._adapting:
            adaptive.update(accepted)
        if self._counting:
            self._accept[name][0] += int(accepted)
            self._accept[name][1] += 1
        return proposal if accepted else current

    # -- run loop -----------------------------------------------------------

    def run(self) -> SampleArchive:
        cfg = self.cfg
        m_total = cfg.n_stored
        store = self._alloc_storage(m_total)
        loglik = np.empty(m_total)
        subject_loglik = np.empty((m_total, self.data.n))
        for it in range(1, cfg.total_iterations + 1):
            self._adapting = cfg.adapt and it <= cfg.burn_in
            self._counting = it > cfg.burn_in
            self.sweep()
            offset = it - cfg.burn_in
            if offset > 0 and offset % cfg.thin == 0:
                m = offset // cfg.thin - 1
                if m < m_total:
                    sl = self._subject_logliks()
                    subject_loglik[m] = sl
                    loglik[m] = sl.sum()
                    self._record(store, m)
        meta = {
            "seed": cfg.seed,
            "config": {
                "total_iterations": cfg.total_iterations,
                "burn_in": cfg.burn_in,
                "thin": cfg.thin,
                "beta_scale": cfg.beta_scale,
                "phi_scale": cfg.phi_scale,
                "adapt": cfg.adapt,
                "target_accept": cfg.target_accept,
            },
            "acceptance": {
                name: (c[0] / c[1] if c[1] else None) for name, c in sorted(self._accept.items())
            },
            "n": self.data.n,
            "p": self.data.p,
            "q": self.data.q,
            "J": self.J,
        }
        meta.update(self._extra_meta())
        return SampleArchive(kind=self.kind, cuts=self.partition.cuts.copy(), params=store,
                             loglik=loglik, subject_loglik=subject_loglik, meta=meta)

    def _extra_meta(self) -> dict:
        return {}

    # subclass responsibilities
    def sweep(self) -> None:
        raise NotImplementedError

    def _alloc_storage(self, m: int) -> dict:
        raise NotImplementedError

    def _record(self, store: dict, m: int) -> None:
        raise NotImplementedError

    def _subject_logliks(self) -> np.ndarray:
        raise NotImplementedError


class LcrmSampler(_ChainBase):
    """Fixed-dimension sampler for the latent cure-rate marker model."""

    kind = "lcrm"

    def __init__(self, data, partition, spec, cfg, rng=None, check=True, force=False):
        super().__init__(data, partition, spec, cfg, rng=rng, check=check, force=force)
        self.G = spec.n_groups
        self.beta = np.zeros(data.p)
        self.phi = np.zeros((self.G - 1, data.q + 1))
        self.theta = spec.theta0.copy()
        expo_total = self.expo.sum(axis=0)
        self.lam = (spec.a0 + self.d) / (spec.b0 + np.maximum(expo_total, 1e-12))
        self.g = self.rng.integers(0, self.G, data.n) if self.G > 1 else np.zeros(data.n, dtype=np.int64)
        self.N = self.nu.copy()
        self._refresh_eta()
        self._refresh_H()
        self._refresh_zphi()

    # cache refreshers
    def _refresh_eta(self):
        self.eta = self.data.x @ self.beta
        self.risk = np.exp(self.eta)

    def _refresh_H(self):
        self.H = self.expo @ self.lam
        self.loglam = np.log(self.lam)

    def _refresh_zphi(self):
        n = self.data.n
        free = self.data.z @ self.phi.T if self.phi.size else np.zeros((n, 0))
        self.zphi = np.concatenate((free, np.zeros((n, 1))), axis=1)

    def set_state(self, beta=None, theta=None, phi=None, lam=None, N=None, g=None):
        """Replace parts of the chain state (testing and trans-dimensional use)."""
        if beta is not None:
            self.beta = np.asarray(beta, dtype=float).copy()
            self._refresh_eta()
        if lam is not None:
            self.lam = np.asarray(lam, dtype=float).copy()
            self._refresh_H()
        if theta is not None:
            self.theta = np.asarray(theta, dtype=float).copy()
        if phi is not None:
            self.phi = np.asarray(phi, dtype=float).reshape(-1, self.data.q + 1).copy()
            self._refresh_zphi()
        if N is not None:
            self.N = np.asarray(N, dtype=np.int64).copy()
        if g is not None:
            self.g = np.asarray(g, dtype=np.int64).copy()

    # -- exact full conditionals ---------------------------------------------

    def sample_latent_counts(self) -> None:
        """N_i <- nu_i + Poisson(theta_{g_i} exp(-exp(x'beta) H0*(y_i)))."""
        with np.errstate(over="ignore", invalid="ignore"):
            decay = np.exp(-self.risk * self.H)
        q = self.theta[self.g] * np.where(np.isfinite(decay), decay, 0.0)
        self.N = self.nu + self.rng.poisson(q)

    def sample_memberships(self) -> None:
        """g_i from the categorical conditional p(k) ~ w_ik theta_k^N e^(-theta_k)."""
        if self.G == 1:
            return
        logits = self.zphi + self.N[:, None] * np.log(self.theta)[None, :] - self.theta[None, :]
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        cum = np.cumsum(probs, axis=1)
        r = self.rng.random(self.data.n) * cum[:, -1]
        self.g = np.minimum((cum < r[:, None]).sum(axis=1), self.G - 1).astype(np.int64)

    def sample_theta(self) -> None:
        """Order-truncated gamma conditionals, swept from the lowest group up."""
        n_k = np.bincount(self.g, minlength=self.G).astype(float)
        s_k = np.bincount(self.g, weights=self.N.astype(float), minlength=self.G)
        for k in range(self.G):
            lo = self.theta[k - 1] if k > 0 else 0.0
            hi = self.theta[k + 1] if k < self.G - 1 else np.inf
            self.theta[k] = sample_truncated_gamma(
                self.rng, self.spec.theta_a[k] + s_k[k], self.spec.theta_b[k] + n_k[k], lo, hi)

    def sample_lambda(self) -> None:
        """lambda_j ~ gamma(a0 + d_j, b0 + sum_i exp(x'beta) N_i e_ij)."""
        weight = self.risk * self.N
        rate = self.spec.b0 + weight @ self.expo
        if np.any(rate <= 0.0):
            raise ConfigurationError("lambda conditional needs b0 > 0 or positive exposure")
        self.lam = self.rng.gamma(self.spec.a0 + self.d, 1.0 / rate)
        self._refresh_H()

    # -- Metropolis blocks ----------------------------------------------------

    def mh_update_beta(self) -> None:
        if self.data.p == 0:
            return
        X, N, H = self.data.x, self.N, self.H
        nu = self.nu_f
        c01 = self.spec.c01

        def logp(b):
            eta = X @ b
            with np.errstate(over="ignore", invalid="ignore"):
                load = np.where(N > 0, np.exp(eta) * N, 0.0)
            val = nu @ eta - load @ H - 0.5 * float(b @ b) / c01
            return val if np.isfinite(val) else -np.inf

        self.beta = self._metropolis("beta", self.cfg.beta_scale, self.beta, logp)
        self._refresh_eta()

    def mh_update_phi(self) -> None:
        if self.G == 1 or self.phi.size == 0:
            return
        Z = self.data.z
        g = self.g
        rows = np.arange(self.data.n)
        c02 = self.spec.c02
        for k in range(self.G - 1):
            def logp(vec, k=k):
                zphi = self.zphi.copy()
                zphi[:, k] = Z @ vec
                val = zphi[rows, g].sum() - row_logsumexp(zphi).sum() - 0.5 * float(vec @ vec) / c02
                return val if np.isfinite(val) else -np.inf

            self.phi[k] = self._metropolis(f"phi.{k + 1}", self.cfg.phi_scale, self.phi[k], logp)
            self.zphi[:, k] = Z @ self.phi[k]

    def sweep(self) -> None:
        self.sample_latent_counts()
        self.sample_memberships()
        self.sample_theta()
        self.sample_lambda()
        self.mh_update_beta()
        self.mh_update_phi()

    # -- recording -------------------------------------------------------------

    def _alloc_storage(self, m: int) -> dict:
        return {
            "beta": np.empty((m, self.data.p)),
            "theta": np.empty((m, self.G)),
            "phi": np.empty((m, self.G - 1, self.data.q + 1)),
            "lam": np.empty((m, self.J)),
        }

    def _record(self, store: dict, m: int) -> None:
        store["beta"][m] = self.beta
        store["theta"][m] = self.theta
        store["phi"][m] = self.phi
        store["lam"][m] = self.lam

    def _subject_logliks(self) -> np.ndarray:
        logw = self.zphi - row_logsumexp(self.zphi)[:, None]
        return lcrm_subject_logliks_core(self.nu_f, self.eta, self.H,
                                         self.loglam[self.idx0], logw, self.theta)

    def observed_loglik(self) -> float:
        return float(self._subject_logliks().sum())

    def _extra_meta(self) -> dict:
        return {"G": self.G}

    def current_params(self) -> LcrmParams:
        return LcrmParams(self.beta.copy(), self.theta.copy(), self.phi.copy(), self.lam.copy())


class CoxSampler(_ChainBase):
    """Proportional-hazards comparator: conjugate lambda, Metropolis beta."""

    kind = "cox"

    def __init__(self, data, partition, spec, cfg, rng=None, check=True, force=False):
        super().__init__(data, partition, spec, cfg, rng=rng, check=check, force=force)
        self.beta = np.zeros(data.p)
        self.lam = (spec.a0 + self.d) / (spec.b0 + np.maximum(self.expo.sum(axis=0), 1e-12))
        self._refresh()

    def _refresh(self):
        self.eta = self.data.x @ self.beta
        self.risk = np.exp(self.eta)
        self.H = self.expo @ self.lam

    def sample_lambda(self) -> None:
        rate = self.spec.b0 + self.risk @ self.expo
        self.lam = self.rng.gamma(self.spec.a0 + self.d, 1.0 / rate)
        self.H = self.expo @ self.lam

    def mh_update_beta(self) -> None:
        if self.data.p == 0:
            return
        X, H, nu, c01 = self.data.x, self.H, self.nu_f, self.spec.c01

        def logp(b):
            eta = X @ b
            with np.errstate(over="ignore"):
                risk = np.exp(eta)
            val = nu @ eta - risk @ H - 0.5 * float(b @ b) / c01
            return val if np.isfinite(val) else -np.inf

        self.beta = self._metropolis("beta", self.cfg.beta_scale, self.beta, logp)
        self.eta = X @ self.beta
        self.risk = np.exp(self.eta)

    def sweep(self) -> None:
        self.sample_lambda()
        self.mh_update_beta()

    def _alloc_storage(self, m):
        return {"beta": np.empty((m, self.data.p)), "lam": np.empty((m, self.J))}

    def _record(self, store, m):
        store["beta"][m] = self.beta
        store["lam"][m] = self.lam

    def current_params(self):
        return CoxParams(self.beta.copy(), self.lam.copy())

    def _subject_logliks(self):
        return subject_logliks(self.current_params(), self.data, self.partition)


class _PoissonAugmentedSampler(_ChainBase):
    """Shared machinery for the promotion-time comparators (latent N with a
    Poisson-regression cure block)."""

    def __init__(self, data, partition, spec, cfg, rng=None, check=True, force=False):
        super().__init__(data, partition, spec, cfg, rng=rng, check=check, force=force)
        self.beta = np.zeros(data.p)
        self.lam = (spec.a0 + self.d) / (spec.b0 + np.maximum(self.expo.sum(axis=0), 1e-12))
        self.N = self.nu.copy()
        self.eta = data.x @ self.beta
        self.risk = np.exp(self.eta)
        self.H = self.expo @ self.lam

    def _poisson_regression_update(self, name: str) -> None:
        """Metropolis step for the cure-rate coefficients given N."""
        if self.data.p == 0:
            return
        X, N, c01 = self.data.x, self.N.astype(float), self.spec.c01

        def logp(b):
            eta = X @ b
            with np.errstate(over="ignore"):
                risk = np.exp(eta)
            val = N @ eta - risk.sum() - 0.5 * float(b @ b) / c01
            return val if np.isfinite(val) else -np.inf

        self.beta = self._metropolis(name, self.cfg.beta_scale, self.beta, logp)
        self.eta = X @ self.beta
        self.risk = np.exp(self.eta)


class CisSampler(_PoissonAugmentedSampler):
    """Promotion-time cure model with theta_i = exp(x'beta)."""

    kind = "cis"

    def sample_latent_counts(self) -> None:
        mu = self.risk * np.exp(-self.H)
        self.N = self.nu + self.rng.poisson(mu)

    def sample_lambda(self) -> None:
        rate = self.spec.b0 + self.N.astype(float) @ self.expo
        self.lam = self.rng.gamma(self.spec.a0 + self.d, 1.0 / rate)
        self.H = self.expo @ self.lam

    def sweep(self) -> None:
        self.sample_latent_counts()
        self.sample_lambda()
        self._poisson_regression_update("beta")

    def _alloc_storage(self, m):
        return {"beta": np.empty((m, self.data.p)), "lam": np.empty((m, self.J))}

    def _record(self, store, m):
        store["beta"][m] = self.beta
        store["lam"][m] = self.lam

    def current_params(self):
        return CisParams(self.beta.copy(), self.lam.copy())

    def _subject_logliks(self):
        return subject_logliks(self.current_params(), self.data, self.partition)


class PhphSampler(_PoissonAugmentedSampler):
    """Double proportional-hazards cure model."""

    kind = "phph"

    def __init__(self, data, partition, spec, cfg, rng=None, check=True, force=False):
        super().__init__(data, partition, spec, cfg, rng=rng, check=check, force=force)
        self.beta2 = np.zeros(data.p)
        self.eta2 = data.x @ self.beta2
        self.risk2 = np.exp(self.eta2)

    def sample_latent_counts(self) -> None:
        mu = self.risk * np.exp(-self.risk2 * self.H)
        self.N = self.nu + self.rng.poisson(mu)

    def sample_lambda(self) -> None:
        rate = self.spec.b0 + (self.risk2 * self.N) @ self.expo
        self.lam = self.rng.gamma(self.spec.a0 + self.d, 1.0 / rate)
        self.H = self.expo @ self.lam

    def mh_update_beta2(self) -> None:
        if self.data.p == 0:
            return
        X, N, H, nu, c01 = self.data.x, self.N, self.H, self.nu_f, self.spec.c01

        def logp(b):
            eta = X @ b
            with np.errstate(over="ignore", invalid="ignore"):
                load = np.where(N > 0, np.exp(eta) * N, 0.0)
            val = nu @ eta - load @ H - 0.5 * float(b @ b) / c01
            return val if np.isfinite(val) else -np.inf

        self.beta2 = self._metropolis("beta2", self.cfg.beta_scale, self.beta2, logp)
        self.eta2 = X @ self.beta2
        self.risk2 = np.exp(self.eta2)

    def sweep(self) -> None:
        self.sample_latent_counts()
        self.sample_lambda()
        self._poisson_regression_update("beta1")
        self.mh_update_beta2()

    def _alloc_storage(self, m):
        return {
            "beta1": np.empty((m, self.data.p)),
            "beta2": np.empty((m, self.data.p)),
            "lam": np.empty((m, self.J)),
        }

    def _record(self, store, m):
        store["beta1"][m] = self.beta
        store["beta2"][m] = self.beta2
        store["lam"][m] = self.lam

    def current_params(self):
        return PhphParams(self.beta.copy(), self.beta2.copy(), self.lam.copy())

    def _subject_logliks(self):
        return subject_logliks(self.current_params(), self.data, self.partition)


class LacrSampler(_PoissonAugmentedSampler):
    """Latent-activation comparator; the event is a uniformly chosen
    activation, so conditionally on N >= 1 the follow-up time follows the
    baseline law itself and only the cured/uncured split carries exposure."""

    kind = "lacr"

    def sample_latent_counts(self) -> None:
        theta = self.risk
        log_cured = -theta
        with np.errstate(divide="ignore"):
            log_uncured = np.log(-np.expm1(-theta)) - self.H
        p_cured = expit(log_cured - log_uncured)
        p_cured = np.where(self.nu == 1, 0.0, p_cured)
        u = self.rng.random(self.data.n)
        stay_zero = u < p_cured
        n_pos = self._ztp_draws()
        self.N = np.where(stay_zero, 0, n_pos).astype(np.int64)

    def _ztp_draws(self) -> np.ndarray:
        return _zero_truncated_poisson(self.rng, self.risk)

    def sample_lambda(self) -> None:
        active = (self.N >= 1).astype(float)
        rate = self.spec.b0 + active @ self.expo
        self.lam = self.rng.gamma(self.spec.a0 + self.d, 1.0 / rate)
        self.H = self.expo @ self.lam

    def sweep(self) -> None:
        self.sample_latent_counts()
        self.sample_lambda()
        self._poisson_regression_update("beta")

    def _alloc_storage(self, m):
        return {"beta": np.empty((m, self.data.p)), "lam": np.empty((m, self.J))}

    def _record(self, store, m):
        store["beta"][m] = self.beta
        store["lam"][m] = self.lam

    def current_params(self):
        return LacrParams(self.beta.copy(), self.lam.copy())

    def _subject_logliks(self):
        return subject_logliks(self.current_params(), self.data, self.partition)


_SAMPLERS = {
    "cox": CoxSampler,
    "cis": CisSampler,
    "phph": PhphSampler,
    "lacr": LacrSampler,
    "lcrm": LcrmSampler,
}


def run_chain(kind: str, data: Dataset, partition: hz.TimePartition, spec: PriorSpec,
              cfg: McmcConfig, check: bool = True, force: bool = False) -> SampleArchive:
    """Run one chain of the requested model and return its archive.

    Identical seed, configuration and data give a bit-identical archive.
    Refuses to run when the propriety conditions fail unless ``force`` is
    set, in which case a warning is emitted instead.
    """
    if kind not in _SAMPLERS:
        raise ConfigurationError(f"unknown model kind {kind!r}; expected one of {sorted(_SAMPLERS)}")
    sampler = _SAMPLERS[kind](data, partition, spec, cfg, check=check, force=force)
    return sampler.run()
