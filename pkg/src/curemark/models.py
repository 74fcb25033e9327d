"""Survival functions, cure rates and log-likelihoods for the five models.

Model kinds
-----------
cox   proportional hazards on the piecewise-exponential baseline, no cured
      fraction.
cis   promotion-time cure model: a Poisson number of latent cells with mean
      exp(x'beta), event at the first activation; activation times follow the
      baseline CDF.
phph  double proportional-hazards cure model: covariates enter both the cure
      parameter exp(x'beta1) and the activation cumulative hazard through
      exp(x'beta2).
lacr  latent-activation cure model: the event is a uniformly chosen activation
      among the Poisson cells, which collapses to a two-point mixture of a
      cured class and the baseline law.
lcrm  latent cure-rate marker model: a G-component mixture in which component
      k carries its own cure parameter theta_k (strictly ordered), membership
      follows a multinomial logistic model in z, and activation times share a
      proportional-hazards piecewise-exponential law.

All evaluations are pure functions of immutable parameters and are safe to
call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import hazard as hz
from .exceptions import ConfigurationError, ModelKindError, NumericError


# --------------------------------------------------------------------------
# data containers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Right-censored survival data with two covariate blocks.

    ``time`` holds positive follow-up times, ``event`` is 1 for an observed
    event and 0 for censoring, ``x`` enters the hazard/cure regressions and
    ``z`` the membership regression. ``z`` always carries a leading column of
    ones (the intercept); x and z may share columns.
    """

    time: np.ndarray
    event: np.ndarray
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        time = np.atleast_1d(np.asarray(self.time, dtype=float))
        event = np.atleast_1d(np.asarray(self.event))
        x = np.asarray(self.x, dtype=float)
        z = np.asarray(self.z, dtype=float)
        n = time.size
        if x.ndim != 2 or z.ndim != 2:
            raise ConfigurationError("covariate blocks must be 2-dimensional")
        if event.size != n or x.shape[0] != n or z.shape[0] != n:
            raise ConfigurationError("time, event and covariate blocks must share length")
        if np.any(~np.isfinite(time)) or np.any(time <= 0.0):
            raise ConfigurationError("all follow-up times must be positive and finite")
        if not np.all(np.isin(event, (0, 1))):
            raise ConfigurationError("event indicators must be 0 or 1")
        if z.shape[1] < 1 or np.any(z[:, 0] != 1.0):
            raise ConfigurationError("z must carry a leading intercept column of ones")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise ConfigurationError("covariates must be finite")
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event.astype(np.int64))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.time.size

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.z.shape[1] - 1

    def subset(self, idx) -> "Dataset":
        return Dataset(self.time[idx], self.event[idx], self.x[idx], self.z[idx])


@dataclass(frozen=True)
class LatentState:
    """Latent cell counts N and group memberships g (0-based, in 0..G-1)."""

    N: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "N", np.atleast_1d(np.asarray(self.N, dtype=np.int64)))
        object.__setattr__(self, "g", np.atleast_1d(np.asarray(self.g, dtype=np.int64)))


def _positive_rates(lam) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(~np.isfinite(lam)) or np.any(lam <= 0.0):
        raise ConfigurationError("hazard rates must be finite and positive")
    return lam


@dataclass(frozen=True)
class CoxParams:
    beta: np.ndarray
    lam: np.ndarray
    kind = "cox"

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "lam", _positive_rates(self.lam))


@dataclass(frozen=True)
class CisParams:
    beta: np.ndarray
    lam: np.ndarray
    kind = "cis"

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "lam", _positive_rates(self.lam))


@dataclass(frozen=True)
class PhphParams:
    beta1: np.ndarray
    beta2: np.ndarray
    lam: np.ndarray
    kind = "phph"

    def __post_init__(self):
        object.__setattr__(self, "beta1", np.atleast_1d(np.asarray(self.beta1, dtype=float)))
        object.__setattr__(self, "beta2", np.atleast_1d(np.asarray(self.beta2, dtype=float)))
        object.__setattr__(self, "lam", _positive_rates(self.lam))


@dataclass(frozen=True)
class LacrParams:
    beta: np.ndarray
    lam: np.ndarray
    kind = "lacr"

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "lam", _positive_rates(self.lam))


@dataclass(frozen=True)
class LcrmParams:
    """Mixture parameters: beta (p,), theta (G,) strictly increasing, phi
    (G-1, q+1) free membership coefficients (the last group is pinned at 0),
    lam (J,) baseline rates."""

    beta: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    lam: np.ndarray
    kind = "lcrm"

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        phi = np.asarray(self.phi, dtype=float)
        if phi.size == 0:
            phi = phi.reshape(0, 0 if phi.ndim < 2 else phi.shape[1])
        if phi.ndim != 2:
            raise ConfigurationError("phi must be a (G-1, q+1) matrix")
        if np.any(theta <= 0.0) or np.any(np.diff(theta) <= 0.0):
            raise ConfigurationError("theta must be positive and strictly increasing")
        if phi.shape[0] != theta.size - 1:
            raise ConfigurationError("phi must have exactly G-1 rows")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "lam", _positive_rates(self.lam))

    @property
    def n_groups(self) -> int:
        return self.theta.size


ModelParams = CoxParams | CisParams | PhphParams | LacrParams | LcrmParams


# --------------------------------------------------------------------------
# building blocks
# --------------------------------------------------------------------------


def row_logsumexp(a: np.ndarray) -> np.ndarray:
    """logsumexp along the last axis; lean replacement for the scipy call in
    per-sweep hot paths (identical up to floating-point rounding)."""
    m = np.max(a, axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return m[..., 0] + np.log(np.exp(a - m).sum(axis=-1))


def _log1mexp(a):
    """log(1 - exp(-a)) for a > 0, stable near both ends."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore"):
        small = np.log(-np.expm1(-np.minimum(a, 0.6931471805599453)))
        large = np.log1p(-np.exp(-np.maximum(a, 0.6931471805599453)))
    return np.where(a < 0.6931471805599453, small, large)


def _checked_exp_linpred(eta, where="x'beta"):
    """exp(eta) with an explicit overflow error naming the offending record."""
    with np.errstate(over="ignore"):
        out = np.exp(eta)
    bad = ~np.isfinite(out)
    if np.any(bad):
        idx = int(np.flatnonzero(np.atleast_1d(bad))[0])
        raise NumericError(f"exp({where}) overflowed for record {idx}", index=idx)
    return out


def membership_logits(phi: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """(n, G) matrix of z'phi_k with the pinned last column of zeros."""
    n = Z.shape[0]
    free = Z @ phi.T if phi.size else np.zeros((n, 0))
    return np.concatenate((free, np.zeros((n, 1))), axis=1)


def membership_log_probs(phi: np.ndarray, Z: np.ndarray) -> np.ndarray:
    logits = membership_logits(phi, Z)
    return logits - row_logsumexp(logits)[:, None]


def membership_probs(phi, z) -> np.ndarray:
    """Multinomial-logistic group probabilities for a single covariate vector."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    return np.exp(membership_log_probs(np.asarray(phi, dtype=float), z[None, :])[0])


def conditional_survival(theta_k: float, beta, t, x, partition: hz.TimePartition, lam):
    """Survival given membership in the group with cure parameter theta_k:
    exp(-theta_k * [1 - exp(-exp(x'beta) H0*(t))])."""
    if not theta_k > 0.0:
        raise ConfigurationError("theta must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if x.size != beta.size:
        raise ConfigurationError("covariate/coefficient length mismatch")
    h = cumulative_hazard_at(t, partition, lam)
    risk = _checked_exp_linpred(float(x @ beta))
    frac = -np.expm1(-risk * np.asarray(h, dtype=float))
    return np.exp(-theta_k * frac)


def cumulative_hazard_at(t, partition: hz.TimePartition, lam):
    """H0*(t) extended to t = 0 and t = +inf."""
    t_arr = np.asarray(t, dtype=float)
    return hz.cumulative_hazard(t_arr, partition, lam)


def _survival_scalar(params: ModelParams, t: float, x, z, partition: hz.TimePartition) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if t < 0.0:
        raise ConfigurationError("time must be nonnegative")
    if t == 0.0:
        return 1.0
    if isinstance(params, CoxParams):
        _require_len(x, params.beta, "x")
        h = cumulative_hazard_at(t, partition, params.lam)
        return float(np.exp(-_checked_exp_linpred(float(x @ params.beta)) * h))
    if isinstance(params, CisParams):
        _require_len(x, params.beta, "x")
        f0 = hz.baseline_cdf(t, partition, params.lam)
        return float(np.exp(-_checked_exp_linpred(float(x @ params.beta)) * f0))
    if isinstance(params, PhphParams):
        _require_len(x, params.beta1, "x")
        h = cumulative_hazard_at(t, partition, params.lam)
        frac = -np.expm1(-_checked_exp_linpred(float(x @ params.beta2)) * h)
        return float(np.exp(-_checked_exp_linpred(float(x @ params.beta1)) * frac))
    if isinstance(params, LacrParams):
        _require_len(x, params.beta, "x")
        cured = np.exp(-_checked_exp_linpred(float(x @ params.beta)))
        s0 = np.exp(-cumulative_hazard_at(t, partition, params.lam))
        return float(cured + (1.0 - cured) * s0)
    if isinstance(params, LcrmParams):
        _require_len(x, params.beta, "x")
        if z.size != params.phi.shape[1] and params.phi.size:
            raise ConfigurationError("z length does not match phi columns")
        return float(marginal_survival(params.theta, params.phi, params.beta, params.lam, t, x, z, partition))
    raise ModelKindError(f"unsupported model kind {type(params).__name__}")


def _require_len(vec, coef, name):
    if vec.size != coef.size:
        raise ConfigurationError(f"{name} has length {vec.size}, expected {coef.size}")


def marginal_survival(theta, phi, beta, lam, t, x, z, partition: hz.TimePartition):
    """Mixture survival sum_k w_k(z) exp(-theta_k F(t|x)); array-level kernel.

    ``theta`` need not be ordered here; ordering is a parameter-container
    invariant, not a property of the formula.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    w = membership_probs(np.asarray(phi, dtype=float), z)
    h = cumulative_hazard_at(t, partition, lam)
    risk = _checked_exp_linpred(float(np.atleast_1d(x) @ np.atleast_1d(beta))) if np.atleast_1d(beta).size else 1.0
    frac = -np.expm1(-risk * np.asarray(h, dtype=float))
    return np.sum(w * np.exp(-np.multiply.outer(np.asarray(frac), theta)), axis=-1)


def survival_at(params: ModelParams, t, x, z, partition: hz.TimePartition):
    """S(t | x, z) under any model; z is ignored by the non-mixture models.

    S(0) = 1 for every model, and t may be +inf (the cure fraction).
    """
    if np.ndim(t) == 0:
        return _survival_scalar(params, float(t), x, z, partition)
    return np.array([_survival_scalar(params, float(ti), x, z, partition) for ti in np.asarray(t, dtype=float)])


def cure_rate(params: ModelParams, x, z) -> float:
    """Limit of survival as t grows without bound.

    The Cox model has no cured fraction; by convention it reports 0 here so
    comparators can be tabulated uniformly.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(params, CoxParams):
        return 0.0
    if isinstance(params, (CisParams, LacrParams)):
        return float(np.exp(-_checked_exp_linpred(float(x @ params.beta))))
    if isinstance(params, PhphParams):
        return float(np.exp(-_checked_exp_linpred(float(x @ params.beta1))))
    if isinstance(params, LcrmParams):
        w = membership_probs(params.phi, z)
        return float(np.sum(w * np.exp(-params.theta)))
    raise ModelKindError(f"unsupported model kind {type(params).__name__}")


# --------------------------------------------------------------------------
# log-likelihoods
# --------------------------------------------------------------------------


def _decompose(data: Dataset, partition: hz.TimePartition, lam):
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.size != partition.n_intervals:
        raise ConfigurationError(
            f"hazard has {lam.size} rates but partition has {partition.n_intervals} intervals"
        )
    expo = hz.exposure_matrix(data.time, partition)
    idx0 = np.searchsorted(partition.cuts, data.time, side="left")
    H = expo @ lam
    return H, np.log(lam)[idx0]


def lcrm_subject_logliks_core(nu, eta, H, loglam_event, logw, theta) -> np.ndarray:
    """Per-subject observed-data log-likelihood of the mixture model.

    Arguments are the precomputed pieces: eta = x'beta, H = H0*(y), the log
    baseline rate of the event interval, the (n, G) log membership weights
    and the cure parameters. The inner mixture sum runs through logsumexp so
    large theta_k * F terms cannot underflow.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    risk = np.exp(eta)
    A = risk * H
    F = -np.expm1(-A)
    core = np.log(theta)[None, :] + (eta + loglam_event - A)[:, None]
    event_part = np.where(nu[:, None] > 0, core, 0.0)
    terms = logw + event_part - theta[None, :] * F[:, None]
    return row_logsumexp(terms)


def subject_logliks(params: ModelParams, data: Dataset, partition: hz.TimePartition) -> np.ndarray:
    """Per-subject observed-data log-likelihood log[f(y)^nu S(y)^(1-nu)]."""
    nu = data.event.astype(float)
    if isinstance(params, LcrmParams):
        _require_shape(data, params.beta.size, params.phi.shape[1] if params.phi.size else None)
        H, loglam_event = _decompose(data, partition, params.lam)
        eta = data.x @ params.beta
        _checked_exp_linpred(eta)
        logw = membership_log_probs(params.phi, data.z)
        return lcrm_subject_logliks_core(nu, eta, H, loglam_event, logw, params.theta)
    if isinstance(params, CoxParams):
        _require_shape(data, params.beta.size, None)
        H, loglam_event = _decompose(data, partition, params.lam)
        eta = data.x @ params.beta
        risk = _checked_exp_linpred(eta)
        return nu * (eta + loglam_event) - risk * H
    if isinstance(params, CisParams):
        _require_shape(data, params.beta.size, None)
        H, loglam_event = _decompose(data, partition, params.lam)
        eta = data.x @ params.beta
        risk = _checked_exp_linpred(eta)
        return nu * (eta + loglam_event - H) - risk * (-np.expm1(-H))
    if isinstance(params, PhphParams):
        _require_shape(data, params.beta1.size, None)
        H, loglam_event = _decompose(data, partition, params.lam)
        eta1 = data.x @ params.beta1
        eta2 = data.x @ params.beta2
        risk1 = _checked_exp_linpred(eta1)
        risk2 = _checked_exp_linpred(eta2)
        F = -np.expm1(-risk2 * H)
        event_part = np.where(nu > 0, eta1 + eta2 + loglam_event - risk2 * H, 0.0)
        return event_part - risk1 * F
    if isinstance(params, LacrParams):
        _require_shape(data, params.beta.size, None)
        H, loglam_event = _decompose(data, partition, params.lam)
        eta = data.x @ params.beta
        risk = _checked_exp_linpred(eta)
        with np.errstate(divide="ignore"):
            log_cured = -risk
            log_uncured = _log1mexp(risk)
            event_part = log_uncured + loglam_event - H
            censor_part = np.logaddexp(log_cured, log_uncured - H)
        return np.where(nu > 0, event_part, censor_part)
    raise ModelKindError(f"unsupported model kind {type(params).__name__}")


def _require_shape(data: Dataset, p: int, zcols):
    if data.p != p:
        raise ConfigurationError(f"data has {data.p} x-covariates, model expects {p}")
    if zcols is not None and data.z.shape[1] != zcols:
        raise ConfigurationError(f"data has {data.z.shape[1]} z-columns, model expects {zcols}")


def observed_loglik(params: ModelParams, data: Dataset, partition: hz.TimePartition) -> float:
    """Observed-data log-likelihood; 0 for an empty dataset."""
    if data.n == 0:
        return 0.0
    return float(np.sum(subject_logliks(params, data, partition)))


def complete_loglik(params: LcrmParams, latent: LatentState, data: Dataset, partition: hz.TimePartition) -> float:
    """Complete-data log-likelihood given latent cell counts and memberships.

    Returns -inf when some subject has an event but no latent cells (the
    configuration carries zero likelihood).
    """
    if not isinstance(params, LcrmParams):
        raise ModelKindError("complete-data likelihood is defined for the mixture model")
    N = latent.N
    g = latent.g
    if np.any(g < 0) or np.any(g >= params.n_groups):
        raise ConfigurationError("group memberships out of range")
    if np.any(N < 0):
        raise ConfigurationError("cell counts must be nonnegative")
    nu = data.event
    if np.any((nu == 1) & (N == 0)):
        return -np.inf
    H, loglam_event = _decompose(data, partition, params.lam)
    eta = data.x @ params.beta
    risk = _checked_exp_linpred(eta)
    logw = membership_log_probs(params.phi, data.z)
    theta_g = params.theta[g]
    with np.errstate(divide="ignore"):
        event_term = np.where(nu == 1, np.log(np.maximum(N, 1)) + loglam_event + eta, 0.0)
    out = (
        event_term
        - risk * N * H
        + N * np.log(theta_g)
        - gammaln(N + 1.0)
        - theta_g
        + logw[np.arange(data.n), g]
    )
    return float(np.sum(out))


def lcrm_responsibilities(params: LcrmParams, data: Dataset, partition: hz.TimePartition) -> np.ndarray:
    """(n, G) posterior membership probabilities given the observed data."""
    H, loglam_event = _decompose(data, partition, params.lam)
    eta = data.x @ params.beta
    _checked_exp_linpred(eta)
    logw = membership_log_probs(params.phi, data.z)
    theta = params.theta
    A = np.exp(eta) * H
    F = -np.expm1(-A)
    nu = data.event.astype(float)
    core = np.log(theta)[None, :] + (eta + loglam_event - A)[:, None]
    terms = logw + np.where(nu[:, None] > 0, core, 0.0) - theta[None, :] * F[:, None]
    return np.exp(terms - row_logsumexp(terms)[:, None])


def observed_loglik_grad(params: LcrmParams, data: Dataset, partition: hz.TimePartition):
    """Gradient of the mixture observed-data log-likelihood.

    Returns a dict with entries ``beta`` (p,), ``theta`` (G,), ``phi``
    (G-1, q+1) and ``lam`` (J,). Useful for proposal tuning and optimizer
    integrations; the sampler itself does not require it.
    """
    if not isinstance(params, LcrmParams):
        raise ModelKindError("gradient is implemented for the mixture model")
    expo = hz.exposure_matrix(data.time, partition)
    idx0 = np.searchsorted(partition.cuts, data.time, side="left")
    H = expo @ params.lam
    eta = data.x @ params.beta
    risk = _checked_exp_linpred(eta)
    A = risk * H
    expA = np.exp(-A)
    F = -np.expm1(-A)
    nu = data.event.astype(float)
    resp = lcrm_responsibilities(params, data, partition)
    w = np.exp(membership_log_probs(params.phi, data.z))
    theta = params.theta

    theta_bar = resp @ theta
    g_theta = np.sum(resp * (nu[:, None] / theta[None, :] - F[:, None]), axis=0)
    coef = nu * (1.0 - A) - theta_bar * expA * A
    g_beta = data.x.T @ coef
    g_phi = ((resp - w)[:, : theta.size - 1]).T @ data.z if theta.size > 1 else np.zeros_like(params.phi)
    delta = np.zeros((data.n, partition.n_intervals))
    delta[np.arange(data.n), idx0] = 1.0
    lam_coef = nu[:, None] * (delta / params.lam[None, :] - risk[:, None] * expo) - (
        (theta_bar * expA * risk)[:, None] * expo
    )
    g_lam = lam_coef.sum(axis=0)
    return {"beta": g_beta, "theta": g_theta, "phi": g_phi, "lam": g_lam}
