"""Trans-dimensional sampling over the number of risk groups.

The number of groups carries a truncated Poisson prior on {1, ..., G_max}.
Between within-model sweeps the chain proposes birth/death moves chosen from
a row-stochastic transition matrix restricted to neighboring dimensions. A
birth inserts a new cure parameter into a uniformly chosen gap of the
current ordered values (gamma proposal restricted to the gap) together with
a fresh membership-coefficient block (Gaussian proposal); a death removes a
uniformly chosen component and merges its members into the nearest
remaining group. Acceptance uses the latent-marginalized posterior: the
exact observed-data likelihood ratio times normalized prior ratios (the
ordered-gamma cone normalizers are computed by quadrature, since they differ
across dimensions) times the transition-matrix and proposal-density terms;
the two uniform selection probabilities cancel. After any accepted move the
latent memberships and cell counts are refreshed from their exact
conditionals, so the joint chain stays invariant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc, gammaln

from . import hazard as hz
from .archive import SampleArchive
from .exceptions import ConfigurationError, ProprietyError
from .gibbs import LcrmSampler, McmcConfig, sample_truncated_gamma
from .models import Dataset, lcrm_subject_logliks_core, row_logsumexp
from .priors import PriorSpec, check_propriety, ordered_gamma_log_norm


def default_transition_matrix(g_max: int) -> np.ndarray:
    """Tridiagonal move matrix: boundary dimensions always propose inward,
    interior dimensions split evenly between birth and death."""
    if g_max == 1:
        return np.ones((1, 1))
    tr = np.zeros((g_max, g_max))
    tr[0, 1] = 1.0
    tr[g_max - 1, g_max - 2] = 1.0
    for i in range(1, g_max - 1):
        tr[i, i - 1] = 0.5
        tr[i, i + 1] = 0.5
    return tr


@dataclass(frozen=True)
class RjConfig:
    """Settings for the trans-dimensional run.

    ``birth_shape`` is the gamma shape of the cure-parameter proposal and
    ``phi_proposal_scale`` the SD of the Gaussian proposal for the new
    membership block. ``tr`` defaults to the tridiagonal matrix above.
    """

    mu_g: float = 3.0
    g_max: int = 5
    tr: np.ndarray | None = None
    birth_shape: float = 3.0
    phi_proposal_scale: float = 0.5
    sweeps_per_move: int = 1
    initial_g: int | None = None

    def __post_init__(self):
        if self.g_max < 1:
            raise ConfigurationError("g_max must be at least 1")
        if not self.mu_g > 0.0:
            raise ConfigurationError("mu_g must be positive")
        if not (self.birth_shape > 0.0 and self.phi_proposal_scale > 0.0):
            raise ConfigurationError("proposal parameters must be positive")
        if self.sweeps_per_move < 1:
            raise ConfigurationError("sweeps_per_move must be at least 1")
        tr = self.tr if self.tr is not None else default_transition_matrix(self.g_max)
        tr = np.asarray(tr, dtype=float)
        if tr.shape != (self.g_max, self.g_max):
            raise ConfigurationError("transition matrix shape must be (g_max, g_max)")
        if np.any(tr < 0.0) or not np.allclose(tr.sum(axis=1), 1.0, atol=1e-12):
            raise ConfigurationError("transition matrix rows must be nonnegative and sum to 1")
        for i in range(self.g_max):
            for j in range(self.g_max):
                if tr[i, j] > 0.0 and abs(i - j) != 1 and self.g_max > 1:
                    raise ConfigurationError("transition matrix may only move between neighboring dimensions")
        object.__setattr__(self, "tr", tr)
        g0 = self.initial_g if self.initial_g is not None else int(np.clip(round(self.mu_g), 1, self.g_max))
        if not 1 <= g0 <= self.g_max:
            raise ConfigurationError("initial_g out of range")
        object.__setattr__(self, "initial_g", g0)

    def log_prior_g(self) -> np.ndarray:
        """Normalized log prior over dimensions 1..g_max (truncated Poisson)."""
        g = np.arange(1, self.g_max + 1)
        raw = g * np.log(self.mu_g) - gammaln(g + 1.0)
        return raw - row_logsumexp(raw)


def default_prior_ladder(g_max: int, **overrides) -> dict[int, PriorSpec]:
    """One elicited prior per dimension, using the default cure-rate grids."""
    return {g: PriorSpec.default(g, **overrides) for g in range(1, g_max + 1)}


def _normal_logpdf_sum(v: np.ndarray, sd: float) -> float:
    v = np.asarray(v, dtype=float)
    return float(-0.5 * v.size * np.log(2.0 * np.pi * sd * sd) - 0.5 * np.sum(v * v) / (sd * sd))


class _ThetaPriorTable:
    """Normalized ordered-gamma prior evaluations, one per dimension."""

    def __init__(self, priors: dict[int, PriorSpec]):
        self.priors = priors
        self._log_norm: dict[int, float] = {}

    def log_norm(self, g: int) -> float:
        if g not in self._log_norm:
            spec = self.priors[g]
            self._log_norm[g] = ordered_gamma_log_norm(spec.theta_a, spec.theta_b)
        return self._log_norm[g]

    def logpdf(self, g: int, theta: np.ndarray) -> float:
        spec = self.priors[g]
        a, b = spec.theta_a, spec.theta_b
        if np.any(theta <= 0.0) or np.any(np.diff(theta) <= 0.0):
            return -np.inf
        core = float(np.sum(a * np.log(b) - gammaln(a) + (a - 1.0) * np.log(theta) - b * theta))
        return core - self.log_norm(g)


def _gap_bounds(theta: np.ndarray, gap: int) -> tuple[float, float]:
    lo = 0.0 if gap == 0 else float(theta[gap - 1])
    hi = np.inf if gap == theta.size else float(theta[gap])
    return lo, hi


def _gap_proposal_rate(shape: float, lo: float, hi: float) -> float:
    center = 0.5 * (lo + hi) if np.isfinite(hi) else lo + 1.0
    return shape / center


# gaps whose proposal mass falls below this are unreachable for the move
# kernel in either direction, keeping birth and death exactly symmetric
_MIN_GAP_MASS = 1e-12


def _truncated_gamma_mass(shape: float, rate: float, lo: float, hi: float) -> float:
    mass_hi = float(gammainc(shape, rate * hi)) if np.isfinite(hi) else 1.0
    return mass_hi - float(gammainc(shape, rate * lo))


def _truncated_gamma_logpdf(x: float, shape: float, rate: float, lo: float, hi: float) -> float:
    mass = _truncated_gamma_mass(shape, rate, lo, hi)
    if mass < _MIN_GAP_MASS:
        return np.nan
    core = shape * np.log(rate) - float(gammaln(shape)) + (shape - 1.0) * np.log(x) - rate * x
    return core - np.log(mass)


@dataclass
class _MoveProposal:
    new_g: int
    theta: np.ndarray
    phi: np.ndarray
    log_alpha: float
    reindex: str           # "birth" or "death"
    position: int          # insertion gap / removed component (0-based)


def propose_dimension_move(sampler: LcrmSampler, cfg: RjConfig,
                           priors: dict[int, PriorSpec],
                           table: _ThetaPriorTable) -> _MoveProposal | None:
    """Draw a birth or death proposal and its log acceptance ratio.

    Returns None when the configuration forbids any move (g_max = 1). The
    uniform gap-choice and component-choice probabilities cancel exactly and
    are omitted from the ratio.
    """
    g_cur = sampler.G
    if cfg.g_max == 1:
        return None
    row = cfg.tr[g_cur - 1]
    u = sampler.rng.random()
    g_new = int(np.searchsorted(np.cumsum(row), u, side="right")) + 1
    g_new = min(g_new, cfg.g_max)
    if g_new == g_cur:
        return None
    log_prior_g = cfg.log_prior_g()
    theta = sampler.theta
    phi = sampler.phi
    qdim = sampler.data.q + 1
    log_tr_fwd = np.log(cfg.tr[g_cur - 1, g_new - 1])
    log_tr_rev = np.log(cfg.tr[g_new - 1, g_cur - 1])

    if g_new == g_cur + 1:
        gap = int(sampler.rng.integers(0, g_cur + 1))
        lo, hi = _gap_bounds(theta, gap)
        rate = _gap_proposal_rate(cfg.birth_shape, lo, hi)
        if _truncated_gamma_mass(cfg.birth_shape, rate, lo, hi) < _MIN_GAP_MASS:
            return None
        theta_star = sample_truncated_gamma(sampler.rng, cfg.birth_shape, rate, lo, hi)
        phi_star = cfg.phi_proposal_scale * sampler.rng.standard_normal(qdim)
        log_q_theta = _truncated_gamma_logpdf(theta_star, cfg.birth_shape, rate, lo, hi)
        if not np.isfinite(log_q_theta):
            return None
        log_q_phi = _normal_logpdf_sum(phi_star, cfg.phi_proposal_scale)
        new_theta = np.insert(theta, gap, theta_star)
        if gap == g_cur:
            # the newborn becomes the pinned last group; the previously pinned
            # group picks up the fresh coefficient block
            new_phi = np.vstack([phi, phi_star[None, :]]) if phi.size else phi_star[None, :]
        else:
            new_phi = np.insert(phi, gap, phi_star, axis=0) if phi.size else phi_star[None, :]
        move = _MoveProposal(g_new, new_theta, new_phi, 0.0, "birth", gap)
    else:
        comp = int(sampler.rng.integers(0, g_cur))
        new_theta = np.delete(theta, comp)
        if comp == g_cur - 1:
            # removing the pinned last group: the surviving last group gives
            # up its coefficient block and becomes pinned
            dropped_phi = phi[g_cur - 2]
            new_phi = phi[: g_cur - 2]
        else:
            dropped_phi = phi[comp]
            new_phi = np.delete(phi, comp, axis=0)
        lo, hi = _gap_bounds(new_theta, comp)
        rate = _gap_proposal_rate(cfg.birth_shape, lo, hi)
        log_q_theta = _truncated_gamma_logpdf(float(theta[comp]), cfg.birth_shape, rate, lo, hi)
        if not np.isfinite(log_q_theta):
            return None
        log_q_phi = _normal_logpdf_sum(dropped_phi, cfg.phi_proposal_scale)
        move = _MoveProposal(g_new, new_theta, new_phi, 0.0, "death", comp)

    loglik_new = _marginal_loglik(sampler, move.theta, move.phi)
    loglik_cur = float(sampler._subject_logliks().sum())
    spec_new = priors[g_new]
    spec_cur = priors[g_cur]
    log_post = (
        loglik_new - loglik_cur
        + table.logpdf(g_new, move.theta) - table.logpdf(g_cur, theta)
        + _phi_prior(move.phi, spec_new.c02) - _phi_prior(phi, spec_cur.c02)
        + log_prior_g[g_new - 1] - log_prior_g[g_cur - 1]
    )
    if g_new == g_cur + 1:
        log_alpha = log_post + log_tr_rev - log_tr_fwd - log_q_theta - log_q_phi
    else:
        log_alpha = log_post + log_tr_rev - log_tr_fwd + log_q_theta + log_q_phi
    move.log_alpha = float(log_alpha)
    return move


def _phi_prior(phi: np.ndarray, c02: float) -> float:
    if phi.size == 0:
        return 0.0
    return float(-0.5 * phi.size * np.log(2.0 * np.pi * c02) - 0.5 * np.sum(phi * phi) / c02)


def _marginal_loglik(sampler: LcrmSampler, theta: np.ndarray, phi: np.ndarray) -> float:
    """Observed-data log-likelihood at (theta, phi) with the sampler's
    current beta and lambda, reusing its per-subject caches."""
    n = sampler.data.n
    if n == 0:
        return 0.0
    free = sampler.data.z @ phi.T if phi.size else np.zeros((n, 0))
    zphi = np.concatenate((free, np.zeros((n, 1))), axis=1)
    logw = zphi - row_logsumexp(zphi)[:, None]
    sl = lcrm_subject_logliks_core(sampler.nu_f, sampler.eta, sampler.H,
                                   sampler.loglam[sampler.idx0], logw, theta)
    return float(sl.sum())


def _apply_move(sampler: LcrmSampler, move: _MoveProposal, spec_new: PriorSpec) -> None:
    """Install an accepted move: reindex memberships, swap the prior, then
    refresh the latent state from its exact conditionals."""
    g = sampler.g
    if move.reindex == "birth":
        g = np.where(g >= move.position, g + 1, g)
    else:
        comp = move.position
        theta_old = sampler.theta
        if comp == 0:
            target = 0
        elif comp == theta_old.size - 1:
            target = comp - 1
        else:
            left = theta_old[comp] - theta_old[comp - 1]
            right = theta_old[comp + 1] - theta_old[comp]
            target = comp - 1 if left <= right else comp + 1
        g = np.where(g == comp, target, g)
        g = np.where(g > comp, g - 1, g)
    sampler.spec = spec_new
    sampler.G = move.new_g
    sampler.set_state(theta=move.theta, phi=move.phi, g=g)
    _refresh_latent(sampler)


def _refresh_latent(sampler: LcrmSampler) -> None:
    """Exact joint draw of (g, N) given parameters and data: memberships from
    the marginal per-subject responsibilities, then counts from the shifted
    Poisson conditional."""
    n = sampler.data.n
    if n == 0:
        sampler.g = np.zeros(0, dtype=np.int64)
        sampler.N = np.zeros(0, dtype=np.int64)
        return
    logw = sampler.zphi - row_logsumexp(sampler.zphi)[:, None]
    theta = sampler.theta
    A = sampler.risk * sampler.H
    F = -np.expm1(-A)
    nu = sampler.nu_f
    core = np.log(theta)[None, :] + (sampler.eta + sampler.loglam[sampler.idx0] - A)[:, None]
    terms = logw + np.where(nu[:, None] > 0, core, 0.0) - theta[None, :] * F[:, None]
    terms -= terms.max(axis=1, keepdims=True)
    probs = np.exp(terms)
    cum = np.cumsum(probs, axis=1)
    r = sampler.rng.random(n) * cum[:, -1]
    sampler.g = np.minimum((cum < r[:, None]).sum(axis=1), sampler.G - 1).astype(np.int64)
    with np.errstate(over="ignore", invalid="ignore"):
        decay = np.exp(-A)
    q = theta[sampler.g] * np.where(np.isfinite(decay), decay, 0.0)
    sampler.N = sampler.nu + sampler.rng.poisson(q)


def run_rj_chain(data: Dataset, partition: hz.TimePartition,
                 priors: dict[int, PriorSpec] | None = None,
                 rj: RjConfig | None = None,
                 mcmc: McmcConfig | None = None,
                 check: bool = True, force: bool = False,
                 dimension_moves: bool = True) -> SampleArchive:
    """Sample jointly over parameters and the number of groups.

    Returns an archive whose parameter arrays are padded to g_max (inactive
    components are NaN) with a per-draw G column; ``meta["model_probs"]``
    holds the posterior dimension probabilities (post-burn-in visit
    frequencies over every sweep). With ``dimension_moves=False`` the run is
    exactly the fixed-dimension chain at ``rj.initial_g``.
    """
    rj = rj or RjConfig()
    mcmc = mcmc or McmcConfig()
    priors = priors or default_prior_ladder(rj.g_max)
    for g in range(1, rj.g_max + 1):
        if g not in priors:
            raise ConfigurationError(f"missing prior specification for G={g}")
        if priors[g].n_groups != g:
            raise ConfigurationError(f"prior for G={g} has {priors[g].n_groups} components")
    if check:
        failures = {}
        for g in range(1, rj.g_max + 1):
            report = check_propriety(data, partition, priors[g])
            if not report.passes:
                failures[g] = report.failed_conditions
        if failures:
            msg = f"propriety conditions failed per dimension: {failures}"
            if not force:
                raise ProprietyError(msg, report=failures)
            warnings.warn(msg + " (forced run)", stacklevel=2)

    if not dimension_moves or rj.g_max == 1:
        sampler = LcrmSampler(data, partition, priors[rj.initial_g], mcmc, check=False)
        archive = sampler.run()
        return _pad_archive(archive, rj, {rj.initial_g: 1.0})

    table = _ThetaPriorTable(priors)
    sampler = LcrmSampler(data, partition, priors[rj.initial_g], mcmc, check=False)
    m_total = mcmc.n_stored
    qdim = data.q + 1
    store = {
        "G": np.empty(m_total, dtype=np.int64),
        "beta": np.empty((m_total, data.p)),
        "theta": np.full((m_total, rj.g_max), np.nan),
        "phi": np.full((m_total, max(rj.g_max - 1, 0), qdim), np.nan),
        "lam": np.empty((m_total, partition.n_intervals)),
    }
    loglik = np.empty(m_total)
    subject_loglik = np.empty((m_total, data.n))
    visits = np.zeros(rj.g_max)
    attempted = accepted = 0
    for it in range(1, mcmc.total_iterations + 1):
        sampler._adapting = mcmc.adapt and it <= mcmc.burn_in
        sampler._counting = it > mcmc.burn_in
        sampler.sweep()
        if it % rj.sweeps_per_move == 0:
            move = propose_dimension_move(sampler, rj, priors, table)
            if move is not None:
                attempted += 1
                if np.log(sampler.rng.random()) < move.log_alpha:
                    accepted += 1
                    _apply_move(sampler, move, priors[move.new_g])
        if it > mcmc.burn_in:
            visits[sampler.G - 1] += 1
        offset = it - mcmc.burn_in
        if offset > 0 and offset % mcmc.thin == 0:
            m = offset // mcmc.thin - 1
            if m < m_total:
                sl = sampler._subject_logliks()
                subject_loglik[m] = sl
                loglik[m] = sl.sum()
                store["G"][m] = sampler.G
                store["beta"][m] = sampler.beta
                store["theta"][m, : sampler.G] = sampler.theta
                if sampler.G > 1:
                    store["phi"][m, : sampler.G - 1] = sampler.phi
                store["lam"][m] = sampler.lam
    model_probs = visits / visits.sum() if visits.sum() else visits
    meta = {
        "seed": mcmc.seed,
        "config": {
            "total_iterations": mcmc.total_iterations,
            "burn_in": mcmc.burn_in,
            "thin": mcmc.thin,
            "beta_scale": mcmc.beta_scale,
            "phi_scale": mcmc.phi_scale,
            "adapt": mcmc.adapt,
            "target_accept": mcmc.target_accept,
            "mu_g": rj.mu_g,
            "g_max": rj.g_max,
            "birth_shape": rj.birth_shape,
            "phi_proposal_scale": rj.phi_proposal_scale,
            "sweeps_per_move": rj.sweeps_per_move,
            "initial_g": rj.initial_g,
            "tr": rj.tr.tolist(),
        },
        "acceptance": {name: (c[0] / c[1] if c[1] else None)
                       for name, c in sorted(sampler._accept.items())},
        "dimension_moves": {"attempted": attempted, "accepted": accepted},
        "model_probs": {str(g + 1): float(p) for g, p in enumerate(model_probs)},
        "n": data.n, "p": data.p, "q": data.q, "J": partition.n_intervals,
        "G": None,
    }
    return SampleArchive(kind="lcrm", cuts=partition.cuts.copy(), params=store,
                         loglik=loglik, subject_loglik=subject_loglik, meta=meta)


def _pad_archive(archive: SampleArchive, rj: RjConfig, model_probs: dict) -> SampleArchive:
    m = archive.n_draws
    g0 = rj.initial_g
    qdim = archive.params["phi"].shape[2] if archive.params["phi"].size else archive.meta["q"] + 1
    theta = np.full((m, rj.g_max), np.nan)
    theta[:, :g0] = archive.params["theta"]
    phi = np.full((m, max(rj.g_max - 1, 0), qdim), np.nan)
    if g0 > 1:
        phi[:, : g0 - 1] = archive.params["phi"]
    params = {
        "G": np.full(m, g0, dtype=np.int64),
        "beta": archive.params["beta"],
        "theta": theta,
        "phi": phi,
        "lam": archive.params["lam"],
    }
    meta = dict(archive.meta)
    meta["model_probs"] = {str(g): (1.0 if g == g0 else 0.0) for g in range(1, rj.g_max + 1)}
    meta["G"] = None
    meta["dimension_moves"] = {"attempted": 0, "accepted": 0}
    return SampleArchive(kind="lcrm", cuts=archive.cuts, params=params,
                         loglik=archive.loglik, subject_loglik=archive.subject_loglik, meta=meta)


def model_probabilities(archive: SampleArchive) -> np.ndarray:
    """Posterior dimension probabilities from an RJ archive's metadata."""
    probs = archive.meta.get("model_probs")
    if probs is None:
        raise ConfigurationError("archive does not carry model probabilities")
    return np.array([probs[str(g)] for g in range(1, len(probs) + 1)])
