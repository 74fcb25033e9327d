"""Posterior summaries and model-comparison criteria from sample archives.

HPD intervals come from the shortest window of consecutive order statistics,
ESS from initial-positive-sequence autocorrelation truncation, CPO from the
harmonic-mean identity evaluated in log space, and DIC from the deviance at
the componentwise posterior mean. All reductions are pure functions of the
archive and are invariant to row order except where a canonical sequential
order is fixed for bit-reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import hazard as hz
from .archive import SampleArchive
from .exceptions import ConfigurationError, ModelKindError, NumericError
from .models import Dataset, observed_loglik


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    sd: float
    hpd_lower: float | None
    hpd_upper: float | None
    ess: float

    def to_dict(self):
        return {
            "name": self.name,
            "mean": self.mean,
            "sd": self.sd,
            "hpd": None if self.hpd_lower is None else [self.hpd_lower, self.hpd_upper],
            "ess": self.ess,
        }


@dataclass(frozen=True)
class ComparisonReport:
    lpml: float
    dic: float
    p_d: float
    dev_at_mean: float
    cpo: np.ndarray

    def to_dict(self):
        return {"lpml": self.lpml, "dic": self.dic, "p_D": self.p_d,
                "dev_at_mean": self.dev_at_mean}


def hpd_interval(samples: np.ndarray, alpha: float = 0.05) -> tuple[float, float]:
    """Shortest interval of consecutive order statistics holding at least a
    1 - alpha fraction of the draws; earliest window wins ties."""
    samples = np.sort(np.asarray(samples, dtype=float))
    m = samples.size
    if m < 2:
        raise ConfigurationError("need at least two draws for an interval")
    n_in = int(np.ceil((1.0 - alpha) * m))
    n_in = max(2, min(n_in, m))
    widths = samples[n_in - 1:] - samples[: m - n_in + 1]
    start = int(np.argmin(widths))
    return float(samples[start]), float(samples[start + n_in - 1])


def effective_sample_size(samples: np.ndarray) -> float:
    """ESS by Geyer's initial positive sequence on the autocorrelations."""
    x = np.asarray(samples, dtype=float)
    m = x.size
    if m < 3:
        return float(m)
    x = x - x.mean()
    var = float(x @ x) / m
    if var == 0.0:
        return float(m)
    nfft = int(2 ** np.ceil(np.log2(2 * m)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:m].real / m
    rho = acov / acov[0]
    tau = 1.0
    for lag in range(1, m - 1, 2):
        pair = rho[lag] + rho[lag + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
    return float(min(m, m / tau))


def summarize(archive: SampleArchive, alpha: float = 0.05) -> list[ParameterSummary]:
    """Per-parameter posterior mean, SD, HPD bounds and ESS.

    With fewer than 10 stored draws the HPD bounds are withheld (returned as
    None) and only the moments are reported.
    """
    if archive.n_draws == 0:
        raise ConfigurationError("archive holds no draws")
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError("alpha must lie in (0, 1)")
    out = []
    hpd_ok = archive.n_draws >= 10
    for name, col in archive.flat_columns().items():
        if name in ("loglik", "deviance", "G"):
            continue
        finite = col[np.isfinite(col)]
        if finite.size == 0:
            continue
        lo, hi = hpd_interval(finite, alpha) if (hpd_ok and finite.size >= 10) else (None, None)
        out.append(ParameterSummary(
            name=name,
            mean=float(finite.mean()),
            sd=float(finite.std(ddof=1)) if finite.size > 1 else 0.0,
            hpd_lower=lo,
            hpd_upper=hi,
            ess=effective_sample_size(finite),
        ))
    if archive.kind == "lcrm" and "theta" in archive.params and not archive.trans_dimensional:
        theta = archive.params["theta"]
        for k in range(theta.shape[1]):
            cure = np.exp(-theta[:, k])
            lo, hi = hpd_interval(cure, alpha) if hpd_ok else (None, None)
            out.append(ParameterSummary(
                name=f"cure.{k + 1}",
                mean=float(cure.mean()),
                sd=float(cure.std(ddof=1)) if cure.size > 1 else 0.0,
                hpd_lower=lo,
                hpd_upper=hi,
                ess=effective_sample_size(cure),
            ))
    return out


def compute_cpo_lpml(archive: SampleArchive) -> tuple[np.ndarray, float]:
    """Per-subject CPO by the harmonic-mean identity, and their log sum.

    CPO_i = [mean_m 1/f(y_i | draw m)]^(-1), evaluated in log space. Raises
    when some stored likelihood is exactly zero, naming the draw and subject.
    """
    sl = archive.subject_loglik
    if sl.size == 0:
        raise ConfigurationError("archive carries no per-subject likelihood values")
    bad = ~np.isfinite(sl)
    if np.any(bad):
        m, i = np.argwhere(bad)[0]
        raise NumericError(
            f"stored likelihood is zero or non-finite at draw {m}, subject {i}",
            index=int(i), draw=int(m))
    n_draws = sl.shape[0]
    log_cpo = np.log(n_draws) - logsumexp(-sl, axis=0)
    cpo = np.exp(log_cpo)
    return cpo, float(log_cpo.sum())


def compute_dic(archive: SampleArchive, data: Dataset) -> tuple[float, float, float]:
    """(DIC, p_D, deviance at the posterior mean).

    p_D is the mean stored deviance minus the deviance at the componentwise
    posterior-mean parameters; DIC adds twice p_D back.
    """
    if archive.n_draws == 0:
        raise ConfigurationError("archive holds no draws")
    if archive.trans_dimensional:
        raise ModelKindError("DIC is defined per fixed dimension; summarize conditional archives")
    partition = hz.TimePartition(archive.cuts)
    dev_at_mean = -2.0 * observed_loglik(archive.mean_params(), data, partition)
    p_d = float(archive.deviance.mean()) - dev_at_mean
    return dev_at_mean + 2.0 * p_d, p_d, dev_at_mean


def comparison_report(archive: SampleArchive, data: Dataset) -> ComparisonReport:
    cpo, lpml = compute_cpo_lpml(archive)
    dic, p_d, dev_at_mean = compute_dic(archive, data)
    return ComparisonReport(lpml=lpml, dic=dic, p_d=p_d, dev_at_mean=dev_at_mean, cpo=cpo)


def summary_report(archive: SampleArchive, alpha: float = 0.05) -> dict:
    """JSON-ready report: model kind, dimensions and the parameter table."""
    rows = summarize(archive, alpha)
    return {
        "model": archive.kind,
        "G": archive.meta.get("G"),
        "J": archive.meta.get("J"),
        "n_draws": archive.n_draws,
        "parameters": [r.to_dict() for r in rows],
    }
