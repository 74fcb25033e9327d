"""Piecewise-exponential baseline hazard.

The time axis is split into J intervals (s_0, s_1], ..., (s_{J-1}, s_J] with
s_0 = 0 and s_J = +inf; the hazard is a positive constant on each interval.
This module provides the partition type, per-subject interval decomposition,
the cumulative baseline hazard, the baseline CDF and its exact inverse.
Everything here is a pure function of immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError


@dataclass(frozen=True)
class TimePartition:
    """Interior cut points s_1 < ... < s_{J-1} of a J-interval partition.

    An empty ``cuts`` array means J = 1 (a single exponential piece). A time
    y equal to a cut point s_j belongs to the left interval j, i.e. intervals
    are the half-open sets (s_{j-1}, s_j].
    """

    cuts: np.ndarray

    def __post_init__(self):
        cuts = np.atleast_1d(np.asarray(self.cuts, dtype=float))
        if cuts.size:
            if not np.all(np.isfinite(cuts)) or np.any(cuts <= 0.0):
                raise ConfigurationError("partition cuts must be finite and positive")
            if np.any(np.diff(cuts) <= 0.0):
                raise ConfigurationError("partition cuts must be strictly increasing")
        object.__setattr__(self, "cuts", cuts)

    @property
    def n_intervals(self) -> int:
        return self.cuts.size + 1

    @property
    def lower_edges(self) -> np.ndarray:
        """s_0, ..., s_{J-1} (finite lower edge of every interval)."""
        return np.concatenate(([0.0], self.cuts))


@dataclass(frozen=True)
class BaselineHazard:
    """Constant hazard rates, one per interval of a partition."""

    rates: np.ndarray

    def __post_init__(self):
        rates = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if rates.size < 1 or not np.all(np.isfinite(rates)) or np.any(rates <= 0.0):
            raise ConfigurationError("hazard rates must be finite and positive")
        object.__setattr__(self, "rates", rates)


@dataclass(frozen=True)
class IntervalDecomposition:
    """Interval membership and exposure of one follow-up time.

    ``index`` is the 1-based interval holding the time; ``exposures[j]`` is
    the time spent inside interval j+1, so exposures sum to the time itself
    and vanish beyond ``index``.
    """

    index: int
    exposures: np.ndarray


def _as_rates(hazard, partition: TimePartition) -> np.ndarray:
    rates = hazard.rates if isinstance(hazard, BaselineHazard) else np.atleast_1d(np.asarray(hazard, dtype=float))
    if rates.size != partition.n_intervals:
        raise ConfigurationError(
            f"hazard has {rates.size} rates but partition has {partition.n_intervals} intervals"
        )
    return rates


def interval_indices(y, partition: TimePartition) -> np.ndarray:
    """1-based interval index for each time; boundary times go left."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise ConfigurationError("times must be positive")
    return np.searchsorted(partition.cuts, y, side="left") + 1


def exposure_matrix(y, partition: TimePartition) -> np.ndarray:
    """(n, J) matrix of per-interval exposures e_ij = max(0, min(y_i, s_j) - s_{j-1}).

    Accepts y = 0 (a zero row) and y = +inf (infinite last exposure).
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y < 0.0):
        raise ConfigurationError("times must be nonnegative")
    lo = partition.lower_edges
    hi = np.concatenate((partition.cuts, [np.inf]))
    return np.clip(np.minimum(y[:, None], hi[None, :]) - lo[None, :], 0.0, None)


def interval_decompose(y: float, partition: TimePartition) -> IntervalDecomposition:
    """Locate a single time on the partition and split it into exposures."""
    y = float(y)
    if not y > 0.0:
        raise ConfigurationError(f"time must be positive, got {y}")
    index = int(np.searchsorted(partition.cuts, y, side="left")) + 1
    exposures = exposure_matrix([y], partition)[0]
    return IntervalDecomposition(index=index, exposures=exposures)


def cumulative_hazard(y, partition: TimePartition, hazard):
    """Cumulative baseline hazard at y: sum of rate * exposure over intervals.

    Accepts a scalar or an array of times; y = +inf yields +inf.
    """
    rates = _as_rates(hazard, partition)
    scalar = np.ndim(y) == 0
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.zeros_like(y_arr)
    pos = y_arr > 0.0
    if np.any(y_arr < 0.0):
        raise ConfigurationError("times must be nonnegative")
    if np.any(pos):
        with np.errstate(invalid="ignore"):
            expo = exposure_matrix(y_arr[pos], partition)
            contrib = expo * rates[None, :]
        # inf * rate is inf, 0-width tail after an inf exposure gives nan; only
        # the final open-ended interval can be infinite, so nan cannot occur.
        out[pos] = contrib.sum(axis=1)
    return float(out[0]) if scalar else out


def log_baseline_survival(y, partition: TimePartition, hazard):
    """log S0(y) = -H0*(y); exposed separately so callers can stay in log space."""
    return -cumulative_hazard(y, partition, hazard)


def baseline_cdf(y, partition: TimePartition, hazard):
    """F0(y) = 1 - exp(-H0*(y)), the activation-time CDF of the baseline law."""
    h = cumulative_hazard(y, partition, hazard)
    return -np.expm1(-h) if np.ndim(h) else float(-np.expm1(-h))


def invert_cumulative_hazard(h, partition: TimePartition, hazard):
    """Exact inverse of the cumulative baseline hazard.

    Solves H0*(t) = h segment by segment; the piecewise-linear structure makes
    the inversion closed form. Vectorized over h; h = 0 maps to t = 0.
    """
    rates = _as_rates(hazard, partition)
    scalar = np.ndim(h) == 0
    h_arr = np.atleast_1d(np.asarray(h, dtype=float))
    if np.any(h_arr < 0.0):
        raise ConfigurationError("cumulative hazard values must be nonnegative")
    lo = partition.lower_edges
    widths = np.diff(np.concatenate((lo, [np.inf])))
    cum = np.concatenate(([0.0], np.cumsum(rates[:-1] * widths[:-1])))
    j = np.searchsorted(cum, h_arr, side="right") - 1
    j = np.clip(j, 0, rates.size - 1)
    t = lo[j] + (h_arr - cum[j]) / rates[j]
    return float(t[0]) if scalar else t
