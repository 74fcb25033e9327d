"""Posterior predictive risk-group probabilities, classification and
survival curves for new patients, computed from a mixture-model archive.

The group probability given survival to t is, per draw, a softmax of
z'phi_k - theta_k * F(t | x) where F is the activation-time CDF; the Monte
Carlo average over stored draws gives the posterior estimate. t = +inf is an
exact sentinel (F = 1), not a large-t approximation. The lowest group's
probability rises with t and the highest group's falls, so the t = +inf
values bound every finite-t value; the test suite asserts both per draw and
after averaging.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import hazard as hz
from .archive import SampleArchive
from .exceptions import ConfigurationError, ModelKindError
from .models import cure_rate as _single_cure_rate


def _require_lcrm(archive: SampleArchive) -> None:
    if archive.kind != "lcrm" or archive.trans_dimensional:
        raise ModelKindError("predictive classification needs a fixed-dimension mixture archive")


def _draw_matrices(archive: SampleArchive, x_new, z_new):
    x = np.atleast_1d(np.asarray(x_new, dtype=float))
    z = np.atleast_1d(np.asarray(z_new, dtype=float))
    beta = archive.params["beta"]
    theta = archive.params["theta"]
    phi = archive.params["phi"]
    lam = archive.params["lam"]
    if beta.shape[1] != x.size:
        raise ConfigurationError(f"x_new has length {x.size}, archive expects {beta.shape[1]}")
    if phi.shape[0] and phi.shape[2] != z.size:
        raise ConfigurationError(f"z_new has length {z.size}, archive expects {phi.shape[2]}")
    zphi = np.concatenate((phi @ z, np.zeros((theta.shape[0], 1))), axis=1)  # (M, G)
    eta = beta @ x  # (M,)
    return zphi, eta, theta, lam


def _per_draw_group_logits(archive: SampleArchive, t, x_new, z_new,
                           partition: hz.TimePartition) -> np.ndarray:
    """(M, G) per-draw logits z'phi_k - theta_k F(t) at one time point."""
    zphi, eta, theta, lam = _draw_matrices(archive, x_new, z_new)
    t = float(t)
    if t < 0.0:
        raise ConfigurationError("time must be nonnegative")
    if t == 0.0:
        frac = np.zeros(theta.shape[0])
    elif np.isinf(t):
        frac = np.ones(theta.shape[0])
    else:
        h = lam @ hz.exposure_matrix([t], partition)[0]
        frac = -np.expm1(-np.exp(eta) * h)
    return zphi - theta * frac[:, None]


def per_draw_probs_at(archive: SampleArchive, t, x_new, z_new,
                      partition: hz.TimePartition) -> np.ndarray:
    """(M, G) per-draw conditional group probabilities at one time point."""
    _require_lcrm(archive)
    logits = _per_draw_group_logits(archive, t, x_new, z_new, partition)
    return np.exp(logits - logsumexp(logits, axis=1, keepdims=True))


def predictive_probs_at(archive: SampleArchive, t, x_new, z_new,
                        partition: hz.TimePartition | None = None) -> np.ndarray:
    """Posterior predictive group probabilities given survival to t.

    ``t`` may be 0 (baseline covariate-only probabilities) or +inf (the
    limiting probabilities). Returns a length-G vector summing to 1.
    """
    partition = partition if partition is not None else hz.TimePartition(archive.cuts)
    return per_draw_probs_at(archive, t, x_new, z_new, partition).mean(axis=0)


def predictive_probs_t0(archive: SampleArchive, z_new) -> np.ndarray:
    """Baseline group probabilities; identical to predictive_probs_at(t=0)."""
    _require_lcrm(archive)
    zeros_x = np.zeros(archive.params["beta"].shape[1])
    return predictive_probs_at(archive, 0.0, zeros_x, z_new)


def classify(archive: SampleArchive, t, x_new, z_new,
             partition: hz.TimePartition | None = None) -> int:
    """1-based risk-group assignment: the argmax probability at time t,
    with the smallest index winning exact ties."""
    probs = predictive_probs_at(archive, t, x_new, z_new, partition)
    return int(np.argmax(probs)) + 1


def overall_cure_rate_pred(archive: SampleArchive, z_new) -> float:
    """Posterior mean of the overall cure rate sum_k w_k(z) exp(-theta_k).

    The average runs over per-draw products; averaging the weight and cure
    factors separately would be wrong.
    """
    _require_lcrm(archive)
    zphi, _, theta, _ = _draw_matrices(archive, np.zeros(archive.params["beta"].shape[1]), z_new)
    w = np.exp(zphi - logsumexp(zphi, axis=1, keepdims=True))
    return float(np.sum(w * np.exp(-theta), axis=1).mean())


def survival_curves(archive: SampleArchive, x_new, z_new, grid,
                    partition: hz.TimePartition | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Posterior-mean survival curves.

    Returns (group_curves, marginal_curve): group_curves has shape (G, len(grid))
    with row k the posterior mean of the group-k conditional survival, and the
    marginal curve is the posterior mean of the mixture survival.
    """
    _require_lcrm(archive)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ConfigurationError("empty time grid")
    if np.any(grid < 0.0):
        raise ConfigurationError("grid times must be nonnegative")
    partition = partition if partition is not None else hz.TimePartition(archive.cuts)
    zphi, eta, theta, lam = _draw_matrices(archive, x_new, z_new)
    w = np.exp(zphi - logsumexp(zphi, axis=1, keepdims=True))  # (M, G)
    risk = np.exp(eta)
    h = lam @ hz.exposure_matrix(grid, partition).T  # (M, T)
    frac = -np.expm1(-risk[:, None] * h)  # (M, T)
    cond = np.exp(-frac[:, None, :] * theta[:, :, None])  # (M, G, T)
    group_curves = cond.mean(axis=0)
    marginal = np.sum(w[:, :, None] * cond, axis=1).mean(axis=0)
    return group_curves, marginal


@dataclass(frozen=True)
class PredictiveReport:
    """Risk profile of one covariate pattern: group probabilities on a time
    grid (plus the exact t = +inf entry), the assigned group at the
    requested classification time, the overall cure rate and survival
    curves."""

    times: np.ndarray
    probs: np.ndarray           # (len(times), G); last row is t = +inf
    assigned_group: int
    classification_time: float
    overall_cure_rate: float
    curve_grid: np.ndarray
    group_curves: np.ndarray
    marginal_curve: np.ndarray

    def to_dict(self):
        return {
            "times": ["inf" if np.isinf(t) else float(t) for t in self.times],
            "probs": [[float(v) for v in row] for row in self.probs],
            "assigned_group": self.assigned_group,
            "classification_time": ("inf" if np.isinf(self.classification_time)
                                    else float(self.classification_time)),
            "overall_cure_rate": self.overall_cure_rate,
        }


def predictive_report(archive: SampleArchive, x_new, z_new, times=(0.0, 5.0, np.inf),
                      classification_time: float = 0.0, curve_grid=None) -> PredictiveReport:
    """Assemble the full predictive profile for one covariate pattern."""
    _require_lcrm(archive)
    partition = hz.TimePartition(archive.cuts)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    probs = np.stack([predictive_probs_at(archive, t, x_new, z_new, partition) for t in times])
    if curve_grid is None:
        finite = times[np.isfinite(times)]
        upper = float(finite.max()) if finite.size and finite.max() > 0 else 10.0
        curve_grid = np.linspace(0.0, upper, 51)
    curve_grid = np.atleast_1d(np.asarray(curve_grid, dtype=float))
    group_curves, marginal = survival_curves(archive, x_new, z_new, curve_grid, partition)
    return PredictiveReport(
        times=times,
        probs=probs,
        assigned_group=classify(archive, classification_time, x_new, z_new, partition),
        classification_time=float(classification_time),
        overall_cure_rate=overall_cure_rate_pred(archive, z_new),
        curve_grid=curve_grid,
        group_curves=group_curves,
        marginal_curve=marginal,
    )
