"""Dataset ingestion, covariate standardization, partition construction,
Kaplan-Meier estimation and the synthetic-data generator.

The generator draws data through the latent mechanism itself (memberships,
Poisson cell counts, first-activation times through the exact inverse of the
piecewise-exponential CDF) so simulator output is a direct oracle for the
model's survival function.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import hazard as hz
from .exceptions import ConfigurationError, DataParseError
from .models import Dataset, LcrmParams, membership_log_probs


@dataclass(frozen=True)
class DataSchema:
    """Column roles for a dataset CSV.

    ``x_cols`` default to every non time/event column; ``z_cols`` default to
    the same columns as x (the shared-covariate setup). The intercept column
    of z is implicit and never listed.
    """

    time: str = "time"
    event: str = "event"
    x_cols: tuple | None = None
    z_cols: tuple | None = None


def load_dataset(path, schema: DataSchema | None = None) -> Dataset:
    """Read a headered CSV into a validated Dataset."""
    schema = schema or DataSchema()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataParseError("empty file") from None
        rows = list(reader)
    header = [h.strip() for h in header]
    for required in (schema.time, schema.event):
        if required not in header:
            raise DataParseError(f"missing column {required!r}", column=required)
    covariates = [h for h in header if h not in (schema.time, schema.event)]
    x_cols = list(schema.x_cols) if schema.x_cols is not None else covariates
    z_cols = list(schema.z_cols) if schema.z_cols is not None else x_cols
    for c in x_cols + z_cols:
        if c not in header:
            raise DataParseError(f"missing column {c!r}", column=c)
    col = {name: i for i, name in enumerate(header)}

    def cell(row_idx, row, name):
        raw = row[col[name]].strip()
        try:
            return float(raw)
        except ValueError:
            raise DataParseError(
                f"non-numeric value {raw!r} at row {row_idx + 2}, column {name!r}",
                row=row_idx + 2, column=name) from None

    time = np.empty(len(rows))
    event = np.empty(len(rows), dtype=np.int64)
    x = np.empty((len(rows), len(x_cols)))
    z = np.empty((len(rows), len(z_cols) + 1))
    z[:, 0] = 1.0
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataParseError(f"row {i + 2} has {len(row)} cells, expected {len(header)}", row=i + 2)
        t = cell(i, row, schema.time)
        if not t > 0.0:
            raise DataParseError(
                f"nonpositive time {t} at row {i + 2}; event times must be strictly positive",
                row=i + 2, column=schema.time)
        e = cell(i, row, schema.event)
        if e not in (0.0, 1.0):
            raise DataParseError(f"event must be 0 or 1, got {e} at row {i + 2}",
                                 row=i + 2, column=schema.event)
        time[i] = t
        event[i] = int(e)
        for j, name in enumerate(x_cols):
            x[i, j] = cell(i, row, name)
        for j, name in enumerate(z_cols):
            z[i, j + 1] = cell(i, row, name)
    return Dataset(time=time, event=event, x=x, z=z)


def save_dataset(path, data: Dataset, x_names=None, z_names=None) -> None:
    """Write a Dataset back to the CSV schema (intercept column omitted)."""
    x_names = list(x_names) if x_names is not None else [f"x{j + 1}" for j in range(data.p)]
    z_names = list(z_names) if z_names is not None else [f"z{j + 1}" for j in range(data.q)]
    shared = data.q == data.p and np.array_equal(data.z[:, 1:], data.x)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if shared:
            writer.writerow(["time", "event", *x_names])
        else:
            writer.writerow(["time", "event", *x_names, *z_names])
        for i in range(data.n):
            row = [f"{data.time[i]:.17g}", str(int(data.event[i]))]
            row += [f"{v:.17g}" for v in data.x[i]]
            if not shared:
                row += [f"{v:.17g}" for v in data.z[i, 1:]]
            writer.writerow(row)


@dataclass(frozen=True)
class StandardizationRecord:
    """Centering/scaling constants for both covariate blocks (sample SD with
    divisor n-1); binary flags are informational only, binary columns are
    standardized like any other."""

    x_mean: np.ndarray
    x_sd: np.ndarray
    z_mean: np.ndarray
    z_sd: np.ndarray
    x_binary: np.ndarray
    z_binary: np.ndarray

    def apply_x(self, x):
        return (np.asarray(x, dtype=float) - self.x_mean) / self.x_sd

    def apply_z(self, z):
        z = np.asarray(z, dtype=float)
        out = z.copy()
        out[..., 1:] = (z[..., 1:] - self.z_mean) / self.z_sd
        return out

    def invert_x(self, x):
        return np.asarray(x, dtype=float) * self.x_sd + self.x_mean

    def to_dict(self):
        return {
            "x_mean": self.x_mean.tolist(), "x_sd": self.x_sd.tolist(),
            "z_mean": self.z_mean.tolist(), "z_sd": self.z_sd.tolist(),
            "x_binary": self.x_binary.astype(int).tolist(),
            "z_binary": self.z_binary.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            x_mean=np.asarray(d["x_mean"], dtype=float), x_sd=np.asarray(d["x_sd"], dtype=float),
            z_mean=np.asarray(d["z_mean"], dtype=float), z_sd=np.asarray(d["z_sd"], dtype=float),
            x_binary=np.asarray(d["x_binary"], dtype=bool), z_binary=np.asarray(d["z_binary"], dtype=bool),
        )


def _column_stats(block, label):
    if block.shape[1] == 0:
        return np.zeros(0), np.ones(0), np.zeros(0, dtype=bool)
    mean = block.mean(axis=0)
    sd = block.std(axis=0, ddof=1)
    if np.any(sd <= 0.0):
        j = int(np.flatnonzero(sd <= 0.0)[0])
        raise ConfigurationError(f"{label} column {j} is constant and cannot be standardized")
    binary = np.array([set(np.unique(block[:, j])) <= {0.0, 1.0} for j in range(block.shape[1])])
    return mean, sd, binary


def standardize(data: Dataset) -> tuple[Dataset, StandardizationRecord]:
    """Center and scale every covariate column to sample mean 0 and SD 1."""
    x_mean, x_sd, x_bin = _column_stats(data.x, "x")
    z_mean, z_sd, z_bin = _column_stats(data.z[:, 1:], "z")
    record = StandardizationRecord(x_mean, x_sd, z_mean, z_sd, x_bin, z_bin)
    return Dataset(data.time, data.event, record.apply_x(data.x), record.apply_z(data.z)), record


def build_partition(data: Dataset, n_intervals: int) -> hz.TimePartition:
    """Quantile-based partition with at least one event in every interval.

    Cuts are the j/J empirical quantiles of the event times with midpoint
    interpolation between order statistics; duplicate or event-starving cuts
    are dropped, so the returned partition may have fewer intervals than
    requested but always satisfies the one-event-per-interval condition.
    """
    if n_intervals < 1:
        raise ConfigurationError("need at least one interval")
    events = np.sort(data.time[data.event == 1])
    m = events.size
    if m < n_intervals:
        raise ConfigurationError(
            f"only {m} events for {n_intervals} intervals; choose a smaller interval count")
    raw = []
    for j in range(1, n_intervals):
        pos = j * m / n_intervals
        k = int(np.floor(pos))
        if pos == k:  # between order statistics: midpoint
            raw.append(0.5 * (events[k - 1] + events[k]))
        else:
            raw.append(events[int(np.ceil(pos)) - 1])
    cuts = []
    prev = 0.0
    for c in raw:
        if c <= prev:
            continue
        if np.any((events > prev) & (events <= c)) and np.any(events > c):
            cuts.append(c)
            prev = c
    return hz.TimePartition(np.asarray(cuts))


def km_estimate(data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Product-limit estimate: distinct event times and the survival value at
    each (the estimate is the right-continuous step function through them,
    starting at 1)."""
    if data.n < 1:
        raise ConfigurationError("need at least one subject")
    order = np.argsort(data.time, kind="stable")
    t = data.time[order]
    e = data.event[order]
    times = np.unique(t[e == 1])
    surv = np.empty_like(times)
    s = 1.0
    for i, tk in enumerate(times):
        at_risk = np.sum(t >= tk)
        deaths = np.sum((t == tk) & (e == 1))
        s *= 1.0 - deaths / at_risk
        surv[i] = s
    return times, surv


def evaluate_km(times: np.ndarray, surv: np.ndarray, t) -> np.ndarray:
    """Evaluate the right-continuous KM step function at arbitrary times."""
    idx = np.searchsorted(times, np.asarray(t, dtype=float), side="right")
    padded = np.concatenate(([1.0], surv))
    return padded[idx]


@dataclass(frozen=True)
class CovariateSpec:
    """Covariate generator: p standard-normal x columns (entries listed in
    ``binary`` become Bernoulli(1/2)); z shares the x columns by default."""

    p: int = 2
    q: int | None = None
    share: bool = True
    binary: tuple = ()

    def draw(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        x = rng.standard_normal((n, self.p))
        for j in self.binary:
            x[:, j] = rng.integers(0, 2, n).astype(float)
        if self.share:
            if self.q is not None and self.q != self.p:
                raise ConfigurationError("shared covariates require q == p")
            z = np.column_stack((np.ones(n), x))
        else:
            q = self.p if self.q is None else self.q
            z = np.column_stack((np.ones(n), rng.standard_normal((n, q))))
        return x, z


@dataclass(frozen=True)
class CensoringSpec:
    """Independent censoring: optional exponential rate plus administrative
    follow-up end. When ``admin_time`` is None the administrative time is
    admin_factor times the largest simulated event time."""

    rate: float | None = None
    admin_time: float | None = None
    admin_factor: float = 1.25


@dataclass(frozen=True)
class SimulationTruth:
    params: LcrmParams
    N: np.ndarray
    g: np.ndarray
    cured: np.ndarray
    latent_time: np.ndarray
    admin_time: float
    censoring_rate: float | None
    seed: int

    def to_dict(self):
        return {
            "beta": self.params.beta.tolist(),
            "theta": self.params.theta.tolist(),
            "phi": self.params.phi.tolist(),
            "lambda": self.params.lam.tolist(),
            "N": self.N.tolist(),
            "g": (self.g + 1).tolist(),
            "cured": self.cured.astype(int).tolist(),
            "admin_time": self.admin_time,
            "censoring_rate": self.censoring_rate,
            "seed": self.seed,
        }


def simulate_lcrm(params: LcrmParams, partition: hz.TimePartition, n: int,
                  covariates: CovariateSpec | None = None,
                  censoring: CensoringSpec | None = None,
                  seed: int = 0) -> tuple[Dataset, SimulationTruth]:
    """Draw a dataset from the latent mechanism.

    Memberships follow the multinomial-logistic law, cell counts are Poisson
    with the group's cure parameter, and the observed time is the first of
    the N activation times, each following 1 - exp(-exp(x'beta) H0(t)).
    Subjects with zero cells never fail and leave the study at the
    administrative time (or earlier under random censoring). Deterministic
    given the seed.
    """
    covariates = covariates or CovariateSpec(p=params.beta.size)
    censoring = censoring or CensoringSpec()
    rng = np.random.default_rng(seed)
    x, z = covariates.draw(rng, n)
    if x.shape[1] != params.beta.size:
        raise ConfigurationError("covariate spec does not match beta length")
    if params.phi.size and z.shape[1] != params.phi.shape[1]:
        raise ConfigurationError("covariate spec does not match phi columns")
    logw = membership_log_probs(params.phi, z)
    u = rng.random(n)
    g = (np.cumsum(np.exp(logw), axis=1) < u[:, None]).sum(axis=1)
    g = np.minimum(g, params.n_groups - 1)
    N = rng.poisson(params.theta[g])
    cured = N == 0
    risk = np.exp(x @ params.beta)
    latent = np.full(n, np.inf)
    if np.any(~cured):
        e = rng.exponential(size=int((~cured).sum()))
        h_target = e / (N[~cured] * risk[~cured])
        latent[~cured] = hz.invert_cumulative_hazard(h_target, partition, params.lam)
    if censoring.admin_time is not None:
        admin = float(censoring.admin_time)
    else:
        finite = latent[np.isfinite(latent)]
        admin = float(censoring.admin_factor * finite.max()) if finite.size else 1.0
    censor = np.full(n, admin)
    if censoring.rate is not None:
        censor = np.minimum(censor, rng.exponential(1.0 / censoring.rate, size=n))
    y = np.minimum(latent, censor)
    nu = (latent <= censor).astype(np.int64)
    data = Dataset(time=y, event=nu, x=x, z=z)
    truth = SimulationTruth(params=params, N=N, g=g, cured=cured, latent_time=latent,
                            admin_time=admin, censoring_rate=censoring.rate, seed=seed)
    return data, truth
