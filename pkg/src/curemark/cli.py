"""Command-line harness: fit, compare, classify, simulate and check.

Every run writes a ``config.json`` sidecar holding all effective settings
(defaults included) so the run can be reproduced bit-identically from the
sidecar alone. Numeric CSV output uses 17 significant digits; JSON floats
use Python's shortest round-trip representation. Errors surface as a
machine-readable JSON object on stdout with a nonzero exit status.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import data as dtk
from . import hazard as hz
from .archive import SampleArchive
from .exceptions import CuremarkError, ConfigurationError
from .gibbs import McmcConfig, run_chain
from .models import LcrmParams
from .predict import predictive_report
from .priors import PriorSpec, check_propriety
from .rjmcmc import RjConfig, default_prior_ladder, run_rj_chain
from .summaries import comparison_report, summary_report

PROFILES = {
    "full": dict(total_iterations=100_000, burn_in=4_000, thin=5),
    "quick": dict(total_iterations=2_000, burn_in=500, thin=2),
    "quick-extended": dict(total_iterations=20_000, burn_in=4_000, thin=5),
}

MODEL_KINDS = ("cox", "cis", "phph", "lacr", "lcrm")


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _parse_matrix(text: str) -> list[list[float]]:
    return [_parse_floats(row) for row in text.split(";") if row.strip() != ""]


def _parse_g_values(text: str) -> list[int]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _mcmc_config(args) -> McmcConfig:
    settings = dict(PROFILES[args.profile])
    if args.iterations is not None:
        settings["total_iterations"] = args.iterations
    if args.burn_in is not None:
        settings["burn_in"] = args.burn_in
    if args.thin is not None:
        settings["thin"] = args.thin
    return McmcConfig(seed=args.seed, **settings)


def _prior_spec(args, n_groups: int) -> PriorSpec:
    kw = dict(c0=args.c0, c01=args.c01, c02=args.c02, a0=args.a0, b0=args.b0)
    if args.prior_cure_rates is not None:
        rates = _parse_floats(args.prior_cure_rates)
        if len(rates) != n_groups:
            raise ConfigurationError(
                f"{len(rates)} prior cure rates given for {n_groups} groups")
        return PriorSpec.elicited(rates, **kw)
    return PriorSpec.default(n_groups, **kw)


def _partition(args, data) -> hz.TimePartition:
    if args.cuts is not None:
        return hz.TimePartition(np.asarray(_parse_floats(args.cuts)))
    return dtk.build_partition(data, args.J)


def _load(args):
    schema = dtk.DataSchema(
        x_cols=tuple(args.x_cols.split(",")) if args.x_cols else None,
        z_cols=tuple(args.z_cols.split(",")) if args.z_cols else None,
    )
    data = dtk.load_dataset(args.data, schema)
    record = None
    if args.standardize:
        data, record = dtk.standardize(data)
    return data, record


def _config_sidecar(args, extra=None) -> dict:
    out = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    if extra:
        out.update(extra)
    return out


def _add_common_data_flags(p) -> None:
    p.add_argument("--data", required=True, help="dataset CSV (time,event,covariates)")
    p.add_argument("--x-cols", default=None, help="comma list of hazard covariate columns")
    p.add_argument("--z-cols", default=None, help="comma list of membership covariate columns")
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True,
                   help="center/scale covariates to sample mean 0, SD 1")
    p.add_argument("--J", type=int, default=5, help="intervals for the quantile partition")
    p.add_argument("--cuts", default=None, help="explicit partition cuts, comma separated")


def _add_prior_flags(p) -> None:
    p.add_argument("--c01", type=float, default=1000.0)
    p.add_argument("--c02", type=float, default=3.0)
    p.add_argument("--a0", type=float, default=1.0)
    p.add_argument("--b0", type=float, default=0.01)
    p.add_argument("--c0", type=float, default=2.5)
    p.add_argument("--prior-cure-rates", default=None,
                   help="comma list overriding the default prior cure-rate grid")


def _add_mcmc_flags(p) -> None:
    p.add_argument("--profile", choices=sorted(PROFILES), default="full",
                   help="chain-length preset; quick profiles are for CI only")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true",
                   help="run even if the propriety conditions fail")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    data, record = _load(args)
    partition = _partition(args, data)
    spec = _prior_spec(args, args.G if args.model == "lcrm" else 1)
    cfg = _mcmc_config(args)
    archive = run_chain(args.model, data, partition, spec, cfg, force=args.force)
    os.makedirs(args.out, exist_ok=True)
    archive.save(args.out)
    report = summary_report(archive)
    report.update(comparison_report(archive, data).to_dict())
    _write_json(os.path.join(args.out, "summary.json"), report)
    extra = {"cuts_used": [float(c) for c in partition.cuts]}
    if record is not None:
        extra["standardization"] = record.to_dict()
    _write_json(os.path.join(args.out, "config.json"), _config_sidecar(args, extra))
    return 0


def cmd_compare(args) -> int:
    data, record = _load(args)
    models = [m.strip() for m in args.models.split(",")]
    for m in models:
        if m not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model {m!r}")
    g_values = _parse_g_values(args.G)
    j_values = [int(v) for v in args.J_grid.split(",")]
    cfg = _mcmc_config(args)
    grid = []
    for kind in models:
        for j in j_values:
            partition = dtk.build_partition(data, j)
            for g in (g_values if kind == "lcrm" else [None]):
                spec = _prior_spec(args, g if g is not None else 1)
                archive = run_chain(kind, data, partition, spec, cfg, force=args.force)
                rep = comparison_report(archive, data)
                grid.append({"model": kind, "G": g, "J": j,
                             "lpml": rep.lpml, "dic": rep.dic, "p_D": rep.p_d})
    report = {"grid": grid, "lpml_pattern_notes": _pattern_notes(grid)}
    if len(g_values) > 1 and "lcrm" in models and not args.no_rj:
        rj_j = args.rj_J if args.rj_J is not None else j_values[0]
        partition = dtk.build_partition(data, rj_j)
        rj = RjConfig(mu_g=args.mu_g, g_max=max(g_values))
        priors = default_prior_ladder(
            rj.g_max, c0=args.c0, c01=args.c01, c02=args.c02, a0=args.a0, b0=args.b0)
        rj_archive = run_rj_chain(data, partition, priors, rj, cfg, force=args.force)
        report["model_probs"] = rj_archive.meta["model_probs"]
        report["rj_J"] = rj_j
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "compare.json"), report)
    extra = {}
    if record is not None:
        extra["standardization"] = record.to_dict()
    _write_json(os.path.join(args.out, "config.json"), _config_sidecar(args, extra))
    return 0


def _pattern_notes(grid) -> list[str]:
    """Annotate (never assert) concavity of LPML in J per model/G row."""
    notes = []
    keys = sorted({(row["model"], row["G"]) for row in grid}, key=str)
    for model, g in keys:
        rows = sorted((r for r in grid if r["model"] == model and r["G"] == g),
                      key=lambda r: r["J"])
        if len(rows) >= 3:
            lpml = [r["lpml"] for r in rows]
            inner_peak = max(lpml[1:-1]) >= max(lpml[0], lpml[-1])
            label = f"{model}" + (f" G={g}" if g is not None else "")
            notes.append(f"{label}: LPML {'peaks at an interior J' if inner_peak else 'is edge-peaked in J'}")
    return notes


def cmd_classify(args) -> int:
    archive = SampleArchive.load(args.archive)
    x = np.asarray(_parse_floats(args.x))
    z_cov = np.asarray(_parse_floats(args.z)) if args.z is not None else x.copy()
    config_path = os.path.join(args.archive, "config.json")
    if os.path.exists(config_path):
        with open(config_path) as fh:
            fit_config = json.load(fh)
        std = fit_config.get("standardization")
        if std is not None:
            record = dtk.StandardizationRecord.from_dict(std)
            x = record.apply_x(x)
            z_cov = (z_cov - record.z_mean) / record.z_sd
    z = np.concatenate(([1.0], z_cov))
    times = np.asarray([np.inf if t.strip() in ("inf", "Inf") else float(t)
                        for t in args.times.split(",")])
    report = predictive_report(archive, x, z, times=times,
                               classification_time=args.at_time)
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "classification.json"), report.to_dict())
    with open(os.path.join(args.out, "probs.csv"), "w") as fh:
        fh.write("t,k,probability\n")
        for t, row in zip(report.times, report.probs):
            t_str = "inf" if np.isinf(t) else f"{t:.17g}"
            for k, v in enumerate(row, start=1):
                fh.write(f"{t_str},{k},{v:.17g}\n")
    with open(os.path.join(args.out, "curves.csv"), "w") as fh:
        fh.write("t,group,survival\n")
        for k in range(report.group_curves.shape[0]):
            for t, v in zip(report.curve_grid, report.group_curves[k]):
                fh.write(f"{t:.17g},{k + 1},{v:.17g}\n")
        for t, v in zip(report.curve_grid, report.marginal_curve):
            fh.write(f"{t:.17g},marginal,{v:.17g}\n")
    _write_json(os.path.join(args.out, "config.json"), _config_sidecar(args))
    return 0


def cmd_simulate(args) -> int:
    theta = np.asarray(_parse_floats(args.theta))
    beta = np.asarray(_parse_floats(args.beta)) if args.beta else np.zeros(0)
    if args.phi is not None:
        phi = np.asarray(_parse_matrix(args.phi), dtype=float)
    else:
        phi = np.zeros((theta.size - 1, beta.size + 1))
    lam = np.asarray(_parse_floats(args.rates))
    cuts = np.asarray(_parse_floats(args.cuts)) if args.cuts else np.zeros(0)
    partition = hz.TimePartition(cuts)
    params = LcrmParams(beta=beta, theta=theta, phi=phi, lam=lam)
    cov = dtk.CovariateSpec(p=beta.size, q=phi.shape[1] - 1 if phi.size else beta.size,
                            share=args.share_covariates)
    cens = dtk.CensoringSpec(rate=args.censoring_rate, admin_time=args.admin_time)
    data, truth = dtk.simulate_lcrm(params, partition, args.n, cov, cens, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    dtk.save_dataset(os.path.join(args.out, "data.csv"), data)
    _write_json(os.path.join(args.out, "truth.json"), truth.to_dict())
    _write_json(os.path.join(args.out, "config.json"), _config_sidecar(args))
    return 0


def cmd_check(args) -> int:
    data, _ = _load(args)
    partition = _partition(args, data)
    spec = _prior_spec(args, args.G)
    report = check_propriety(data, partition, spec)
    payload = {
        "passes": report.passes,
        "failed_conditions": list(report.failed_conditions),
        "events_per_interval": report.events_per_interval.tolist(),
        "full_rank_interval": report.full_rank_interval,
        "cuts": [float(c) for c in partition.cuts],
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "check.json"), payload)
        _write_json(os.path.join(args.out, "config.json"), _config_sidecar(args))
    return 0 if report.passes else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curemark",
        description="Bayesian cure-rate survival modeling with latent risk groups")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one model and write its archive and summary")
    _add_common_data_flags(p)
    _add_prior_flags(p)
    _add_mcmc_flags(p)
    p.add_argument("--model", choices=MODEL_KINDS, required=True)
    p.add_argument("--G", type=int, default=3, help="number of risk groups (lcrm only)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="LPML/DIC over a (model, G, J) grid")
    _add_common_data_flags(p)
    _add_prior_flags(p)
    _add_mcmc_flags(p)
    p.add_argument("--models", default="lcrm", help="comma list of model kinds")
    p.add_argument("--G", default="1..3", help="group counts, e.g. 3 or 1,3 or 1..5")
    p.add_argument("--J-grid", default="1,5,10", dest="J_grid",
                   help="comma list of interval counts")
    p.add_argument("--mu-g", type=float, default=3.0, dest="mu_g",
                   help="truncated-Poisson prior mean for the group count")
    p.add_argument("--rj-J", type=int, default=None, dest="rj_J",
                   help="interval count for the trans-dimensional run")
    p.add_argument("--no-rj", action="store_true",
                   help="skip the trans-dimensional run even for a G range")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("classify", help="predictive risk-group report for a new patient")
    p.add_argument("--archive", required=True, help="directory written by fit")
    p.add_argument("--x", required=True, help="comma list of hazard covariates (raw scale)")
    p.add_argument("--z", default=None,
                   help="comma list of membership covariates; defaults to --x")
    p.add_argument("--at-time", type=float, default=0.0, dest="at_time",
                   help="classification time (default 0: baseline counseling)")
    p.add_argument("--times", default="0,5,inf", help="comma list of report times")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="draw a synthetic dataset from the latent mechanism")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", required=True, help="comma list of cure parameters, increasing")
    p.add_argument("--beta", default=None, help="comma list of hazard coefficients")
    p.add_argument("--phi", default=None,
                   help="membership coefficients, rows ';'-separated, entries ','-separated")
    p.add_argument("--rates", required=True, help="comma list of baseline hazard rates")
    p.add_argument("--cuts", default=None, help="partition cuts, comma separated")
    p.add_argument("--censoring-rate", type=float, default=None, dest="censoring_rate")
    p.add_argument("--admin-time", type=float, default=None, dest="admin_time")
    p.add_argument("--share-covariates", action=argparse.BooleanOptionalAction,
                   default=True, dest="share_covariates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="evaluate the posterior-propriety conditions")
    _add_common_data_flags(p)
    _add_prior_flags(p)
    p.add_argument("--G", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check)
    return parser


def dispatch(argv=None) -> int:
    """Parse arguments and run the requested subcommand.

    Returns the exit status; package errors are printed as JSON and map to
    status 1 (propriety refusals included).
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CuremarkError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        report = getattr(exc, "report", None)
        if report is not None and hasattr(report, "failed_conditions"):
            payload["failed_conditions"] = list(report.failed_conditions)
        print(json.dumps(payload, indent=2, sort_keys=True))
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
