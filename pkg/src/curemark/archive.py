"""Posterior sample archives and their on-disk format.

An archive holds every stored draw of the model parameters together with the
per-draw observed-data log-likelihood, the per-subject log-likelihood values
(the raw material for CPO) and a metadata block sufficient to reproduce the
run. On disk an archive is a directory with

    draws.csv            one row per stored draw, columns beta.1.., theta.1..,
                         phi.k.j.., lambda.1.., loglik, deviance (plus a
                         leading G column for trans-dimensional runs)
    subject_loglik.csv   one row per stored draw, one column per subject
    meta.json            config, seed, acceptance rates, model probabilities

All floats are serialized with 17 significant digits so a round trip is
bit-exact and identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, ModelKindError
from .models import CisParams, CoxParams, LacrParams, LcrmParams, PhphParams


def _fmt(v) -> str:
    return f"{float(v):.17g}"


@dataclass
class SampleArchive:
    """Stored posterior draws for one chain."""

    kind: str
    cuts: np.ndarray
    params: dict
    loglik: np.ndarray
    subject_loglik: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.loglik.size

    @property
    def deviance(self) -> np.ndarray:
        return -2.0 * self.loglik

    @property
    def trans_dimensional(self) -> bool:
        return "G" in self.params

    def flat_columns(self) -> dict:
        """Ordered mapping of flat column name to (M,) array."""
        out = {}
        if self.trans_dimensional:
            out["G"] = self.params["G"]
        for key in ("beta", "beta1", "beta2", "theta"):
            if key in self.params:
                arr = self.params[key]
                for j in range(arr.shape[1]):
                    out[f"{key}.{j + 1}"] = arr[:, j]
        if "phi" in self.params:
            phi = self.params["phi"]
            for k in range(phi.shape[1]):
                for j in range(phi.shape[2]):
                    out[f"phi.{k + 1}.{j}"] = phi[:, k, j]
        lam = self.params["lam"]
        for j in range(lam.shape[1]):
            out[f"lambda.{j + 1}"] = lam[:, j]
        out["loglik"] = self.loglik
        out["deviance"] = self.deviance
        return out

    def mean_params(self):
        """Componentwise posterior-mean parameter object.

        Means of cone-ordered draws stay cone-ordered, so the result is a
        valid parameter set. Not defined for trans-dimensional archives.
        """
        if self.trans_dimensional:
            raise ModelKindError("posterior-mean parameters are undefined across dimensions")
        p = self.params
        if self.kind == "cox":
            return CoxParams(p["beta"].mean(axis=0), p["lam"].mean(axis=0))
        if self.kind == "cis":
            return CisParams(p["beta"].mean(axis=0), p["lam"].mean(axis=0))
        if self.kind == "phph":
            return PhphParams(p["beta1"].mean(axis=0), p["beta2"].mean(axis=0), p["lam"].mean(axis=0))
        if self.kind == "lacr":
            return LacrParams(p["beta"].mean(axis=0), p["lam"].mean(axis=0))
        if self.kind == "lcrm":
            return LcrmParams(p["beta"].mean(axis=0), p["theta"].mean(axis=0),
                              p["phi"].mean(axis=0), p["lam"].mean(axis=0))
        raise ModelKindError(f"unknown model kind {self.kind!r}")

    def draw_params(self, m: int):
        """Parameter object for one stored draw (fixed-dimension archives)."""
        if self.trans_dimensional:
            raise ModelKindError("use the padded arrays directly for trans-dimensional archives")
        p = self.params
        if self.kind == "cox":
            return CoxParams(p["beta"][m], p["lam"][m])
        if self.kind == "cis":
            return CisParams(p["beta"][m], p["lam"][m])
        if self.kind == "phph":
            return PhphParams(p["beta1"][m], p["beta2"][m], p["lam"][m])
        if self.kind == "lacr":
            return LacrParams(p["beta"][m], p["lam"][m])
        if self.kind == "lcrm":
            return LcrmParams(p["beta"][m], p["theta"][m], p["phi"][m], p["lam"][m])
        raise ModelKindError(f"unknown model kind {self.kind!r}")

    def save(self, outdir, include_subject_loglik: bool = True) -> None:
        os.makedirs(outdir, exist_ok=True)
        cols = self.flat_columns()
        with open(os.path.join(outdir, "draws.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols.keys())
            names = list(cols)
            for m in range(self.n_draws):
                row = []
                for name in names:
                    v = cols[name][m]
                    if name == "G":
                        row.append(str(int(v)))
                    elif np.isnan(v):
                        row.append("")
                    else:
                        row.append(_fmt(v))
                writer.writerow(row)
        if include_subject_loglik:
            with open(os.path.join(outdir, "subject_loglik.csv"), "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow([f"subject.{i + 1}" for i in range(self.subject_loglik.shape[1])])
                for m in range(self.n_draws):
                    writer.writerow([_fmt(v) for v in self.subject_loglik[m]])
        meta = dict(self.meta)
        meta["kind"] = self.kind
        meta["cuts"] = [float(c) for c in np.atleast_1d(self.cuts)]
        meta["shapes"] = {k: list(v.shape[1:]) for k, v in self.params.items()}
        with open(os.path.join(outdir, "meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, outdir) -> "SampleArchive":
        with open(os.path.join(outdir, "meta.json")) as fh:
            meta = json.load(fh)
        kind = meta.pop("kind")
        cuts = np.asarray(meta.pop("cuts"), dtype=float)
        shapes = meta.pop("shapes")
        with open(os.path.join(outdir, "draws.csv"), newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        raw = {name: np.array([float(r[i]) if r[i] != "" else np.nan for r in rows])
               for i, name in enumerate(header)}
        M = len(rows)
        params = {}
        for key, shape in shapes.items():
            if key == "G":
                params["G"] = raw["G"].astype(np.int64)
            elif key == "phi":
                k1, k2 = shape
                arr = np.empty((M, k1, k2))
                for k in range(k1):
                    for j in range(k2):
                        arr[:, k, j] = raw[f"phi.{k + 1}.{j}"]
                params["phi"] = arr
            else:
                name = "lambda" if key == "lam" else key
                arr = np.empty((M, shape[0]))
                for j in range(shape[0]):
                    arr[:, j] = raw[f"{name}.{j + 1}"]
                params[key] = arr
        loglik = raw["loglik"]
        sl_path = os.path.join(outdir, "subject_loglik.csv")
        if os.path.exists(sl_path):
            with open(sl_path, newline="") as fh:
                reader = csv.reader(fh)
                next(reader)
                subject_loglik = np.array([[float(v) for v in row] for row in reader])
        else:
            subject_loglik = np.empty((M, 0))
        return cls(kind=kind, cuts=cuts, params=params, loglik=loglik,
                   subject_loglik=subject_loglik, meta=meta)


def merge_archives(archives) -> SampleArchive:
    """Order-stable concatenation of same-configuration chains."""
    archives = list(archives)
    if not archives:
        raise ConfigurationError("nothing to merge")
    first = archives[0]
    for other in archives[1:]:
        if other.kind != first.kind or set(other.params) != set(first.params):
            raise ConfigurationError("archives have incompatible layouts")
    params = {k: np.concatenate([a.params[k] for a in archives]) for k in first.params}
    meta = dict(first.meta)
    meta["merged_chains"] = [a.meta.get("seed") for a in archives]
    return SampleArchive(
        kind=first.kind,
        cuts=first.cuts,
        params=params,
        loglik=np.concatenate([a.loglik for a in archives]),
        subject_loglik=np.concatenate([a.subject_loglik for a in archives]),
        meta=meta,
    )
