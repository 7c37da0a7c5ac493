"""Experiment orchestration over (replication, arm, subsample size) grids.

Seeds
-----
Every random stream is derived from ``base_seed`` with
:func:`derive_seed`, which feeds ``(base_seed, replication, crc32(label))``
to :class:`numpy.random.SeedSequence` and takes the first 64-bit word.
Synthetic data for replication ``b`` uses the label ``"data"``; a chain
uses ``"<arm name>"`` or ``"<arm name>@r=<r>"``.  No generator is shared
between arms, and the output only depends on the config, never on
``workers``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import platform
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .. import __version__
from ..diagnostics import (
    ReplicationReport,
    burn_thin,
    posterior_summary,
    replication_metrics,
)
from ..estimators import SizeRule
from ..models import (
    ModelSpec,
    gaussian_mean_model,
    gaussian_precision_model,
    logistic_model,
    mle_standard_errors,
)
from ..samplers import (
    ChainConfig,
    RandomWalk,
    adaptive_mlo_mh,
    mlo_subsampled_mh,
    standard_mh,
    uniform_subsampled_mh,
)
from ..weights import mlo_weights
from .config import ArmSpec, ExperimentConfig
from .datasets import (
    generate_gaussian_mean_data,
    generate_gaussian_precision_data,
    generate_logistic_data,
    load_csv_dataset,
)

log = logging.getLogger(__name__)


def derive_seed(base_seed: int, replication: int, label: str) -> int:
    ss = np.random.SeedSequence([base_seed, replication, zlib.crc32(label.encode("utf-8"))])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def arm_label(arm: ArmSpec, r: int | None) -> str:
    return arm.name if r is None else f"{arm.name}@r={r}"


def build_model(cfg: ExperimentConfig) -> ModelSpec:
    spec = dict(cfg.model)
    kind = spec.pop("kind")
    if kind == "gaussian_mean":
        return gaussian_mean_model(float(spec.get("prior_mean", 0.0)), float(spec.get("prior_sd", 3.0)))
    if kind == "gaussian_precision":
        return gaussian_precision_model(float(spec.get("gamma_shape", 0.01)), float(spec.get("gamma_rate", 0.01)))
    with_intercept = bool(spec.get("with_intercept", False))
    ones_column = cfg.data.get("source", "synthetic") == "csv" and bool(cfg.data.get("add_intercept", False))
    if "n_covariates" in spec:
        k = int(spec["n_covariates"])
    elif cfg.data.get("source", "synthetic") == "csv":
        k = len(cfg.data["covariate_columns"]) + int(ones_column)
    else:
        k = len(cfg.data["truth"]) - int(with_intercept)
    model = logistic_model(float(spec.get("prior_sd", math.sqrt(10.0))), with_intercept, k)
    if ones_column and not with_intercept:
        # the loader stores the intercept as a leading column of ones
        names = ("intercept", *(f"beta_{j}" for j in range(1, k)))
        model = replace(model, param_names=names)
    return model


@lru_cache(maxsize=4)
def _load_csv_cached(path, label_column, covariate_columns, standardize, add_intercept):
    return load_csv_dataset(path, label_column, list(covariate_columns), standardize, add_intercept)


def make_data(cfg: ExperimentConfig, replication: int) -> np.ndarray:
    d = cfg.data
    if d.get("source", "synthetic") == "csv":
        return _load_csv_cached(
            d["path"],
            d["label_column"],
            tuple(d["covariate_columns"]),
            bool(d.get("standardize", False)),
            bool(d.get("add_intercept", False)),
        )
    seed = derive_seed(cfg.base_seed, replication, "data")
    n = int(d["n"])
    truth = [float(v) for v in d["truth"]]
    kind = cfg.model["kind"]
    if kind == "gaussian_mean":
        return generate_gaussian_mean_data(n, truth[0], seed)
    if kind == "gaussian_precision":
        return generate_gaussian_precision_data(n, truth[0], seed)
    return generate_logistic_data(n, truth, seed, intercept=bool(cfg.model.get("with_intercept", False)))


def _proposal(cfg: ExperimentConfig, model: ModelSpec, data, theta_hat) -> RandomWalk:
    scale = np.broadcast_to(np.asarray(cfg.proposal_scale, dtype=float), (model.param_dim,))
    if cfg.proposal_relative:
        scale = scale * mle_standard_errors(model, data, theta_hat)
    return RandomWalk(tuple(float(s) for s in scale))


@dataclass
class ArmResult:
    replication: int
    arm: str
    r: int | None
    seed: int
    estimate: np.ndarray | None = None
    acceptance_rate: float = float("nan")
    mean_fraction: float = float("nan")
    median_fraction: float = float("nan")
    mean_size: float = float("nan")
    summary: object = None
    error: str | None = None


def run_arm(cfg: ExperimentConfig, model: ModelSpec, data, theta_hat, proposal, arm: ArmSpec,
            r: int | None, replication: int, mlo_at_hat=None):
    label = arm_label(arm, r)
    seed = derive_seed(cfg.base_seed, replication, label)
    res = ArmResult(replication=replication, arm=arm.name, r=r, seed=seed)
    try:
        init = None if cfg.init is None else model.from_natural(np.asarray(cfg.init))
        chain_cfg = ChainConfig(
            num_iters=cfg.num_iters,
            init_theta=init if init is None else tuple(init),
            seed=seed,
            subsample_r=r or 1,
            size_rule=SizeRule(arm.delta, arm.r_max),
        )
        if arm.method == "full":
            run = standard_mh(model, data, proposal, chain_cfg)
        elif arm.method == "uniform":
            run = uniform_subsampled_mh(model, data, proposal, chain_cfg)
        else:
            if arm.weights_at is not None:
                weights = mlo_weights(model, data, model.from_natural(np.asarray(arm.weights_at)))
            else:
                weights = mlo_at_hat if mlo_at_hat is not None else mlo_weights(model, data, theta_hat)
            sampler = adaptive_mlo_mh if arm.method == "adaptive" else mlo_subsampled_mh
            run = sampler(model, data, proposal, weights, chain_cfg)
        kept = model.to_natural(burn_thin(run, cfg.burn, cfg.thin))
        fractions = run.subsample_fractions()
        res.estimate = kept.mean(axis=0)
        res.acceptance_rate = run.acceptance_rate
        res.mean_fraction = float(fractions.mean())
        res.median_fraction = float(np.median(fractions))
        res.mean_size = float(run.subsample_sizes.mean())
        res.summary = posterior_summary(kept, cfg.alpha, model.param_names)
    except Exception as exc:  # one failing arm must not sink the others
        log.warning("replication %d arm %s failed: %s", replication, label, exc)
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def run_replication(cfg: ExperimentConfig, replication: int) -> list[ArmResult]:
    model = build_model(cfg)
    data = make_data(cfg, replication)
    try:
        theta_hat = model.mle(data)
        proposal = _proposal(cfg, model, data, theta_hat)
        mlo_at_hat = mlo_weights(model, data, theta_hat)
    except Exception as exc:
        msg = f"{type(exc).__name__}: {exc}"
        return [
            ArmResult(replication, arm.name, r, derive_seed(cfg.base_seed, replication, arm_label(arm, r)), error=msg)
            for arm, r in cfg.instances()
        ]
    # arms run sequentially inside a replication
    return [
        run_arm(cfg, model, data, theta_hat, proposal, arm, r, replication, mlo_at_hat)
        for arm, r in cfg.instances()
    ]


@dataclass
class ArmReport:
    arm: str
    method: str
    r: int | None
    report: ReplicationReport | None
    mean_fraction: float
    median_fraction: float
    mean_size: float
    failures: int

    def to_dict(self) -> dict:
        return {
            "arm": self.arm,
            "method": self.method,
            "r": self.r,
            "report": None if self.report is None else self.report.to_dict(),
            "mse_sum": None if self.report is None else self.report.mse_sum,
            "mean_fraction": self.mean_fraction,
            "median_fraction": self.median_fraction,
            "mean_size": self.mean_size,
            "failures": self.failures,
        }


@dataclass
class ResultBundle:
    name: str
    n: int
    param_names: tuple[str, ...]
    truth: tuple[float, ...] | None
    arms: list[ArmReport]
    results: list[ArmResult] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    def arm(self, name: str, r: int | None = None) -> ArmReport:
        for a in self.arms:
            if a.arm == name and a.r == r:
                return a
        raise KeyError((name, r))

    @property
    def errors(self) -> list[dict]:
        return [
            {"replication": x.replication, "arm": x.arm, "r": x.r, "error": x.error}
            for x in self.results
            if x.error is not None
        ]

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "manifest.json", self.manifest)
        _write_json(
            out / "report.json",
            {
                "name": self.name,
                "n": self.n,
                "param_names": list(self.param_names),
                "truth": None if self.truth is None else list(self.truth),
                "arms": [a.to_dict() for a in self.arms],
                "errors": self.errors,
            },
        )
        self._write_estimates(out / "estimates.csv")
        self._write_summaries(out / "summaries.csv")
        if self.truth is not None:
            self._write_report_csv(out / "report.csv")
            emit_mse_matrix(self, out / "mse_matrix.csv")
        return out

    def _write_estimates(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replication", "arm", "r", *self.param_names, "acceptance_rate",
                        "mean_fraction", "median_fraction", "seed"])
            for x in self.results:
                if x.error is not None:
                    continue
                w.writerow([x.replication, x.arm, _fmt_r(x.r), *map(_fmt, x.estimate), _fmt(x.acceptance_rate),
                            _fmt(x.mean_fraction), _fmt(x.median_fraction), x.seed])

    def _write_summaries(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replication", "arm", "r", "parameter", "mean", "sd", "hpd_lo", "hpd_hi"])
            for x in self.results:
                if x.summary is None:
                    continue
                for row in x.summary.rows():
                    w.writerow([x.replication, x.arm, _fmt_r(x.r), row["parameter"], _fmt(row["mean"]),
                                _fmt(row["sd"]), _fmt(row["hpd_lo"]), _fmt(row["hpd_hi"])])

    def _write_report_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["arm", "r", "parameter", "bias", "sd", "mse", "B", "mean_fraction", "median_fraction"])
            for a in self.arms:
                if a.report is None:
                    continue
                for j, name in enumerate(self.param_names):
                    w.writerow([a.arm, _fmt_r(a.r), name, _fmt(a.report.bias[j]), _fmt(a.report.sd[j]),
                                _fmt(a.report.mse[j]), a.report.B, _fmt(a.mean_fraction), _fmt(a.median_fraction)])

    @classmethod
    def load(cls, out_dir) -> "ResultBundle":
        out = Path(out_dir)
        with open(out / "report.json", encoding="utf-8") as fh:
            rep = json.load(fh)
        manifest = {}
        if (out / "manifest.json").exists():
            with open(out / "manifest.json", encoding="utf-8") as fh:
                manifest = json.load(fh)
        arms = []
        for a in rep["arms"]:
            report = None
            if a["report"] is not None:
                d = a["report"]
                report = ReplicationReport(bias=np.array(d["bias"]), sd=np.array(d["sd"]),
                                           mse=np.array(d["mse"]), B=d["B"])
            arms.append(ArmReport(a["arm"], a["method"], a["r"], report, a["mean_fraction"],
                                  a["median_fraction"], a["mean_size"], a["failures"]))
        truth = None if rep["truth"] is None else tuple(rep["truth"])
        return cls(name=rep["name"], n=rep["n"], param_names=tuple(rep["param_names"]), truth=truth,
                   arms=arms, manifest=manifest)


def _fmt(v) -> str:
    return repr(float(v))


def _fmt_r(r) -> str:
    return "" if r is None else str(r)


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _truth(cfg: ExperimentConfig) -> tuple[float, ...] | None:
    if cfg.data.get("source", "synthetic") == "csv":
        return None
    return tuple(float(v) for v in cfg.data["truth"])


def aggregate(cfg: ExperimentConfig, results: list[ArmResult], n: int, param_names) -> ResultBundle:
    truth = _truth(cfg)
    arms = []
    for arm, r in cfg.instances():
        mine = [x for x in results if x.arm == arm.name and x.r == r]
        ok = [x for x in mine if x.error is None]
        report = None
        if truth is not None and len(ok) >= 2:
            report = replication_metrics(np.array([x.estimate for x in ok]), truth)
        arms.append(
            ArmReport(
                arm=arm.name,
                method=arm.method,
                r=r,
                report=report,
                mean_fraction=float(np.mean([x.mean_fraction for x in ok])) if ok else float("nan"),
                median_fraction=float(np.median([x.median_fraction for x in ok])) if ok else float("nan"),
                mean_size=float(np.mean([x.mean_size for x in ok])) if ok else float("nan"),
                failures=len(mine) - len(ok),
            )
        )
    manifest = {
        "name": cfg.name,
        "config": cfg.raw,
        "config_hash": cfg.config_hash(),
        "base_seed": cfg.base_seed,
        "replications": cfg.replications,
        "seeds": {
            "data": [derive_seed(cfg.base_seed, b, "data") for b in range(cfg.replications)],
            "chains": {
                arm_label(arm, r): [derive_seed(cfg.base_seed, b, arm_label(arm, r)) for b in range(cfg.replications)]
                for arm, r in cfg.instances()
            },
        },
        "versions": {"mlo_mcmc": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }
    return ResultBundle(name=cfg.name, n=n, param_names=tuple(param_names), truth=truth, arms=arms,
                        results=results, manifest=manifest)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ResultBundle:
    """Run every replication and arm, aggregate, and write the bundle.

    Replications may run in worker processes (``cfg.workers > 1``); results
    are folded in replication order, so the output is the same either way.
    """
    model = build_model(cfg)
    reps = range(cfg.replications)
    if cfg.workers > 1 and cfg.replications > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            per_rep = list(pool.map(run_replication, [cfg] * cfg.replications, reps))
    else:
        per_rep = [run_replication(cfg, b) for b in reps]
    results = [x for rep in per_rep for x in rep]
    n = make_data(cfg, 0).shape[0]
    bundle = aggregate(cfg, results, n, model.param_names)
    if write:
        bundle.write(cfg.output_dir)
    return bundle


def emit_mse_matrix(bundle: ResultBundle, path) -> Path:
    """Summed MSE laid out as rows = subsample size, columns = arm."""
    fixed = [a for a in bundle.arms if a.r is not None and a.method != "adaptive" and a.report is not None]
    names = list(dict.fromkeys(a.arm for a in fixed))
    sizes = sorted({a.r for a in fixed})
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", *names])
        for r in sizes:
            row = [str(r)]
            for name in names:
                hit = [a for a in fixed if a.arm == name and a.r == r]
                row.append(_fmt(hit[0].report.mse_sum) if hit else "")
            w.writerow(row)
    return path


def emit_mse_curve(bundle: ResultBundle, path) -> Path:
    """CSV ``arm,r,mse_sum`` for plotting MSE against subsample size.

    The full-data arm appears once at ``r = n`` as a reference level; an
    adaptive arm is placed at its rounded mean subsample size.
    """
    groups: dict[str, list[ArmReport]] = {}
    for a in bundle.arms:
        if a.report is not None:
            groups.setdefault(a.arm, []).append(a)
    for name, entries in groups.items():
        if entries[0].method in ("mlo", "uniform") and len(entries) < 2:
            raise ValueError(f"arm {name!r} has fewer than two subsample sizes")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["arm", "r", "mse_sum"])
        for name, entries in groups.items():
            for a in entries:
                if a.method == "full":
                    r = bundle.n
                elif a.method == "adaptive":
                    r = int(round(a.mean_size))
                else:
                    r = a.r
                w.writerow([name, r, _fmt(a.report.mse_sum)])
    return path
