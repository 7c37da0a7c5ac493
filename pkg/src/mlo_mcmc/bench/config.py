"""Experiment configuration, read from a TOML file.

See ``README.md`` for the full grammar.  Values on the parameter scale
(``truth``, ``init``, ``weights_at``) are on the reporting scale, e.g. the
precision tau rather than log tau.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

METHODS = ("full", "mlo", "uniform", "adaptive")
MODEL_KINDS = ("gaussian_mean", "gaussian_precision", "logistic")
OUTPUT_DIR_ENV = "MLO_MCMC_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ArmSpec:
    name: str
    method: str
    r: tuple[int, ...] = ()
    weights_at: tuple[float, ...] | None = None
    r_max: int = 5000
    delta: float = 0.05

    def sizes(self) -> tuple[int | None, ...]:
        return (None,) if self.method == "full" else self.r


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    model: dict
    data: dict
    arms: tuple[ArmSpec, ...]
    num_iters: int
    burn: int = 0
    thin: int = 1
    proposal_scale: float | tuple[float, ...] = 1.0
    proposal_relative: bool = False
    init: tuple[float, ...] | None = None
    alpha: float = 0.05
    replications: int = 1
    base_seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def instances(self) -> list[tuple[ArmSpec, int | None]]:
        return [(arm, r) for arm in self.arms for r in arm.sizes()]

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _tuple_or_none(value):
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return (float(value),)
    return tuple(float(v) for v in value)


def _parse_arm(entry: dict) -> ArmSpec:
    try:
        name = str(entry["name"])
        method = str(entry.get("method", name))
    except KeyError:
        raise ConfigError("every [[arms]] entry needs a name") from None
    if method not in METHODS:
        raise ConfigError(f"arm {name!r}: unknown method {method!r}; expected one of {METHODS}")
    r = entry.get("r", entry.get("r_init", ()))
    r = (int(r),) if isinstance(r, int) else tuple(int(v) for v in r)
    if method != "full" and not r:
        raise ConfigError(f"arm {name!r}: subsampled methods need r (or r_init)")
    if any(v < 1 for v in r):
        raise ConfigError(f"arm {name!r}: subsample sizes must be >= 1")
    arm = ArmSpec(
        name=name,
        method=method,
        r=r,
        weights_at=_tuple_or_none(entry.get("weights_at")),
        r_max=int(entry.get("r_max", 5000)),
        delta=float(entry.get("delta", 0.05)),
    )
    if method == "adaptive" and any(v > arm.r_max for v in r):
        raise ConfigError(f"arm {name!r}: r_init exceeds r_max")
    return arm


def config_from_dict(raw: dict) -> ExperimentConfig:
    try:
        model = dict(raw["model"])
        data = dict(raw["data"])
        chain = dict(raw["chain"])
        arms = tuple(_parse_arm(a) for a in raw["arms"])
    except KeyError as exc:
        raise ConfigError(f"missing section {exc.args[0]!r}") from None
    if model.get("kind") not in MODEL_KINDS:
        raise ConfigError(f"model.kind must be one of {MODEL_KINDS}")
    if not arms:
        raise ConfigError("at least one arm is required")
    labels = [(a.name, r) for a in arms for r in a.sizes()]
    if len(set(labels)) != len(labels):
        raise ConfigError("arm names/sizes must be unique")
    source = data.get("source", "synthetic")
    if source == "synthetic":
        if "n" not in data or "truth" not in data:
            raise ConfigError("synthetic data needs n and truth")
    elif source == "csv":
        for key in ("path", "label_column", "covariate_columns"):
            if key not in data:
                raise ConfigError(f"csv data needs {key}")
    else:
        raise ConfigError(f"unknown data.source {source!r}")

    scale = chain.get("proposal_scale", 1.0)
    scale = float(scale) if isinstance(scale, (int, float)) else tuple(float(v) for v in scale)
    replications = int(raw.get("replications", 1))
    if replications < 1:
        raise ConfigError("replications must be >= 1")
    cfg = ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        model=model,
        data=data,
        arms=arms,
        num_iters=int(chain["num_iters"]),
        burn=int(chain.get("burn", 0)),
        thin=int(chain.get("thin", 1)),
        proposal_scale=scale,
        proposal_relative=bool(chain.get("proposal_relative", False)),
        init=_tuple_or_none(chain.get("init")),
        alpha=float(chain.get("alpha", 0.05)),
        replications=replications,
        base_seed=int(raw.get("base_seed", 0)),
        output_dir=str(raw.get("output_dir", "results")),
        workers=int(raw.get("workers", 1)),
        raw=raw,
    )
    if cfg.burn >= cfg.num_iters:
        raise ConfigError("burn must be smaller than num_iters")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    data = raw.get("data", {})
    # relative CSV paths are resolved against the config file
    if data.get("source") == "csv" and not Path(data.get("path", "")).is_absolute():
        data["path"] = str((path.parent / data["path"]).resolve())
    cfg = config_from_dict(raw)
    override = os.environ.get(OUTPUT_DIR_ENV)
    if override:
        cfg = _with_output_dir(cfg, override)
    return cfg


def _with_output_dir(cfg: ExperimentConfig, output_dir: str) -> ExperimentConfig:
    from dataclasses import replace

    return replace(cfg, output_dir=output_dir)
