"""Metropolis-Hastings drivers: full data, fixed-size subsampled, adaptive.

Every chain owns three independent generators spawned from ``cfg.seed``:
proposal noise, the uniform accept draws, and subsample indices, in that
spawn order.  Proposal noise and ``u`` are therefore identical across
samplers for a given seed, whatever the subsampling consumes, which keeps
method comparisons paired.  Within an iteration ``u`` is fixed before any
subsample is drawn, and an adaptive augmentation reuses the same ``u``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .estimators import SizeRule
from .models import ModelSpec, full_loglik
from .weights import SubsampleWeights, uniform_weights


@dataclass(frozen=True)
class RandomWalk:
    """Gaussian random-walk proposal with per-coordinate step SD ``scale``."""

    scale: float | tuple[float, ...] = 1.0
    symmetric: bool = field(default=True, init=False)

    def __post_init__(self):
        if np.any(np.asarray(self.scale, dtype=float) <= 0):
            raise ValueError("proposal scale must be positive")

    def step(self, theta: np.ndarray, noise: np.ndarray) -> np.ndarray:
        return theta + np.asarray(self.scale, dtype=float) * noise

    def sample(self, theta, rng: np.random.Generator) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return self.step(theta, rng.standard_normal(theta.shape))

    def log_q(self, to, frm) -> float:
        scale = np.broadcast_to(np.asarray(self.scale, dtype=float), np.shape(to))
        z = (np.asarray(to, dtype=float) - np.asarray(frm, dtype=float)) / scale
        return float(-0.5 * np.sum(z * z) - np.sum(np.log(scale)) - 0.5 * z.size * math.log(2 * math.pi))


@dataclass(frozen=True)
class ChainConfig:
    num_iters: int
    init_theta: tuple[float, ...] | np.ndarray | None = None
    seed: int = 0
    subsample_r: int = 100
    size_rule: SizeRule = field(default_factory=SizeRule)

    def __post_init__(self):
        if self.num_iters < 1:
            raise ValueError("num_iters must be at least 1")
        if self.subsample_r < 1:
            raise ValueError("subsample_r must be at least 1")


@dataclass
class ChainRun:
    """Draws theta_1..theta_N with per-iteration telemetry.

    ``subsample_sizes`` holds the number of likelihood terms used for the
    decision: ``n`` for the full-data sampler, the final (possibly augmented)
    size for subsampled ones, 0 when the prior short-circuited a rejection.
    """

    draws: np.ndarray
    accepted: np.ndarray
    subsample_sizes: np.ndarray
    n: int

    @property
    def num_iters(self) -> int:
        return self.draws.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accepted))

    def subsample_fractions(self) -> np.ndarray:
        return self.subsample_sizes / self.n

    def to_csv(self, path) -> None:
        p = self.draws.shape[1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iteration", *(f"theta_{j}" for j in range(p)), "accepted", "subsample_size"])
            for k in range(self.num_iters):
                writer.writerow(
                    [k + 1, *(repr(float(v)) for v in self.draws[k]), int(self.accepted[k]), int(self.subsample_sizes[k])]
                )

    @classmethod
    def from_csv(cls, path, n: int) -> "ChainRun":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        body = rows[1:]
        draws = np.array([[float(v) for v in row[1:-2]] for row in body])
        accepted = np.array([row[-2] == "1" for row in body])
        sizes = np.array([int(row[-1]) for row in body], dtype=np.int64)
        return cls(draws=draws.reshape(len(body), -1), accepted=accepted, subsample_sizes=sizes, n=n)

    def save(self, path) -> None:
        np.savez_compressed(
            path, draws=self.draws, accepted=self.accepted, subsample_sizes=self.subsample_sizes, n=self.n
        )

    @classmethod
    def load(cls, path) -> "ChainRun":
        with np.load(path) as z:
            return cls(
                draws=z["draws"], accepted=z["accepted"], subsample_sizes=z["subsample_sizes"], n=int(z["n"])
            )


def chain_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """(proposal, uniform, subsample) generators for one chain."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.default_rng(c) for c in children)


# An estimator takes (theta, theta_prime, psi, rng) and returns
# (lambda_estimate, terms_used).
Estimator = Callable[[np.ndarray, np.ndarray, float, np.random.Generator], tuple[float, int]]


def _drive(model: ModelSpec, data: np.ndarray, proposal: RandomWalk, cfg: ChainConfig,
           estimate: Estimator, on_accept: Callable[[], None] | None = None) -> ChainRun:
    n = data.shape[0]
    p = model.param_dim
    if cfg.init_theta is None:
        theta = np.asarray(model.mle(data), dtype=float)
    else:
        theta = np.array(cfg.init_theta, dtype=float).reshape(p)

    prop_rng, u_rng, sub_rng = chain_streams(cfg.seed)
    N = cfg.num_iters
    steps = np.asarray(proposal.scale, dtype=float) * prop_rng.standard_normal((N, p))
    log_u = np.log(1.0 - u_rng.random(N))

    draws = np.empty((N, p))
    accepted = np.zeros(N, dtype=bool)
    sizes = np.zeros(N, dtype=np.int64)
    lp_cur = model.log_prior(theta)
    symmetric = getattr(proposal, "symmetric", False)
    for k in range(N):
        theta_p = theta + steps[k]
        lp_new = model.log_prior(theta_p)
        if lp_new == -math.inf:
            draws[k] = theta
            continue
        if symmetric:
            lq = 0.0
        else:
            lq = proposal.log_q(theta_p, theta) - proposal.log_q(theta, theta_p)
        psi = (log_u[k] + lp_cur + lq - lp_new) / n
        lam, used = estimate(theta, theta_p, psi, sub_rng)
        sizes[k] = used
        if lam > psi:
            theta = theta_p
            lp_cur = lp_new
            accepted[k] = True
            if on_accept is not None:
                on_accept()
        draws[k] = theta
    return ChainRun(draws=draws, accepted=accepted, subsample_sizes=sizes, n=n)


def standard_mh(model: ModelSpec, data: np.ndarray, proposal: RandomWalk, cfg: ChainConfig) -> ChainRun:
    """Full-data random-walk MH in the per-datum log form: accept iff Lambda_n > psi."""
    n = data.shape[0]
    state = {"cur": None, "new": None}

    def estimate(theta, theta_p, psi, rng):
        if state["cur"] is None:
            state["cur"] = full_loglik(model, data, theta)
        state["new"] = full_loglik(model, data, theta_p)
        return state["new"] - state["cur"], n

    def on_accept():
        state["cur"] = state["new"]

    return _drive(model, data, proposal, cfg, estimate, on_accept)


# Fixed-size samplers draw indices for several iterations at once; the block
# length depends only on r, so streams stay reproducible.
_BLOCK_DRAWS = 8192


def _fixed_size_estimator(model: ModelSpec, data: np.ndarray, weights: SubsampleWeights, r: int) -> Estimator:
    table = weights.alias_table
    inv = weights.inv_n_eta
    logp = model.log_density
    block = max(1, _BLOCK_DRAWS // r)
    buf = {"rows": None, "w": None, "pos": block}

    def estimate(theta, theta_p, psi, rng):
        if buf["pos"] == block:
            idx = table.draw(rng, block * r).reshape(block, r)
            buf["rows"] = data[idx]
            buf["w"] = inv[idx]
            buf["pos"] = 0
        rows = buf["rows"][buf["pos"]]
        w = buf["w"][buf["pos"]]
        buf["pos"] += 1
        ell = np.sum(logp(rows, theta) * w) / r
        ell_p = np.sum(logp(rows, theta_p) * w) / r
        return ell_p - ell, r

    return estimate


def mlo_subsampled_mh(model: ModelSpec, data: np.ndarray, proposal: RandomWalk,
                      weights: SubsampleWeights, cfg: ChainConfig) -> ChainRun:
    """Subsampled MH with fixed size ``cfg.subsample_r`` drawn from ``weights``.

    One index sample per iteration serves both ends of the log-likelihood
    difference.  ``weights`` are built once, normally at the MLE.
    """
    if weights.n != data.shape[0]:
        raise ValueError("weights and data disagree on n")
    return _drive(model, data, proposal, cfg, _fixed_size_estimator(model, data, weights, cfg.subsample_r))


def uniform_subsampled_mh(model: ModelSpec, data: np.ndarray, proposal: RandomWalk, cfg: ChainConfig) -> ChainRun:
    return mlo_subsampled_mh(model, data, proposal, uniform_weights(data.shape[0]), cfg)


def merge_block_estimates(old_mean: float, old_size: int, new_block_sum_weighted: float, new_total: int) -> float:
    """Pooled mean after appending ``new_total - old_size`` weighted terms."""
    if new_total <= old_size:
        raise ValueError("new_total must exceed old_size")
    return new_block_sum_weighted / new_total + (old_size / new_total) * old_mean


def adaptive_target_size(lam: float, psi: float, mean_sq_diff: float, rule: SizeRule) -> int:
    """Subsample size requested after the pilot block, capped at ``rule.r_max``.

    The tolerance is half the gap between the pilot estimate and the
    threshold; a zero gap saturates to the cap.
    """
    c_r = abs(lam - psi) / 2.0
    if c_r == 0.0:
        return rule.r_max
    value = (rule.z_crit / c_r) ** 2 * mean_sq_diff
    if not value < rule.r_max:
        return rule.r_max
    return max(1, math.ceil(value))


def adaptive_mlo_mh(model: ModelSpec, data: np.ndarray, proposal: RandomWalk,
                    weights: SubsampleWeights, cfg: ChainConfig) -> ChainRun:
    """MLO subsampled MH whose per-iteration size follows a CLT-based rule.

    Each iteration starts from a pilot block of ``cfg.subsample_r`` draws.  If
    the estimated required size exceeds it, more indices are drawn from the
    same weights up to ``min(required, r_max)`` and the estimates pooled.
    """
    if weights.n != data.shape[0]:
        raise ValueError("weights and data disagree on n")
    rule = cfg.size_rule
    r0 = cfg.subsample_r
    if r0 > rule.r_max:
        raise ValueError("initial subsample size exceeds r_max")
    table = weights.alias_table
    inv = weights.inv_n_eta
    logp = model.log_density

    def estimate(theta, theta_p, psi, rng):
        idx = table.draw(rng, r0)
        rows = data[idx]
        w = inv[idx]
        a = logp(rows, theta) * w
        b = logp(rows, theta_p) * w
        ell = np.sum(a) / r0
        ell_p = np.sum(b) / r0
        lam = ell_p - ell
        d = b - a
        target = adaptive_target_size(lam, psi, float(np.sum(d * d)) / r0, rule)
        if r0 < target:
            extra = table.draw(rng, target - r0)
            rows = data[extra]
            w = inv[extra]
            ell = merge_block_estimates(ell, r0, float(np.sum(logp(rows, theta) * w)), target)
            ell_p = merge_block_estimates(ell_p, r0, float(np.sum(logp(rows, theta_p) * w)), target)
            lam = ell_p - ell
            return lam, target
        return lam, r0

    return _drive(model, data, proposal, cfg, estimate)
