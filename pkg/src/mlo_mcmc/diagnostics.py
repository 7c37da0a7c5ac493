"""Chain post-processing and replication-level error metrics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict

import numpy as np


class EmptyChain(ValueError):
    """Burn-in and thinning left no draws."""


def burn_thin(run_or_draws, burn: int, thin: int = 1) -> np.ndarray:
    """Keep draws burn+thin, burn+2*thin, ... (1-based iteration numbers)."""
    draws = getattr(run_or_draws, "draws", run_or_draws)
    draws = np.asarray(draws)
    if thin < 1:
        raise ValueError("thin must be at least 1")
    if burn < 0 or burn >= draws.shape[0]:
        raise EmptyChain(f"burn={burn} leaves nothing of a chain of length {draws.shape[0]}")
    kept = draws[burn + thin - 1 :: thin]
    if kept.shape[0] == 0:
        raise EmptyChain("no draws remain after thinning")
    return kept


def hpd_interval(samples, alpha: float = 0.05) -> tuple[float, float]:
    """Shortest window over sorted samples holding ceil((1 - alpha) m) of them.

    Ties go to the leftmost window.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    # guard against (1 - alpha) * m landing a hair above an integer
    k = min(m, max(1, math.ceil((1.0 - alpha) * m - 1e-9)))
    widths = x[k - 1 :] - x[: m - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


@dataclass
class PosteriorSummary:
    names: tuple[str, ...]
    mean: np.ndarray
    sd: np.ndarray
    hpd_lo: np.ndarray
    hpd_hi: np.ndarray
    alpha: float = 0.05

    COLUMNS = ("parameter", "mean", "sd", "hpd_lo", "hpd_hi")

    def rows(self) -> list[dict]:
        return [
            {
                "parameter": name,
                "mean": float(self.mean[j]),
                "sd": float(self.sd[j]),
                "hpd_lo": float(self.hpd_lo[j]),
                "hpd_hi": float(self.hpd_hi[j]),
            }
            for j, name in enumerate(self.names)
        ]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=self.COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in self.rows():
                writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump({"alpha": self.alpha, "rows": self.rows()}, fh, indent=2)
            fh.write("\n")


def posterior_summary(samples, alpha: float = 0.05, names=None) -> PosteriorSummary:
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("need at least two samples")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    p = x.shape[1]
    names = tuple(names) if names is not None else tuple(f"theta_{j}" for j in range(p))
    bounds = np.array([hpd_interval(x[:, j], alpha) for j in range(p)])
    return PosteriorSummary(
        names=names,
        mean=x.mean(axis=0),
        sd=x.std(axis=0, ddof=1),
        hpd_lo=bounds[:, 0],
        hpd_hi=bounds[:, 1],
        alpha=alpha,
    )


@dataclass
class ReplicationReport:
    """Across-replication error of point estimates against the truth.

    ``sd`` is the usual sample standard deviation (1/(B-1) normalisation), so
    ``mse == bias**2 + (B-1)/B * sd**2``.
    """

    bias: np.ndarray
    sd: np.ndarray
    mse: np.ndarray
    B: int

    @property
    def mse_sum(self) -> float:
        return float(np.sum(self.mse))

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in d.items()}


def replication_metrics(estimates, truth) -> ReplicationReport:
    est = np.asarray(estimates, dtype=float)
    if est.ndim == 1:
        est = est[:, None]
    truth = np.asarray(truth, dtype=float).reshape(est.shape[1])
    B = est.shape[0]
    if B < 2:
        raise ValueError("need at least two replications")
    err = est - truth
    return ReplicationReport(
        bias=err.mean(axis=0),
        sd=est.std(axis=0, ddof=1),
        mse=np.mean(err * err, axis=0),
        B=B,
    )


def effective_sample_size(x) -> float:
    """Single-chain ESS with Geyer's initial monotone sequence estimator."""
    x = np.asarray(x, dtype=float).ravel()
    m = x.size
    if m < 4:
        return float(m)
    centred = x - x.mean()
    var = centred @ centred / m
    if var == 0.0:
        return float(m)
    size = 1 << (2 * m - 1).bit_length()
    f = np.fft.rfft(centred, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:m] / m
    rho = acov / var
    # pair sums Gamma_k = rho_2k + rho_2k+1, truncated at the first negative
    # and forced nonincreasing
    n_pairs = (m - 1) // 2
    gamma = rho[0 : 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    neg = np.nonzero(gamma <= 0)[0]
    if neg.size:
        gamma = gamma[: neg[0]]
    gamma = np.minimum.accumulate(gamma)
    tau = -1.0 + 2.0 * gamma.sum()
    return float(m / max(tau, 1.0 / m))
