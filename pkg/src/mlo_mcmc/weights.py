"""Subsampling probabilities and with-replacement index draws.

Weights are computed once per dataset, so draws go through a Walker/Vose alias
table: O(n) to build, O(1) per draw.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .models import ModelSpec

#: Relative floor applied to zero scores, as a fraction of the mean score.
SCORE_FLOOR = 1e-12


class AllZeroScores(ValueError):
    """Every |log p(x_i | theta)| is zero; fall back to uniform weights."""


class NonFiniteWeight(ValueError):
    """A weight or score is NaN, infinite or negative."""


@dataclass(frozen=True)
class AliasTable:
    """Vose alias table.

    Cell ``i`` is picked uniformly; it yields ``i`` with probability
    ``prob[i]`` and ``alias[i]`` otherwise.
    """

    prob: np.ndarray
    alias: np.ndarray

    @property
    def n(self) -> int:
        return self.prob.shape[0]

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        cells = rng.integers(0, self.n, size=size)
        coins = rng.random(size)
        return np.where(coins < self.prob[cells], cells, self.alias[cells])

    def probabilities(self) -> np.ndarray:
        """Reconstruct the categorical distribution encoded by the table."""
        n = self.n
        out = self.prob.copy()
        np.add.at(out, self.alias, 1.0 - self.prob)
        return out / n


def build_alias(eta) -> AliasTable:
    eta = np.asarray(eta, dtype=float)
    if eta.ndim != 1 or eta.size == 0:
        raise ValueError("eta must be a non-empty vector")
    if not np.all(np.isfinite(eta)) or np.any(eta < 0):
        raise NonFiniteWeight("eta must be finite and nonnegative")
    total = eta.sum()
    if total <= 0:
        raise NonFiniteWeight("eta sums to zero")
    n = eta.size
    scaled = eta * (n / total)
    prob = np.ones(n)
    alias = np.arange(n)

    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    scaled = scaled.tolist()
    while small and large:
        lo = small.pop()
        hi = large.pop()
        prob[lo] = scaled[lo]
        alias[lo] = hi
        scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0
        if scaled[hi] < 1.0:
            small.append(hi)
        else:
            large.append(hi)
    # leftovers are 1 up to rounding
    for i in small + large:
        prob[i] = 1.0
        alias[i] = i
    prob.setflags(write=False)
    alias.setflags(write=False)
    return AliasTable(prob=prob, alias=alias)


@dataclass(frozen=True)
class SubsampleWeights:
    eta: np.ndarray
    alias_table: AliasTable
    floor_applied: bool = False

    @property
    def n(self) -> int:
        return self.eta.shape[0]

    @property
    def inv_n_eta(self) -> np.ndarray:
        """Per-point estimator weights 1 / (n * eta_i)."""
        return self._inv_n_eta

    def __post_init__(self):
        inv = 1.0 / (self.n * self.eta)
        inv.setflags(write=False)
        object.__setattr__(self, "_inv_n_eta", inv)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["index", "eta"])
            for i, e in enumerate(self.eta):
                writer.writerow([i, repr(float(e))])


def _from_eta(eta: np.ndarray, floor_applied: bool = False) -> SubsampleWeights:
    eta = np.array(eta, dtype=float)
    eta.setflags(write=False)
    return SubsampleWeights(eta=eta, alias_table=build_alias(eta), floor_applied=floor_applied)


def weights_from_scores(scores) -> SubsampleWeights:
    """Normalise nonnegative scores into probabilities (zero scores floored)."""
    scores = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(scores)) or np.any(scores < 0):
        raise NonFiniteWeight("scores must be finite and nonnegative")
    mean = scores.mean()
    if mean == 0.0:
        raise AllZeroScores("all scores are zero")
    floor = SCORE_FLOOR * mean
    floored = scores < floor
    if floored.any():
        scores = np.maximum(scores, floor)
    return _from_eta(scores / scores.sum(), floor_applied=bool(floored.any()))


def mlo_weights(model: ModelSpec, data: np.ndarray, theta_hat) -> SubsampleWeights:
    """Probabilities proportional to |log p(x_i | theta_hat)|.

    ``theta_hat`` is normally the MLE; any fixed value may be passed to study
    sensitivity to the anchor.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    if not np.all(np.isfinite(theta_hat)):
        raise NonFiniteWeight("theta_hat must be finite")
    scores = np.abs(model.log_density(data, theta_hat))
    return weights_from_scores(scores)


def uniform_weights(n: int) -> SubsampleWeights:
    if n < 1:
        raise ValueError("n must be at least 1")
    return _from_eta(np.full(n, 1.0 / n))


def draw_subsample(weights: SubsampleWeights, r: int, rng: np.random.Generator) -> np.ndarray:
    """``r`` i.i.d. indices distributed as ``weights.eta``."""
    if r < 1:
        raise ValueError("r must be at least 1")
    return weights.alias_table.draw(rng, r)
