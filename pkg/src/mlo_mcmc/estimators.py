"""Subsampled log-likelihood estimators, accept thresholds and size rules.

Everything works on the mean log-likelihood scale
``ell_n(theta) = (1/n) sum_i log p(x_i | theta)`` and in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .models import ModelSpec, full_loglik
from .weights import SubsampleWeights, mlo_weights


class PriorZero(ValueError):
    """The proposed parameter has zero prior density; reject outright."""


@dataclass(frozen=True)
class SizeRule:
    """Two-sided error probability ``delta`` and cap ``r_max`` for CLT-based subsample sizing."""

    delta: float = 0.05
    r_max: int = 5000
    z_crit: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.r_max < 1:
            raise ValueError("r_max must be at least 1")
        object.__setattr__(self, "z_crit", float(norm.isf(self.delta / 2.0)))


def subsampled_loglik(model: ModelSpec, data, idx, weights: SubsampleWeights, theta) -> float:
    idx = np.asarray(idx)
    terms = model.log_density(data[idx], np.asarray(theta, dtype=float)) * weights.inv_n_eta[idx]
    return float(np.mean(terms))


def lambda_full(model: ModelSpec, data, theta, theta_prime) -> float:
    return full_loglik(model, data, theta_prime) - full_loglik(model, data, theta)


def lambda_star(model: ModelSpec, data, idx, weights: SubsampleWeights, theta, theta_prime) -> float:
    """Subsampled log-likelihood difference; both ends share ``idx``."""
    return subsampled_loglik(model, data, idx, weights, theta_prime) - subsampled_loglik(
        model, data, idx, weights, theta
    )


def psi_threshold(u: float, model: ModelSpec, proposal, theta, theta_prime, n: int) -> float:
    """Per-datum log threshold that ``lambda_full`` must exceed to accept.

    ``proposal`` needs ``log_q(to, frm)``; pass ``None`` for a symmetric
    kernel.
    """
    if not 0.0 < u <= 1.0:
        raise ValueError("u must lie in (0, 1]")
    theta = np.asarray(theta, dtype=float)
    theta_prime = np.asarray(theta_prime, dtype=float)
    lp_new = model.log_prior(theta_prime)
    if lp_new == -math.inf:
        raise PriorZero("log-prior is -inf at the proposed value")
    log_ratio_q = 0.0
    if proposal is not None:
        log_ratio_q = proposal.log_q(theta_prime, theta) - proposal.log_q(theta, theta_prime)
    return (math.log(u) + model.log_prior(theta) + log_ratio_q - lp_new) / n


def weighted_second_moment(values, eta) -> float:
    """(1/n^2) sum_i v_i^2 / eta_i, the single-draw second moment of v_I / (n eta_I)."""
    values = np.asarray(values, dtype=float)
    eta = np.asarray(eta, dtype=float)
    n = values.shape[0]
    return float(np.sum(values * values / eta)) / (n * n)


def estimator_variance(model: ModelSpec, data, weights: SubsampleWeights, theta) -> float:
    """Variance of the single-draw (r = 1) estimator of ell_n; divide by r for r draws."""
    logp = model.log_density(data, np.asarray(theta, dtype=float))
    ell = math.fsum(logp) / data.shape[0]
    return max(weighted_second_moment(logp, weights.eta) - ell * ell, 0.0)


def lambda_star_variance(model: ModelSpec, data, weights_mlo: SubsampleWeights, theta, theta_prime, r: int) -> float:
    """Subsampling spread of ``lambda_star`` under weights fixed at the MLE.

    This is the second moment form (1/r)(1/n^2) sum_i d_i^2 / eta_i with
    ``d_i`` the per-point log-density difference; it omits the squared mean
    difference, which is negligible for nearby ``theta``, ``theta_prime``.
    """
    diff = model.log_density(data, np.asarray(theta, dtype=float)) - model.log_density(
        data, np.asarray(theta_prime, dtype=float)
    )
    return weighted_second_moment(diff, weights_mlo.eta) / r


def _size_from_real(value: float) -> int:
    return max(1, math.ceil(value))


def required_size_full(
    model: ModelSpec,
    data,
    theta,
    theta_prime,
    theta_hat,
    c_r: float,
    rule: SizeRule,
    *,
    rounded: bool = True,
):
    """Subsample size needed for |lambda_star - lambda_full| <= c_r w.p. 1 - delta.

    Needs the full data, so it serves as a reference for
    :func:`required_size_estimate`.  With ``rounded=False`` the real-valued
    size is returned.
    """
    if not c_r > 0:
        raise ValueError("c_r must be positive")
    weights = mlo_weights(model, data, theta_hat)
    value = (rule.z_crit / c_r) ** 2 * lambda_star_variance(model, data, weights, theta, theta_prime, 1)
    return _size_from_real(value) if rounded else value


def required_size_estimate(
    model: ModelSpec,
    data,
    idx,
    weights: SubsampleWeights,
    theta,
    theta_prime,
    c_r: float,
    rule: SizeRule,
    *,
    rounded: bool = True,
):
    """Subsample estimate of :func:`required_size_full` from a pilot draw ``idx``."""
    if not c_r > 0:
        raise ValueError("c_r must be positive")
    idx = np.asarray(idx)
    rows = data[idx]
    diff = (
        model.log_density(rows, np.asarray(theta, dtype=float))
        - model.log_density(rows, np.asarray(theta_prime, dtype=float))
    ) * weights.inv_n_eta[idx]
    value = (rule.z_crit / c_r) ** 2 * float(np.mean(diff * diff))
    return _size_from_real(value) if rounded else value


def concentration_bound(model: ModelSpec, data, theta, theta_prime, r: int, delta_r: float) -> float:
    """Hoeffding-Serfling style error bound for uniform subsampling without replacement.

    Scans the full data for the range constant, so it is a diagnostic only.
    """
    n = data.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"r must satisfy 1 <= r <= n={n}, got {r}")
    if not 0.0 < delta_r < 1.0:
        raise ValueError("delta_r must lie in (0, 1)")
    diff = model.log_density(data, np.asarray(theta_prime, dtype=float)) - model.log_density(
        data, np.asarray(theta, dtype=float)
    )
    c_range = float(np.max(np.abs(diff)))
    frac = (r - 1) / n
    return c_range * math.sqrt(2.0 * (1.0 - frac) * math.log(2.0 / delta_r) / r)
