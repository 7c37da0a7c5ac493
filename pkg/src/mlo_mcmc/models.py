"""Model zoo: per-observation log-densities, priors and maximum likelihood fits.

Data are 2-D float arrays with one observation per row.  Scalar models use a
single column; logistic rows hold the covariates followed by the 0/1 label.
Every ``log_density`` is vectorised over rows: pass an ``(m, d)`` block to get
``m`` values back, or a single ``(d,)`` row to get a scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


class MleDidNotConverge(RuntimeError):
    """Raised when the maximum likelihood fit fails (e.g. separable data)."""


def _identity(draws: np.ndarray) -> np.ndarray:
    return draws


@dataclass(frozen=True)
class ModelSpec:
    """A pluggable target for the samplers.

    ``grad_loglik`` is the gradient of the *mean* log-likelihood, matching the
    1/n convention of :func:`full_loglik`.  ``to_natural`` maps stored draws to
    the scale results are reported on (e.g. log-precision to precision) and
    ``from_natural`` inverts it.
    """

    name: str
    param_dim: int
    log_density: Callable[[np.ndarray, np.ndarray], np.ndarray]
    log_prior: Callable[[np.ndarray], float]
    mle: Callable[[np.ndarray], np.ndarray]
    grad_loglik: Callable[[np.ndarray, np.ndarray], np.ndarray]
    to_natural: Callable[[np.ndarray], np.ndarray] = _identity
    from_natural: Callable[[np.ndarray], np.ndarray] = _identity
    param_names: tuple[str, ...] = field(default=())
    data_width: int | None = None

    def __post_init__(self):
        if not self.param_names:
            names = tuple(f"theta_{j}" for j in range(self.param_dim))
            object.__setattr__(self, "param_names", names)


def as_data(x) -> np.ndarray:
    """Coerce to a finite ``(n, d)`` float array; 1-D input means n scalars."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError(f"data must have at least one row, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("data contains non-finite entries")
    return arr


def full_loglik(model: ModelSpec, data: np.ndarray, theta) -> float:
    """Mean (not sum) of per-observation log-densities.

    Terms are summed in sorted order so the result is bit-identical under any
    permutation of the rows.
    """
    values = model.log_density(data, np.asarray(theta, dtype=float))
    return float(np.sort(np.ravel(values)).sum()) / data.shape[0]


def mle_standard_errors(model: ModelSpec, data: np.ndarray, theta_hat, h: float = 1e-5) -> np.ndarray:
    """Asymptotic standard errors from the observed information at ``theta_hat``.

    The Hessian of the mean log-likelihood comes from central differences of
    ``model.grad_loglik``.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    p = theta_hat.size
    hess = np.empty((p, p))
    for j in range(p):
        e = np.zeros(p)
        e[j] = h
        hess[:, j] = (model.grad_loglik(data, theta_hat + e) - model.grad_loglik(data, theta_hat - e)) / (2 * h)
    info = -0.5 * (hess + hess.T) * data.shape[0]
    return np.sqrt(np.diag(np.linalg.inv(info)))


# --------------------------------------------------------------------------
# Gaussian mean, unit variance
# --------------------------------------------------------------------------


def gaussian_mean_model(prior_mean: float = 0.0, prior_sd: float = 3.0) -> ModelSpec:
    """N(mu, 1) observations with a N(prior_mean, prior_sd^2) prior on mu."""
    if not prior_sd > 0:
        raise ValueError("prior_sd must be positive")
    prior_const = -0.5 * LOG_2PI - math.log(prior_sd)

    def log_density(x, theta):
        x = np.asarray(x, dtype=float)
        resid = x[..., 0] - theta[0]
        return -0.5 * LOG_2PI - 0.5 * resid * resid

    def log_prior(theta):
        z = (theta[0] - prior_mean) / prior_sd
        return prior_const - 0.5 * z * z

    def mle(data):
        return np.array([np.mean(data[:, 0])])

    def grad_loglik(data, theta):
        return np.array([np.mean(data[:, 0] - theta[0])])

    return ModelSpec(
        name="gaussian_mean",
        param_dim=1,
        log_density=log_density,
        log_prior=log_prior,
        mle=mle,
        grad_loglik=grad_loglik,
        param_names=("mu",),
        data_width=1,
    )


# --------------------------------------------------------------------------
# Gaussian precision, zero mean; parameter stored as rho = log(tau)
# --------------------------------------------------------------------------


def _exp_draws(draws: np.ndarray) -> np.ndarray:
    return np.exp(draws)


def _log_values(values: np.ndarray) -> np.ndarray:
    return np.log(values)


def gaussian_precision_model(gamma_shape: float = 0.01, gamma_rate: float = 0.01) -> ModelSpec:
    """N(0, 1/tau) observations with a Gamma(shape, rate) prior on tau.

    The chain moves on rho = log(tau).  The prior is expressed as a density in
    rho, i.e. the Gamma density at exp(rho) plus the log-Jacobian rho.
    """
    if not (gamma_shape > 0 and gamma_rate > 0):
        raise ValueError("gamma_shape and gamma_rate must be positive")
    prior_const = gamma_shape * math.log(gamma_rate) - math.lgamma(gamma_shape)

    def log_density(x, theta):
        x = np.asarray(x, dtype=float)
        rho = theta[0]
        v = x[..., 0]
        return 0.5 * rho - 0.5 * math.exp(rho) * v * v - 0.5 * LOG_2PI

    def log_prior(theta):
        rho = theta[0]
        return prior_const + gamma_shape * rho - gamma_rate * math.exp(rho)

    def mle(data):
        ss = float(np.sum(data[:, 0] ** 2))
        if ss == 0.0:
            raise MleDidNotConverge("all observations are zero; precision MLE is infinite")
        return np.array([math.log(data.shape[0] / ss)])

    def grad_loglik(data, theta):
        return np.array([0.5 - 0.5 * math.exp(theta[0]) * np.mean(data[:, 0] ** 2)])

    return ModelSpec(
        name="gaussian_precision",
        param_dim=1,
        log_density=log_density,
        log_prior=log_prior,
        mle=mle,
        grad_loglik=grad_loglik,
        to_natural=_exp_draws,
        from_natural=_log_values,
        param_names=("tau",),
        data_width=1,
    )


# --------------------------------------------------------------------------
# Logistic regression
# --------------------------------------------------------------------------


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def newton_logistic(
    design: np.ndarray,
    y: np.ndarray,
    *,
    ridge: float = 1e-8,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> np.ndarray:
    """Newton-Raphson for the logistic MLE on the mean log-likelihood.

    Starts at zero; stops once the sup-norm of the mean-score drops below
    ``tol``.  The ridge only regularises the linear solve, not the objective.
    """
    n, p = design.shape
    theta = np.zeros(p)
    eye = np.eye(p)
    step = np.zeros(p)
    for _ in range(max_iter):
        eta = design @ theta
        prob = _sigmoid(eta)
        grad = design.T @ (y - prob) / n
        if not np.all(np.isfinite(grad)):
            break
        if np.max(np.abs(grad)) < tol:
            # under separation the score vanishes while steps stay O(1)
            if np.max(np.abs(step)) > 1e-3 * (1.0 + np.max(np.abs(theta))):
                raise MleDidNotConverge("coefficients diverge; data look separable")
            return theta
        w = prob * (1.0 - prob)
        info = (design * w[:, None]).T @ design / n
        try:
            step = np.linalg.solve(info + ridge * eye, grad)
        except np.linalg.LinAlgError as exc:
            raise MleDidNotConverge(f"singular information matrix: {exc}") from exc
        theta = theta + step
        if not np.all(np.isfinite(theta)):
            break
    raise MleDidNotConverge(
        f"Newton-Raphson did not reach |grad| < {tol:g} in {max_iter} iterations; "
        "data may be (quasi-)separable or badly scaled"
    )


def logistic_model(
    prior_sd: float = math.sqrt(10.0),
    with_intercept: bool = False,
    n_covariates: int = 2,
) -> ModelSpec:
    """Bernoulli-logit regression with independent N(0, prior_sd^2) priors.

    Rows are ``(z_1, ..., z_k, y)``.  With ``with_intercept`` the model adds
    its own constant term as the first coefficient, so the data need not carry
    a column of ones; the prior covers the intercept as well.
    """
    if not prior_sd > 0:
        raise ValueError("prior_sd must be positive")
    k = int(n_covariates)
    p = k + int(bool(with_intercept))
    prior_var = prior_sd * prior_sd
    prior_const = p * (-0.5 * LOG_2PI - math.log(prior_sd))

    if with_intercept:
        def linpred(x, theta):
            return theta[0] + x[..., :k] @ theta[1:]

        def design_of(data):
            return np.column_stack([np.ones(data.shape[0]), data[:, :k]])
    else:
        def linpred(x, theta):
            return x[..., :k] @ theta

        def design_of(data):
            return data[:, :k]

    def log_density(x, theta):
        x = np.asarray(x, dtype=float)
        eta = linpred(x, theta)
        # log(1 + e^eta) without overflow
        return x[..., k] * eta - np.logaddexp(0.0, eta)

    def log_prior(theta):
        return prior_const - 0.5 * float(theta @ theta) / prior_var

    def grad_loglik(data, theta):
        design = design_of(data)
        prob = _sigmoid(design @ theta)
        return design.T @ (data[:, k] - prob) / data.shape[0]

    def mle(data):
        labels = data[:, k]
        if not np.all((labels == 0.0) | (labels == 1.0)):
            raise ValueError("logistic labels must be exactly 0 or 1")
        return newton_logistic(design_of(data), labels)

    names = (("intercept",) if with_intercept else ()) + tuple(f"beta_{j + 1}" for j in range(k))
    return ModelSpec(
        name="logistic",
        param_dim=p,
        log_density=log_density,
        log_prior=log_prior,
        mle=mle,
        grad_loglik=grad_loglik,
        param_names=names,
        data_width=k + 1,
    )
