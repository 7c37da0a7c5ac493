"""Synthetic data generators and CSV ingestion.

All generators return ``(n, d)`` arrays in the row layout the models expect.
"""

from __future__ import annotations

import csv

import numpy as np


class ParseError(ValueError):
    """A CSV cell or header could not be interpreted."""


class NonBinaryLabel(ValueError):
    """The label column holds something other than 0/1."""


def generate_gaussian_mean_data(n: int, mu_true: float, seed: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    return rng.normal(mu_true, 1.0, size=(n, 1))


def generate_gaussian_precision_data(n: int, tau_true: float, seed: int) -> np.ndarray:
    """Zero-mean Gaussian draws with precision ``tau_true``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not tau_true > 0:
        raise ValueError("tau_true must be positive")
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, 1.0 / np.sqrt(tau_true), size=(n, 1))


def generate_logistic_data(n: int, theta_true, seed: int, intercept: bool = False) -> np.ndarray:
    """Standard-normal covariates and Bernoulli-logit labels.

    With ``intercept`` the first entry of ``theta_true`` is the constant term
    and no column of ones is stored.
    """
    theta = np.asarray(theta_true, dtype=float).ravel()
    if theta.size < 1 + int(intercept):
        raise ValueError("theta_true too short")
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    slopes = theta[1:] if intercept else theta
    z = rng.standard_normal((n, slopes.size))
    eta = z @ slopes + (theta[0] if intercept else 0.0)
    prob = 0.5 * (1.0 + np.tanh(0.5 * eta))
    y = (rng.random(n) < prob).astype(float)
    return np.column_stack([z, y])


def _column_index(header: list[str], col) -> int:
    if isinstance(col, int):
        if not 0 <= col < len(header):
            raise ParseError(f"column index {col} out of range (file has {len(header)} columns)")
        return col
    try:
        return header.index(col)
    except ValueError:
        raise ParseError(f"column {col!r} not found in header {header}") from None


def load_csv_dataset(
    path,
    label_column,
    covariate_columns,
    standardize: bool = False,
    add_intercept: bool = False,
) -> np.ndarray:
    """Read a headed CSV into logistic rows ``(covariates..., label)``.

    Columns may be given by header name or 0-based index.  ``standardize``
    centres and scales each covariate to unit SD (population normalisation);
    ``add_intercept`` puts a column of ones in front of the covariates.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        cov_idx = [_column_index(header, c) for c in covariate_columns]
        lab_idx = _column_index(header, label_column)
        rows = []
        for line_no, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise ParseError(f"{path}: row {line_no} has {len(record)} fields, expected {len(header)}")
            values = []
            for j in (*cov_idx, lab_idx):
                try:
                    values.append(float(record[j]))
                except ValueError:
                    raise ParseError(f"{path}: row {line_no}, column {header[j]!r}: cannot parse {record[j]!r}") from None
            rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{path}: non-finite values")
    z, y = arr[:, :-1], arr[:, -1]
    bad = ~((y == 0.0) | (y == 1.0))
    if bad.any():
        first = int(np.argmax(bad))
        raise NonBinaryLabel(f"{path}: row {first + 2} label {y[first]!r} is not 0/1")
    if standardize:
        sd = z.std(axis=0)
        if np.any(sd == 0):
            raise ParseError(f"{path}: constant covariate cannot be standardized")
        z = (z - z.mean(axis=0)) / sd
    if add_intercept:
        z = np.column_stack([np.ones(z.shape[0]), z])
    return np.column_stack([z, y])
