"""Gaussian-kernel density models of feature values at candidate locations.

One univariate model per (candidate location, feature); the positioning
posterior factorizes over features, so nothing multivariate is needed.
Evaluation stays in the log domain to survive products of many small
densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

# Fallback bandwidth (dBm) for degenerate samples; nearest-neighbor
# gridding routinely produces locations whose pooled values are identical.
BANDWIDTH_FLOOR = 1.0

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class DensityModel:
    centers: np.ndarray
    bandwidth: float

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64)
        if centers.ndim != 1 or len(centers) == 0:
            raise ValueError("need at least one center")
        if not (self.bandwidth > 0 and np.isfinite(self.bandwidth)):
            raise ValueError("bandwidth must be positive and finite")
        object.__setattr__(self, "centers", centers)


def scott_bandwidth(values: np.ndarray, floor: float = BANDWIDTH_FLOOR) -> float:
    """Scott's rule sigma_hat * n^(-1/5), floored for degenerate samples."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    sigma = float(values.std(ddof=1)) if n > 1 else 0.0
    return max(sigma * n ** (-0.2), floor)


def kde_fit(values: np.ndarray, floor: float = BANDWIDTH_FLOOR) -> DensityModel:
    """Fit a Gaussian-kernel density to a non-empty sample of feature values."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or len(values) == 0:
        raise ValueError("values must be a non-empty vector")
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    return DensityModel(values, scott_bandwidth(values, floor))


def kde_logpdf(model: DensityModel, x: float) -> float:
    """Log density: log-sum-exp over centers, stable far into the tails."""
    if not np.isfinite(x):
        raise ValueError("x must be finite")
    z = -0.5 * ((x - model.centers) / model.bandwidth) ** 2
    return float(
        logsumexp(z)
        - math.log(len(model.centers))
        - math.log(model.bandwidth)
        - _LOG_SQRT_2PI
    )


def batch_scott_bandwidths(samples: np.ndarray, floor: float = BANDWIDTH_FLOOR) -> np.ndarray:
    """Scott bandwidth per column of an (n, F) sample matrix."""
    n = samples.shape[0]
    sigma = samples.std(axis=0, ddof=1) if n > 1 else np.zeros(samples.shape[1])
    return np.maximum(sigma * n ** (-0.2), floor)


def batch_logpdf(
    centers: np.ndarray,
    valid: np.ndarray,
    counts: np.ndarray,
    bandwidths: np.ndarray,
    x: float,
) -> np.ndarray:
    """Row-wise Gaussian-mixture log density at a single point x.

    `centers` is (R, P) with padding columns; `valid` is the matching 0/1
    float mask, `counts` the per-row number of real centers and
    `bandwidths` the per-row kernel width. Equivalent to kde_logpdf row by
    row, vectorized for the online scoring loop.
    """
    bw = bandwidths[:, None]
    z = -0.5 * ((x - centers) / bw) ** 2
    return (
        logsumexp(z, axis=1, b=valid)
        - np.log(counts)
        - np.log(bandwidths)
        - _LOG_SQRT_2PI
    )
