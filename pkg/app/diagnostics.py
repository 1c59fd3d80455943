"""Distributional diagnostics: Beta method-of-moments fit, QQ pairs, normality summary."""
import logging
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy import stats

from .errors import DomainError, InfeasibleMomentsError

logger = logging.getLogger(__name__)


def beta_moment_fit(samples: Sequence[float]) -> Tuple[float, float]:
    """(alpha, beta) matching the sample mean and variance"""
    values = np.asarray(samples, dtype=np.float64)
    if values.size < 2:
        raise InfeasibleMomentsError("at least two samples are needed for a moment fit")
    if np.ptp(values) == 0:
        raise InfeasibleMomentsError("constant samples have zero variance")
    mean = float(values.mean())
    var = float(values.var(ddof=1))
    if not 0 < mean < 1:
        raise InfeasibleMomentsError(f"sample mean {mean!r} is outside (0, 1)")
    if var <= 0 or var >= mean * (1 - mean):
        raise InfeasibleMomentsError(f"sample variance {var!r} is not in (0, mean*(1-mean))")
    return moment_fit_from(mean, var)


def moment_fit_from(mean: float, var: float) -> Tuple[float, float]:
    if not 0 < mean < 1 or var <= 0 or var >= mean * (1 - mean):
        raise InfeasibleMomentsError(f"no Beta distribution has mean {mean!r} and variance {var!r}")
    common = mean * (1 - mean) / var - 1
    return mean * common, (1 - mean) * common


def qq_pairs(samples: Sequence[float], alpha: float, beta: float) -> np.ndarray:
    """Sorted samples against Beta(alpha, beta) quantiles at (i - 0.5) / n, shape (n, 2)"""
    values = np.sort(np.asarray(samples, dtype=np.float64))
    if values.size < 1:
        raise DomainError("QQ pairs need at least one sample")
    positions = (np.arange(1, values.size + 1) - 0.5) / values.size
    return np.column_stack([values, stats.beta.ppf(positions, alpha, beta)])


def normality_diagnostics(values: Sequence[float]) -> Dict[str, float]:
    """KS distance to the normal with the sample's mean and standard deviation, plus shape moments"""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 8:
        raise DomainError(f"normality diagnostics need at least 8 values, got {values.size}")
    if np.ptp(values) == 0:
        raise DomainError("normality diagnostics are undefined for zero variance")
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    ks = stats.kstest(values, "norm", args=(mean, std))
    return {
        'n': int(values.size),
        'mean': mean,
        'std': std,
        'ks_stat': float(ks.statistic),
        'skewness': float(stats.skew(values)),
        'excess_kurtosis': float(stats.kurtosis(values, fisher=True)),
    }
