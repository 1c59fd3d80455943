"""Bootstrap estimation of the algorithmic standard deviation sigma_t.

The classifiers of an ensemble are resampled by resampling the rows of its
prediction array. Each replicate draws t row indices with replacement,
recomputes the (total or class-wise) error rate of the resampled array, and the
spread of those replicate values estimates sigma_t. In OOB mode a resampled row
brings its own OOB membership row along with it.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import norm

from .config import DEFAULT_B
from .ensemble import (HOLDOUT, MODES, OobMask, PredictionArray, TruthLabels, check_alignment,
                       column_votes, error_rate, classwise_error_rate, resolve_mask, vote_counts)
from .errors import ConfigError, DomainError, EmptyClassError
from .utils import parallel_map, spawn_rng

logger = logging.getLogger(__name__)

# Phi^-1(3/4) - Phi^-1(1/4), the interquartile range of a standard normal
IQR_NORMAL = float(norm.ppf(0.75) - norm.ppf(0.25))


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = DEFAULT_B
    seed: int = 0
    mode: str = HOLDOUT
    target_class: Optional[int] = None

    def __post_init__(self):
        if int(self.B) < 2:
            raise ConfigError(f"B must be at least 2, got {self.B}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


@dataclass
class SigmaEstimate:
    replicates: np.ndarray
    sigma_hat: float
    t: int
    err_hat: Optional[float] = None
    sigma_iqr: Optional[float] = None
    centered_quantiles: Dict[float, float] = field(default_factory=dict)

    @property
    def three_sigma(self) -> float:
        return 3.0 * self.sigma_hat


def resample_rows(t: int, seed: int, replicate: int) -> np.ndarray:
    """Row indices drawn for one replicate; the stream depends only on (seed, replicate)"""
    rng = spawn_rng(seed, replicate)
    return rng.integers(0, t, size=t)


def bootstrap_replicates(array: PredictionArray, truth: TruthLabels, mask: Optional[OobMask] = None,
                         config: BootstrapConfig = BootstrapConfig(),
                         threads: Optional[int] = None) -> np.ndarray:
    """z_1..z_B, the error rates of B row-resampled copies of the array"""
    resolve_mask(config.mode, mask)
    check_alignment(array, truth, mask)

    if config.target_class is not None:
        columns = np.flatnonzero(truth.labels == int(config.target_class))
        if columns.size == 0:
            raise EmptyClassError(f"no evaluation points have truth label {config.target_class}")
    else:
        columns = np.arange(array.m)
    cells = array.cells[:, columns]
    labels = truth.labels[columns]
    bits = mask.bits[:, columns] if mask is not None else None
    t = array.t

    def replicate(b: int) -> float:
        # Multiplicities of the drawn rows; counting with weights equals
        # counting on the materialized resample.
        weights = np.bincount(resample_rows(t, config.seed, b), minlength=t).astype(np.float64)
        votes = column_votes(vote_counts(cells, array.k, mask=bits, weights=weights))
        return np.count_nonzero(votes != labels) / labels.shape[0]

    logger.info("Bootstrapping %d replicates (t=%d, m=%d, mode=%s)", config.B, t, columns.size, config.mode)
    values = parallel_map(replicate, range(int(config.B)), threads)
    return np.asarray(values, dtype=np.float64)


def sigma_hat(replicates: Sequence[float]) -> float:
    """Sample standard deviation with denominator B - 1"""
    values = np.asarray(replicates, dtype=np.float64)
    if values.size < 2:
        raise ConfigError("at least two replicates are needed for a standard deviation")
    if np.ptp(values) == 0:
        return 0.0
    return float(np.std(values, ddof=1))


def column_sigma(paths: np.ndarray) -> np.ndarray:
    """Column-wise sigma_hat of a (runs, t) matrix; constant columns give exactly 0"""
    paths = np.asarray(paths, dtype=np.float64)
    if paths.shape[0] < 2:
        raise ConfigError("at least two runs are needed for a standard deviation")
    sigma = np.std(paths, axis=0, ddof=1)
    sigma[np.ptp(paths, axis=0) == 0] = 0.0
    return sigma


def _check_probs(probs: Sequence[float]) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if np.any((probs <= 0) | (probs >= 1)):
        raise DomainError("quantile probabilities must lie strictly between 0 and 1")
    return probs


def centered_quantiles(replicates: Sequence[float], probs: Sequence[float]) -> np.ndarray:
    """Quantiles of z_b - mean(z).

    Linear interpolation between order statistics at rank p*(B-1)+1.
    """
    probs = _check_probs(probs)
    values = np.asarray(replicates, dtype=np.float64)
    if values.size and np.ptp(values) == 0:
        return np.zeros(probs.size)
    return np.quantile(values - values.mean(), probs, method="linear")


def sigma_from_iqr(replicates: Sequence[float]) -> float:
    """Interquartile range of the replicates divided by that of a standard normal"""
    values = np.asarray(replicates, dtype=np.float64)
    if values.size < 4:
        raise ConfigError("at least four replicates are needed for the IQR estimate")
    q1, q3 = np.quantile(values, [0.25, 0.75], method="linear")
    return float(q3 - q1) / IQR_NORMAL


def extrapolate_sigma(sigma0: float, t0: int, t: int) -> float:
    """sqrt(t0 / t) * sigma0"""
    if t0 < 1 or t < 1:
        raise DomainError("ensemble sizes must be at least 1")
    if sigma0 < 0:
        raise DomainError("sigma0 must be non-negative")
    return math.sqrt(t0 / t) * sigma0


def min_trees_for_tolerance(sigma0: float, t0: int, eps: float) -> int:
    """Smallest t with 3 * extrapolate_sigma(sigma0, t0, t) <= eps.

    Starts from ceil(9 * t0 * sigma0^2 / eps^2) and nudges by one so that the
    answer agrees with extrapolate_sigma under floating point.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    if t0 < 1:
        raise DomainError("t0 must be at least 1")
    if sigma0 < 0:
        raise DomainError("sigma0 must be non-negative")
    if sigma0 == 0:
        return 0

    def meets(t: int) -> bool:
        return 3.0 * extrapolate_sigma(sigma0, t0, t) <= eps

    candidate = max(1, math.ceil(9.0 * t0 * sigma0 * sigma0 / (eps * eps)))
    while candidate > 1 and meets(candidate - 1):
        candidate -= 1
    while not meets(candidate):
        candidate += 1
    return candidate


def relative_stopping(sigma_hat_value: float, err_hat: float, eta: float) -> bool:
    """True when sigma_hat <= eta * err_hat"""
    if not 0 < eta < 1:
        raise DomainError("eta must lie strictly between 0 and 1")
    return sigma_hat_value <= eta * err_hat


def estimate_sigma(array: PredictionArray, truth: TruthLabels, mask: Optional[OobMask] = None,
                   config: BootstrapConfig = BootstrapConfig(), probs: Sequence[float] = (),
                   threads: Optional[int] = None) -> SigmaEstimate:
    """Replicates plus every statistic derived from them"""
    replicates = bootstrap_replicates(array, truth, mask, config, threads)
    if config.target_class is not None:
        err_hat = classwise_error_rate(array, truth, config.target_class, config.mode, mask)
    else:
        err_hat = error_rate(array, truth, config.mode, mask)
    quantiles = {}
    if len(probs):
        quantiles = dict(zip((float(p) for p in probs), centered_quantiles(replicates, probs).tolist()))
    return SigmaEstimate(
        replicates=replicates,
        sigma_hat=sigma_hat(replicates),
        t=array.t,
        err_hat=err_hat,
        sigma_iqr=sigma_from_iqr(replicates) if replicates.size >= 4 else None,
        centered_quantiles=quantiles,
    )


def extrapolation_table(sigma0: float, t0: int, targets: Sequence[int]) -> List[Dict]:
    return [{'t': int(t), 'sigma': extrapolate_sigma(sigma0, t0, int(t))} for t in targets]
