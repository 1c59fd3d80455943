"""Lifting operator and Bernstein smoothing operator.

``lift`` turns a function on [0, 1] into a map on the simplex by evaluating it
at partial sums of theta and taking successive differences. The vote shares of
a first-order ensemble are the lifted empirical CDF evaluated at theta.
"""
from typing import Callable

import numpy as np
from scipy.stats import binom

from .errors import DomainError


def lift(h: Callable, theta) -> np.ndarray:
    """[L(h)(theta)]_l = h(theta_1 + .. + theta_l) - h(theta_1 + .. + theta_{l-1}).

    The subtrahend of the first coordinate is 0, not h(0). ``theta`` may be a
    single point of length k-1 or a stack of points with shape (n, k-1).
    """
    theta = np.asarray(getattr(theta, "theta", theta), dtype=np.float64)
    partial = np.cumsum(theta, axis=-1)
    values = np.asarray(h(partial), dtype=np.float64)
    lifted = np.empty_like(values)
    lifted[..., 0] = values[..., 0]
    lifted[..., 1:] = np.diff(values, axis=-1)
    return lifted


def bernstein(h: Callable, s: int, u) -> np.ndarray:
    """B_s(h)(u) = sum_j h(j/s) * C(s, j) * u^j * (1-u)^(s-j).

    Basis values come from the binomial pmf, which is evaluated in log space
    and does not overflow for large degrees. Scalar input gives a scalar.
    """
    s = int(s)
    if s < 1:
        raise DomainError("Bernstein degree must be at least 1")
    u = np.asarray(u, dtype=np.float64)
    if np.any((u < 0) | (u > 1)):
        raise DomainError("Bernstein argument must lie in [0, 1]")
    nodes = np.arange(s + 1)
    coefficients = np.asarray(h(nodes / s), dtype=np.float64)
    basis = binom.pmf(nodes[:, None], s, u.reshape(1, -1))
    result = coefficients @ basis
    return result.reshape(u.shape) if u.ndim else float(result[0])


def bernstein_derivative(h: Callable, s: int, u) -> np.ndarray:
    """d/du B_s(h)(u) = s * sum_{j<s} (h((j+1)/s) - h(j/s)) * b_j(u; s-1)"""
    s = int(s)
    if s < 1:
        raise DomainError("Bernstein degree must be at least 1")
    u = np.asarray(u, dtype=np.float64)
    nodes = np.arange(s + 1)
    forward = np.diff(np.asarray(h(nodes / s), dtype=np.float64))
    basis = binom.pmf(np.arange(s)[:, None], s - 1, u.reshape(1, -1))
    result = s * (forward @ basis)
    return result.reshape(u.shape) if u.ndim else float(result[0])


def sup_distance(h: Callable, s: int, grid_size: int = 1000) -> float:
    """max_u |B_s(h)(u) - h(u)| over an evenly spaced grid on [0, 1]"""
    grid = np.linspace(0.0, 1.0, grid_size)
    return float(np.max(np.abs(bernstein(h, s, grid) - np.asarray(h(grid), dtype=np.float64))))
