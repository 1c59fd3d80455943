"""Synthetic two-class datasets: correlated Gaussians and multinomial counts."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .trainer import Dataset
from .utils import spawn_rng

N_SHIFTED = 10
SHIFT = 0.05
N_BALLS = 100
N_CELLS = 100
DISCRETE_NOISE = 300.0

DESIGN_STREAM = 0
SAMPLE_STREAM = 1


def haar_orthogonal(p: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix from the QR factors of a Gaussian matrix"""
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    return q * np.sign(np.diag(r))


@dataclass(frozen=True)
class ContinuousDesign:
    """N(0, Sigma) against N(mu1, Sigma) with Sigma = U diag(1/j^2) U^T"""

    mu1: np.ndarray
    rotation: np.ndarray

    @property
    def p(self) -> int:
        return self.mu1.size

    @property
    def eigenvalues(self) -> np.ndarray:
        return 1.0 / np.arange(1, self.p + 1, dtype=np.float64) ** 2

    @property
    def sigma(self) -> np.ndarray:
        return (self.rotation * self.eigenvalues) @ self.rotation.T

    def sample(self, n_per_class: int, rng: np.random.Generator) -> Dataset:
        if n_per_class < 1:
            raise DomainError("n_per_class must be at least 1")
        root = self.rotation * np.sqrt(self.eigenvalues)
        noise = rng.standard_normal((2 * n_per_class, self.p)) @ root.T
        labels = np.repeat([0, 1], n_per_class)
        features = noise + np.outer(labels, self.mu1)
        return Dataset(features, labels, 2)


def continuous_design(p: int = 100, seed: int = 0) -> ContinuousDesign:
    if p < N_SHIFTED:
        raise DomainError(f"p must be at least {N_SHIFTED}, got {p}")
    rng = spawn_rng(seed, DESIGN_STREAM)
    mu1 = np.zeros(p)
    mu1[rng.choice(p, size=N_SHIFTED, replace=False)] = SHIFT
    return ContinuousDesign(mu1, haar_orthogonal(p, rng))


def gen_synthetic_continuous(n_per_class: int, p: int = 100, seed: int = 0,
                             design: Optional[ContinuousDesign] = None) -> Dataset:
    """Two Gaussian classes sharing a covariance; pass ``design`` to draw more data from the same pair"""
    design = design or continuous_design(p, seed)
    return design.sample(n_per_class, spawn_rng(seed, SAMPLE_STREAM))


@dataclass(frozen=True)
class DiscreteDesign:
    p0: np.ndarray
    p1: np.ndarray

    def sample(self, n_per_class: int, rng: np.random.Generator) -> Dataset:
        if n_per_class < 1:
            raise DomainError("n_per_class must be at least 1")
        features = np.vstack([rng.multinomial(N_BALLS, self.p0, size=n_per_class),
                              rng.multinomial(N_BALLS, self.p1, size=n_per_class)])
        return Dataset(features, np.repeat([0, 1], n_per_class), 2)


def discrete_design(seed: int = 0) -> DiscreteDesign:
    rng = spawn_rng(seed, DESIGN_STREAM)
    p0 = np.full(N_CELLS, 1.0 / N_CELLS)
    shifted = np.abs(p0 + rng.standard_normal(N_CELLS) / DISCRETE_NOISE)
    return DiscreteDesign(p0, shifted / shifted.sum())


def gen_synthetic_discrete(n_per_class: int, seed: int = 0, design: Optional[DiscreteDesign] = None) -> Dataset:
    design = design or discrete_design(seed)
    return design.sample(n_per_class, spawn_rng(seed, SAMPLE_STREAM))
