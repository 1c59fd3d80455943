"""Prediction arrays, plurality voting and hold-out / OOB / class-wise error rates.

Labels are dense integers 0..k-1. A vote outcome is either a label or the tie
sentinel, which is encoded as the reserved value ``k``; since no truth label
can equal ``k``, a tie always counts as an error. Empty vote sets (an empty
column, or a column whose OOB mask is all false) are ties as well.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import DimensionError, DomainError, EmptyClassError, UsageError

HOLDOUT = "holdout"
OOB = "oob"
MODES = (HOLDOUT, OOB)


def tie_value(k: int) -> int:
    """The reserved outcome that denotes a tie for a k-class problem"""
    return int(k)


def _readonly(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class PredictionArray:
    """t x m matrix of predicted labels; row i is classifier i, column j is point j"""

    cells: np.ndarray
    k: int

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim != 2:
            raise DimensionError(f"prediction array must be 2-D, got shape {cells.shape}")
        if cells.shape[0] < 1 or cells.shape[1] < 1:
            raise DimensionError(f"prediction array needs t >= 1 and m >= 1, got shape {cells.shape}")
        if int(self.k) < 2:
            raise DomainError(f"class count k must be at least 2, got {self.k}")
        if cells.size and not np.issubdtype(cells.dtype, np.integer):
            if not np.all(np.equal(np.mod(cells, 1), 0)):
                raise DomainError("prediction array cells must be integers")
        cells = cells.astype(np.int64)
        if cells.min() < 0 or cells.max() >= int(self.k):
            raise DomainError(f"prediction array cells must lie in [0, {self.k})")
        object.__setattr__(self, "cells", _readonly(cells))
        object.__setattr__(self, "k", int(self.k))

    @property
    def t(self) -> int:
        return self.cells.shape[0]

    @property
    def m(self) -> int:
        return self.cells.shape[1]

    @property
    def shape(self):
        return self.cells.shape

    def head(self, s: int) -> "PredictionArray":
        """Sub-array made of the first s rows"""
        return PredictionArray(self.cells[:s], self.k)


@dataclass(frozen=True)
class TruthLabels:
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size < 1:
            raise DimensionError("truth labels must be a non-empty 1-D sequence")
        labels = labels.astype(np.int64)
        if labels.min() < 0:
            raise DomainError("truth labels must be non-negative")
        object.__setattr__(self, "labels", _readonly(labels))

    @property
    def m(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class OobMask:
    """bits[i, j] is True when point j is out-of-bag for classifier i"""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise DimensionError(f"OOB mask must be 2-D, got shape {bits.shape}")
        object.__setattr__(self, "bits", _readonly(bits.astype(bool)))

    @property
    def shape(self):
        return self.bits.shape


def check_alignment(array: PredictionArray, truth: TruthLabels, mask: Optional[OobMask] = None) -> None:
    if truth.m != array.m:
        raise DimensionError(f"truth has {truth.m} labels but the array has {array.m} columns")
    if truth.labels.max() >= array.k:
        raise DomainError(f"truth labels must lie in [0, {array.k})")
    if mask is not None and mask.shape != array.shape:
        raise DimensionError(f"OOB mask shape {mask.shape} does not match array shape {array.shape}")


def vote_counts(cells: np.ndarray, k: int, mask: Optional[np.ndarray] = None,
                weights: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-column vote counts, shape (m, k).

    ``mask`` restricts the votes to OOB rows; ``weights`` gives each row a
    multiplicity, which is how a bootstrap resample of rows is counted without
    materializing it.
    """
    counts = np.empty((cells.shape[1], k), dtype=np.float64 if weights is not None else np.int64)
    for label in range(k):
        hits = cells == label
        if mask is not None:
            hits &= mask
        if weights is None:
            counts[:, label] = np.count_nonzero(hits, axis=0)
        else:
            counts[:, label] = weights @ hits.astype(np.float64)
    return counts


def column_votes(counts: np.ndarray) -> np.ndarray:
    """Plurality vote per row of a (m, k) count matrix; non-unique maxima give the tie value k"""
    k = counts.shape[1]
    top = counts.max(axis=1)
    n_top = np.count_nonzero(counts == top[:, None], axis=1)
    return np.where(n_top == 1, counts.argmax(axis=1), tie_value(k))


def plurality_vote(column: Sequence[int], k: int) -> int:
    column = np.asarray(column, dtype=np.int64).reshape(1, -1)
    if column.size and (column.min() < 0 or column.max() >= k):
        raise DomainError(f"labels must lie in [0, {k})")
    return int(column_votes(vote_counts(column.T, k))[0])


def oob_vote(column: Sequence[int], mask_column: Sequence[bool], k: int) -> int:
    column = np.asarray(column, dtype=np.int64)
    mask_column = np.asarray(mask_column, dtype=bool)
    if column.shape != mask_column.shape:
        raise DimensionError("column and mask column must have equal length")
    return plurality_vote(column[mask_column], k)


def _error_fraction(votes: np.ndarray, truth: np.ndarray) -> float:
    return np.count_nonzero(votes != truth) / truth.shape[0]


def _class_columns(truth: TruthLabels, target_class: int) -> np.ndarray:
    columns = np.flatnonzero(truth.labels == int(target_class))
    if columns.size == 0:
        raise EmptyClassError(f"no evaluation points have truth label {target_class}")
    return columns


def error_rate_holdout(array: PredictionArray, truth: TruthLabels) -> float:
    check_alignment(array, truth)
    votes = column_votes(vote_counts(array.cells, array.k))
    return _error_fraction(votes, truth.labels)


def error_rate_oob(array: PredictionArray, truth: TruthLabels, mask: OobMask) -> float:
    check_alignment(array, truth, mask)
    votes = column_votes(vote_counts(array.cells, array.k, mask=mask.bits))
    return _error_fraction(votes, truth.labels)


def resolve_mask(mode: str, mask: Optional[OobMask]) -> Optional[OobMask]:
    if mode not in MODES:
        raise UsageError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == OOB and mask is None:
        raise UsageError("oob mode requires an OOB mask")
    if mode == HOLDOUT and mask is not None:
        raise UsageError("holdout mode does not take an OOB mask")
    return mask


def error_rate(array: PredictionArray, truth: TruthLabels, mode: str = HOLDOUT,
               mask: Optional[OobMask] = None) -> float:
    mask = resolve_mask(mode, mask)
    if mode == OOB:
        return error_rate_oob(array, truth, mask)
    return error_rate_holdout(array, truth)


def classwise_error_rate(array: PredictionArray, truth: TruthLabels, target_class: int,
                         mode: str = HOLDOUT, mask: Optional[OobMask] = None) -> float:
    """Error rate over only the columns whose truth label is target_class"""
    mask = resolve_mask(mode, mask)
    check_alignment(array, truth, mask)
    columns = _class_columns(truth, target_class)
    bits = mask.bits[:, columns] if mask is not None else None
    votes = column_votes(vote_counts(array.cells[:, columns], array.k, mask=bits))
    return _error_fraction(votes, truth.labels[columns])


def prefix_error_curve(array: PredictionArray, truth: TruthLabels, mode: str = HOLDOUT,
                       mask: Optional[OobMask] = None, target_class: Optional[int] = None) -> np.ndarray:
    """Err_s for s = 1..t, the error of the sub-array made of the first s rows.

    Vote counters are updated one row at a time, so the whole curve costs
    O(t * m * k) rather than O(t^2 * m).
    """
    mask = resolve_mask(mode, mask)
    check_alignment(array, truth, mask)
    if target_class is not None:
        columns = _class_columns(truth, target_class)
    else:
        columns = np.arange(array.m)
    cells = array.cells[:, columns]
    labels = truth.labels[columns]
    bits = mask.bits[:, columns] if mask is not None else None

    m = columns.size
    counts = np.zeros((m, array.k), dtype=np.int64)
    positions = np.arange(m)
    curve = np.empty(array.t, dtype=np.float64)
    for s in range(array.t):
        if bits is None:
            counts[positions, cells[s]] += 1
        else:
            hit = bits[s]
            counts[positions[hit], cells[s][hit]] += 1
        curve[s] = _error_fraction(column_votes(counts), labels)
    return curve


def class_sizes(truth: TruthLabels, k: int) -> List[int]:
    return np.bincount(truth.labels, minlength=k).tolist()
