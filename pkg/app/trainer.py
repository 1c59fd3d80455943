"""Bagged CART ensemble with out-of-bag bookkeeping.

Each tree is grown on a bootstrap bag of the training rows. Splits minimize
weighted Gini impurity over ``mtry`` randomly chosen features, thresholds sit
at midpoints between consecutive distinct values, and impurity ties go to the
lowest feature index and then the lowest threshold. Tree i draws its bag and
its feature subsets from the substream (seed, i), so an ensemble does not
depend on how trees are scheduled across threads.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .ensemble import OobMask, PredictionArray, TruthLabels
from .errors import ConfigError, DimensionError, DomainError
from .utils import array_digest, parallel_map, spawn_rng

logger = logging.getLogger(__name__)

LEAF = -1
# Substream index used to shuffle rows into train / hold-out / ground splits
SPLIT_STREAM = 2 ** 33


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    k: int
    class_names: Optional[List[str]] = None
    feature_names: Optional[List[str]] = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if features.ndim != 2 or features.shape[0] < 1:
            raise DimensionError("features must be a non-empty 2-D matrix")
        if labels.shape != (features.shape[0],):
            raise DimensionError(f"{labels.size} labels for {features.shape[0]} feature rows")
        labels = labels.astype(np.int64)
        if labels.min() < 0 or labels.max() >= int(self.k):
            raise DomainError(f"labels must lie in [0, {self.k})")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "k", int(self.k))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, rows: np.ndarray) -> "Dataset":
        return Dataset(self.features[rows], self.labels[rows], self.k, self.class_names, self.feature_names)


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 16
    min_leaf: int = 1
    mtry: Optional[int] = None

    def __post_init__(self):
        if self.max_depth < 1:
            raise ConfigError("max_depth must be at least 1")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be at least 1")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be at least 1")

    def features_per_split(self, p: int) -> int:
        mtry = self.mtry if self.mtry is not None else math.ceil(math.sqrt(p))
        if mtry > p:
            raise ConfigError(f"mtry={mtry} exceeds the number of features p={p}")
        return mtry

    def to_dict(self, p: Optional[int] = None) -> Dict:
        return {'max_depth': self.max_depth, 'min_leaf': self.min_leaf,
                'mtry': self.features_per_split(p) if p is not None else self.mtry}


@dataclass
class DecisionTree:
    """Flat node arrays; ``feature[i] == LEAF`` marks a leaf predicting ``value[i]``"""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    depth: int

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature == LEAF))

    def predict(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        node = np.zeros(points.shape[0], dtype=np.int64)
        rows = np.arange(points.shape[0])
        for _ in range(self.depth):
            feature = self.feature[node]
            internal = feature != LEAF
            if not internal.any():
                break
            goes_left = points[rows, np.where(internal, feature, 0)] <= self.threshold[node]
            node = np.where(internal, np.where(goes_left, self.left[node], self.right[node]), node)
        return self.value[node]

    def predict_one(self, point) -> int:
        node = 0
        while self.feature[node] != LEAF:
            if point[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return int(self.value[node])


def bootstrap_sample(n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """n draws with replacement and the out-of-bag flags they leave"""
    if n < 1:
        raise DomainError("bootstrap_sample needs n >= 1")
    indices = rng.integers(0, n, size=n)
    oob = np.bincount(indices, minlength=n) == 0
    return indices, oob


def best_split(x: np.ndarray, y: np.ndarray, k: int, min_leaf: int) -> Optional[Tuple[float, float]]:
    """(score, threshold) of the best Gini split of one feature, or None.

    ``score`` is sum_l c_l^2 / n_side over both sides, which grows as the
    weighted Gini impurity shrinks. Candidates are scanned in increasing
    threshold order and only a strictly better score replaces the current one.
    """
    n = x.size
    if n < 2 * min_leaf:
        return None
    order = np.argsort(x, kind="stable")
    xs = x[order]
    onehot = np.zeros((n, k), dtype=np.float64)
    onehot[np.arange(n), y[order]] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]
    right = left[-1] + onehot[-1] - left
    n_left = np.arange(1, n, dtype=np.float64)
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None
    score = (left ** 2).sum(axis=1) / n_left + (right ** 2).sum(axis=1) / (n - n_left)
    score = np.where(valid, score, -np.inf)
    position = int(np.argmax(score))
    threshold = 0.5 * (xs[position] + xs[position + 1])
    if threshold >= xs[position + 1]:
        threshold = xs[position]
    return float(score[position]), float(threshold)


def gini_impurity(y: np.ndarray, k: int) -> float:
    if y.size == 0:
        return 0.0
    shares = np.bincount(y, minlength=k) / y.size
    return float(1.0 - np.sum(shares ** 2))


class _TreeBuilder:
    def __init__(self, features: np.ndarray, labels: np.ndarray, k: int, params: TreeParams,
                 rng: np.random.Generator):
        self.features = features
        self.labels = labels
        self.k = k
        self.params = params
        self.mtry = params.features_per_split(features.shape[1])
        self.rng = rng
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[int] = []
        self.max_depth_seen = 0

    def _new_node(self) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(0)
        return len(self.feature) - 1

    def build(self, rows: np.ndarray, depth: int = 0) -> int:
        node = self._new_node()
        y = self.labels[rows]
        counts = np.bincount(y, minlength=self.k)
        # Majority label; ties go to the lowest label
        self.value[node] = int(np.argmax(counts))
        self.max_depth_seen = max(self.max_depth_seen, depth)
        if depth >= self.params.max_depth or np.count_nonzero(counts) <= 1:
            return node

        candidates = np.sort(self.rng.choice(self.features.shape[1], size=self.mtry, replace=False))
        best = None
        for f in candidates:
            found = best_split(self.features[rows, f], y, self.k, self.params.min_leaf)
            if found is not None and (best is None or found[0] > best[0]):
                best = (found[0], int(f), found[1])
        if best is None:
            return node

        _, f, threshold = best
        goes_left = self.features[rows, f] <= threshold
        self.feature[node] = f
        self.threshold[node] = threshold
        self.left[node] = self.build(rows[goes_left], depth + 1)
        self.right[node] = self.build(rows[~goes_left], depth + 1)
        return node

    def tree(self) -> DecisionTree:
        return DecisionTree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=np.int64),
            depth=self.max_depth_seen,
        )


def train_tree(data: Dataset, indices: np.ndarray, params: TreeParams, rng: np.random.Generator) -> DecisionTree:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise DomainError("cannot train a tree on an empty bag")
    builder = _TreeBuilder(data.features, data.labels, data.k, params, rng)
    builder.build(indices)
    return builder.tree()


@dataclass
class Ensemble:
    trees: List[DecisionTree]
    bag_indices: np.ndarray
    k: int
    n_features: int
    seed: int = 0
    params: TreeParams = field(default_factory=TreeParams)

    @property
    def t(self) -> int:
        return len(self.trees)

    def bag_hashes(self) -> List[str]:
        return [array_digest(bag) for bag in self.bag_indices]

    def metadata(self) -> Dict:
        return {
            'seed': self.seed,
            't': self.t,
            'k': self.k,
            'p': self.n_features,
            'params': self.params.to_dict(self.n_features),
            'depths': [tree.depth for tree in self.trees],
            'bag_hashes': self.bag_hashes(),
        }


def train_ensemble(data: Dataset, t: int, params: TreeParams = TreeParams(), seed: int = 0,
                   threads: Optional[int] = None) -> Tuple[Ensemble, OobMask]:
    if t < 1:
        raise ConfigError("an ensemble needs at least one tree")
    params.features_per_split(data.p)

    def grow(i: int) -> Tuple[DecisionTree, np.ndarray, np.ndarray]:
        rng = spawn_rng(seed, i)
        indices, oob = bootstrap_sample(data.n, rng)
        tree = train_tree(data, indices, params, rng)
        logger.debug("Tree %d: %d nodes, depth %d", i, tree.n_nodes, tree.depth)
        return tree, indices, oob

    logger.info("Training %d trees on n=%d, p=%d", t, data.n, data.p)
    grown = parallel_map(grow, range(int(t)), threads)
    ensemble = Ensemble(
        trees=[tree for tree, _, _ in grown],
        bag_indices=np.vstack([indices for _, indices, _ in grown]),
        k=data.k,
        n_features=data.p,
        seed=int(seed),
        params=params,
    )
    mask = OobMask(np.vstack([oob for _, _, oob in grown]))
    logger.info("Training complete")
    return ensemble, mask


def predict_array(ensemble: Ensemble, points: np.ndarray) -> PredictionArray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != ensemble.n_features:
        raise DimensionError(f"points have shape {points.shape}, expected (m, {ensemble.n_features})")
    return PredictionArray(np.vstack([tree.predict(points) for tree in ensemble.trees]), ensemble.k)


def oob_arrays(ensemble: Ensemble, mask: OobMask, data: Dataset) -> Tuple[PredictionArray, TruthLabels, OobMask]:
    """Predictions on the training rows themselves, with the mask marking usable cells"""
    return predict_array(ensemble, data.features), TruthLabels(data.labels), mask


@dataclass
class DataSplit:
    train: Dataset
    holdout: Optional[Dataset] = None
    ground: Optional[Dataset] = None


def split_dataset(data: Dataset, holdout_frac: float = 0.0, ground_frac: float = 0.0, seed: int = 0) -> DataSplit:
    """Shuffle rows once and carve off hold-out and ground sets"""
    if holdout_frac < 0 or ground_frac < 0 or holdout_frac + ground_frac >= 1:
        raise ConfigError("holdout and ground fractions must be non-negative and sum to less than 1")
    order = spawn_rng(seed, SPLIT_STREAM).permutation(data.n)
    n_holdout = int(round(holdout_frac * data.n))
    n_ground = int(round(ground_frac * data.n))
    if holdout_frac > 0 and n_holdout == 0 or ground_frac > 0 and n_ground == 0:
        raise ConfigError("a requested split is empty for this dataset size")
    if n_holdout + n_ground >= data.n:
        raise ConfigError("no training rows left after splitting")
    holdout = data.subset(np.sort(order[:n_holdout])) if n_holdout else None
    ground = data.subset(np.sort(order[n_holdout:n_holdout + n_ground])) if n_ground else None
    train = data.subset(np.sort(order[n_holdout + n_ground:]))
    return DataSplit(train, holdout, ground)


def training_cost_estimate(t: int, p: int, d: int, n: int) -> float:
    """Order of magnitude of training work, t * sqrt(p) * d * n"""
    return float(t) * math.sqrt(p) * float(d) * float(n)


def bootstrap_cost_estimate(B: int, t0: int, m: int) -> float:
    """Order of magnitude of bootstrap work, B * t0 * m"""
    return float(B) * float(t0) * float(m)
