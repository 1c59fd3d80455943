"""First-order model of a randomized ensemble.

A single classifier is replaced by a surrogate that draws U ~ Uniform[0, 1]
and predicts the label of the interval of the unit partition induced by the
mean-vote point theta that contains U. An ensemble is then just its vector of
uniform draws, and the vote shares at theta are the lifted empirical CDF of
those draws. For two classes the error rate of such an ensemble has a closed
form in two order statistics of U, which makes the model a cheap and exact
test bench for the bootstrap estimator.

Class l is described by the distribution mu_l of theta over its test points:
Beta(alpha, beta) on theta_1 when k = 2, Dirichlet over the full vote vector
(v_0, .., v_{k-1}) when k > 2, with theta = (v_1, .., v_{k-1}).
"""
import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import beta as beta_dist

from .bootstrap import SigmaEstimate, column_sigma, resample_rows, sigma_hat
from .config import DEFAULT_ERR_INF_N_TEST
from .ensemble import column_votes
from .errors import DomainError, ModelSpecError, UnsupportedError
from .utils import derive_seed, parallel_map, spawn_rng

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-12
BETA = "beta"
DIRICHLET = "dirichlet"
FAMILIES = (BETA, DIRICHLET)

# Substream index reserved for the common test set of Monte Carlo runs
TEST_SET_STREAM = 2 ** 32
# Base index of the per-run resampling seeds in bootstrap checks
BOOTSTRAP_STREAM = 2 ** 34


@dataclass(frozen=True)
class SimplexPoint:
    """theta in the full-dimensional simplex; theta_0 = 1 - sum(theta) is implied"""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=np.float64))
        if theta.ndim != 1 or theta.size < 1:
            raise DomainError("simplex point must be a non-empty vector")
        if not np.all(np.isfinite(theta)) or theta.min() < -SIMPLEX_TOL or theta.sum() > 1 + SIMPLEX_TOL:
            raise DomainError(f"theta {theta.tolist()} lies outside the simplex")
        theta = theta.copy()
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def k(self) -> int:
        return self.theta.size + 1

    @property
    def theta0(self) -> float:
        return 1.0 - float(self.theta.sum())

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.theta)


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    closed_lower: bool = False

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, u: float) -> bool:
        if u == self.lower:
            return self.closed_lower
        return self.lower < u <= self.upper


def _as_point(theta) -> SimplexPoint:
    return theta if isinstance(theta, SimplexPoint) else SimplexPoint(theta)


def interval_partition(theta) -> List[Interval]:
    """Intervals I_0..I_{k-1}, indexed by label.

    I_1 = [0, c_1], I_l = (c_{l-1}, c_l] and I_0 = (c_{k-1}, 1], where c_l are
    the partial sums of theta.
    """
    point = _as_point(theta)
    cuts = point.partial_sums
    intervals = [Interval(float(cuts[-1]), 1.0)]
    lower = 0.0
    for label, upper in enumerate(cuts, start=1):
        intervals.append(Interval(lower, float(upper), closed_lower=label == 1))
        lower = float(upper)
    return intervals


def first_order_labels(partial_sums: np.ndarray, u) -> np.ndarray:
    """Vectorized label lookup.

    ``partial_sums`` has shape (..., k-1); the result broadcasts against ``u``.
    """
    partial_sums = np.asarray(partial_sums, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    below = np.count_nonzero(partial_sums < u[..., None], axis=-1)
    last = partial_sums.shape[-1]
    return np.where(below < last, below + 1, 0)


def first_order_label(theta, u: float) -> int:
    point = _as_point(theta)
    return int(first_order_labels(point.partial_sums, u))


class EmpiricalCDF:
    """Right-continuous step function F_t(u) = #{i : U_i <= u} / t"""

    def __init__(self, values: Sequence[float]):
        self.sorted = np.sort(np.asarray(values, dtype=np.float64))
        if self.sorted.size < 1:
            raise DomainError("empirical CDF needs at least one value")
        self.t = self.sorted.size

    def counts(self, u) -> np.ndarray:
        return np.searchsorted(self.sorted, u, side="right")

    def __call__(self, u):
        result = self.counts(u) / self.t
        return float(result) if np.ndim(result) == 0 else result


@dataclass(frozen=True)
class FirstOrderEnsemble:
    U: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.U, dtype=np.float64).ravel()
        if values.size < 1:
            raise DomainError("a first-order ensemble needs t >= 1")
        if values.min() < 0 or values.max() > 1:
            raise DomainError("first-order draws must lie in [0, 1]")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "U", values)

    @classmethod
    def draw(cls, t: int, rng: np.random.Generator) -> "FirstOrderEnsemble":
        return cls(rng.random(int(t)))

    @property
    def t(self) -> int:
        return self.U.size

    def ecdf(self) -> EmpiricalCDF:
        return EmpiricalCDF(self.U)

    def resample(self, indices: np.ndarray) -> "FirstOrderEnsemble":
        return FirstOrderEnsemble(self.U[indices])


def empirical_cdf(ensemble) -> EmpiricalCDF:
    values = ensemble.U if isinstance(ensemble, FirstOrderEnsemble) else ensemble
    return EmpiricalCDF(values)


@dataclass(frozen=True)
class ClassDistribution:
    family: str
    params: Tuple[float, ...]

    @property
    def weak_density(self) -> bool:
        """Parameters <= 1 give a density with unbounded gradient at the boundary"""
        return any(p <= 1 for p in self.params)

    def to_dict(self):
        return {'family': self.family, 'params': list(self.params)}


@dataclass(frozen=True)
class FirstOrderModel:
    k: int
    pi: Tuple[float, ...]
    mu: Tuple[ClassDistribution, ...]

    def __post_init__(self):
        object.__setattr__(self, "pi", tuple(float(p) for p in self.pi))
        object.__setattr__(self, "mu", tuple(
            m if isinstance(m, ClassDistribution)
            else ClassDistribution(str(m['family']).lower(), tuple(float(p) for p in m['params']))
            for m in self.mu))
        violations = self._violations()
        if violations:
            raise ModelSpecError(violations)
        for label, dist in enumerate(self.mu):
            if dist.weak_density:
                logger.warning("Class %d: %s%s has a parameter <= 1; its density gradient is unbounded",
                               label, dist.family, dist.params)

    def _violations(self) -> List[str]:
        violations = []
        if not isinstance(self.k, (int, np.integer)) or self.k < 2:
            return [f"k must be an integer >= 2, got {self.k!r}"]
        if len(self.pi) != self.k:
            violations.append(f"pi has {len(self.pi)} entries, expected k={self.k}")
        if any(not math.isfinite(p) or p < 0 for p in self.pi):
            violations.append("pi entries must be non-negative")
        elif abs(sum(self.pi) - 1.0) > 1e-9:
            violations.append(f"pi must sum to 1, sums to {sum(self.pi)!r}")
        if len(self.mu) != self.k:
            violations.append(f"mu has {len(self.mu)} entries, expected k={self.k}")
        expected_family = BETA if self.k == 2 else DIRICHLET
        expected_params = 2 if self.k == 2 else self.k
        for label, dist in enumerate(self.mu):
            if dist.family != expected_family:
                violations.append(f"mu[{label}] family must be {expected_family!r} for k={self.k}, "
                                  f"got {dist.family!r}")
            elif len(dist.params) != expected_params:
                violations.append(f"mu[{label}] needs {expected_params} parameters, got {len(dist.params)}")
            elif any(not math.isfinite(p) or p <= 0 for p in dist.params):
                violations.append(f"mu[{label}] parameters must be positive")
        return violations

    @classmethod
    def binary(cls, pi0: float, beta0: Tuple[float, float], beta1: Tuple[float, float]) -> "FirstOrderModel":
        return cls(2, (pi0, 1.0 - pi0), (ClassDistribution(BETA, tuple(beta0)),
                                         ClassDistribution(BETA, tuple(beta1))))

    def to_dict(self):
        return {'k': self.k, 'pi': list(self.pi), 'mu': [m.to_dict() for m in self.mu]}

    def sample_theta(self, label: int, n: int, rng: np.random.Generator) -> np.ndarray:
        """n draws of theta from mu_label, shape (n, k-1)"""
        dist = self.mu[label]
        if dist.family == BETA:
            return rng.beta(dist.params[0], dist.params[1], size=n)[:, None]
        return rng.dirichlet(dist.params, size=n)[:, 1:]

    def sample(self, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Test pairs (labels, theta) with labels ~ pi and theta ~ mu_label"""
        labels = rng.choice(self.k, size=int(n), p=np.asarray(self.pi))
        theta = np.empty((int(n), self.k - 1), dtype=np.float64)
        for label in range(self.k):
            rows = np.flatnonzero(labels == label)
            if rows.size:
                theta[rows] = self.sample_theta(label, rows.size, rng)
        return labels, theta

    def _require_binary(self, what: str):
        if self.k != 2:
            raise UnsupportedError(f"{what} is only available for k = 2, got k = {self.k}")

    def cdf(self, label: int, v):
        self._require_binary("the class CDF")
        a, b = self.mu[label].params
        return beta_dist.cdf(v, a, b)

    def pdf(self, label: int, v):
        self._require_binary("the class density")
        a, b = self.mu[label].params
        return beta_dist.pdf(v, a, b)


@dataclass(frozen=True)
class TestSet:
    labels: np.ndarray
    theta: np.ndarray

    @property
    def size(self) -> int:
        return self.labels.size


def draw_test_set(model: FirstOrderModel, n_test: int, rng: np.random.Generator) -> TestSet:
    if n_test < 1:
        raise DomainError("n_test must be at least 1")
    labels, theta = model.sample(n_test, rng)
    return TestSet(labels, theta)


def _draws(ensemble) -> np.ndarray:
    return ensemble.U if isinstance(ensemble, FirstOrderEnsemble) else np.asarray(ensemble, dtype=np.float64)


def _binary_error(model: FirstOrderModel, low: np.ndarray, high: np.ndarray) -> np.ndarray:
    """pi_0 * mu_0([low, 1]) + pi_1 * mu_1([0, high))"""
    pi0, pi1 = model.pi
    return pi0 * (1.0 - model.cdf(0, low)) + pi1 * model.cdf(1, high)


def exact_err_t_binary(model: FirstOrderModel, ensemble) -> float:
    """Exact error rate of a two-class first-order ensemble.

    Class 0 is misclassified when F_t(theta) >= 1/2, i.e. theta >= U_(ceil(t/2));
    class 1 when F_t(theta) <= 1/2, i.e. theta < U_(floor(t/2)+1). A vote share
    of exactly 1/2 is a tie and counts as an error for both classes.
    """
    model._require_binary("the exact error functional")
    draws = np.sort(_draws(ensemble))
    t = draws.size
    if t < 1:
        raise DomainError("a first-order ensemble needs t >= 1")
    low = draws[(t + 1) // 2 - 1]
    high = draws[t // 2]
    return float(_binary_error(model, low, high))


def _vote_counts(partial_sums: np.ndarray, ecdf: EmpiricalCDF) -> np.ndarray:
    """Vote counts of the ensemble at each test theta, shape (n, k).

    Classifier i votes l exactly when U_i falls in I_l, so the count for l is
    the number of draws between consecutive partial sums.
    """
    below = ecdf.counts(partial_sums)
    counts = np.empty((partial_sums.shape[0], partial_sums.shape[1] + 1), dtype=np.int64)
    counts[:, 0] = ecdf.t - below[:, -1]
    counts[:, 1] = below[:, 0]
    counts[:, 2:] = np.diff(below, axis=1)
    return counts


def mc_err_t(model: FirstOrderModel, ensemble, n_test: int, rng: Optional[np.random.Generator] = None,
             test_set: Optional[TestSet] = None) -> float:
    """Monte Carlo error rate for any k over n_test pairs (theta ~ mu_Y, Y ~ pi)"""
    if test_set is None:
        if rng is None:
            raise DomainError("mc_err_t needs either an rng or a test set")
        test_set = draw_test_set(model, n_test, rng)
    ecdf = EmpiricalCDF(_draws(ensemble))
    votes = column_votes(_vote_counts(np.cumsum(test_set.theta, axis=1), ecdf))
    return np.count_nonzero(votes != test_set.labels) / test_set.size


def err_infinity(model: FirstOrderModel, n_test: int = DEFAULT_ERR_INF_N_TEST, seed: int = 0) -> float:
    """Error of the infinite ensemble, whose vote vector at theta is theta itself.

    Exact through the Beta CDFs at 1/2 for k = 2; Monte Carlo over n_test
    points drawn with ``seed`` otherwise.
    """
    if model.k == 2:
        return float(_binary_error(model, 0.5, 0.5))
    test_set = draw_test_set(model, n_test, spawn_rng(seed, TEST_SET_STREAM))
    shares = np.hstack([1.0 - test_set.theta.sum(axis=1, keepdims=True), test_set.theta])
    votes = column_votes(shares)
    return np.count_nonzero(votes != test_set.labels) / test_set.size


def _binary_path(model: FirstOrderModel, draws: np.ndarray) -> np.ndarray:
    """Err_s for s = 1..t from running order statistics of the draws"""
    low_heap: List[float] = []  # max-heap of the smallest ceil(s/2) draws, negated
    high_heap: List[float] = []  # min-heap of the rest
    low = np.empty(draws.size)
    high = np.empty(draws.size)
    for s, u in enumerate(draws.tolist(), start=1):
        if low_heap and u > -low_heap[0]:
            heapq.heappush(high_heap, u)
        else:
            heapq.heappush(low_heap, -u)
        if len(low_heap) > (s + 1) // 2:
            heapq.heappush(high_heap, -heapq.heappop(low_heap))
        elif len(low_heap) < (s + 1) // 2:
            heapq.heappush(low_heap, -heapq.heappop(high_heap))
        low[s - 1] = -low_heap[0]
        high[s - 1] = -low_heap[0] if s % 2 else high_heap[0]
    return _binary_error(model, low, high)


def _mc_path(draws: np.ndarray, test_set: TestSet, k: int) -> np.ndarray:
    partial_sums = np.cumsum(test_set.theta, axis=1)
    positions = np.arange(test_set.size)
    counts = np.zeros((test_set.size, k), dtype=np.int64)
    path = np.empty(draws.size)
    for s, u in enumerate(draws):
        counts[positions, first_order_labels(partial_sums, np.full(test_set.size, u))] += 1
        path[s] = np.count_nonzero(column_votes(counts) != test_set.labels) / test_set.size
    return path


def _run_draws(seed: int, run: int, t: int, same_stream: bool) -> np.ndarray:
    return spawn_rng(seed, 0 if same_stream else run).random(int(t))


@dataclass
class GroundTruth:
    errors: np.ndarray
    sigma: float
    t: int
    sigma_curve: Optional[np.ndarray] = None
    paths: Optional[np.ndarray] = field(default=None, repr=False)


def _common_test_set(model: FirstOrderModel, n_test: int, seed: int) -> Optional[TestSet]:
    if model.k == 2:
        return None
    return draw_test_set(model, n_test, spawn_rng(seed, TEST_SET_STREAM))


def simulate_errors(model: FirstOrderModel, t: int, n_runs: int, seed: int = 0, same_stream: bool = False,
                    n_test: int = DEFAULT_ERR_INF_N_TEST, threads: Optional[int] = None) -> np.ndarray:
    """Err_t of n_runs independent first-order ensembles.

    Run r uses the substream (seed, r); k > 2 models share one Monte Carlo
    test set across runs.
    """
    if t < 1:
        raise DomainError("t must be at least 1")
    test_set = _common_test_set(model, n_test, seed)

    def run(r: int) -> float:
        draws = _run_draws(seed, r, t, same_stream)
        if test_set is None:
            return exact_err_t_binary(model, draws)
        return mc_err_t(model, draws, test_set.size, test_set=test_set)

    logger.info("Simulating %d first-order ensembles of size %d", n_runs, t)
    return np.asarray(parallel_map(run, range(int(n_runs)), threads), dtype=np.float64)


def simulate_paths(model: FirstOrderModel, t: int, n_runs: int, seed: int = 0, same_stream: bool = False,
                   n_test: int = DEFAULT_ERR_INF_N_TEST, threads: Optional[int] = None) -> np.ndarray:
    """Sample paths s -> Err_s for s = 1..t, shape (n_runs, t)"""
    if t < 1:
        raise DomainError("t must be at least 1")
    test_set = _common_test_set(model, n_test, seed)

    def run(r: int) -> np.ndarray:
        draws = _run_draws(seed, r, t, same_stream)
        if test_set is None:
            return _binary_path(model, draws)
        return _mc_path(draws, test_set, model.k)

    logger.info("Simulating %d sample paths up to t=%d", n_runs, t)
    return np.vstack(parallel_map(run, range(int(n_runs)), threads))


def ground_truth_sigma(model: FirstOrderModel, t: int, n_runs: int, seed: int = 0, curve: bool = False,
                       same_stream: bool = False, n_test: int = DEFAULT_ERR_INF_N_TEST,
                       threads: Optional[int] = None) -> GroundTruth:
    """Sample standard deviation of Err_t across independent runs"""
    if n_runs < 2:
        raise DomainError("ground truth needs at least two runs")
    if curve:
        paths = simulate_paths(model, t, n_runs, seed, same_stream, n_test, threads)
        sigma_curve = column_sigma(paths)
        return GroundTruth(paths[:, -1].copy(), float(sigma_curve[-1]), int(t), sigma_curve, paths)
    errors = simulate_errors(model, t, n_runs, seed, same_stream, n_test, threads)
    return GroundTruth(errors, sigma_hat(errors), int(t))


def idealized_bootstrap(model: FirstOrderModel, ensemble, B: int, seed: int = 0,
                        threads: Optional[int] = None) -> SigmaEstimate:
    """Bootstrap of a single two-class first-order ensemble with the exact error functional.

    Replicate b resamples the draws with the same (seed, b) substream used
    for prediction-array rows.
    """
    model._require_binary("the idealized bootstrap")
    draws = _draws(ensemble)
    t = draws.size

    def replicate(b: int) -> float:
        return exact_err_t_binary(model, draws[resample_rows(t, seed, b)])

    replicates = np.asarray(parallel_map(replicate, range(int(B)), threads), dtype=np.float64)
    return SigmaEstimate(replicates=replicates, sigma_hat=sigma_hat(replicates), t=t,
                         err_hat=exact_err_t_binary(model, draws))


def clt_sample(model: FirstOrderModel, t: int, n_runs: int, seed: int = 0,
               n_test: int = DEFAULT_ERR_INF_N_TEST, threads: Optional[int] = None) -> Tuple[np.ndarray, float]:
    """sqrt(t) * (Err_t - err_inf) over n_runs runs, together with err_inf"""
    errors = simulate_errors(model, t, n_runs, seed, n_test=n_test, threads=threads)
    limit = err_infinity(model, n_test=n_test, seed=seed)
    return math.sqrt(t) * (errors - limit), limit


def variance_oracle(model: FirstOrderModel) -> float:
    """Limiting variance of sqrt(t) * (Err_t - err_inf) for k = 2.

    Both order statistics in the exact error concentrate on the sample median
    of U, whose fluctuation has variance 1/(4t); the error moves with slope
    pi_1 f_1(1/2) - pi_0 f_0(1/2).
    """
    model._require_binary("the variance oracle")
    slope = model.pi[1] * float(model.pdf(1, 0.5)) - model.pi[0] * float(model.pdf(0, 0.5))
    return 0.25 * slope * slope


def bootstrap_check(model: FirstOrderModel, t: int, n_runs: int, B: int, seed: int = 0,
                    ground_runs: Optional[int] = None, threads: Optional[int] = None) -> dict:
    """Average idealized-bootstrap sigma over n_runs ensembles against the ground truth.

    Ground-truth runs use substreams 0..ground_runs-1 and the bootstrapped
    ensembles the indices after them. Run r resamples under its own master
    seed derived from stream BOOTSTRAP_STREAM + r.
    """
    model._require_binary("the bootstrap check")
    ground_runs = int(ground_runs or n_runs)
    truth = ground_truth_sigma(model, t, ground_runs, seed, threads=threads)

    def run(r: int) -> float:
        draws = spawn_rng(seed, ground_runs + r).random(int(t))
        resample_seed = derive_seed(seed, BOOTSTRAP_STREAM + r)
        return idealized_bootstrap(model, draws, B, seed=resample_seed, threads=1).sigma_hat

    logger.info("Bootstrapping %d first-order ensembles of size %d with B=%d", n_runs, t, B)
    estimates = np.asarray(parallel_map(run, range(int(n_runs)), threads), dtype=np.float64)
    mean_estimate = float(estimates.mean())
    return {
        't': int(t),
        'B': int(B),
        'n_runs': int(n_runs),
        'ground_runs': ground_runs,
        'ground_truth_sigma': truth.sigma,
        'mean_bootstrap_sigma': mean_estimate,
        'relative_error': mean_estimate / truth.sigma - 1.0 if truth.sigma > 0 else None,
        'sigma_hats': estimates,
    }
