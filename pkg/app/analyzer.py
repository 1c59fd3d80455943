import logging
import os
from typing import Dict, List, Optional, Sequence

import numpy as np

from .bootstrap import (BootstrapConfig, column_sigma, estimate_sigma, extrapolate_sigma, extrapolation_table,
                        min_trees_for_tolerance, relative_stopping)
from .config import DEFAULT_B, DEFAULT_ERR_INF_N_TEST, DEFAULT_QUANTILES
from .diagnostics import normality_diagnostics
from .ensemble import HOLDOUT, OobMask, PredictionArray, TruthLabels, class_sizes, resolve_mask
from .errors import DomainError, UsageError
from .first_order import (FirstOrderModel, bootstrap_check, clt_sample, err_infinity, ground_truth_sigma,
                          simulate_paths, variance_oracle)
from .generators import gen_synthetic_continuous, gen_synthetic_discrete
from .parser import (DatasetCSVParser, PredictionFileParser, write_dataset_csv, write_mask, write_paths_csv,
                     write_prediction_array, write_runs_csv, write_sigma_csv, write_truth)
from .trainer import (TreeParams, bootstrap_cost_estimate, predict_array, split_dataset, train_ensemble,
                      training_cost_estimate)

logger = logging.getLogger(__name__)

EXTRAPOLATION_MULTIPLES = (1, 2, 5)


def _quantile_key(p: float) -> str:
    return format(float(p), "g")


def default_targets(t0: int) -> List[int]:
    return [multiple * int(t0) for multiple in EXTRAPOLATION_MULTIPLES]


class ConvergenceAnalyzer:
    """Runs the estimation, training and simulation pipelines and assembles their reports"""

    def __init__(self, threads: Optional[int] = None):
        self.threads = threads
        self.prediction_parser = PredictionFileParser()
        self.dataset_parser = DatasetCSVParser()

    # Estimation

    def load_inputs(self, predictions_path: str, truth_path: str, mask_path: Optional[str] = None):
        array = self.prediction_parser.parse_prediction_array(predictions_path)
        truth = self.prediction_parser.parse_truth(truth_path)
        mask = self.prediction_parser.parse_mask(mask_path) if mask_path else None
        return array, truth, mask

    def estimate(self, array: PredictionArray, truth: TruthLabels, mask: Optional[OobMask] = None,
                 mode: str = HOLDOUT, B: int = DEFAULT_B, seed: int = 0, target_class: Optional[int] = None,
                 probs: Sequence[float] = DEFAULT_QUANTILES, t0: Optional[int] = None,
                 targets: Optional[Sequence[int]] = None, eps: Optional[float] = None,
                 eta: Optional[float] = None) -> Dict:
        """Bootstrap sigma estimate of an ensemble plus extrapolation and stopping results.

        With ``t0`` the estimate is made on the first t0 classifiers, which is
        how a small pilot ensemble is extrapolated to a larger one.
        """
        resolve_mask(mode, mask)
        if eps is not None and eps <= 0:
            raise UsageError("--eps must be positive")
        if eta is not None and not 0 < eta < 1:
            raise UsageError("--eta must lie strictly between 0 and 1")
        if t0 is not None:
            if not 1 <= t0 <= array.t:
                raise UsageError(f"t0 must lie in [1, {array.t}], got {t0}")
            array = array.head(t0)
            if mask is not None:
                mask = OobMask(mask.bits[:t0])

        config = BootstrapConfig(B=B, seed=seed, mode=mode, target_class=target_class)
        estimate = estimate_sigma(array, truth, mask, config, probs, self.threads)
        targets = list(targets) if targets else default_targets(array.t)

        report = {
            'command': 'estimate',
            't': array.t,
            'm': array.m,
            'k': array.k,
            'mode': mode,
            'B': config.B,
            'seed': config.seed,
            'target_class': target_class,
            'class_sizes': class_sizes(truth, array.k),
            'sigma_hat': estimate.sigma_hat,
            'sigma_iqr': estimate.sigma_iqr,
            'replicates': estimate.replicates,
            'centered_quantiles': {_quantile_key(p): q for p, q in estimate.centered_quantiles.items()},
            'err_hat': estimate.err_hat,
            'three_sigma': estimate.three_sigma,
            'extrapolation': {
                't0': array.t,
                'targets': extrapolation_table(estimate.sigma_hat, array.t, targets),
            },
        }
        stopping = {}
        if eps is not None:
            stopping['eps'] = eps
            stopping['min_trees'] = min_trees_for_tolerance(estimate.sigma_hat, array.t, eps)
            stopping['converged'] = estimate.three_sigma <= eps
        if eta is not None:
            stopping['eta'] = eta
            stopping['relative_converged'] = relative_stopping(estimate.sigma_hat, estimate.err_hat, eta)
        if stopping:
            report['stopping'] = stopping
        logger.info("sigma_hat=%.6g at t=%d (mode=%s, B=%d)", estimate.sigma_hat, array.t, mode, config.B)
        return report

    def extrapolate(self, sigma0: float, t0: int, t: Optional[int] = None, eps: Optional[float] = None,
                    targets: Optional[Sequence[int]] = None) -> Dict:
        if t is None and eps is None and not targets:
            raise UsageError("extrapolate needs --t, --eps or --targets")
        if eps is not None and eps <= 0:
            raise UsageError("--eps must be positive")
        report = {'command': 'extrapolate', 'sigma0': float(sigma0), 't0': int(t0)}
        if t is not None:
            report['t'] = int(t)
            report['sigma'] = extrapolate_sigma(sigma0, t0, t)
            report['three_sigma'] = 3.0 * report['sigma']
        if eps is not None:
            report['eps'] = eps
            report['min_trees'] = min_trees_for_tolerance(sigma0, t0, eps)
        if targets:
            report['targets'] = extrapolation_table(sigma0, t0, targets)
        return report

    # Training

    def train(self, data_path: str, out_dir: str, trees: int, max_depth: int = 16, min_leaf: int = 1,
              mtry: Optional[int] = None, seed: int = 0, holdout_frac: float = 0.0,
              ground_frac: float = 0.0) -> Dict:
        """Train a bagged ensemble and write its hold-out, OOB and ground prediction files"""
        data = self.dataset_parser.parse_csv_file(data_path)
        split = split_dataset(data, holdout_frac, ground_frac, seed)
        params = TreeParams(max_depth=max_depth, min_leaf=min_leaf, mtry=mtry)
        ensemble, mask = train_ensemble(split.train, trees, params, seed, self.threads)

        os.makedirs(out_dir, exist_ok=True)
        outputs = {}

        def emit(name: str, writer, value):
            path = os.path.join(out_dir, name)
            writer(path, value)
            outputs[name] = path

        emit('oob_predictions.txt', write_prediction_array, predict_array(ensemble, split.train.features))
        emit('oob_mask.txt', write_mask, mask)
        emit('oob_truth.txt', write_truth, TruthLabels(split.train.labels))
        for name, subset in (('holdout', split.holdout), ('ground', split.ground)):
            if subset is not None:
                emit(f'{name}_predictions.txt', write_prediction_array, predict_array(ensemble, subset.features))
                emit(f'{name}_truth.txt', write_truth, TruthLabels(subset.labels))

        depth = max(tree.depth for tree in ensemble.trees)
        m_eval = split.holdout.n if split.holdout is not None else split.train.n
        metadata = ensemble.metadata()
        metadata.update({
            'command': 'train',
            'class_names': data.class_names,
            'n_train': split.train.n,
            'n_holdout': split.holdout.n if split.holdout is not None else 0,
            'n_ground': split.ground.n if split.ground is not None else 0,
            'cost': {
                'training': training_cost_estimate(ensemble.t, data.p, depth, split.train.n),
                'bootstrap': bootstrap_cost_estimate(DEFAULT_B, min(ensemble.t, 200), m_eval),
            },
            'outputs': sorted(outputs),
        })
        return metadata

    def generate(self, kind: str, n_per_class: int, out_path: str, p: int = 100, seed: int = 0) -> str:
        if kind == 'continuous':
            data = gen_synthetic_continuous(n_per_class, p, seed)
        elif kind == 'discrete':
            data = gen_synthetic_discrete(n_per_class, seed)
        else:
            raise UsageError(f"unknown generator {kind!r}")
        return write_dataset_csv(out_path, data)

    # First-order simulation

    def simulate_paths(self, model: FirstOrderModel, t: int, n_runs: int, seed: int, csv_path: str,
                       sigma_csv_path: Optional[str] = None, same_stream: bool = False,
                       n_test: int = DEFAULT_ERR_INF_N_TEST) -> Dict:
        paths = simulate_paths(model, t, n_runs, seed, same_stream, n_test, self.threads)
        write_paths_csv(csv_path, paths)
        summary = {'command': 'simulate paths', 'model': model.to_dict(), 't': t, 'n_runs': n_runs,
                   'seed': seed, 'err_infinity': err_infinity(model, n_test, seed)}
        if n_runs >= 2:
            sigma_curve = column_sigma(paths)
            if sigma_csv_path:
                write_sigma_csv(sigma_csv_path, sigma_curve)
            summary['sigma_t'] = float(sigma_curve[-1])
            summary['three_sigma_t'] = 3.0 * float(sigma_curve[-1])
        return summary

    def simulate_sigma(self, model: FirstOrderModel, t: int, n_runs: int, seed: int, csv_path: str,
                       same_stream: bool = False, n_test: int = DEFAULT_ERR_INF_N_TEST) -> Dict:
        truth = ground_truth_sigma(model, t, n_runs, seed, curve=True, same_stream=same_stream,
                                   n_test=n_test, threads=self.threads)
        write_sigma_csv(csv_path, truth.sigma_curve)
        return {'command': 'simulate sigma', 'model': model.to_dict(), 't': t, 'n_runs': n_runs,
                'seed': seed, 'sigma_t': truth.sigma, 'three_sigma_t': 3.0 * truth.sigma,
                'err_infinity': err_infinity(model, n_test, seed)}

    def simulate_clt(self, model: FirstOrderModel, t: int, n_runs: int, seed: int, csv_path: str,
                     n_test: int = DEFAULT_ERR_INF_N_TEST) -> Dict:
        values, limit = clt_sample(model, t, n_runs, seed, n_test, self.threads)
        write_runs_csv(csv_path, t, values, column="scaled_deviation")
        summary = {'command': 'simulate clt', 'model': model.to_dict(), 't': t, 'n_runs': n_runs,
                   'seed': seed, 'err_infinity': limit,
                   'variance': float(np.var(values, ddof=1)) if n_runs >= 2 else None}
        if model.k == 2:
            summary['variance_oracle'] = variance_oracle(model)
        try:
            summary['diagnostics'] = normality_diagnostics(values)
        except DomainError as e:
            summary['diagnostics'] = {'error': str(e)}
        return summary

    def simulate_bootstrap_check(self, model: FirstOrderModel, t: int, n_runs: int, B: int, seed: int,
                                 csv_path: Optional[str] = None) -> Dict:
        result = bootstrap_check(model, t, n_runs, B, seed, threads=self.threads)
        if csv_path:
            write_runs_csv(csv_path, t, result["sigma_hats"], column="sigma_hat")
        result.update({'command': 'simulate bootstrap-check', 'model': model.to_dict(), 'seed': seed})
        return result
