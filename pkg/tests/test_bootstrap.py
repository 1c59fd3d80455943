import math

import numpy as np
import pytest

from app.bootstrap import (BootstrapConfig, bootstrap_replicates, centered_quantiles, column_sigma,
                           estimate_sigma, extrapolate_sigma, extrapolation_table, min_trees_for_tolerance,
                           relative_stopping, resample_rows, sigma_from_iqr, sigma_hat)
from app.ensemble import (OobMask, PredictionArray, TruthLabels, classwise_error_rate, error_rate_holdout,
                          error_rate_oob)
from app.errors import ConfigError, DomainError, EmptyClassError, UsageError


def naive_replicates(array, truth, mask, config):
    """Materializes every resampled array and scores it directly"""
    values = []
    for b in range(config.B):
        rows = resample_rows(array.t, config.seed, b)
        resampled = PredictionArray(array.cells[rows], array.k)
        if config.target_class is not None:
            sub_mask = OobMask(mask.bits[rows]) if mask is not None else None
            values.append(classwise_error_rate(resampled, truth, config.target_class, config.mode, sub_mask))
        elif mask is not None:
            values.append(error_rate_oob(resampled, truth, OobMask(mask.bits[rows])))
        else:
            values.append(error_rate_holdout(resampled, truth))
    return np.asarray(values)


class TestBootstrapConfig:

    def test_defaults(self):
        config = BootstrapConfig()
        assert config.B == 50
        assert config.mode == "holdout"

    def test_b_below_two(self):
        with pytest.raises(ConfigError):
            BootstrapConfig(B=1)

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            BootstrapConfig(mode="cv")

    def test_negative_seed(self):
        with pytest.raises(ConfigError):
            BootstrapConfig(seed=-1)


class TestBootstrapReplicates:

    def test_identical_rows(self):
        array = PredictionArray(np.tile([0, 1, 1, 0, 1], (7, 1)), 2)
        truth = TruthLabels([0, 0, 1, 1, 1])
        replicates = bootstrap_replicates(array, truth, config=BootstrapConfig(B=20))
        np.testing.assert_array_equal(replicates, np.full(20, error_rate_holdout(array, truth)))

    def test_single_row(self):
        array = PredictionArray([[0, 1, 0]], 2)
        truth = TruthLabels([0, 0, 0])
        replicates = bootstrap_replicates(array, truth, config=BootstrapConfig(B=5))
        assert np.all(replicates == error_rate_holdout(array, truth))

    def test_matches_materialized_resamples(self):
        array = PredictionArray([[0, 1], [1, 1], [0, 0]], 2)
        truth = TruthLabels([0, 1])
        config = BootstrapConfig(B=40, seed=11)
        np.testing.assert_array_equal(bootstrap_replicates(array, truth, config=config),
                                      naive_replicates(array, truth, None, config))

    def test_oob_matches_materialized_resamples(self, small_arrays):
        array, truth, mask = small_arrays
        config = BootstrapConfig(B=30, seed=5, mode="oob")
        np.testing.assert_array_equal(bootstrap_replicates(array, truth, mask, config),
                                      naive_replicates(array, truth, mask, config))

    def test_classwise_matches_materialized_resamples(self, small_arrays):
        array, truth, _ = small_arrays
        config = BootstrapConfig(B=30, seed=3, target_class=int(truth.labels[0]))
        np.testing.assert_array_equal(bootstrap_replicates(array, truth, config=config),
                                      naive_replicates(array, truth, None, config))

    def test_thread_count_does_not_change_replicates(self, small_arrays):
        array, truth, mask = small_arrays
        config = BootstrapConfig(B=25, seed=9, mode="oob")
        single = bootstrap_replicates(array, truth, mask, config, threads=1)
        for threads in (2, 8):
            np.testing.assert_array_equal(bootstrap_replicates(array, truth, mask, config, threads=threads), single)

    def test_seed_changes_replicates(self, small_arrays):
        array, truth, _ = small_arrays
        first = bootstrap_replicates(array, truth, config=BootstrapConfig(B=25, seed=1))
        second = bootstrap_replicates(array, truth, config=BootstrapConfig(B=25, seed=2))
        assert not np.array_equal(first, second)

    def test_empty_target_class(self):
        array = PredictionArray([[0, 1]], 3)
        with pytest.raises(EmptyClassError):
            bootstrap_replicates(array, TruthLabels([0, 1]), config=BootstrapConfig(target_class=2))

    def test_oob_without_mask(self, small_arrays):
        array, truth, _ = small_arrays
        with pytest.raises(UsageError):
            bootstrap_replicates(array, truth, config=BootstrapConfig(mode="oob"))


class TestSigmaStatistics:

    def test_constant_replicates(self):
        assert sigma_hat([0.3] * 10) == 0.0

    def test_constant_thirds_are_exactly_zero(self):
        sigma = sigma_hat([1 / 3] * 50)
        assert sigma == 0.0
        assert min_trees_for_tolerance(sigma, 200, 0.01) == 0

    def test_column_sigma_zeroes_constant_columns(self):
        paths = np.array([[0.3, 0.1, 1 / 3], [0.3, 0.5, 1 / 3], [0.3, 0.9, 1 / 3]])
        sigma = column_sigma(paths)
        assert sigma[0] == 0.0 and sigma[2] == 0.0
        assert sigma[1] == pytest.approx(0.4)

    def test_column_sigma_needs_two_runs(self):
        with pytest.raises(ConfigError):
            column_sigma(np.zeros((1, 5)))

    def test_two_replicates(self):
        assert sigma_hat([0.0, 1.0]) == pytest.approx(math.sqrt(0.5))

    def test_three_replicates(self):
        assert sigma_hat([0.1, 0.2, 0.3]) == pytest.approx(0.1)

    def test_single_replicate(self):
        with pytest.raises(ConfigError):
            sigma_hat([0.1])

    def test_symmetric_median(self):
        assert centered_quantiles([-0.2, 0.2], [0.5])[0] == pytest.approx(0.0)

    def test_linear_interpolation_rule(self):
        # centered values -1.5, -0.5, 0.5, 1.5; rank p*(B-1)+1 gives 1.75 and 3.25
        np.testing.assert_allclose(centered_quantiles([1, 2, 3, 4], [0.25, 0.75]), [-0.75, 0.75])

    def test_constant_quantiles(self):
        np.testing.assert_array_equal(centered_quantiles([0.4] * 6, [0.05, 0.5, 0.95]), [0.0, 0.0, 0.0])
        np.testing.assert_array_equal(centered_quantiles([0.3] * 10, [0.25, 0.75]), [0.0, 0.0])

    @pytest.mark.parametrize("prob", [0.0, 1.0, -0.1, 1.5])
    def test_probability_outside_open_interval(self, prob):
        with pytest.raises(DomainError):
            centered_quantiles([0.1, 0.2, 0.3], [prob])

    def test_iqr_of_normal_draws(self):
        draws = np.random.default_rng(4).normal(0.2, 0.05, size=100_000)
        assert sigma_from_iqr(draws) == pytest.approx(0.05, rel=0.03)

    def test_iqr_of_constant(self):
        assert sigma_from_iqr([0.1] * 8) == 0.0

    def test_iqr_needs_four(self):
        with pytest.raises(ConfigError):
            sigma_from_iqr([0.1, 0.2, 0.3])


class TestExtrapolation:

    def test_halving(self):
        assert extrapolate_sigma(0.02, 200, 800) == pytest.approx(0.01)

    def test_identity(self):
        assert extrapolate_sigma(0.037, 150, 150) == 0.037

    def test_arithmetic(self):
        assert extrapolate_sigma(0.03, 200, 1000) == pytest.approx(0.013416, abs=1e-6)

    def test_table(self):
        table = extrapolation_table(0.02, 200, [200, 800])
        assert [row['t'] for row in table] == [200, 800]
        assert table[1]['sigma'] == pytest.approx(0.01)

    def test_min_trees_exact_case(self):
        assert min_trees_for_tolerance(0.02, 200, 0.03) == 800

    def test_min_trees_already_enough(self):
        assert min_trees_for_tolerance(0.02, 200, 0.06) == 200

    def test_min_trees_zero_sigma(self):
        assert min_trees_for_tolerance(0.0, 200, 0.01) == 0

    def test_min_trees_is_smallest(self):
        for sigma0, t0, eps in [(0.013, 150, 0.02), (0.021, 75, 0.011), (0.05, 10, 0.04)]:
            t = min_trees_for_tolerance(sigma0, t0, eps)
            assert 3 * extrapolate_sigma(sigma0, t0, t) <= eps
            assert t == 1 or 3 * extrapolate_sigma(sigma0, t0, t - 1) > eps

    def test_non_positive_eps(self):
        with pytest.raises(DomainError):
            min_trees_for_tolerance(0.02, 200, 0.0)

    def test_relative_stopping(self):
        assert relative_stopping(0.001, 0.02, 0.1)
        assert not relative_stopping(0.005, 0.02, 0.1)
        assert relative_stopping(0.0, 0.0, 0.5)

    def test_eta_outside_unit_interval(self):
        with pytest.raises(DomainError):
            relative_stopping(0.001, 0.02, 1.0)


class TestEstimateSigma:

    def test_bundle(self, small_arrays):
        array, truth, mask = small_arrays
        config = BootstrapConfig(B=30, seed=2, mode="oob")
        estimate = estimate_sigma(array, truth, mask, config, probs=(0.25, 0.75))
        assert estimate.t == array.t
        assert estimate.err_hat == error_rate_oob(array, truth, mask)
        assert estimate.sigma_hat == sigma_hat(estimate.replicates)
        assert estimate.three_sigma == 3 * estimate.sigma_hat
        assert sorted(estimate.centered_quantiles) == [0.25, 0.75]
        assert estimate.sigma_iqr is not None

    def test_same_inputs_same_estimate(self, small_arrays):
        array, truth, _ = small_arrays
        first = estimate_sigma(array, truth, config=BootstrapConfig(B=20, seed=6))
        second = estimate_sigma(array, truth, config=BootstrapConfig(B=20, seed=6))
        np.testing.assert_array_equal(first.replicates, second.replicates)
        assert first.sigma_hat == second.sigma_hat
