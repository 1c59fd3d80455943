"""End-to-end check: OOB bootstrap at a pilot size, extrapolated, against retrained ensembles.

Runs with the full count of ground ensembles and repetitions but smaller
data and ensembles (p=25, 400 points per class, 200 trees extrapolated from
50). Deselected by default; run with ``pytest -m slow``.
"""
import numpy as np
import pytest

from app.bootstrap import BootstrapConfig, estimate_sigma, extrapolate_sigma
from app.ensemble import TruthLabels, error_rate_holdout
from app.generators import continuous_design, gen_synthetic_continuous
from app.trainer import TreeParams, oob_arrays, predict_array, train_ensemble

T = 200
T0 = 50
GROUND_ENSEMBLES = 100
REPETITIONS = 20
PARAMS = TreeParams(max_depth=8)


@pytest.mark.slow
def test_extrapolated_oob_estimate_tracks_ground_truth():
    design = continuous_design(p=25, seed=0)
    train = gen_synthetic_continuous(400, seed=1, design=design)
    ground = gen_synthetic_continuous(1000, seed=2, design=design)
    ground_truth = TruthLabels(ground.labels)

    # sigma_T over retrainings on the same data, measured on the ground set
    ground_errors = []
    for g in range(GROUND_ENSEMBLES):
        ensemble, _ = train_ensemble(train, T, PARAMS, seed=1000 + g)
        ground_errors.append(error_rate_holdout(predict_array(ensemble, ground.features), ground_truth))
    truth_three_sigma = 3 * np.std(ground_errors, ddof=1)

    extrapolated = []
    for r in range(REPETITIONS):
        ensemble, mask = train_ensemble(train, T0, PARAMS, seed=r)
        array, truth, mask = oob_arrays(ensemble, mask, train)
        estimate = estimate_sigma(array, truth, mask, BootstrapConfig(B=50, seed=r, mode="oob"))
        extrapolated.append(3 * extrapolate_sigma(estimate.sigma_hat, T0, T))

    assert np.median(extrapolated) == pytest.approx(truth_three_sigma, rel=0.30)
