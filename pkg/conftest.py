import os

import numpy as np
import pytest

from app.ensemble import OobMask, PredictionArray, TruthLabels
from app.first_order import FirstOrderModel
from app.parser import write_mask, write_prediction_array, write_truth


@pytest.fixture
def asymmetric_model():
    """Beta(2,5) / Beta(5,2) with unequal class weights, so sqrt(t) fluctuations do not cancel"""
    return FirstOrderModel.binary(0.3, (2, 5), (5, 2))


@pytest.fixture
def flat_median_model():
    """Beta(2,2) / Beta(4,4), equal weights: different densities at 1/2, both with zero slope there"""
    return FirstOrderModel.binary(0.5, (2, 2), (4, 4))


@pytest.fixture
def small_arrays():
    rng = np.random.default_rng(7)
    cells = rng.integers(0, 3, size=(12, 9))
    truth = rng.integers(0, 3, size=9)
    bits = rng.random((12, 9)) < 0.4
    return PredictionArray(cells, 3), TruthLabels(truth), OobMask(bits)


@pytest.fixture
def prediction_files(tmp_path, small_arrays):
    array, truth, mask = small_arrays
    paths = {
        'predictions': str(tmp_path / "predictions.txt"),
        'truth': str(tmp_path / "truth.txt"),
        'mask': str(tmp_path / "mask.txt"),
    }
    write_prediction_array(paths['predictions'], array)
    write_truth(paths['truth'], truth)
    write_mask(paths['mask'], mask)
    return paths


@pytest.fixture
def reports_dir(tmp_path, monkeypatch):
    path = str(tmp_path / "reports")
    monkeypatch.setenv("ENSCONV_REPORTS_DIR", path)
    os.makedirs(path, exist_ok=True)
    return path
