import os

import pytest
from fastapi.testclient import TestClient

from api import routes
from app.config import DEFAULT_B
from main import app


@pytest.fixture
def client(tmp_path, reports_dir, monkeypatch):
    monkeypatch.setattr(routes, "UPLOAD_DIR", str(tmp_path / "uploads"))
    return TestClient(app)


def upload(prediction_files, *names):
    files = {}
    for name in names:
        with open(prediction_files[name], "rb") as f:
            files[f"{name}_file"] = (f"{name}.txt", f.read(), "text/plain")
    return files


class TestEndpoints:

    def test_root_and_health(self, client):
        assert client.get("/health").json()['status'] == "healthy"
        assert "/api/estimate" in client.get("/").json()['endpoints']['estimate']['url']

    def test_estimate_oob(self, client, prediction_files):
        response = client.post("/api/estimate", files=upload(prediction_files, "predictions", "truth", "mask"),
                               data={"mode": "oob", "B": "12", "seed": "4"})
        assert response.status_code == 200
        report = response.json()
        assert report['mode'] == "oob"
        assert len(report['replicates']) == 12
        assert report['report_file'].startswith("estimate_")

        stored = client.get(f"/api/reports/{report['report_file']}")
        assert stored.status_code == 200
        assert stored.json()['sigma_hat'] == report['sigma_hat']

    def test_estimate_matches_library(self, client, prediction_files):
        data = {"B": "10", "seed": "2", "store": "false"}
        first = client.post("/api/estimate", files=upload(prediction_files, "predictions", "truth"), data=data)
        second = client.post("/api/estimate", files=upload(prediction_files, "predictions", "truth"), data=data)
        assert first.json() == second.json()
        assert 'report_file' not in first.json()

    def test_estimate_mode_without_mask(self, client, prediction_files):
        response = client.post("/api/estimate", files=upload(prediction_files, "predictions", "truth"),
                               data={"mode": "oob"})
        assert response.status_code == 400

    def test_estimate_parse_error(self, client, prediction_files):
        files = upload(prediction_files, "truth")
        files["predictions_file"] = ("predictions.txt", b"1 2 2\n0 5\n", "text/plain")
        assert client.post("/api/estimate", files=files).status_code == 422

    def test_estimate_rejects_extension(self, client, prediction_files):
        files = upload(prediction_files, "truth")
        files["predictions_file"] = ("predictions.exe", b"1 1 2\n0\n", "application/octet-stream")
        assert client.post("/api/estimate", files=files).status_code == 400

    def test_extrapolate(self, client):
        response = client.post("/api/extrapolate", data={"sigma0": "0.02", "t0": "200", "eps": "0.03"})
        assert response.status_code == 200
        assert response.json()['min_trees'] == 800

    def test_extrapolate_needs_t_or_eps(self, client):
        assert client.post("/api/extrapolate", data={"sigma0": "0.02"}).status_code == 400

    def test_validate_predictions(self, client, prediction_files):
        response = client.post("/api/validate-predictions",
                               files=upload(prediction_files, "predictions", "truth", "mask"))
        assert response.json() == {'valid': True, 't': 12, 'm': 9, 'k': 3}

    def test_reports_listing_and_delete(self, client, prediction_files):
        report = client.post("/api/estimate", files=upload(prediction_files, "predictions", "truth"),
                             data={"B": "5"}).json()
        listing = client.get("/api/reports").json()
        assert listing['statistics']['total_reports'] == 1
        assert listing['reports'][0]['filename'] == report['report_file']

        assert client.delete(f"/api/reports/{report['report_file']}").status_code == 200
        assert client.get(f"/api/reports/{report['report_file']}").status_code == 404
        assert client.delete(f"/api/reports/{report['report_file']}").status_code == 404


class TestUploadCleanup:

    def test_estimate_removes_uploads(self, client, prediction_files, tmp_path):
        for _ in range(3):
            response = client.post("/api/estimate", files=upload(prediction_files, "predictions", "truth", "mask"),
                                   data={"mode": "oob", "B": "5", "store": "false"})
            assert response.status_code == 200
        assert os.listdir(tmp_path / "uploads") == []

    def test_failed_estimate_removes_uploads(self, client, prediction_files, tmp_path):
        files = upload(prediction_files, "truth")
        files["predictions_file"] = ("predictions.txt", b"1 2 2\n0 5\n", "text/plain")
        assert client.post("/api/estimate", files=files).status_code == 422
        assert os.listdir(tmp_path / "uploads") == []

    def test_rejected_extension_removes_earlier_uploads(self, client, prediction_files, tmp_path):
        files = upload(prediction_files, "predictions")
        files["truth_file"] = ("truth.exe", b"0 1\n", "application/octet-stream")
        assert client.post("/api/estimate", files=files).status_code == 400
        assert os.listdir(tmp_path / "uploads") == []

    def test_default_replicate_count(self, client, prediction_files):
        report = client.post("/api/estimate", files=upload(prediction_files, "predictions", "truth"),
                             data={"store": "false"}).json()
        assert report['B'] == DEFAULT_B
        assert len(report['replicates']) == DEFAULT_B
