import json
import math
import os

import numpy as np
import pytest

from app.errors import ParseError
from app.report_store import ReportStore, RunManifest
from app.utils import derive_seed, dumps_json, parallel_map, spawn_rng


class TestSeeding:

    def test_derivation_is_stable(self):
        assert derive_seed(0, 0) == derive_seed(0, 0)
        assert derive_seed(0, 0) != derive_seed(0, 1)
        assert derive_seed(1, 0) != derive_seed(0, 0)

    def test_fits_in_64_bits(self):
        assert all(0 <= derive_seed(2 ** 64 - 1, i) < 2 ** 64 for i in range(100))

    def test_streams_are_independent_of_order(self):
        forward = [spawn_rng(5, i).random() for i in range(10)]
        backward = [spawn_rng(5, i).random() for i in reversed(range(10))][::-1]
        assert forward == backward

    def test_parallel_map_keeps_order(self):
        assert parallel_map(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]


class TestJson:

    def test_full_precision_reals(self):
        text = dumps_json({'x': 0.1 + 0.2})
        assert "0.30000000000000004" in text
        assert json.loads(text)['x'] == 0.1 + 0.2

    def test_non_finite_becomes_null(self):
        assert json.loads(dumps_json({'a': math.nan, 'b': math.inf})) == {'a': None, 'b': None}

    def test_numpy_values(self):
        loaded = json.loads(dumps_json({'v': np.array([1.5, 2.0]), 'n': np.int64(3), 'f': np.bool_(True)}))
        assert loaded == {'v': [1.5, 2.0], 'n': 3, 'f': True}

    def test_key_order_is_kept(self):
        assert list(json.loads(dumps_json({'b': 1, 'a': 2}))) == ['b', 'a']


class TestRunManifest:

    def test_round_trip(self, tmp_path):
        data = tmp_path / "in.txt"
        data.write_text("hello", encoding="utf-8")
        manifest = RunManifest("estimate", "0.1.0+abc", 3, ["estimate", "--B", "10"], {'B': 10})
        manifest.record_inputs([str(data), None])
        path = manifest.write(str(tmp_path / "run.manifest.json"))
        loaded = RunManifest.load(path)
        assert loaded == manifest
        assert list(loaded.inputs) == [str(data)]

    def test_missing_outputs_are_skipped(self, tmp_path):
        manifest = RunManifest("extrapolate", "v", None, [])
        manifest.record_outputs([str(tmp_path / "absent.json"), None])
        assert manifest.outputs == {}

    def test_load_incomplete(self, tmp_path):
        path = tmp_path / "bad.manifest.json"
        path.write_text('{"command": "estimate"}', encoding="utf-8")
        with pytest.raises(ParseError):
            RunManifest.load(str(path))


class TestReportStore:

    def test_same_report_same_file(self, tmp_path):
        store = ReportStore(str(tmp_path))
        report = {'command': 'estimate', 'sigma_hat': 0.0125}
        assert store.save_report(report) == store.save_report(report)
        assert store.get_statistics()['total_reports'] == 1

    def test_listing(self, tmp_path):
        store = ReportStore(str(tmp_path))
        store.save_report({'command': 'estimate', 'sigma_hat': 0.5})
        store.save_manifest(RunManifest("train", "v", 0, ["train"]))
        (tmp_path / "broken.json").write_text("{", encoding="utf-8")
        entries = {entry['kind']: entry for entry in store.list_reports() if 'error' not in entry}
        assert entries['report']['sigma_hat'] == 0.5
        assert entries['manifest']['command'] == "train"
        assert any(entry.get('error') for entry in store.list_reports())

    def test_delete(self, tmp_path):
        store = ReportStore(str(tmp_path))
        path = store.save_report({'command': 'estimate'})
        name = os.path.basename(path)
        assert store.delete_report(name)
        assert store.get_report(name) is None
        assert not store.delete_report(name)

    def test_path_traversal_is_contained(self, tmp_path):
        store = ReportStore(str(tmp_path / "reports"))
        (tmp_path / "secret.json").write_text("{}", encoding="utf-8")
        assert store.get_report("../secret.json") is None
