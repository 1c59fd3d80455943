import json
import logging
import re
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .ensemble import OobMask, PredictionArray, TruthLabels
from .errors import DimensionError, DomainError, ModelSpecError, ParseError
from .first_order import FAMILIES, ClassDistribution, FirstOrderModel
from .trainer import Dataset

logger = logging.getLogger(__name__)

_TOKEN = re.compile(r"\S+")
_INTEGER = re.compile(r"[+-]?\d+")


def _read_lines(file_path: str) -> List[str]:
    try:
        with open(file_path, 'r', encoding='utf-8', newline='') as f:
            content = f.read()
    except UnicodeDecodeError as e:
        raise ParseError(f"file is not valid UTF-8: {e.reason}", file_path)
    except OSError as e:
        raise ParseError(f"cannot read file: {e.strerror}", file_path)
    lines = content.split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    return lines


def _tokens(line: str) -> List[Tuple[str, int]]:
    """Whitespace-separated tokens with their 1-based column"""
    return [(match.group(), match.start() + 1) for match in _TOKEN.finditer(line)]


def _integer(token: str, file_path: str, line: int, column: int) -> int:
    if not _INTEGER.fullmatch(token):
        raise ParseError(f"expected an integer, found {token!r}", file_path, line, column)
    return int(token)


class PredictionFileParser:
    """Reader and writer for prediction-array, truth and OOB-mask files.

    Prediction array: a header line ``t m k`` followed by t lines of m labels.
    Truth: m labels, on one line or one per line. OOB mask: t lines of m
    characters, each ``0`` or ``1``.
    """

    def parse_prediction_array(self, file_path: str) -> PredictionArray:
        lines = _read_lines(file_path)
        if not lines:
            raise ParseError("empty prediction-array file", file_path, 1, 1)
        header = _tokens(lines[0])
        if len(header) != 3:
            raise ParseError(f"header must be 't m k', found {len(header)} fields", file_path, 1, 1)
        t, m, k = (_integer(token, file_path, 1, column) for token, column in header)
        if t < 1 or m < 1:
            raise ParseError(f"header needs t >= 1 and m >= 1, got t={t} m={m}", file_path, 1, 1)
        if k < 2:
            raise ParseError(f"header needs k >= 2, got k={k}", file_path, 1, header[2][1])

        rows = lines[1:]
        while rows and not rows[-1].strip():
            rows.pop()
        if len(rows) != t:
            raise ParseError(f"expected {t} rows after the header, found {len(rows)}", file_path,
                             min(len(rows), t) + 2, 1)
        cells = np.empty((t, m), dtype=np.int64)
        for i, row in enumerate(rows):
            line_no = i + 2
            tokens = _tokens(row)
            if len(tokens) != m:
                column = tokens[m][1] if len(tokens) > m else len(row) + 1
                raise ParseError(f"expected {m} labels, found {len(tokens)}", file_path, line_no, column)
            for j, (token, column) in enumerate(tokens):
                value = _integer(token, file_path, line_no, column)
                if not 0 <= value < k:
                    raise ParseError(f"label {value} outside [0, {k})", file_path, line_no, column)
                cells[i, j] = value
        logger.debug("Parsed %s: t=%d m=%d k=%d", file_path, t, m, k)
        return PredictionArray(cells, k)

    def parse_truth(self, file_path: str) -> TruthLabels:
        values = []
        for line_no, line in enumerate(_read_lines(file_path), start=1):
            for token, column in _tokens(line):
                value = _integer(token, file_path, line_no, column)
                if value < 0:
                    raise ParseError(f"negative label {value}", file_path, line_no, column)
                values.append(value)
        if not values:
            raise ParseError("truth file has no labels", file_path, 1, 1)
        return TruthLabels(np.asarray(values, dtype=np.int64))

    def parse_mask(self, file_path: str) -> OobMask:
        lines = _read_lines(file_path)
        while lines and not lines[-1].strip():
            lines.pop()
        if not lines:
            raise ParseError("empty OOB-mask file", file_path, 1, 1)
        width = len(lines[0])
        bits = np.zeros((len(lines), width), dtype=bool)
        for i, line in enumerate(lines):
            line_no = i + 1
            if len(line) != width:
                raise ParseError(f"expected {width} characters, found {len(line)}", file_path, line_no,
                                 min(len(line), width) + 1)
            for j, char in enumerate(line):
                if char not in '01':
                    raise ParseError(f"mask characters must be 0 or 1, found {char!r}", file_path, line_no, j + 1)
                bits[i, j] = char == '1'
        return OobMask(bits)

    def validate(self, predictions_path: str, truth_path: Optional[str] = None,
                 mask_path: Optional[str] = None) -> Dict:
        """Format check without estimating, in the {'valid': ..., 'error': ...} shape"""
        try:
            array = self.parse_prediction_array(predictions_path)
            result = {'valid': True, 't': array.t, 'm': array.m, 'k': array.k}
            if truth_path:
                truth = self.parse_truth(truth_path)
                if truth.m != array.m:
                    raise DimensionError(f"truth has {truth.m} labels but the array has {array.m} columns")
                if truth.labels.max() >= array.k:
                    raise DomainError(f"truth labels must lie in [0, {array.k})")
            if mask_path:
                mask = self.parse_mask(mask_path)
                if mask.shape != array.shape:
                    raise DimensionError(f"OOB mask shape {mask.shape} does not match array shape {array.shape}")
            return result
        except (ParseError, DimensionError, DomainError) as e:
            return {'valid': False, 'error': str(e)}


def write_prediction_array(file_path: str, array: PredictionArray) -> str:
    with open(file_path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(f"{array.t} {array.m} {array.k}\n")
        for row in array.cells:
            f.write(" ".join(map(str, row.tolist())) + "\n")
    return file_path


def write_truth(file_path: str, truth: TruthLabels) -> str:
    with open(file_path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(" ".join(map(str, truth.labels.tolist())) + "\n")
    return file_path


def write_mask(file_path: str, mask: OobMask) -> str:
    with open(file_path, 'w', encoding='utf-8', newline='\n') as f:
        for row in mask.bits:
            f.write("".join('1' if bit else '0' for bit in row) + "\n")
    return file_path


class ModelSpecParser:
    """JSON model spec: {"k": .., "pi": [..], "mu": [{"family": .., "params": [..]}, ..]}"""

    def parse_model_spec(self, file_path: str) -> FirstOrderModel:
        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(e.msg, file_path, e.lineno, e.colno)
        except OSError as e:
            raise ParseError(f"cannot read file: {e.strerror}", file_path)
        return self.model_from_dict(raw)

    def model_from_dict(self, raw) -> FirstOrderModel:
        if not isinstance(raw, dict):
            raise ModelSpecError(["model spec must be a JSON object"])
        violations = [f"missing field {name!r}" for name in ('k', 'pi', 'mu') if name not in raw]
        if violations:
            raise ModelSpecError(violations)

        k, pi, mu = raw['k'], raw['pi'], raw['mu']
        if isinstance(k, bool) or not isinstance(k, int):
            violations.append("k must be an integer")
        if not isinstance(pi, list) or not all(_is_number(p) for p in pi):
            violations.append("pi must be a list of numbers")
        if not isinstance(mu, list):
            violations.append("mu must be a list")
        else:
            for label, entry in enumerate(mu):
                if not isinstance(entry, dict) or 'family' not in entry or 'params' not in entry:
                    violations.append(f"mu[{label}] must be an object with 'family' and 'params'")
                elif str(entry['family']).lower() not in FAMILIES:
                    violations.append(f"mu[{label}] family must be one of {FAMILIES}")
                elif not isinstance(entry['params'], list) or not all(_is_number(p) for p in entry['params']):
                    violations.append(f"mu[{label}] params must be a list of numbers")
        if violations:
            raise ModelSpecError(violations)

        return FirstOrderModel(
            k=k,
            pi=tuple(pi),
            mu=tuple(ClassDistribution(str(entry['family']).lower(), tuple(float(p) for p in entry['params']))
                     for entry in mu),
        )


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


class DatasetCSVParser:
    """Training data CSV: header row, numeric feature columns, integer labels in the last column.

    Label values are mapped to dense 0..k-1 in increasing order; the original
    values are kept as class names.
    """

    def parse_csv_file(self, file_path: str) -> Dataset:
        try:
            df = pd.read_csv(file_path, dtype=str, keep_default_na=False)
        except pd.errors.EmptyDataError:
            raise ParseError("empty dataset file", file_path, 1, 1)
        except pd.errors.ParserError as e:
            raise ParseError(f"malformed CSV: {e}", file_path)
        except OSError as e:
            raise ParseError(f"cannot read file: {e.strerror}", file_path)
        if df.shape[1] < 2:
            raise ParseError("dataset needs at least one feature column and a label column", file_path, 1, 1)
        if df.shape[0] < 1:
            raise ParseError("dataset has no rows", file_path, 2, 1)

        label_column = df.shape[1]
        labels = df.iloc[:, -1].str.strip()
        bad = ~labels.str.fullmatch(r"[+-]?\d+")
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(f"label {df.iloc[row, -1]!r} is not an integer", file_path, row + 2, label_column)

        features = df.iloc[:, :-1].apply(lambda column: pd.to_numeric(column.str.strip(), errors='coerce'))
        missing = features.isna().to_numpy()
        if missing.any():
            row, column = (int(v) for v in np.argwhere(missing)[0])
            raise ParseError(f"feature value {df.iloc[row, column]!r} is not numeric", file_path,
                             row + 2, column + 1)

        raw_labels = labels.astype(np.int64).to_numpy()
        classes, dense = np.unique(raw_labels, return_inverse=True)
        logger.info("Loaded %s: n=%d, p=%d, %d classes", file_path, df.shape[0], df.shape[1] - 1, classes.size)
        return Dataset(
            features=features.to_numpy(dtype=np.float64),
            labels=dense,
            k=max(2, classes.size),
            class_names=[str(c) for c in classes.tolist()],
            feature_names=[str(c) for c in df.columns[:-1]],
        )


def write_dataset_csv(file_path: str, data: Dataset) -> str:
    columns = data.feature_names or [f"x{j + 1}" for j in range(data.p)]
    df = pd.DataFrame(data.features, columns=columns)
    names = data.class_names or [str(label) for label in range(data.k)]
    df['label'] = [names[label] for label in data.labels.tolist()]
    df.to_csv(file_path, index=False, float_format="%.17g", lineterminator="\n")
    return file_path


def write_paths_csv(file_path: str, paths: np.ndarray) -> str:
    """Long-form sample paths: one (run, t, err_t) row per run and ensemble size"""
    n_runs, t = paths.shape
    df = pd.DataFrame({
        'run': np.repeat(np.arange(n_runs), t),
        't': np.tile(np.arange(1, t + 1), n_runs),
        'err_t': paths.ravel(),
    })
    df.to_csv(file_path, index=False, float_format="%.17g", lineterminator="\n")
    return file_path


def write_runs_csv(file_path: str, t: int, values: np.ndarray, column: str = 'err_t') -> str:
    df = pd.DataFrame({'run': np.arange(values.size), 't': int(t), column: values})
    df.to_csv(file_path, index=False, float_format="%.17g", lineterminator="\n")
    return file_path


def write_sigma_csv(file_path: str, sigma_curve: np.ndarray) -> str:
    df = pd.DataFrame({
        't': np.arange(1, sigma_curve.size + 1),
        'sigma': sigma_curve,
        'three_sigma': 3.0 * sigma_curve,
    })
    df.to_csv(file_path, index=False, float_format="%.17g", lineterminator="\n")
    return file_path
