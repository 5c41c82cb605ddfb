"""
EvaluationReport and its JSON / CSV serializations.

Serialization is byte-stable: keys sorted, floats rounded to 6 significant
digits, numpy scalars converted, trailing newline.
"""
import csv
import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Any, Dict, List

import numpy as np

from steerguard.core.errors import ValidationError

logger = logging.getLogger(__name__)

JSON = 'json'
CSV = 'csv'
NOT_APPLICABLE = 'n/a'

TABLES = ('models', 'white_box', 'black_box', 'sweeps', 'defenses', 'detection', 'profiles')

# CSV column order per table; detection matches the documented sweep schema
COLUMNS = {
    'models': ['model_id', 'arch_id', 'input_size', 'parameters', 'size_mb', 'rmse', 'baseline_rmse'],
    'white_box': ['model_id', 'attack_id', 'delta', 'success_rate'],
    'black_box': ['source', 'attack_id', 'target', 'success_rate'],
    'sweeps': ['model_id', 'attack_id', 'delta', 'success_rate'],
    'defenses': ['defense', 'model_id', 'parameter', 'attack_id', 'success_rate', 'clean_rmse'],
    'detection': ['threshold', 'recall', 'false_positive_rate', 'attack_id', 'model_id'],
    'profiles': ['model_id', 'attack_id', 'mean_time_per_image', 'peak_scratch_bytes',
                 'backward_pass_count', 'images', 'anomaly'],
}


def format_float(value: float) -> float:
    return float(f'{value:.6g}')


def normalize(value: Any) -> Any:
    """JSON-ready copy with stable float formatting"""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else format_float(value)
    if isinstance(value, dict):
        return {str(k): normalize(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [normalize(v) for v in value]
    if isinstance(value, np.ndarray):
        return [normalize(v) for v in value.tolist()]
    if hasattr(value, '__dataclass_fields__'):
        return normalize(asdict(value))
    return value


def make_run_id(settings: Dict[str, Any]) -> str:
    """Deterministic id derived from the resolved configuration"""
    canonical = json.dumps(normalize(settings), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:12]


@dataclass
class EvaluationReport:
    run_id: str
    seed: int
    version: str
    models: List[dict] = field(default_factory=list)
    white_box: List[dict] = field(default_factory=list)
    black_box: List[dict] = field(default_factory=list)
    sweeps: List[dict] = field(default_factory=list)
    defenses: List[dict] = field(default_factory=list)
    detection: List[dict] = field(default_factory=list)
    profiles: List[dict] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def validate(self):
        if not self.run_id:
            raise ValidationError('report has no run_id')
        for table in ('white_box', 'black_box', 'sweeps', 'defenses'):
            for row in getattr(self, table):
                rate = row.get('success_rate')
                if rate is not None and not 0.0 <= rate <= 1.0:
                    raise ValidationError(f'{table}: success_rate {rate} outside [0, 1]')
        for row in self.black_box:
            if row.get('source') == row.get('target') and row.get('success_rate') is not None:
                raise ValidationError('black_box diagonal cells must be marked not applicable')
        return self

    def to_dict(self) -> dict:
        return normalize(asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> 'EvaluationReport':
        known = {f.name for f in fields(cls)}
        missing = {'run_id', 'seed', 'version'} - set(data)
        if missing:
            raise ValidationError(f'report lacks {sorted(missing)}')
        return cls(**{k: v for k, v in data.items() if k in known})


def to_json(report: EvaluationReport) -> str:
    return json.dumps(report.validate().to_dict(), sort_keys=True, indent=2) + '\n'


def _csv_cell(value):
    if value is None:
        return NOT_APPLICABLE
    if isinstance(value, float):
        return f'{value:.6g}'
    return str(value)


def write_table(rows: List[dict], columns: List[str], path: str):
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(row.get(c)) for c in columns])


def emit_report(report: EvaluationReport, fmt: str, out_path: str) -> List[str]:
    """
    json: one file at out_path. csv: out_path is a directory receiving one
    <table>.csv per non-empty table. Returns the written paths.
    """
    if fmt == JSON:
        text = to_json(report)
        os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
        with open(out_path, 'w', encoding='utf-8', newline='\n') as handle:
            handle.write(text)
        logger.info(f'Report {report.run_id} written to {out_path}')
        return [out_path]
    if fmt == CSV:
        data = report.validate().to_dict()
        os.makedirs(out_path, exist_ok=True)
        written = []
        for table in TABLES:
            if not data[table]:
                continue
            path = os.path.join(out_path, f'{table}.csv')
            write_table(data[table], COLUMNS[table], path)
            written.append(path)
        logger.info(f'Report {report.run_id}: {len(written)} CSV tables in {out_path}')
        return written
    raise ValidationError(f'report format must be json or csv, got {fmt!r}')


def load_report(path: str) -> EvaluationReport:
    try:
        with open(path, encoding='utf-8') as handle:
            data = json.load(handle)
    except json.JSONDecodeError as e:
        raise ValidationError(f'{path} is not a JSON report: {e}')
    return EvaluationReport.from_dict(data)
