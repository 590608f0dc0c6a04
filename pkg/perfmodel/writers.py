"""
CSV and JSON emission for reports, sweeps, simulation statistics and verdicts.

Every writer takes an output stem and writes `<stem>.csv` and `<stem>.json`.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import pandas as pd

from .report import REPORT_COLUMNS, ComparisonVerdict, PerformanceReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SWEEP_STATUS_COLUMNS = ('converged', 'flags', 'error')
SIM_STATS_COLUMNS = ('metric', 'mean', 'variance', 'ci_low', 'ci_high', 'half_width', 'replications')
VERDICT_COLUMNS = ('metric', 'value', 'reference', 'abs_error', 'relative_error', 'allowed',
                   'ci_half_width', 'passed')


def output_paths(stem: PathLike) -> Tuple[Path, Path]:
    stem = Path(stem)
    if stem.suffix in ('.csv', '.json'):
        stem = stem.with_suffix('')
    stem.parent.mkdir(parents=True, exist_ok=True)
    return stem.with_suffix('.csv'), stem.with_suffix('.json')


def _write_rows(path: Path, fieldnames: Sequence[str], rows: Iterable[dict]):
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.DictWriter(handle, fieldnames=list(fieldnames), quoting=csv.QUOTE_MINIMAL,
                                lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _write_json(path: Path, payload):
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(payload, handle, sort_keys=True, indent=2)
        handle.write('\n')


def write_report(report: PerformanceReport, stem: PathLike) -> Tuple[Path, Path]:
    csv_path, json_path = output_paths(stem)
    _write_rows(csv_path, REPORT_COLUMNS, [report.as_row()])
    _write_json(json_path, report.as_dict())
    logger.info(f"Report written to {csv_path} and {json_path}")
    return csv_path, json_path


def read_report_csv(path: PathLike) -> PerformanceReport:
    with open(path, newline='', encoding='utf-8') as handle:
        rows = list(csv.DictReader(handle))
    if len(rows) != 1:
        raise ValueError(f"{path} holds {len(rows)} report rows, expected 1")
    return PerformanceReport.from_row(rows[0])


def read_report_json(path: PathLike) -> PerformanceReport:
    with open(path, encoding='utf-8') as handle:
        return PerformanceReport.from_dict(json.load(handle))


def sweep_frame(axes: Sequence[str], rows: Sequence[Dict], outputs: Sequence[str] = ()) -> pd.DataFrame:
    """One row per grid point in grid order; swept values first."""
    metric_columns = [column for column in (outputs or REPORT_COLUMNS) if column not in SWEEP_STATUS_COLUMNS]
    columns = [*axes, *SWEEP_STATUS_COLUMNS, *metric_columns]
    frame = pd.DataFrame(list(rows)).reindex(columns=columns)
    frame['converged'] = frame['converged'].fillna(False).astype(bool)
    frame['flags'] = frame['flags'].fillna('')
    frame['error'] = frame['error'].fillna('')
    return frame


def write_sweep(frame: pd.DataFrame, stem: PathLike) -> Tuple[Path, Path]:
    csv_path, json_path = output_paths(stem)
    frame.to_csv(csv_path, index=False, na_rep='', lineterminator='\n')
    records = json.loads(frame.to_json(orient='records'))
    _write_json(json_path, {'columns': list(frame.columns), 'rows': records})
    logger.info(f"Sweep of {len(frame)} points written to {csv_path}")
    return csv_path, json_path


def read_sweep_csv(path: PathLike) -> pd.DataFrame:
    frame = pd.read_csv(path, keep_default_na=False, na_values=[''])
    for column in ('flags', 'error'):
        if column in frame:
            frame[column] = frame[column].fillna('').astype(str)
    return frame


def write_sim_stats(sim_stats, stem: PathLike) -> Tuple[Path, Path]:
    csv_path, json_path = output_paths(stem)
    _write_rows(csv_path, SIM_STATS_COLUMNS, sim_stats.as_rows())
    _write_json(json_path, sim_stats.as_dict())
    logger.info(f"Simulation statistics written to {csv_path}")
    return csv_path, json_path


def write_verdict(verdict: ComparisonVerdict, stem: PathLike, extra: Dict = None) -> Tuple[Path, Path]:
    csv_path, json_path = output_paths(stem)
    rows: List[dict] = [check.as_row() for check in verdict.checks]
    _write_rows(csv_path, VERDICT_COLUMNS, rows)
    _write_json(json_path, {**(extra or {}), 'passed': verdict.passed, 'checks': rows})
    return csv_path, json_path
