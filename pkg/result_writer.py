"""
Result Writer Module
Writes run tables (CSV/JSON) and summaries, and formats plain-text reports
"""

import json
import math
import os
from typing import List, Dict, Optional, Union

import numpy as np
import pandas as pd

from config import OUTPUT_DEFAULTS, SCHEMA_VERSION, CSV_FLOAT_FORMAT


def to_jsonable(value):
    """Convert numpy scalars/arrays, enums and NaN into plain JSON values"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    if hasattr(value, 'value') and isinstance(getattr(value, 'value'), str):
        return value.value
    return value


class ResultWriter:
    """
    Writes every artefact of a run under one path prefix
    (e.g. prefix ./results/run gives ./results/run_curve.csv, ./results/run_summary.json)
    """

    def __init__(self, path: str = OUTPUT_DEFAULTS['path'],
                 fmt: str = OUTPUT_DEFAULTS['format']):
        """
        Initialize result writer

        Args:
            path: Output path prefix
            fmt: Table format, 'csv' or 'json'
        """
        self.path = path
        self.fmt = fmt.lower()
        if self.fmt not in ('csv', 'json'):
            raise ValueError(f"unknown output format '{fmt}'")

        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)

    def path_for(self, name: str, ext: str) -> str:
        return f"{self.path}_{name}.{ext}"

    def write_table(self, table: Union[pd.DataFrame, List[Dict]], name: str) -> str:
        """
        Write a table in the configured format

        Args:
            table: DataFrame or list of row dicts
            name: Artefact name appended to the prefix

        Returns:
            Path of the written file
        """
        df = table if isinstance(table, pd.DataFrame) else pd.DataFrame(table)

        if self.fmt == 'csv':
            output_path = self.path_for(name, 'csv')
            df.to_csv(output_path, index=False, float_format=CSV_FLOAT_FORMAT,
                      lineterminator='\n')
        else:
            output_path = self.path_for(name, 'json')
            records = to_jsonable(df.to_dict(orient='records'))
            with open(output_path, 'w', encoding='utf-8', newline='\n') as f:
                json.dump(records, f, indent=2)
                f.write('\n')
        return output_path

    def write_summary(self, summary: dict, name: str = 'summary') -> str:
        """
        Write a JSON summary carrying schema_version

        Returns:
            Path of the written file
        """
        payload = {'schema_version': SCHEMA_VERSION, **to_jsonable(summary)}
        output_path = self.path_for(name, 'json')
        with open(output_path, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(payload, f, indent=2)
            f.write('\n')
        return output_path


def load_summary(path: str) -> dict:
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def _fmt(value, spec: str = '.6g') -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return '-'
    if isinstance(value, bool):
        return 'yes' if value else 'no'
    if isinstance(value, (int, float, np.floating)):
        return format(float(value), spec)
    return str(value)


def format_rates_report(rows: List[Dict]) -> str:
    """
    Plain-text table of the closed-form cases

    Args:
        rows: Rate rows as produced by the rates command

    Returns:
        Formatted text report
    """
    report = []
    report.append("=" * 60)
    report.append("DECAY RATE REPORT")
    report.append("=" * 60)
    report.append("")

    for row in rows:
        case = row['case'].replace('_', ' ').title()
        if row.get('skip_reason'):
            report.append(f"  {case:.<26} skipped ({row['skip_reason']})")
            continue
        flags = []
        if row.get('approximate'):
            flags.append("approximate")
        if not row.get('spectrum_preserving'):
            flags.append("not spectrum preserving")
        suffix = f"  [{', '.join(flags)}]" if flags else ""
        report.append(f"  {case:.<26} kappa = {_fmt(row['kappa'])}  "
                      f"(lambda+ = {_fmt(row['lambda_plus'])}){suffix}")
        if row.get('lindblad_warning_margin') is not None:
            report.append(f"    ⚠ Lindblad condition violated by "
                          f"{_fmt(-row['lindblad_warning_margin'])}")

    report.append("")
    if rows:
        first = rows[0]
        report.append(f"Dense spectrum: kappa = {_fmt(first.get('dense_kappa'))}, "
                      f"lambda+ = {_fmt(first.get('dense_lambda_plus'))}")
        report.append(f"sqrt(D) H sqrt(D) smallest eigenvalue: "
                      f"{_fmt(first.get('sqrt_d_kappa'))}")
    report.append("=" * 60)
    return "\n".join(report)


def format_decay_report(summary: dict, title: str = "DECAY SIMULATION REPORT") -> str:
    """Plain-text summary of a simulate / sgd run"""
    report = []
    report.append("=" * 60)
    report.append(title)
    report.append("=" * 60)
    report.append("")

    fit = summary.get('fit') or {}
    if fit.get('error'):
        report.append(f"Fitted rate: unavailable ({fit['error']})")
    elif fit:
        report.append(f"Fitted rate: {_fmt(fit.get('rate'))} ± {_fmt(fit.get('stderr'), '.2g')} "
                      f"over [{_fmt(fit['window'][0], '.4g')}, {_fmt(fit['window'][1], '.4g')}]")
    if 'analytic_kappa' in summary:
        report.append(f"Analytic kappa: {_fmt(summary['analytic_kappa'])}")
    mixing = summary.get('mixing') or {}
    if mixing.get('t_mix') is not None:
        report.append(f"Mixing time: {_fmt(mixing['t_mix'])} "
                      f"(C = {_fmt(mixing['prefactor_C'])}, epsilon = {_fmt(mixing['epsilon'])})")
    for key, label in (('stationary_variance', "Stationary variance"),
                       ('empirical_variance', "Empirical variance"),
                       ('discrete_stationary_variance', "Discrete-iteration variance")):
        if key in summary:
            report.append(f"{label}: {_fmt(summary[key])}")
    if summary.get('notes'):
        report.append("")
        for note in summary['notes']:
            report.append(f"  ⚠ {note}")
    report.append("=" * 60)
    return "\n".join(report)


def format_compare_report(summary: dict) -> str:
    """Side-by-side quantum vs classical report"""
    report = []
    report.append("=" * 60)
    report.append("QUANTUM VS CLASSICAL COMPARISON")
    report.append("=" * 60)
    report.append("")

    analogy = summary['analogy']
    report.append(f"Dominance gamma/omega0: {_fmt(analogy['dominance'])}")
    report.append(f"Regime: {analogy['regime']}")
    report.append(f"Matched learning rate s: {_fmt(analogy['s'])}  objective {analogy['objective']}")
    report.append("")
    report.append("Fitted Rates:")
    report.append("-" * 40)
    for side in ('quantum', 'classical'):
        block = summary.get(side) or {}
        if block.get('skipped'):
            report.append(f"  {side.title():.<20} skipped ({block['skipped']})")
            continue
        fit = block.get('fit') or {}
        if fit.get('error'):
            report.append(f"  {side.title():.<20} unavailable ({fit['error']})")
        else:
            report.append(f"  {side.title():.<20} {_fmt(fit.get('rate'))} "
                          f"± {_fmt(fit.get('stderr'), '.2g')}")
    report.append("=" * 60)
    return "\n".join(report)
