import csv
import io
import json
import logging
import os

import numpy as np

from SpecLab.Harness.Harness import ExperimentRecord
from SpecLab.Utility import Utility
from SpecLab.Utility.Utility import format_number

#----------------------------------------------

def csv_header(k):
    return (['family', 's', 'h_fine']
            + [f'lam{j}' for j in range(1, k + 1)]
            + [f'lam{j}B' for j in range(1, k + 1)]
            + ['d', 'd_err', 'eps', 'ratio21', 'linf_margin', 'status'])


def _padded(values, k):
    return [format_number(v) for v in values] + [''] * (k - len(values))


def csv_rows(records):
    """Header and rows for a list of records, in the order given."""
    k = max((r.k for r in records), default=0)
    rows = []
    for r in records:
        rows.append([r.family, format_number(r.s), format_number(r.h_fine)]
                    + _padded(r.eigenvalues, k) + _padded(r.ball_eigenvalues, k)
                    + [format_number(v) for v in (r.d, r.d_err, r.eps, r.ratio21, r.linf_margin)]
                    + [r.status])
    return csv_header(k), rows


def write_csv(records, file_path):
    header, rows = csv_rows(records)
    path, filename = os.path.split(file_path)
    return Utility.write_data_to_csv(rows, path, filename, header)


def write_jsonl(records, file_path):
    path, filename = os.path.split(file_path)
    return Utility.write_jsonl([r.to_dict() for r in records], path, filename)


def read_jsonl(file_path):
    return [ExperimentRecord.from_dict(item) for item in Utility.read_jsonl(file_path)]


def format_csv(records):
    """The CSV text written by write_csv, for printing to stdout."""
    header, rows = csv_rows(records)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def format_jsonl(records):
    return ''.join(json.dumps(r.to_dict(), sort_keys=True) + '\n' for r in records)


def write_report(report, file_path):
    with open(file_path, 'w', encoding='utf-8') as f:
        json.dump(report.to_dict(), f, sort_keys=True, indent=2)
    logging.info(f"Verification report written to '{file_path}'")
    return True

#----------------------------------------------

def plot_records(records, directory):
    """
    Log-log scatter plots of a sweep, one SVG per figure.

    Returns:
        list: paths of the files written.
    """
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    os.makedirs(directory or '.', exist_ok=True)
    usable = [r for r in records if r.ok]
    written = []

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for family in sorted({r.family for r in usable}):
        pts = np.array([(r.d, r.deficit_1) for r in usable if r.family == family and r.d > 0 and r.deficit_1 > 0])
        if len(pts):
            ax.loglog(pts[:, 0], pts[:, 1], 'o', label=family)
    ax.set_xlabel('Fraenkel asymmetry d')
    ax.set_ylabel('lambda_1 deficit')
    ax.grid(True, which='both', alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    target = os.path.join(directory, 'deficit_vs_asymmetry.svg')
    fig.savefig(target, format='svg')
    plt.close(fig)
    written.append(target)

    fig, ax = plt.subplots(figsize=(6, 4.5))
    k = max((r.k for r in usable), default=0)
    for j in range(1, k):
        pts = np.array([(r.deficit_1, abs(r.deficits[j])) for r in usable
                        if len(r.deficits) > j and r.deficit_1 > 0 and r.deficits[j] != 0])
        if len(pts):
            ax.loglog(pts[:, 0], pts[:, 1], '.', label=f'k={j + 1}')
    ax.set_xlabel('lambda_1 deficit')
    ax.set_ylabel('|lambda_k - lambda_k(B)|')
    ax.grid(True, which='both', alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    target = os.path.join(directory, 'eigenvalue_deficits.svg')
    fig.savefig(target, format='svg')
    plt.close(fig)
    written.append(target)
    logging.info(f'Plots written: {", ".join(written)}')
    return written
