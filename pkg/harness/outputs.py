import logging
import shutil
from pathlib import Path

import pandas as pd

from .serializers import SUMMARY_COLUMNS, ExperimentRunSerializer

logger = logging.getLogger('harness')

CONVERGENCE_COLUMNS = [
    'algorithm', 'iteration', 'consensus_violation', 'dual_residual', 'distance',
    'objective', 'cost', 'losses', 'communication',
]
COUPLING_COLUMNS = ['algorithm', 'iteration', 'row', 'label', 'ac_value', 'mtdc_value', 'difference']
PLOT_SCRIPT = Path(__file__).resolve().parent / 'plot_convergence.py'


def convergence_frame(reports):
    rows = [
        {'algorithm': report.algorithm, **row}
        for report in reports
        for row in report.history
    ]
    return pd.DataFrame(rows, columns=CONVERGENCE_COLUMNS)


def coupling_frame(reports, consensus=None):
    labels = consensus.labels if consensus is not None else []
    rows = []
    for report in reports:
        for iteration, pairs in enumerate(report.coupling, start=1):
            for index, (ac_value, mtdc_value) in enumerate(pairs):
                rows.append({
                    'algorithm': report.algorithm,
                    'iteration': iteration,
                    'row': index,
                    'label': labels[index] if index < len(labels) else str(index),
                    'ac_value': ac_value,
                    'mtdc_value': mtdc_value,
                    'difference': ac_value - mtdc_value,
                })
    return pd.DataFrame(rows, columns=COUPLING_COLUMNS)


def summary_frame(runs):
    return pd.DataFrame(ExperimentRunSerializer(runs, many=True).data, columns=SUMMARY_COLUMNS)


def emit_outputs(reports, directory, runs, consensus=None):
    """
    Writes convergence.csv, summary.csv, coupling.csv and the plotting
    script into `directory`. Returns the written paths by name.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        'convergence': directory / 'convergence.csv',
        'summary': directory / 'summary.csv',
        'coupling': directory / 'coupling.csv',
        'plot': directory / PLOT_SCRIPT.name,
    }
    convergence_frame(reports).to_csv(paths['convergence'], index=False)
    summary_frame(runs).to_csv(paths['summary'], index=False)
    coupling_frame(reports, consensus).to_csv(paths['coupling'], index=False)
    shutil.copyfile(PLOT_SCRIPT, paths['plot'])
    logger.info(f"Wrote {', '.join(path.name for path in paths.values())} to {directory}.")
    return paths
