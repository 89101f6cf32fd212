"""
The "plot" module aggregates sweep results into pivot tables and SVG charts.

Every chart shows one metric for one group of cells (one pause time of the
pause sweep, or one maximum speed of the speed sweep): node count on the x
axis, one line per protocol, the mean over seeds with min-max whiskers.
Four metrics over ten groups give forty charts.

Functions:
    - aggregate: Mean, minimum and maximum over seeds per cell and protocol.
    - write_pivots: One CSV per metric.
    - plot_results: Every chart of a results file.
"""

import logging
import os

from matplotlib.figure import Figure

from app.src.errors import HarnessError
from app.src.harness.runner import read_runs
from app.src.harness.scenario import PAUSE_SWEEP, SPEED_SWEEP
from app.src.settings import settings

logger = logging.getLogger(__name__)

METRICS = {
    'throughput': 'Throughput (delivered / generated)',
    'avg_delay_s': 'Average delay (s)',
    'dropped': 'Dropped packets',
    'overhead': 'Routing overhead (packets)',
}
GROUP_COLUMN = {PAUSE_SWEEP: 'pause', SPEED_SWEEP: 'speed'}
GROUP_LABEL = {PAUSE_SWEEP: 'pause time {:g} s, max speed {:g} m/s', SPEED_SWEEP: 'max speed {:g} m/s, pause {:g} s'}
MARKERS = {'dsdv': 'o', 'aodv': 's', 'dsr': '^', 'zrp': 'D'}


def aggregate(frame):
    """Group runs by (sweep, nodes, pause, speed, protocol).

    Returns:
        pandas.DataFrame: For every metric the columns `<metric>_mean`,
        `<metric>_min` and `<metric>_max`, plus `seeds`.
    """
    frame = frame[frame['sweep'].notna()]
    if frame.empty:
        raise HarnessError('no result belongs to the pause or speed sweep')
    grouped = frame.groupby(['sweep', 'nodes', 'pause', 'speed', 'protocol'])
    summary = grouped[list(METRICS)].agg(['mean', 'min', 'max'])
    summary.columns = [f'{metric}_{stat}' for metric, stat in summary.columns]
    summary['seeds'] = grouped.size()
    return summary.reset_index()


def _group_values(sweep):
    return settings.pause_values if sweep == PAUSE_SWEEP else settings.speed_values


def write_pivots(summary, out_dir):
    """Write `pivot_<metric>.csv`: rows (sweep, group, nodes), one column per protocol, mean over seeds."""
    paths = []
    for metric in METRICS:
        table = summary.assign(group=[row.pause if row.sweep == PAUSE_SWEEP else row.speed
                                      for row in summary.itertuples()])
        pivot = table.pivot_table(index=['sweep', 'group', 'nodes'], columns='protocol',
                                  values=f'{metric}_mean', aggfunc='first')
        pivot = pivot.reindex(columns=[name for name in settings.protocols if name in pivot.columns])
        pivot.columns.name = None
        path = os.path.join(out_dir, f'pivot_{metric}.csv')
        pivot.to_csv(path, float_format='%.6f')
        paths.append(path)
    return paths


def _chart(summary, metric, sweep, value, path):
    column = GROUP_COLUMN[sweep]
    cells = summary[(summary['sweep'] == sweep) & (summary[column] == value)]
    fixed = settings.pause_sweep_speed if sweep == PAUSE_SWEEP else settings.speed_sweep_pause
    figure = Figure(figsize=(6.4, 4.2))
    axes = figure.subplots()
    missing = []
    for protocol in settings.protocols:
        rows = cells[cells['protocol'] == protocol].set_index('nodes').reindex(list(settings.node_counts))
        mean = rows[f'{metric}_mean']
        missing += [f'{protocol}@n={nodes}' for nodes, present in zip(rows.index, mean.notna()) if not present]
        if mean.notna().sum() == 0:
            continue
        whiskers = [(mean - rows[f'{metric}_min']).fillna(0).to_numpy(),
                    (rows[f'{metric}_max'] - mean).fillna(0).to_numpy()]
        axes.errorbar(rows.index, mean.to_numpy(), yerr=whiskers, label=protocol.upper(),
                      marker=MARKERS.get(protocol, 'o'), capsize=3)
    axes.set_xlabel('Number of nodes')
    axes.set_ylabel(METRICS[metric])
    axes.set_xticks(list(settings.node_counts))
    axes.set_title(GROUP_LABEL[sweep].format(value, fixed), fontsize=9)
    axes.grid(True, alpha=0.3)
    if axes.get_legend_handles_labels()[0]:
        axes.legend()
    figure.tight_layout()
    figure.savefig(path, format='svg', metadata={'Date': None})
    return missing


def plot_results(results_path, out_dir):
    """Write the pivot CSVs and the forty charts of a results file.

    Args:
        results_path (str): `metrics.csv` or `runs.csv` of a sweep.
        out_dir (str): Output directory.

    Returns:
        list: Paths of the written SVG files.

    Raises:
        HarnessError: When the results are empty or unreadable.
    """
    summary = aggregate(read_runs(results_path))
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as error:
        raise HarnessError(f'cannot create {out_dir}: {error}') from error
    write_pivots(summary, out_dir)
    charts = []
    for metric in METRICS:
        for sweep in (PAUSE_SWEEP, SPEED_SWEEP):
            for value in _group_values(sweep):
                path = os.path.join(out_dir, f'{metric}_{sweep}_{value:g}.svg')
                missing = _chart(summary, metric, sweep, value, path)
                if missing:
                    logger.warning('%s: no results for %s', os.path.basename(path), ', '.join(missing))
                charts.append(path)
    logger.info('wrote %d charts to %s', len(charts), out_dir)
    return charts
