"""
The "acceptance" module checks a finished sweep against the expected trends.

Trend checks compare protocols cell by cell on the mean over seeds; the
value of a trend check is the share of cells (or of sweep rows) where the
expected relation holds. Run checks must hold for every single run.

Classes:
    - CheckResult: Outcome of one check.

Functions:
    - cell_means: Mean metrics per cell, one column per (metric, protocol).
    - evaluate: Run every check on a results frame.
"""

import logging
from dataclasses import dataclass

from app.src.settings import settings

logger = logging.getLogger(__name__)

CELL = ['sweep', 'nodes', 'pause', 'speed']


@dataclass(frozen=True)
class CheckResult:
    """
    Attributes:
        name (str): Short identifier.
        description (str): The expected relation.
        value (float): Share of cells, rows or runs where it holds; None when not evaluated.
        threshold (float): Minimum share to pass.
        passed (bool): None when a protocol the check needs is missing.
    """

    name: str
    description: str
    value: float
    threshold: float
    passed: bool

    def __str__(self):
        if self.passed is None:
            return f'SKIP {self.name}: {self.description}'
        verdict = 'PASS' if self.passed else 'FAIL'
        return f'{verdict} {self.name}: {self.value:.3f} (need {self.threshold:.2f}) {self.description}'


def cell_means(frame):
    metrics = ['throughput', 'avg_delay_s', 'dropped', 'overhead']
    frame = frame[frame['sweep'].notna()]
    return frame.groupby(CELL + ['protocol'])[metrics].mean().unstack('protocol')


def _share(mask):
    return float(mask.mean()) if len(mask) else 0.0


def _trend(name, description, means, protocols, threshold, relation):
    present = set(means.columns.get_level_values('protocol'))
    if not set(protocols) <= present:
        return CheckResult(name, description, None, threshold, None)
    value = _share(relation(means))
    return CheckResult(name, description, value, threshold, value >= threshold)


def spearman(x, y):
    """Spearman rank correlation; NaN when either side is constant."""
    return x.rank().corr(y.rank())


def _overhead_growth(frame, threshold=0.7):
    """Share of (protocol, sweep row) pairs whose overhead rises with the node count."""
    means = frame[frame['sweep'].notna()].groupby(CELL + ['protocol'], as_index=False)['overhead'].mean()
    means['group'] = [row.pause if row.sweep == 'pause' else row.speed for row in means.itertuples()]
    correlations = []
    for key, row in means.groupby(['protocol', 'sweep', 'group']):
        row = row.sort_values('nodes')
        rho = spearman(row['nodes'].astype(float), row['overhead'].astype(float))
        correlations.append(rho)
        if not rho >= threshold:
            logger.info('overhead growth %s: spearman %.3f', key, rho)
    passing = [rho >= threshold for rho in correlations]
    value = sum(passing) / len(passing) if passing else 0.0
    return CheckResult('overhead-grows', 'Spearman(nodes, overhead) >= 0.7 for every protocol and sweep row',
                       value, 1.0, bool(passing) and all(passing))


def _every_run(name, description, mask):
    value = _share(mask)
    return CheckResult(name, description, value, 1.0, bool(len(mask)) and bool(mask.all()))


def evaluate(frame):
    """Run every check on a sweep results frame (`runs.csv` columns).

    Returns:
        list: `CheckResult` per check, trend checks first.
    """
    means = cell_means(frame)
    others = [name for name in settings.protocols if name != 'aodv']
    checks = [
        _trend('aodv-throughput', 'AODV throughput >= every other protocol', means, settings.protocols, 0.6,
               lambda m: m['throughput']['aodv'] >= m['throughput'][others].max(axis=1)),
        _trend('dsdv-drops', 'DSDV drops more than AODV and DSR', means, ('dsdv', 'aodv', 'dsr'), 0.6,
               lambda m: m['dropped']['dsdv'] > m['dropped'][['aodv', 'dsr']].max(axis=1)),
        _trend('reactive-overhead', 'max(ZRP, AODV) overhead > max(DSR, DSDV) overhead', means, settings.protocols,
               0.7, lambda m: m['overhead'][['zrp', 'aodv']].max(axis=1) > m['overhead'][['dsr', 'dsdv']].max(axis=1)),
        _overhead_growth(frame),
        _trend('dsdv-delay', 'DSDV average delay < AODV average delay', means, ('dsdv', 'aodv'), 0.6,
               lambda m: m['avg_delay_s']['dsdv'] < m['avg_delay_s']['aodv']),
        _trend('dsr-drops', 'DSR drops <= AODV drops', means, ('dsr', 'aodv'), 0.5,
               lambda m: m['dropped']['dsr'] <= m['dropped']['aodv']),
    ]
    if 'residual' in frame:
        balance = frame['generated'] == frame['delivered'] + frame['dropped'] + frame['residual']
        checks.append(_every_run('conservation', 'generated = delivered + dropped + residual, residual >= held',
                                 balance & (frame['held'] <= frame['residual'])))
    if 'revisits' in frame:
        checks.append(_every_run('loop-freedom', 'no delivered packet revisits a node, route freshness never drops',
                                 (frame['revisits'] == 0) & (frame['freshness_violations'] == 0)))
    for check in checks:
        logger.info('%s', check)
    return checks


def failures(checks):
    return [check for check in checks if check.passed is False]
