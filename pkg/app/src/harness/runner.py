"""
The "runner" module executes runs and sweeps and writes their results.

A run reads a scenario, simulates one protocol over it, streams the trace
to disk while the metrics are accumulated, and writes a manifest next to
the trace: protocol, scenario parameters and file digests, the effective
configuration, the trace digest and the run tallies. The manifest alone is
enough to regenerate the trace byte for byte (`replay`).

A sweep generates the scenario of every (cell, seed) once, runs every
protocol on it in a process pool, and writes `metrics.csv` (the four
metrics per run) plus `runs.csv` (metrics and every run tally).

Classes:
    - RunOutcome: Report, tallies and file paths of a finished run.

Functions:
    - run_scenario: One protocol over one scenario.
    - replay: Regenerate a run from its manifest.
    - trace_metrics: Metrics of an existing trace file.
    - sweep: The full matrix.
"""

import dataclasses
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import pandas as pd

from app.src.errors import HarnessError
from app.src.harness.scenario import classify, gen_matrix, generate_scenario, read_scenario, write_scenario
from app.src.metrics.metrics import MetricsAccumulator, PathTracker
from app.src.metrics.trace import Tracer, read_trace
from app.src.settings import settings
from app.src.settings.config import SimConfig, apply_overrides
from app.src.simulation.simulation import Simulation

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = '.manifest.json'
RUN_COLUMNS = settings.metrics_header + ('sweep', 'residual', 'held', 'revisits', 'path_checks',
                                         'freshness_violations', 'link_changes', 'routing_bytes',
                                         'header_bytes', 'events', 'digest')


@dataclass(frozen=True)
class RunOutcome:
    """
    Result of `run_scenario`.

    Attributes:
        report (MetricsReport): The four metrics and the data tallies.
        result (RunResult): Simulation tallies.
        revisits (int): Delivered data packets whose path revisited a node.
        trace_path (str): Written trace file.
        manifest_path (str): Written manifest file.
    """

    report: object
    result: object
    revisits: int
    trace_path: str
    manifest_path: str

    def row(self):
        """Metrics and tallies as a flat dictionary with raw numbers."""
        report, result = self.report, self.result
        return {
            'throughput': report.throughput,
            'avg_delay_s': report.avg_delay,
            'dropped': report.dropped,
            'overhead': report.overhead,
            'generated': report.generated,
            'delivered': report.delivered,
            'residual': result.residual,
            'held': result.held,
            'revisits': self.revisits,
            'path_checks': result.path_checks,
            'freshness_violations': result.freshness_violations,
            'link_changes': result.link_changes,
            'routing_bytes': result.routing_bytes,
            'header_bytes': result.header_bytes,
            'events': result.events,
            'digest': result.digest,
        }


def manifest_path_for(trace_path):
    return os.path.splitext(trace_path)[0] + MANIFEST_SUFFIX


def _digest_file(path):
    digest = hashlib.sha256()
    try:
        with open(path, 'rb') as source:
            for chunk in iter(lambda: source.read(1 << 16), b''):
                digest.update(chunk)
    except OSError as error:
        raise HarnessError(f'cannot read {path}: {error}') from error
    return digest.hexdigest()


def _json_number(value):
    return None if isinstance(value, float) and math.isnan(value) else value


def run_scenario(protocol, scenario, trace_path, config=None, warmup_s=0.0, scenario_files=None):
    """Simulate `protocol` over `scenario`, writing the trace and its manifest.

    Args:
        protocol (str): Protocol name.
        scenario (Scenario): Mobility and traffic of the run.
        trace_path (str): Where to write the trace.
        config (SimConfig): Tunables, defaults when None.
        warmup_s (float): Metrics exclusion window.
        scenario_files (dict): Paths of the scenario files, digested into the manifest.

    Returns:
        RunOutcome: Report, tallies and paths.
    """
    config = config or SimConfig()
    metrics = MetricsAccumulator(warmup_s)
    paths = PathTracker()
    directory = os.path.dirname(trace_path)
    started = time.perf_counter()
    try:
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(trace_path, 'w', encoding='utf-8', newline='\n') as sink:
            tracer = Tracer(sink)
            tracer.listeners.extend((metrics, paths))
            sim = Simulation(protocol, scenario.mobility, scenario.traffic, scenario.seed, config, tracer)
            result = sim.run()
    except OSError as error:
        raise HarnessError(f'cannot write trace {trace_path}: {error}') from error
    report = metrics.report()
    manifest = {
        'protocol': protocol.lower(),
        'scenario': scenario.meta(),
        'scenario_files': {role: {'path': path, 'sha256': _digest_file(path)}
                           for role, path in sorted((scenario_files or {}).items())},
        'config': config.flatten(),
        'warmup_s': warmup_s,
        'trace': {'path': trace_path, 'sha256': result.digest, 'records': result.records},
        'summary': {key: _json_number(value) for key, value in result.as_dict().items()},
        'metrics': {key: _json_number(value) for key, value in dataclasses.asdict(report).items()},
        'revisits': len(paths.looped),
    }
    manifest_path = manifest_path_for(trace_path)
    try:
        with open(manifest_path, 'w', encoding='utf-8') as output:
            json.dump(manifest, output, indent=2, sort_keys=True)
            output.write('\n')
    except OSError as error:
        raise HarnessError(f'cannot write manifest {manifest_path}: {error}') from error
    logger.info('%s over %r: %d records in %.1f s', protocol, scenario, result.records, time.perf_counter() - started)
    return RunOutcome(report, result, len(paths.looped), trace_path, manifest_path)


def run_directory(protocol, scenario_dir, trace_path, config=None, warmup_s=0.0):
    """Run a protocol over a scenario directory written by `write_scenario`."""
    scenario = read_scenario(scenario_dir)
    files = {role: os.path.join(scenario_dir, name) for role, name in
             (('movement', settings.movement_file), ('traffic', settings.traffic_file),
              ('meta', settings.scenario_meta_file))}
    return run_scenario(protocol, scenario, trace_path, config, warmup_s, files)


def load_manifest(path):
    try:
        with open(path, encoding='utf-8') as source:
            return json.load(source)
    except (OSError, ValueError) as error:
        raise HarnessError(f'cannot read manifest {path}: {error}') from error


def replay(manifest_path, trace_path):
    """Regenerate a run from its manifest alone.

    The scenario is drawn again from its seed and parameters and the
    configuration is rebuilt from the recorded values.

    Returns:
        RunOutcome: The new run; its digest equals the recorded one.
    """
    manifest = load_manifest(manifest_path)
    meta = manifest['scenario']
    scenario = generate_scenario(meta['nodes'], meta['pause'], meta['speed_max'], meta['seed'],
                                 speed_min=meta['speed_min'], duration_s=meta['duration_s'],
                                 area=tuple(meta['area']), connections=meta['connections'])
    config = apply_overrides(SimConfig(), manifest['config'])
    return run_scenario(manifest['protocol'], scenario, trace_path, config, manifest.get('warmup_s', 0.0))


def trace_metrics(trace_path, warmup_s=0.0):
    """Evaluate a trace file, labelled with its manifest when one sits next to it.

    Returns:
        dict: One metrics CSV row, blank fields for unknown labels and undefined values.
    """
    report = MetricsAccumulator(warmup_s).extend(read_trace(trace_path)).report()
    row = dict.fromkeys(settings.metrics_header, '')
    manifest_path = manifest_path_for(trace_path)
    if os.path.exists(manifest_path):
        manifest = load_manifest(manifest_path)
        meta = manifest['scenario']
        row.update(protocol=manifest['protocol'], nodes=meta['nodes'], pause=f'{meta["pause"]:g}',
                   speed=f'{meta["speed_max"]:g}', seed=meta['seed'])
    row.update(report.row())
    return row


def write_rows(rows, path, columns=settings.metrics_header):
    """Write rows as CSV; floats with 6 decimals and undefined values blank.

    Returns:
        pandas.DataFrame: The rows with their raw values.
    """
    frame = pd.DataFrame(list(rows), columns=list(columns))
    output = frame.copy()
    for column in ('pause', 'speed'):
        if column in output:
            output[column] = output[column].map(lambda value: f'{value:g}' if isinstance(value, float) else value)
    try:
        output.to_csv(path, index=False, float_format='%.6f', na_rep='')
    except OSError as error:
        raise HarnessError(f'cannot write {path}: {error}') from error
    return frame


def _run_job(job):
    protocol, scenario_dir, trace_path, config, labels = job
    outcome = run_directory(protocol, scenario_dir, trace_path, config)
    return {**labels, **outcome.row()}


def sweep(out_dir, seeds=settings.default_seeds, protocols=settings.protocols, jobs=None, config=None):
    """Run the full matrix and write `metrics.csv` and `runs.csv` into `out_dir`.

    Args:
        out_dir (str): Result directory; scenarios and traces go below it.
        seeds (int): Seeds per cell.
        protocols (iterable): Protocols to compare.
        jobs (int): Worker processes, the CPU count when None; 1 runs in this process.
        config (SimConfig): Tunables shared by every run.

    Returns:
        pandas.DataFrame: One row per run with the `RUN_COLUMNS`.
    """
    configs = gen_matrix(seeds, protocols)
    config = config or SimConfig()
    prepared = set()
    work = []
    for run in configs:
        scenario_dir = os.path.join(out_dir, run.scenario_dir)
        if scenario_dir not in prepared:
            write_scenario(run.scenario(), scenario_dir)
            prepared.add(scenario_dir)
        labels = {'protocol': run.protocol, 'nodes': run.cell.nodes, 'pause': run.cell.pause,
                  'speed': run.cell.speed_max, 'seed': run.seed, 'sweep': run.cell.sweep}
        trace_path = os.path.join(out_dir, 'traces', run.name + '.tr')
        work.append((run.protocol, scenario_dir, trace_path, config, labels))
    logger.info('sweep: %d scenarios, %d runs', len(prepared), len(work))
    rows = []
    if jobs == 1:
        for number, job in enumerate(work, start=1):
            rows.append(_run_job(job))
            logger.info('run %d/%d done', number, len(work))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for number, row in enumerate(pool.map(_run_job, work), start=1):
                rows.append(row)
                logger.info('run %d/%d done', number, len(work))
    write_rows(rows, os.path.join(out_dir, 'metrics.csv'))
    return write_rows(rows, os.path.join(out_dir, 'runs.csv'), RUN_COLUMNS)


def read_runs(path):
    """Load a `runs.csv` or `metrics.csv` file and label every row with its sweep."""
    try:
        frame = pd.read_csv(path)
    except (OSError, ValueError) as error:
        raise HarnessError(f'cannot read results {path}: {error}') from error
    if frame.empty:
        raise HarnessError(f'{path} holds no results')
    missing = [column for column in settings.metrics_header if column not in frame]
    if missing:
        raise HarnessError(f'{path} lacks columns {", ".join(missing)}')
    if 'sweep' not in frame:
        frame['sweep'] = [classify(pause, speed) for pause, speed in zip(frame['pause'], frame['speed'])]
    return frame
