"""This module contains unit tests for scenarios, runs, sweeps and charts."""
import os
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))

import json
import logging

import pandas as pd
import pytest
from conftest import cbr, make_sim, synthetic_rows

from app.src.entities.mobility import MobilityPlan, format_movement, static_plan
from app.src.entities.traffic import TrafficPlan, format_traffic
from app.src.errors import ConfigError, HarnessError, ScenarioError
from app.src.harness import plot, runner
from app.src.harness.scenario import (PAUSE_SWEEP, SPEED_SWEEP, Cell, ScenarioConfig, classify, gen_matrix,
                                      generate_scenario, read_scenario, sweep_cells, write_scenario)
from app.src.metrics.metrics import compute_report
from app.src.settings import settings
from app.src.simulation.simulation import Simulation

PROTOCOLS = ('dsdv', 'aodv', 'dsr', 'zrp')

# 2 x 5 static grid, 120 m spacing: connected, diameter 2 to 4 hops.
SANITY_POSITIONS = [(10.0 + 120.0 * column, 200.0 + 120.0 * row) for row in range(2) for column in range(5)]


def _small_scenario(seed=3, nodes=8, duration_s=20.0, speed_max=10.0, connections=3):
    return generate_scenario(nodes, 2.0, speed_max, seed, duration_s=duration_s, connections=connections)


def test_matrix_size():
    """
    Five seeds give 50 cells x 4 protocols x 5 seeds = 1000 runs.
    """
    matrix = gen_matrix(5)
    assert len(matrix) == 1000
    assert len({run.name for run in matrix}) == 1000
    assert len(sweep_cells()) == 50


@pytest.mark.parametrize('seeds, protocols', [(0, PROTOCOLS), (1, ('aodv', 'olsr'))])
def test_matrix_rejects_bad_arguments(seeds, protocols):
    """
    Zero seeds and unknown protocols are configuration errors.
    """
    with pytest.raises(ConfigError):
        gen_matrix(seeds, protocols)


def test_cell_parameters():
    """
    Pause-sweep cells fix the speed at 2 m/s; speed-sweep cells fix the pause at 2 s.
    """
    cells = {(cell.sweep, cell.nodes, cell.group): cell for cell in sweep_cells()}
    assert cells[(PAUSE_SWEEP, 10, 200.0)].speed_max == 2.0
    assert cells[(SPEED_SWEEP, 50, 25.0)].pause == 2.0
    assert cells[(PAUSE_SWEEP, 10, 200.0)].name == 'pause-200-n10'
    assert classify(200.0, 2.0) == PAUSE_SWEEP and classify(2.0, 25.0) == SPEED_SWEEP
    assert classify(0.0, 0.0) is None


def test_protocols_share_the_scenario_of_a_cell():
    """
    Runs of one cell and seed read the same scenario directory and draw the same plans.
    """
    runs = [run for run in gen_matrix(2) if run.cell.name == 'speed-25-n50' and run.seed == 2]
    assert sorted(run.protocol for run in runs) == sorted(PROTOCOLS)
    assert len({run.scenario_dir for run in runs}) == 1
    first, second = runs[0].scenario(), runs[1].scenario()
    assert format_movement(first.mobility) == format_movement(second.mobility)
    assert format_traffic(first.traffic) == format_traffic(second.traffic)


def test_scenario_files_read_back(tmp_path):
    """
    A written scenario loads back with identical movement and traffic.
    """
    scenario = _small_scenario()
    paths = write_scenario(scenario, str(tmp_path / 'scen'))
    assert sorted(paths) == ['meta', 'movement', 'traffic']
    loaded = read_scenario(str(tmp_path / 'scen'))
    assert loaded.meta() == scenario.meta()
    assert format_movement(loaded.mobility) == format_movement(scenario.mobility)
    assert format_traffic(loaded.traffic) == format_traffic(scenario.traffic)


def test_missing_or_malformed_scenario(tmp_path):
    """
    A missing directory is an I/O failure, a bad parameter file a scenario error.
    """
    with pytest.raises(HarnessError):
        read_scenario(str(tmp_path / 'nowhere'))
    write_scenario(_small_scenario(), str(tmp_path / 'scen'))
    (tmp_path / 'scen' / settings.scenario_meta_file).write_text('{"nodes": "many"}')
    with pytest.raises(ScenarioError):
        read_scenario(str(tmp_path / 'scen'))


def test_static_scenario():
    """
    A maximum speed of 0 gives nodes that never move.
    """
    scenario = generate_scenario(10, 0.0, 0.0, 1, duration_s=30.0)
    assert scenario.speed_min == 0.0
    assert all(not track.legs for track in scenario.mobility.tracks)


def test_scenario_holds_the_generated_plans():
    """
    A generated scenario carries its movement and traffic plans for the simulator.
    """
    scenario = _small_scenario()
    assert isinstance(scenario.mobility, MobilityPlan) and scenario.mobility.size == 8
    assert isinstance(scenario.traffic, TrafficPlan) and len(scenario.traffic.connections) <= 3


@pytest.mark.parametrize('protocol', PROTOCOLS)
def test_runs_are_reproducible(tmp_path, protocol):
    """
    The same scenario and seed give byte-identical traces, and the manifest alone replays the run.
    """
    scenario = _small_scenario()
    first = runner.run_scenario(protocol, scenario, str(tmp_path / 'a' / 'run.tr'))
    second = runner.run_scenario(protocol, scenario, str(tmp_path / 'b' / 'run.tr'))
    assert first.result.digest == second.result.digest
    assert (tmp_path / 'a' / 'run.tr').read_bytes() == (tmp_path / 'b' / 'run.tr').read_bytes()
    replayed = runner.replay(first.manifest_path, str(tmp_path / 'c' / 'run.tr'))
    assert replayed.result.digest == first.result.digest
    manifest = runner.load_manifest(first.manifest_path)
    assert manifest['trace']['sha256'] == first.result.digest
    assert manifest['protocol'] == protocol and manifest['scenario']['seed'] == 3


@pytest.mark.parametrize('protocol', PROTOCOLS)
def test_every_data_packet_is_accounted_for(tmp_path, protocol):
    """
    generated = delivered + dropped + residual, and queued packets are part of the residual.
    """
    outcome = runner.run_scenario(protocol, _small_scenario(seed=5), str(tmp_path / 'run.tr'))
    report, result = outcome.report, outcome.result
    assert report.generated > 0
    assert report.generated == report.delivered + report.dropped + result.residual
    assert result.held <= result.residual


def test_trace_metrics_reads_the_manifest(tmp_path):
    """
    The metrics of a trace file are labelled from its manifest and written as CSV.
    """
    trace = str(tmp_path / 'run.tr')
    outcome = runner.run_scenario('dsr', _small_scenario(), trace)
    row = runner.trace_metrics(trace)
    assert row['protocol'] == 'dsr' and row['nodes'] == 8 and row['speed'] == '10'
    assert row['generated'] == outcome.report.generated
    out = tmp_path / 'metrics.csv'
    runner.write_rows([row], str(out))
    frame = pd.read_csv(out)
    assert list(frame.columns) == list(settings.metrics_header)
    assert frame.loc[0, 'dropped'] == outcome.report.dropped


def test_dsdv_overhead_floor():
    """
    Ten DSDV nodes over 150 s send at least 10 x 10 periodic updates.
    """
    scenario = generate_scenario(10, 10.0, 2.0, 1, duration_s=150.0, connections=2)
    sim = Simulation('dsdv', scenario.mobility, scenario.traffic, scenario.seed)
    result = sim.run()
    assert compute_report(sim.tracer.records).overhead >= 100
    assert result.records == sim.tracer.count


@pytest.mark.parametrize('protocol', PROTOCOLS)
def test_static_sanity(protocol):
    """
    On a connected static grid of 10 nodes every protocol delivers at least 99 % after a 10 s warm-up.
    """
    plan = static_plan(SANITY_POSITIONS, (500.0, 500.0), 60.0)
    traffic = TrafficPlan((cbr(0, 9, start_s=1.0), cbr(5, 4, start_s=2.0)), 2)
    sim = Simulation(protocol, plan, traffic, 1)
    sim.run()
    assert compute_report(sim.tracer.records, warmup_s=10.0).throughput >= 0.99


@pytest.mark.parametrize('protocol', PROTOCOLS)
def test_grid_delivery_on_the_default_channel(grid, protocol):
    """
    With hidden terminals and collisions every protocol carries four flows across the 5 x 5 grid.
    """
    flows = [cbr(0, 24, start_s=1.0), cbr(20, 4, start_s=1.5), cbr(12, 2, start_s=2.0), cbr(9, 15, start_s=2.5)]
    sim = make_sim(protocol, grid, flows, duration_s=60.0)
    sim.run()
    report = compute_report(sim.tracer.records, warmup_s=10.0)
    assert report.throughput >= 0.99


def test_sweep_writes_both_result_files(tmp_path, monkeypatch):
    """
    A sweep writes one scenario per cell and seed, a trace per run, metrics.csv and runs.csv.
    """
    cell = Cell(PAUSE_SWEEP, 10, 10.0, 2.0)
    runs = [ScenarioConfig(protocol, cell, 1, duration_s=5.0) for protocol in ('aodv', 'dsr')]
    monkeypatch.setattr(runner, 'gen_matrix', lambda seeds, protocols: runs)
    frame = runner.sweep(str(tmp_path), seeds=1, protocols=('aodv', 'dsr'), jobs=1)
    assert list(frame['protocol']) == ['aodv', 'dsr']
    assert list(frame.columns) == list(runner.RUN_COLUMNS)
    assert os.listdir(tmp_path / 'scenarios') == ['pause-10-n10']
    assert sorted(os.listdir(tmp_path / 'traces')) == [
        'aodv_pause-10-n10_seed-1.manifest.json', 'aodv_pause-10-n10_seed-1.tr',
        'dsr_pause-10-n10_seed-1.manifest.json', 'dsr_pause-10-n10_seed-1.tr']
    metrics = pd.read_csv(tmp_path / 'metrics.csv')
    assert list(metrics.columns) == list(settings.metrics_header)
    runs_frame = runner.read_runs(str(tmp_path / 'runs.csv'))
    assert set(runs_frame['sweep']) == {PAUSE_SWEEP}
    manifest = json.loads((tmp_path / 'traces' / 'dsr_pause-10-n10_seed-1.manifest.json').read_text())
    assert set(manifest['scenario_files']) == {'meta', 'movement', 'traffic'}


def test_plot_writes_forty_charts_and_pivots(tmp_path):
    """
    Four metrics over ten groups give 40 SVG files, plus one pivot table per metric.
    """
    results = tmp_path / 'metrics.csv'
    runner.write_rows(synthetic_rows(seeds=2), str(results))
    charts = plot.plot_results(str(results), str(tmp_path / 'plots'))
    assert len(charts) == 40
    svgs = sorted(name for name in os.listdir(tmp_path / 'plots') if name.endswith('.svg'))
    assert len(svgs) == 40 and 'throughput_pause_200.svg' in svgs and 'overhead_speed_25.svg' in svgs
    pivot = pd.read_csv(tmp_path / 'plots' / 'pivot_dropped.csv')
    assert list(pivot.columns) == ['sweep', 'group', 'nodes', 'dsdv', 'aodv', 'dsr', 'zrp']
    assert len(pivot) == 50 and (pivot['dsdv'] == 100).all()


def test_single_seed_whiskers_collapse():
    """
    With one seed the minimum, mean and maximum coincide.
    """
    summary = plot.aggregate(pd.DataFrame(synthetic_rows(seeds=1)))
    assert (summary['seeds'] == 1).all()
    assert (summary['overhead_min'] == summary['overhead_max']).all()


def test_missing_cells_are_reported(tmp_path, caplog):
    """
    Charts are still written when a cell has no result, with a warning naming it.
    """
    results = tmp_path / 'metrics.csv'
    runner.write_rows(synthetic_rows(skip=[('zrp', PAUSE_SWEEP, 50.0, 30)]), str(results))
    with caplog.at_level(logging.WARNING, logger='app.src.harness.plot'):
        charts = plot.plot_results(str(results), str(tmp_path / 'plots'))
    assert len(charts) == 40
    assert any('zrp@n=30' in message for message in caplog.messages)


def test_empty_results_write_nothing(tmp_path):
    """
    A results file without rows is an error and no output is produced.
    """
    results = tmp_path / 'metrics.csv'
    runner.write_rows([], str(results))
    with pytest.raises(HarnessError):
        plot.plot_results(str(results), str(tmp_path / 'plots'))
    assert not (tmp_path / 'plots').exists()
