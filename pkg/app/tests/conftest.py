"""Shared helpers for the simulator tests: static topologies and short runs."""
import os
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))

import dataclasses

import networkx as nx
import pytest

from app.src.engine.engine import RandomStream, seconds
from app.src.entities.mobility import static_plan
from app.src.entities.traffic import Connection, TrafficPlan
from app.src.harness.scenario import sweep_cells
from app.src.settings.config import RadioConfig, SimConfig
from app.src.simulation.simulation import Simulation

RANGE = 250.0


def grid_positions(side=5, spacing=120.0, origin=10.0):
    """Nodes of a side x side grid, row by row."""
    return [(origin + spacing * column, origin + spacing * row) for row in range(side) for column in range(side)]


def chain_positions(n, spacing=200.0):
    """Nodes on a line where only consecutive nodes are in range."""
    return [(10.0 + spacing * index, 250.0) for index in range(n)]


def unit_disk_graph(positions, radio_range=RANGE):
    graph = nx.Graph()
    graph.add_nodes_from(range(len(positions)))
    for a, (xa, ya) in enumerate(positions):
        for b in range(a + 1, len(positions)):
            xb, yb = positions[b]
            if ((xa - xb) ** 2 + (ya - yb) ** 2) ** 0.5 <= radio_range:
                graph.add_edge(a, b)
    return graph


def random_connected_positions(seed, n, area=500.0):
    """Uniform positions drawn until the unit-disk graph is connected."""
    stream = RandomStream(seed, 'mobility')
    while True:
        positions = [(round(stream.uniform(0.0, area), 3), round(stream.uniform(0.0, area), 3)) for _ in range(n)]
        if nx.is_connected(unit_disk_graph(positions)):
            return positions


def ideal_config(**sections):
    """Default configuration on a collision-free channel, with optional section overrides."""
    config = SimConfig(radio=RadioConfig(collisions=False))
    return dataclasses.replace(config, **sections)


def cbr(src, dst, start_s=0.0, rate=4.0, payload=512):
    return Connection(src, dst, seconds(start_s), rate, payload)


def make_sim(protocol, positions, connections=(), duration_s=30.0, seed=1, config=None):
    """A simulation of static nodes; `connections` are `Connection` objects."""
    size = max(max(x, y) for x, y in positions) + 10.0
    plan = static_plan(positions, (size, size), duration_s)
    traffic = TrafficPlan(tuple(connections), max(len(connections), 1))
    return Simulation(protocol, plan, traffic, seed, config)


# Per protocol: throughput, dropped, delay, overhead base and growth per node.
TREND_PROFILE = {
    'dsdv': (0.80, 100, 0.010, 200, 10),
    'aodv': (0.95, 20, 0.050, 800, 40),
    'dsr': (0.90, 10, 0.040, 100, 5),
    'zrp': (0.85, 30, 0.030, 1000, 50),
}


def synthetic_rows(seeds=1, profile=None, skip=()):
    """Sweep result rows that follow the expected protocol trends.

    Args:
        seeds (int): Rows per cell and protocol, with a small spread between seeds.
        profile (dict): Replacement for `TREND_PROFILE` entries.
        skip (iterable): (protocol, sweep, group, nodes) keys to leave out.
    """
    profile = {**TREND_PROFILE, **(profile or {})}
    rows = []
    for cell in sweep_cells():
        for seed in range(1, seeds + 1):
            for protocol, (ratio, dropped, delay, base, growth) in profile.items():
                if (protocol, cell.sweep, cell.group, cell.nodes) in skip:
                    continue
                generated = 1000
                delivered = round(ratio * generated) - seed + 1
                rows.append({
                    'protocol': protocol, 'nodes': cell.nodes, 'pause': cell.pause, 'speed': cell.speed_max,
                    'seed': seed, 'throughput': delivered / generated, 'avg_delay_s': delay + 0.001 * seed,
                    'dropped': dropped, 'overhead': base + growth * cell.nodes + seed, 'generated': generated,
                    'delivered': delivered, 'sweep': cell.sweep, 'residual': generated - delivered - dropped,
                    'held': 0, 'revisits': 0, 'path_checks': 0, 'freshness_violations': 0,
                })
    return rows


@pytest.fixture
def grid():
    return grid_positions()
