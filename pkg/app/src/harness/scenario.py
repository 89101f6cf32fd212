"""
The "scenario" module generates scenarios and lays out the sweep matrix.

A scenario is what every protocol of a comparison shares: the movement of
the nodes and the CBR connections, generated from one seed and stored as
three files in a directory (movement, traffic and a JSON file with the
parameters the two text files do not carry).

Classes:
    - Scenario: Mobility and traffic plans plus their parameters.
    - Cell: One point of the sweep matrix.
    - ScenarioConfig: One run of the matrix (protocol, cell, seed).

Functions:
    - generate_scenario: Draw a scenario from a seed.
    - write_scenario, read_scenario: Scenario directory I/O.
    - sweep_cells: The 25 + 25 cells of the two sweeps.
    - gen_matrix: Every run of a sweep.
"""

import json
import logging
import os
from dataclasses import dataclass, field

from app.src.engine.engine import RandomStream
from app.src.entities import mobility, traffic
from app.src.entities.mobility import MobilityPlan
from app.src.entities.traffic import TrafficPlan
from app.src.errors import ConfigError, HarnessError, ScenarioError
from app.src.settings import settings

logger = logging.getLogger(__name__)

PAUSE_SWEEP = 'pause'
SPEED_SWEEP = 'speed'


@dataclass(frozen=True)
class Scenario:
    """
    A generated or loaded scenario.

    Attributes:
        nodes (int): Number of nodes.
        pause (float): Pause time in seconds.
        speed_min, speed_max (float): Speed range in m/s.
        seed (int): Seed the plans were drawn from.
        duration_s (float): Scenario length in seconds.
        area (tuple): Field width and height in meters.
        mobility (MobilityPlan): Node movement.
        traffic (TrafficPlan): CBR connections.
    """

    nodes: int
    pause: float
    speed_min: float
    speed_max: float
    seed: int
    duration_s: float
    area: tuple
    mobility: MobilityPlan = field(repr=False)
    traffic: TrafficPlan = field(repr=False)

    def meta(self):
        return {
            'nodes': self.nodes,
            'pause': self.pause,
            'speed_min': self.speed_min,
            'speed_max': self.speed_max,
            'seed': self.seed,
            'duration_s': self.duration_s,
            'area': list(self.area),
            'connections': self.traffic.max_connections,
        }


def generate_scenario(nodes, pause, speed_max, seed, speed_min=settings.speed_min, duration_s=settings.duration_s,
                      area=(settings.area_width, settings.area_height), connections=None):
    """Draw the mobility and traffic plans of a scenario.

    A maximum speed of 0 gives a static scenario; the minimum speed is then
    lowered to 0 as well.

    Args:
        nodes (int): Number of nodes.
        pause (float): Pause time in seconds.
        speed_max (float): Maximum speed in m/s.
        seed (int): Seed of the `mobility` and `traffic` streams.
        speed_min (float): Minimum speed in m/s.
        duration_s (float): Scenario length in seconds.
        area (tuple): Field size in meters.
        connections (int): Number of CBR connections, by node count when None.

    Returns:
        Scenario: The new scenario.
    """
    speed_min = min(speed_min, speed_max)
    if connections is None:
        connections = traffic.connection_target(nodes)
    movement = mobility.generate_plan(nodes, area, pause, speed_max, speed_min, duration_s,
                                      RandomStream(seed, 'mobility'))
    flows = traffic.generate_plan(nodes, connections, RandomStream(seed, 'traffic'), duration_s)
    return Scenario(nodes, float(pause), float(speed_min), float(speed_max), seed, float(duration_s),
                    tuple(float(v) for v in area), movement, flows)


def _write(path, text):
    try:
        with open(path, 'w', encoding='utf-8', newline='\n') as output:
            output.write(text)
    except OSError as error:
        raise HarnessError(f'cannot write {path}: {error}') from error


def _read(path):
    try:
        with open(path, encoding='utf-8') as source:
            return source.read()
    except OSError as error:
        raise HarnessError(f'cannot read {path}: {error}') from error


def write_scenario(scenario, directory):
    """Write the movement, traffic and parameter files of a scenario into `directory`.

    Returns:
        dict: File role ('movement', 'traffic', 'meta') to written path.
    """
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as error:
        raise HarnessError(f'cannot create scenario directory {directory}: {error}') from error
    paths = {
        'movement': os.path.join(directory, settings.movement_file),
        'traffic': os.path.join(directory, settings.traffic_file),
        'meta': os.path.join(directory, settings.scenario_meta_file),
    }
    _write(paths['movement'], mobility.format_movement(scenario.mobility))
    _write(paths['traffic'], traffic.format_traffic(scenario.traffic))
    _write(paths['meta'], json.dumps(scenario.meta(), indent=2, sort_keys=True) + '\n')
    logger.debug('wrote scenario %r to %s', scenario, directory)
    return paths


def read_scenario(directory):
    """Load a scenario written by `write_scenario`.

    Raises:
        HarnessError: When a file cannot be read.
        ScenarioError: When a file is malformed or the files disagree.
    """
    try:
        meta = json.loads(_read(os.path.join(directory, settings.scenario_meta_file)))
        nodes = int(meta['nodes'])
        pause = float(meta['pause'])
        speed_min = float(meta['speed_min'])
        speed_max = float(meta['speed_max'])
        seed = int(meta['seed'])
        duration_s = float(meta['duration_s'])
        area = tuple(float(v) for v in meta['area'])
    except (KeyError, TypeError, ValueError) as error:
        raise ScenarioError(f'{directory}: malformed {settings.scenario_meta_file}: {error}') from error
    movement = mobility.parse_movement(_read(os.path.join(directory, settings.movement_file)),
                                       area, pause, speed_min, speed_max, duration_s)
    flows = traffic.parse_traffic(_read(os.path.join(directory, settings.traffic_file)), meta.get('connections'))
    if movement.size != nodes:
        raise ScenarioError(f'{directory}: movement file has {movement.size} nodes, expected {nodes}')
    for conn in flows.connections:
        if conn.src >= nodes or conn.dst >= nodes:
            raise ScenarioError(f'{directory}: connection {conn.src}->{conn.dst} refers to an unknown node')
    return Scenario(nodes, pause, speed_min, speed_max, seed, duration_s, area, movement, flows)


@dataclass(frozen=True)
class Cell:
    """
    A point of the sweep matrix.

    Attributes:
        sweep (str): 'pause' or 'speed'.
        nodes (int): Node count.
        pause (float): Pause time in seconds.
        speed_max (float): Maximum speed in m/s.
    """

    sweep: str
    nodes: int
    pause: float
    speed_max: float

    @property
    def group(self):
        """The value shared by the cells of one chart: pause time or maximum speed."""
        return self.pause if self.sweep == PAUSE_SWEEP else self.speed_max

    @property
    def name(self):
        return f'{self.sweep}-{self.group:g}-n{self.nodes}'


def sweep_cells():
    """Pause sweep (speed fixed) followed by speed sweep (pause fixed), node counts innermost."""
    cells = [Cell(PAUSE_SWEEP, n, pause, settings.pause_sweep_speed)
             for pause in settings.pause_values for n in settings.node_counts]
    cells += [Cell(SPEED_SWEEP, n, settings.speed_sweep_pause, speed)
              for speed in settings.speed_values for n in settings.node_counts]
    return cells


def classify(pause, speed_max):
    """Return the sweep a (pause, maximum speed) pair belongs to, or None."""
    if speed_max == settings.pause_sweep_speed and pause in settings.pause_values:
        return PAUSE_SWEEP
    if pause == settings.speed_sweep_pause and speed_max in settings.speed_values:
        return SPEED_SWEEP
    return None


@dataclass(frozen=True)
class ScenarioConfig:
    """
    One run of the matrix.

    Runs that share a cell and a seed read the same scenario directory.
    """

    protocol: str
    cell: Cell
    seed: int
    duration_s: float = settings.duration_s
    area: tuple = (settings.area_width, settings.area_height)

    @property
    def scenario_dir(self):
        return os.path.join('scenarios', self.cell.name, f'seed-{self.seed}')

    @property
    def name(self):
        return f'{self.protocol}_{self.cell.name}_seed-{self.seed}'

    def scenario(self):
        return generate_scenario(self.cell.nodes, self.cell.pause, self.cell.speed_max, self.seed,
                                 duration_s=self.duration_s, area=self.area)


def gen_matrix(seeds, protocols=settings.protocols):
    """Every run of the two sweeps.

    Args:
        seeds (int): Seeds per cell, numbered from 1.
        protocols (iterable): Protocol names.

    Returns:
        list: `ScenarioConfig` per (cell, seed, protocol), protocols innermost.
    """
    if seeds < 1:
        raise ConfigError(f'seeds must be at least 1, got {seeds}')
    protocols = [name.lower() for name in protocols]
    unknown = sorted(set(protocols) - set(settings.protocols))
    if unknown:
        raise ConfigError(f'unknown protocols: {", ".join(unknown)}')
    return [ScenarioConfig(protocol, cell, seed)
            for cell in sweep_cells() for seed in range(1, seeds + 1) for protocol in protocols]
