"""
This module implements the random waypoint mobility model and the movement file format.

A `MobilityPlan` is generated up front from the `mobility` random stream and
then queried by the medium for exact node positions at any instant. Every
value in a plan is quantized to what the movement file can carry (positions
and speeds with 6 decimals, times in whole microseconds), so a plan written
to disk and read back is identical to the generated one.
"""

import bisect
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from pygame.math import Vector2

from app.src.engine.engine import TICKS_PER_SECOND
from app.src.errors import ScenarioError

TICKS_PER_US = 1000
US_PER_SECOND = 1_000_000


class Position(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Leg:
    """
    One movement phase of a node.

    Attributes:
        depart (int): Departure time in ticks.
        arrive (int): Arrival time in ticks.
        origin (Position): Where the leg starts.
        destination (Position): The waypoint.
        speed (float): Speed in m/s.
    """

    depart: int
    arrive: int
    origin: Position
    destination: Position
    speed: float


@dataclass(frozen=True)
class NodeTrack:
    initial: Position
    legs: tuple
    departs: tuple


@dataclass(frozen=True)
class MobilityPlan:
    """
    Materialized random waypoint movement of every node.

    Attributes:
        tracks (tuple): One `NodeTrack` per node id.
        area (tuple): Field width and height in meters.
        pause (float): Rest time at each waypoint in seconds.
        speed_min, speed_max (float): Speed range in m/s.
        duration (int): Covered time span in ticks.
    """

    tracks: tuple
    area: tuple
    pause: float
    speed_min: float
    speed_max: float
    duration: int

    @property
    def size(self):
        return len(self.tracks)

    def track(self, node):
        if not 0 <= node < len(self.tracks):
            raise ScenarioError(f'unknown node id {node}')
        return self.tracks[node]


def _quantize(value):
    return round(value, 6)


def _travel_us(origin, destination, speed):
    distance = Vector2(origin).distance_to(destination)
    return max(1, math.ceil(distance / speed * US_PER_SECOND))


def _make_track(initial, moves):
    """Build a track from an initial position and (depart_us, destination, speed) moves."""
    legs = []
    position = initial
    for depart_us, destination, speed in moves:
        arrive_us = depart_us + _travel_us(position, destination, speed)
        legs.append(Leg(depart_us * TICKS_PER_US, arrive_us * TICKS_PER_US, position, destination, speed))
        position = destination
    return NodeTrack(initial, tuple(legs), tuple(leg.depart for leg in legs))


def generate_plan(n, area, pause, speed_max, speed_min, duration, stream):
    """Generate random waypoint movement for `n` nodes.

    Every node starts at a uniform position, travels to a uniform waypoint
    at a speed uniform in [speed_min, speed_max], rests `pause` seconds and
    repeats until `duration` seconds have elapsed.

    Args:
        n (int): Number of nodes.
        area (tuple): Width and height in meters.
        pause (float): Pause time in seconds.
        speed_max (float): Maximum speed in m/s; 0 gives a static plan.
        speed_min (float): Minimum speed in m/s.
        duration (float): Plan horizon in seconds.
        stream (RandomStream): The `mobility` stream.

    Returns:
        MobilityPlan: The materialized plan.
    """
    width, height = area
    if n < 1 or width <= 0 or height <= 0:
        raise ScenarioError(f'invalid mobility arguments: n={n}, area={area}')
    if speed_min < 0 or speed_min > speed_max or pause < 0 or duration <= 0:
        raise ScenarioError(f'invalid speed/pause range: speed=[{speed_min}, {speed_max}], pause={pause}')
    pause_us = round(pause * US_PER_SECOND)
    duration_us = round(duration * US_PER_SECOND)

    def waypoint():
        x = min(_quantize(stream.uniform(0.0, width)), width)
        y = min(_quantize(stream.uniform(0.0, height)), height)
        return Position(x, y)

    def speed():
        if speed_min == speed_max:
            return float(speed_max)
        return min(max(_quantize(stream.uniform(speed_min, speed_max)), speed_min), speed_max)

    tracks = []
    for _ in range(n):
        initial = waypoint()
        moves = []
        position = initial
        now_us = 0
        while speed_max > 0 and now_us < duration_us:
            destination = waypoint()
            velocity = speed()
            if velocity <= 0:
                break
            moves.append((now_us, destination, velocity))
            now_us += _travel_us(position, destination, velocity) + pause_us
            position = destination
        tracks.append(_make_track(initial, moves))
    return MobilityPlan(tuple(tracks), (float(width), float(height)), float(pause),
                        float(speed_min), float(speed_max), round(duration * TICKS_PER_SECOND))


def static_plan(positions, area, duration):
    """A plan whose nodes never move, used for sanity scenarios and oracles."""
    tracks = tuple(NodeTrack(Position(float(x), float(y)), (), ()) for x, y in positions)
    return MobilityPlan(tracks, tuple(float(v) for v in area), 0.0, 0.0, 0.0, round(duration * TICKS_PER_SECOND))


def position_at(plan, node, t):
    """Return the exact position of `node` at time `t` (ticks).

    Positions are linearly interpolated along the current leg and equal
    the reached waypoint while the node pauses.
    """
    track = plan.track(node)
    if t < 0:
        raise ScenarioError(f'negative time {t}')
    index = bisect.bisect_right(track.departs, t) - 1
    if index < 0:
        return track.initial
    leg = track.legs[index]
    if t >= leg.arrive:
        return leg.destination
    fraction = (t - leg.depart) / (leg.arrive - leg.depart)
    origin = Vector2(leg.origin)
    point = origin + (Vector2(leg.destination) - origin) * fraction
    width, height = plan.area
    return Position(min(max(point.x, 0.0), width), min(max(point.y, 0.0), height))


def positions_at(plan, t):
    return [position_at(plan, node, t) for node in range(plan.size)]


class PositionIndex:
    """
    Positions of every node as one array, for queries at non-decreasing times.

    Each node keeps the leg it is on; a node is only looked up again once
    its next departure has passed, and the positions of all nodes are then
    interpolated at once. The values equal `position_at` for every node.
    Querying an earlier time starts over from the beginning of the plan.
    """

    def __init__(self, plan):
        self.plan = plan
        self._reset()

    def _reset(self):
        tracks = self.plan.tracks
        self._origin = np.array([track.initial for track in tracks], dtype=float).reshape(-1, 2)
        self._destination = self._origin.copy()
        self._depart = np.zeros(len(tracks))
        self._arrive = np.full(len(tracks), -1.0)
        self._next = np.array([track.departs[0] if track.departs else math.inf for track in tracks], dtype=float)
        self._time = None
        self._positions = self._origin.copy()

    def _advance(self, node, t):
        track = self.plan.tracks[node]
        index = bisect.bisect_right(track.departs, t) - 1
        leg = track.legs[index]
        self._origin[node] = leg.origin
        self._destination[node] = leg.destination
        self._depart[node] = leg.depart
        self._arrive[node] = leg.arrive
        self._next[node] = track.departs[index + 1] if index + 1 < len(track.departs) else math.inf

    def at(self, t):
        """Return an (n, 2) array of positions at time `t` (ticks)."""
        if t == self._time:
            return self._positions
        if self._time is not None and t < self._time:
            self._reset()
        for node in np.flatnonzero(self._next <= t).tolist():
            self._advance(node, t)
        moving = t < self._arrive
        span = np.where(moving, self._arrive - self._depart, 1.0)
        fraction = ((t - self._depart) / span)[:, np.newaxis]
        travelled = self._origin + (self._destination - self._origin) * fraction
        positions = np.where(moving[:, np.newaxis], travelled, self._destination)
        width, height = self.plan.area
        positions[:, 0] = np.clip(positions[:, 0], 0.0, width)
        positions[:, 1] = np.clip(positions[:, 1], 0.0, height)
        self._time = t
        self._positions = positions
        return positions


def _format_us(ticks):
    whole, fraction = divmod(ticks // TICKS_PER_US, US_PER_SECOND)
    return f'{whole}.{fraction:06d}'


def format_movement(plan):
    """Render a plan as movement file text, ordered by (node id, time)."""
    lines = []
    for node, track in enumerate(plan.tracks):
        lines.append(f'node {node} init {track.initial.x:.6f} {track.initial.y:.6f}')
        for leg in track.legs:
            lines.append(f'node {node} at {_format_us(leg.depart)} goto '
                         f'{leg.destination.x:.6f} {leg.destination.y:.6f} speed {leg.speed:.6f}')
    return '\n'.join(lines) + '\n'


def _parse_us(text):
    whole, sep, fraction = text.partition('.')
    if not sep or len(fraction) != 6 or not whole.isdigit() or not fraction.isdigit():
        raise ScenarioError(f'bad time {text!r} in movement file')
    return int(whole) * US_PER_SECOND + int(fraction)


def parse_movement(text, area, pause, speed_min, speed_max, duration):
    """Rebuild a `MobilityPlan` from movement file text.

    Args:
        text (str): Movement file contents.
        area, pause, speed_min, speed_max, duration: Scenario parameters the
            file does not carry.
    """
    initial = {}
    moves = {}
    for number, line in enumerate(text.splitlines(), start=1):
        words = line.split()
        if not words:
            continue
        try:
            if len(words) == 5 and words[0] == 'node' and words[2] == 'init':
                initial[int(words[1])] = Position(float(words[3]), float(words[4]))
            elif len(words) == 9 and words[0] == 'node' and words[2] == 'at' and words[4] == 'goto' \
                    and words[7] == 'speed':
                moves.setdefault(int(words[1]), []).append(
                    (_parse_us(words[3]), Position(float(words[5]), float(words[6])), float(words[8])))
            else:
                raise ValueError(line)
        except ValueError as error:
            raise ScenarioError(f'movement file line {number}: cannot parse {line!r}') from error
    if not initial or sorted(initial) != list(range(len(initial))):
        raise ScenarioError('movement file must give an init line for nodes 0..n-1')
    tracks = tuple(_make_track(initial[node], moves.get(node, [])) for node in range(len(initial)))
    return MobilityPlan(tracks, tuple(float(v) for v in area), float(pause), float(speed_min),
                        float(speed_max), round(duration * TICKS_PER_SECOND))
