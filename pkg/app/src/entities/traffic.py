"""
This module defines the constant bit rate traffic model and the traffic file format.

Classes:
    - Connection: One CBR connection of a traffic plan.
    - TrafficPlan: All connections of a scenario.
    - Flow: Emission state of one connection during a run.

Functions:
    - generate_plan: Draw a traffic plan from the `traffic` stream.
    - emit: Produce the next data packet of a flow.
"""

from dataclasses import dataclass

from app.src.engine.engine import TICKS_PER_SECOND
from app.src.errors import ScenarioError
from app.src.routing.core import Packet, PacketKind
from app.src.settings import settings

US_PER_SECOND = 1_000_000
TICKS_PER_US = 1000


@dataclass(frozen=True)
class Connection:
    """
    A CBR connection.

    Attributes:
        src (int): Sending node.
        dst (int): Receiving node.
        start (int): First emission time in ticks.
        rate (float): Packets per second.
        payload (int): Payload bytes of every packet.
    """

    src: int
    dst: int
    start: int
    rate: float = settings.cbr_rate
    payload: int = settings.cbr_payload

    @property
    def period(self):
        return round(TICKS_PER_SECOND / self.rate)


@dataclass(frozen=True)
class TrafficPlan:
    connections: tuple
    max_connections: int

    def __len__(self):
        return len(self.connections)


class Flow:
    """
    Emission state of a connection.

    Emission k happens at exactly `start + k * period`, so the spacing never drifts.
    """

    def __init__(self, connection, ttl=settings.data_ttl):
        self.connection = connection
        self.seq = 0
        self.ttl = ttl

    @property
    def next_time(self):
        return self.connection.start + self.seq * self.connection.period


def connection_target(n):
    """Number of connections of a scenario with `n` nodes (20 up to 30 nodes, 40 above)."""
    if n in settings.connections:
        return settings.connections[n]
    return 20 if n <= 30 else 40


def generate_plan(n, max_conns, stream, duration, start_window=settings.cbr_start_window_s):
    """Draw a CBR traffic plan.

    Args:
        n (int): Number of nodes.
        max_conns (int): Upper bound on the number of connections.
        stream (RandomStream): The `traffic` stream.
        duration (float): Scenario length in seconds.
        start_window (float): Start times are uniform in [0, start_window].

    Returns:
        TrafficPlan: Distinct (src, dst) connections ordered by start time.
    """
    if n < 2 or max_conns < 1 or duration <= 0:
        raise ScenarioError(f'invalid traffic arguments: n={n}, max_conns={max_conns}')
    count = min(max_conns, n * (n - 1))
    window_us = round(min(start_window, duration) * US_PER_SECOND)
    pairs = set()
    connections = []
    while len(connections) < count:
        src = stream.integers(0, n)
        dst = stream.integers(0, n - 1)
        if dst >= src:
            dst += 1
        if (src, dst) in pairs:
            continue
        pairs.add((src, dst))
        start_us = stream.integers(0, window_us + 1)
        connections.append(Connection(src, dst, start_us * TICKS_PER_US))
    connections.sort(key=lambda conn: (conn.start, conn.src, conn.dst))
    return TrafficPlan(tuple(connections), max_conns)


def emit(flow, now, uid):
    """Produce the next data packet of a flow.

    Args:
        flow (Flow): The flow; its sequence number is advanced.
        now (int): Current time, not earlier than the flow start.
        uid (int): Unique id for the new packet.

    Returns:
        tuple: The DATA packet and the time of the following emission.
    """
    conn = flow.connection
    if now < conn.start:
        raise ScenarioError(f'flow {conn.src}->{conn.dst} emits before its start')
    packet = Packet(uid=uid, kind=PacketKind.DATA, ptype='cbr', src=conn.src, dst=conn.dst,
                    size=conn.payload, origin=now, ttl=flow.ttl, flow_seq=flow.seq)
    flow.seq += 1
    return packet, flow.next_time


def expected_packets(connection, duration):
    """Packets a connection emits before `duration` ticks."""
    if connection.start >= duration:
        return 0
    return -(-(duration - connection.start) // connection.period)


def _format_us(ticks):
    whole, fraction = divmod(ticks // TICKS_PER_US, US_PER_SECOND)
    return f'{whole}.{fraction:06d}'


def format_traffic(plan):
    """Render a plan as traffic file text, one `conn` line per connection."""
    lines = [f'conn {conn.src} {conn.dst} start {_format_us(conn.start)} rate {conn.rate:.6f} size {conn.payload}'
             for conn in plan.connections]
    return '\n'.join(lines) + '\n'


def parse_traffic(text, max_connections=None):
    connections = []
    for number, line in enumerate(text.splitlines(), start=1):
        words = line.split()
        if not words:
            continue
        if len(words) != 9 or words[0] != 'conn' or words[3] != 'start' or words[5] != 'rate' or words[7] != 'size':
            raise ScenarioError(f'traffic file line {number}: cannot parse {line!r}')
        whole, _, fraction = words[4].partition('.')
        try:
            if len(fraction) != 6:
                raise ValueError(words[4])
            start = (int(whole) * US_PER_SECOND + int(fraction)) * TICKS_PER_US
            conn = Connection(int(words[1]), int(words[2]), start, float(words[6]), int(words[8]))
        except ValueError as error:
            raise ScenarioError(f'traffic file line {number}: cannot parse {line!r}') from error
        if conn.src == conn.dst or conn.rate <= 0:
            raise ScenarioError(f'traffic file line {number}: invalid connection {line!r}')
        connections.append(conn)
    return TrafficPlan(tuple(connections), max_connections or len(connections))
