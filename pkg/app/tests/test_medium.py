"""This module contains unit tests for the unit-disk channel and the interface queue."""
import os
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))

import pytest

from app.src.engine.engine import Engine, RandomStream, seconds
from app.src.entities.mobility import parse_movement, static_plan
from app.src.medium.medium import Frame, Medium, airtime, transmission_time_s
from app.src.routing.core import BROADCAST, Packet, PacketKind
from app.src.errors import ConfigError
from app.src.settings.config import RadioConfig


class StubSim:
    """The node services the medium needs, recording what reaches them."""

    def __init__(self):
        self.engine = Engine()
        self.records = []
        self.received = []
        self.breaks = []

    def trace(self, event, node, layer, packet, reason='-'):
        self.records.append((event, node, layer, packet.uid, getattr(reason, 'value', reason)))

    def receive(self, node, packet, from_hop):
        self.received.append((node, packet.uid, from_hop))

    def link_break(self, node, next_hop, packet, purged):
        self.breaks.append((node, next_hop, packet.uid, len(purged)))


def _packet(uid, kind=PacketKind.ROUTING, size=100):
    return Packet(uid=uid, kind=kind, ptype='cbr' if kind is PacketKind.DATA else 'aodv:hello', src=0,
                  dst=BROADCAST, size=size, origin=0, ttl=1)


def _medium(positions, radio=None):
    sim = StubSim()
    plan = static_plan(positions, (1000.0, 1000.0), 30.0)
    return sim, Medium(sim, plan, radio or RadioConfig(), RandomStream(1, 'mac-jitter'))


def test_airtime():
    """
    1000 bytes at 2 Mb/s take 4 ms; a 512 byte packet plus 58 bytes of overhead takes 2.28 ms.
    """
    assert airtime(1000, 2_000_000) == seconds(0.004)
    assert transmission_time_s(512, RadioConfig()) == pytest.approx(0.00228)


@pytest.mark.parametrize('distance, linked', [(249.9, True), (250.0, True), (250.1, False)])
def test_neighbors_within_range(distance, linked):
    """
    Nodes are neighbors up to 250 m inclusive, symmetrically.
    """
    _, medium = _medium([(100.0, 100.0), (100.0 + distance, 100.0)])
    assert (1 in medium.neighbors(0, 0)) is linked
    assert (0 in medium.neighbors(1, 0)) is linked


def test_single_node_has_no_neighbors():
    """
    A network of one node has an empty neighbor set.
    """
    _, medium = _medium([(10.0, 10.0)])
    assert medium.neighbors(0, 0) == set()


def test_full_interface_queue_drops():
    """
    The 51st packet queued at a node with capacity 50 is dropped with IFQ.
    """
    sim, medium = _medium([(0.0, 0.0), (100.0, 0.0)])
    accepted = [medium.enqueue(0, _packet(uid, PacketKind.DATA), 1) for uid in range(51)]
    assert accepted == [True] * 50 + [False]
    assert sim.records == [('d', 0, 'MAC', 50, 'IFQ')]
    assert len(medium.residual()) == 50


def test_routing_frames_are_queued_ahead_of_data():
    """
    A routing packet overtakes queued data packets but not other routing packets.
    """
    _, medium = _medium([(0.0, 0.0), (100.0, 0.0)])
    for uid in range(3):
        medium.enqueue(0, _packet(uid, PacketKind.DATA), 1)
    medium.enqueue(0, _packet(10), BROADCAST)
    medium.enqueue(0, _packet(11), BROADCAST)
    queued = [frame.packet.uid for frame in medium.interfaces[0].queue]
    assert queued == [10, 11, 1, 2]


def test_hidden_terminals_collide():
    """
    Two senders out of range of each other corrupt both frames at the common receiver.
    """
    sim, medium = _medium([(0.0, 0.0), (200.0, 0.0), (400.0, 0.0)])
    medium.transmit(Frame(_packet(1), 0, BROADCAST, 158), 0)
    medium.transmit(Frame(_packet(2), 2, BROADCAST, 158), seconds(0.0001))
    sim.engine.run_until(seconds(1))
    assert sorted(sim.records) == [('d', 1, 'MAC', 1, 'COL'), ('d', 1, 'MAC', 2, 'COL')]
    assert sim.received == []


def test_ideal_channel_has_no_collisions():
    """
    With collisions disabled both overlapping frames are received.
    """
    sim, medium = _medium([(0.0, 0.0), (200.0, 0.0), (400.0, 0.0)], RadioConfig(collisions=False))
    medium.transmit(Frame(_packet(1), 0, BROADCAST, 158), 0)
    medium.transmit(Frame(_packet(2), 2, BROADCAST, 158), seconds(0.0001))
    sim.engine.run_until(seconds(1))
    assert sorted(sim.received) == [(1, 1, 0), (1, 2, 2)]


def test_unicast_to_a_departed_neighbor_reports_a_link_break():
    """
    A unicast that exhausts its retries is dropped with CBK and signalled to the sender.
    """
    sim, medium = _medium([(0.0, 0.0), (600.0, 0.0)])
    medium.enqueue(0, _packet(5, PacketKind.DATA), 1)
    medium.enqueue(0, _packet(6, PacketKind.DATA), 1)
    sim.engine.run_until(seconds(1))
    assert ('d', 0, 'MAC', 5, 'CBK') in sim.records
    assert sim.breaks[0] == (0, 1, 5, 1)


def test_reachable_unicast_is_delivered_without_signal():
    """
    A unicast to a neighbor in range arrives and raises no link break.
    """
    sim, medium = _medium([(0.0, 0.0), (100.0, 0.0)])
    medium.enqueue(0, _packet(5, PacketKind.DATA), 1)
    sim.engine.run_until(seconds(1))
    assert sim.received == [(1, 5, 0)]
    assert sim.breaks == [] and sim.records == []


def test_broadcast_without_receivers_raises_no_signal():
    """
    Broadcasts are unacknowledged, so an empty neighborhood is not a link break.
    """
    sim, medium = _medium([(0.0, 0.0), (600.0, 0.0)])
    medium.enqueue(0, _packet(5), BROADCAST)
    sim.engine.run_until(seconds(1))
    assert sim.breaks == [] and sim.received == []


@pytest.mark.parametrize('failures, window', [(0, (100, 2000)), (1, (100, 3900)), (2, (100, 7700)),
                                               (5, (100, 60900)), (7, (100, 60900))])
def test_backoff_window_doubles_with_failures(failures, window):
    """
    The span above the 100 us minimum doubles per failed attempt, at most five times.
    """
    _, medium = _medium([(0.0, 0.0)])
    assert medium.contention_window(failures) == window


def test_negative_backoff_doublings_are_rejected():
    """
    A negative number of window doublings is a configuration error.
    """
    with pytest.raises(ConfigError):
        RadioConfig(backoff_doublings=-1)


def test_hidden_unicast_senders_both_get_through():
    """
    Two hidden senders unicasting to the same receiver at once are both delivered after retries.
    """
    sim, medium = _medium([(0.0, 0.0), (200.0, 0.0), (400.0, 0.0)])
    medium.enqueue(0, _packet(1, PacketKind.DATA, 512), 1)
    medium.enqueue(2, _packet(2, PacketKind.DATA, 512), 1)
    sim.engine.run_until(seconds(1))
    assert sorted(sim.received) == [(1, 1, 0), (1, 2, 2)]
    assert sim.breaks == []


def test_propagation_delay_is_fixed_when_the_frame_starts():
    """
    A receiver moving away during the frame gets it after the delay of the distance at its start.
    """
    text = ('node 0 init 0.000000 0.000000\n'
            'node 1 init 200.000000 0.000000\n'
            'node 1 at 0.000000 goto 900.000000 0.000000 speed 100000.000000\n')
    plan = parse_movement(text, (1000.0, 1000.0), 0.0, 0.0, 100000.0, 1.0)
    sim = StubSim()
    medium = Medium(sim, plan, RadioConfig(), RandomStream(1, 'mac-jitter'))
    tx = medium.transmit(Frame(_packet(1), 0, BROADCAST, 158), 0)
    assert tx.delays == {1: medium.propagation(0, 1, 0)} == {1: 667}
    arrivals = []
    sim.receive = lambda node, packet, from_hop: arrivals.append(sim.engine.now)
    sim.engine.run_until(seconds(0.1))
    assert arrivals == [tx.end + 667]
