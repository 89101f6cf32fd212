"""This module contains unit tests for AODV: the ring schedule, request handling, maintenance and hellos."""
import os
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))

import networkx as nx
import pytest
from conftest import cbr, chain_positions, ideal_config, make_sim, random_connected_positions, unit_disk_graph

from app.src.engine.engine import seconds
from app.src.metrics.metrics import compute_report
from app.src.routing.aodv import Hello, Rreq, ring_schedule, ring_wait
from app.src.routing.core import BROADCAST, Dispatch, Packet, PacketKind
from app.src.settings.config import AodvConfig


def _records(sim, ptype, event=None):
    return [record for record in sim.tracer.records
            if record.ptype == ptype and (event is None or record.event == event)]


def _rreq(sim, dest, dest_seq=None, ttl=5):
    origin = sim.agents[0]
    return origin.new_packet('aodv:rreq', BROADCAST, payload=Rreq(1, 0, 1, dest, dest_seq), ttl=ttl)


def test_ring_schedule():
    """
    The default schedule is the ring 1, 3, 5, 7 followed by three network-wide attempts.
    """
    assert ring_schedule(AodvConfig()) == [1, 3, 5, 7, 35, 35, 35]
    assert ring_wait(1, AodvConfig()) == seconds(0.08)


def test_missing_route_buffers_and_floods_a_request():
    """
    Without a route the packet is buffered and an RREQ with TTL 1 is broadcast.
    """
    sim = make_sim('aodv', chain_positions(3))
    packet = Packet(uid=99, kind=PacketKind.DATA, ptype='cbr', src=0, dst=2, size=512, origin=0, ttl=32)
    assert sim.agents[0].on_data_from_app(packet) is Dispatch.BUFFER
    assert len(sim.agents[0].buffer) == 1
    assert len(_records(sim, 'aodv:rreq', 's')) == 1
    assert sim.medium.interfaces[0].current.packet.ttl == 1


def test_valid_route_forwards_immediately():
    """
    With a valid route the packet goes straight to the next hop.
    """
    sim = make_sim('aodv', chain_positions(3))
    agent = sim.agents[0]
    agent.update_route(2, 1, 2, 4, seconds(10))
    packet = Packet(uid=99, kind=PacketKind.DATA, ptype='cbr', src=0, dst=2, size=512, origin=0, ttl=32)
    assert agent.on_data_from_app(packet) is Dispatch.FORWARD
    assert sim.medium.interfaces[0].current.dst == 1


def test_duplicate_request_is_discarded():
    """
    The same RREQ heard twice is rebroadcast once.
    """
    sim = make_sim('aodv', chain_positions(4))
    packet = _rreq(sim, 3)
    sim.agents[1].on_packet_from_net(packet, 0)
    sim.agents[1].on_packet_from_net(packet, 0)
    assert len(_records(sim, 'aodv:rreq', 'f')) == 1
    assert sim.agents[1].valid_route(0).hops == 1


def test_destination_answers_with_a_reply():
    """
    The destination unicasts an RREP back towards the originator.
    """
    sim = make_sim('aodv', chain_positions(3))
    sim.agents[1].on_packet_from_net(_rreq(sim, 1), 0)
    replies = _records(sim, 'aodv:rrep', 's')
    assert [record.node for record in replies] == [1]
    assert sim.medium.interfaces[1].current.dst == 0
    assert not _records(sim, 'aodv:rreq', 'f')


def test_intermediate_with_fresh_route_replies_instead_of_flooding():
    """
    A node holding a valid route to the destination answers and does not rebroadcast.
    """
    sim = make_sim('aodv', chain_positions(4))
    sim.agents[1].update_route(3, 2, 2, 6, seconds(10))
    sim.agents[1].on_packet_from_net(_rreq(sim, 3, dest_seq=6), 0)
    assert len(_records(sim, 'aodv:rrep', 's')) == 1
    assert not _records(sim, 'aodv:rreq', 'f')
    assert sim.medium.interfaces[1].current.packet.payload.hops == 2


def test_stale_route_does_not_answer():
    """
    A route older than the requested sequence number makes the node rebroadcast instead.
    """
    sim = make_sim('aodv', chain_positions(4))
    sim.agents[1].update_route(3, 2, 2, 4, seconds(10))
    sim.agents[1].on_packet_from_net(_rreq(sim, 3, dest_seq=6), 0)
    assert not _records(sim, 'aodv:rrep')
    assert len(_records(sim, 'aodv:rreq', 'f')) == 1


def test_routes_never_get_older():
    """
    A route is never replaced by one with a smaller destination sequence number.
    """
    agent = make_sim('aodv', chain_positions(3)).agents[0]
    assert agent.update_route(2, 1, 2, 8, seconds(10))
    assert not agent.update_route(2, 1, 1, 6, seconds(10))
    assert agent.valid_route(2).dest_seq == 8
    assert agent.update_route(2, 1, 1, 8, seconds(10))
    assert agent.valid_route(2).hops == 1


def test_link_break_sends_an_error_to_precursors():
    """
    When B loses C, the route is invalidated with a bumped sequence number and an RERR is sent.
    """
    sim = make_sim('aodv', chain_positions(3))
    agent = sim.agents[1]
    agent.update_route(2, 2, 1, 4, seconds(10))
    agent.routes[2].precursors.add(0)
    assert agent.handle_link_break(2) == [(2, 5)]
    assert agent.valid_route(2) is None
    assert len(_records(sim, 'aodv:rerr', 's')) == 1


def test_break_on_an_unused_link_is_silent():
    """
    A break of a link that carries no route sends nothing.
    """
    sim = make_sim('aodv', chain_positions(3))
    assert sim.agents[1].handle_link_break(2) == []
    assert sim.tracer.count == 0


def test_error_invalidates_upstream_routes():
    """
    An RERR from the next hop invalidates the route at the source.
    """
    sim = make_sim('aodv', chain_positions(3))
    source = sim.agents[0]
    source.update_route(2, 1, 2, 4, seconds(10))
    sim.agents[1].update_route(2, 2, 1, 4, seconds(10))
    sim.agents[1].routes[2].precursors.add(0)
    sim.agents[1].handle_link_break(2)
    error = sim.medium.interfaces[1].current.packet
    source.on_packet_from_net(error, 1)
    assert source.valid_route(2) is None
    assert source.routes[2].dest_seq == 5


def test_idle_node_sends_no_hello():
    """
    A node without valid routes keeps quiet.
    """
    sim = make_sim('aodv', chain_positions(3))
    assert sim.agents[0].hello_maintenance() is False
    assert sim.tracer.count == 0


def test_hello_installs_a_neighbor_route():
    """
    A received hello installs a one-hop route to its sender.
    """
    sim = make_sim('aodv', chain_positions(3))
    hello = sim.agents[1].new_packet('aodv:hello', BROADCAST, payload=Hello(3))
    sim.agents[0].on_packet_from_net(hello, 1)
    route = sim.agents[0].valid_route(1)
    assert route.hops == 1 and route.next_hop == 1 and route.dest_seq == 3
    assert sim.agents[0].hello_maintenance() is True


def test_silent_neighbor_triggers_link_break():
    """
    A neighbor not heard for more than two hello intervals is treated as lost.
    """
    sim = make_sim('aodv', chain_positions(3))
    agent = sim.agents[0]
    agent.touch_neighbor(1)
    agent.update_route(2, 1, 2, 4, seconds(20))
    sim.engine.run_until(seconds(2.5))
    agent.hello_maintenance()
    assert 1 not in agent.heard
    assert agent.valid_route(2) is None


def test_isolated_source_drops_after_the_schedule():
    """
    A node with no neighbors gives up after every attempt and drops its packets with NRTE.

    The seven attempts wait 0.08 + 0.24 + 0.4 + 0.56 + 3 x 2.8 = 9.68 s in total.
    """
    sim = make_sim('aodv', [(10.0, 10.0), (400.0, 400.0)], [cbr(0, 1)], duration_s=9.7, config=ideal_config())
    sim.run()
    requests = _records(sim, 'aodv:rreq', 's')
    assert len(requests) == len(ring_schedule(AodvConfig()))
    report = compute_report(sim.tracer.records)
    assert report.delivered == 0 and report.drops.get('NRTE', 0) > 0


@pytest.mark.parametrize('seed', [1, 2, 3, 4])
def test_discovered_routes_are_nearly_shortest(seed):
    """
    In a static network a discovered route is at most one hop longer than the BFS distance.
    """
    positions = random_connected_positions(seed, 15)
    graph = unit_disk_graph(positions)
    lengths = nx.single_source_shortest_path_length(graph, 0)
    dst = max((node for node, hops in lengths.items() if hops <= 7), key=lambda node: (lengths[node], node))
    config = ideal_config(aodv=AodvConfig(hello_enabled=False))
    sim = make_sim('aodv', positions, [cbr(0, dst, start_s=1.0)], duration_s=10.0, config=config)
    result = sim.run()
    route = sim.agents[0].valid_route(dst)
    assert route is not None
    assert lengths[dst] <= route.hops <= lengths[dst] + 1
    assert compute_report(sim.tracer.records).throughput > 0.9
    assert result.freshness_violations == 0
