"""This module contains unit tests for the CBR traffic model."""
import os
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))

import pytest

from app.src.engine.engine import RandomStream, seconds
from app.src.entities.traffic import (Connection, Flow, connection_target, emit, expected_packets, format_traffic,
                                      generate_plan, parse_traffic)
from app.src.errors import ScenarioError
from app.src.routing.core import PacketKind


def test_connection_target_follows_node_count():
    """
    Up to 30 nodes use 20 connections, larger networks 40.
    """
    assert [connection_target(n) for n in (10, 20, 30, 40, 50)] == [20, 20, 20, 40, 40]


def test_generated_connections_are_distinct_pairs():
    """
    Ten nodes and twenty connections give twenty distinct pairs without self loops.
    """
    plan = generate_plan(10, 20, RandomStream(1, 'traffic'), 150.0)
    pairs = [(conn.src, conn.dst) for conn in plan.connections]
    assert len(pairs) == 20 and len(set(pairs)) == 20
    assert all(src != dst for src, dst in pairs)
    assert all(0 <= conn.start <= seconds(50) for conn in plan.connections)


def test_two_nodes_have_two_possible_connections():
    """
    With two nodes only 0->1 and 1->0 exist.
    """
    plan = generate_plan(2, 20, RandomStream(1, 'traffic'), 150.0)
    assert {(conn.src, conn.dst) for conn in plan.connections} == {(0, 1), (1, 0)}


def test_generation_is_deterministic():
    """
    The same stream seed gives the same traffic file.
    """
    first = generate_plan(20, 20, RandomStream(9, 'traffic'), 150.0)
    second = generate_plan(20, 20, RandomStream(9, 'traffic'), 150.0)
    assert format_traffic(first) == format_traffic(second)


def test_emissions_are_spaced_a_quarter_second_apart():
    """
    A flow starting at 10 s emits at 10.00, 10.25, 10.50 s with 512 byte payloads.
    """
    flow = Flow(Connection(3, 7, seconds(10)))
    times = []
    now = flow.next_time
    for uid in range(3):
        packet, following = emit(flow, now, uid)
        assert packet.kind is PacketKind.DATA and packet.size == 512
        assert packet.flow == (3, 7, uid)
        times.append(now)
        now = following
    assert times == [seconds(10), seconds(10.25), seconds(10.5)]


def test_emitting_before_the_start_is_rejected():
    """
    A flow cannot emit before its start time.
    """
    flow = Flow(Connection(0, 1, seconds(5)))
    with pytest.raises(ScenarioError):
        emit(flow, seconds(4), 0)


@pytest.mark.parametrize('start, count', [(0.0, 600), (10.0, 560), (149.9, 1), (150.0, 0)])
def test_expected_packets(start, count):
    """
    A 150 s run emits 4 packets per second from the start time on.
    """
    assert expected_packets(Connection(0, 1, seconds(start)), seconds(150)) == count


def test_traffic_file_reads_back_unchanged():
    """
    Parsing a traffic file and formatting it again gives the same text.
    """
    plan = generate_plan(30, 20, RandomStream(2, 'traffic'), 150.0)
    text = format_traffic(plan)
    assert text.startswith('conn ')
    assert format_traffic(parse_traffic(text, 20)) == text


@pytest.mark.parametrize('line', [
    'conn 1 1 start 0.000000 rate 4.000000 size 512',
    'conn 1 2 start 0.0 rate 4.000000 size 512',
    'conn 1 2 begin 0.000000 rate 4.000000 size 512',
])
def test_malformed_traffic_lines(line):
    """
    Self connections, wrong decimals and unknown keywords are rejected.
    """
    with pytest.raises(ScenarioError):
        parse_traffic(line + '\n')
