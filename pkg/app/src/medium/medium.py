"""
This module implements the wireless channel and the simplified 802.11 MAC.

Connectivity is a unit disk of radius `range_m` evaluated on exact node
positions at the moment a transmission starts. Every node owns a drop-tail
interface queue; routing frames are queued ahead of data frames. A frame
waits a random backoff, defers while the sender hears another transmission
and then occupies the channel for `size * 8 / data_rate` seconds. A
receiver that lies in range of two overlapping transmissions decodes
neither of them.

Classes:
    - Frame: A packet on its way to the next hop.
    - Transmission: A frame occupying the channel.
    - Interface: The interface queue and service state of one node.
    - Medium: The shared channel of one run.
"""

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from app.src.engine.engine import TICKS_PER_SECOND, EventKind
from app.src.entities.mobility import PositionIndex
from app.src.routing.core import BROADCAST, Drop

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0
TICKS_PER_US = 1000


@dataclass
class Frame:
    """
    A packet handed to the MAC.

    Attributes:
        packet (Packet): The payload.
        src (int): Transmitting node.
        dst (int): Next hop or BROADCAST.
        size (int): Bytes on air, payload plus frame overhead.
        failures (int): Unacknowledged unicast attempts so far.
    """

    packet: object
    src: int
    dst: int
    size: int
    failures: int = 0

    @property
    def is_broadcast(self):
        return self.dst == BROADCAST


@dataclass
class Transmission:
    frame: Frame
    start: int
    end: int
    receivers: set
    corrupted: set = field(default_factory=set)
    delays: dict = field(default_factory=dict)


class Interface:
    """
    Interface queue of a node.

    `current` is the frame in service (backing off, deferring or on air) and
    counts towards the capacity.
    """

    def __init__(self, node, capacity):
        self.node = node
        self.capacity = capacity
        self.queue = deque()
        self.current = None

    def __len__(self):
        return len(self.queue) + (self.current is not None)

    @property
    def full(self):
        return len(self) >= self.capacity

    def push(self, frame):
        if frame.packet.is_data:
            self.queue.append(frame)
            return
        index = next((i for i, queued in enumerate(self.queue) if queued.packet.is_data), len(self.queue))
        self.queue.insert(index, frame)

    def purge(self, next_hop):
        """Remove and return every queued frame addressed to `next_hop`."""
        kept = deque()
        purged = []
        for frame in self.queue:
            (purged if frame.dst == next_hop else kept).append(frame)
        self.queue = kept
        return [frame.packet for frame in purged]


def airtime(size, data_rate):
    """Ticks needed to send `size` bytes at `data_rate` bits per second."""
    return -(-(size * 8 * TICKS_PER_SECOND) // data_rate)


class Medium:
    """
    Shared wireless channel of a run.

    Args:
        sim (Simulation): Node services: clock, engine, trace and packet callbacks.
        plan (MobilityPlan): Node movement.
        radio (RadioConfig): Channel and MAC parameters.
        stream (RandomStream): The `mac-jitter` stream.
    """

    def __init__(self, sim, plan, radio, stream):
        self.sim = sim
        self.plan = plan
        self.radio = radio
        self.stream = stream
        self.interfaces = [Interface(node, radio.ifq_capacity) for node in range(plan.size)]
        self._active = []
        self._transmitting = set()
        self._positions = PositionIndex(plan)
        self._adjacency = None
        self.link_changes = 0
        self.frames_sent = 0
        self.routing_bytes = 0
        self.header_bytes = 0

    @property
    def engine(self):
        return self.sim.engine

    # geometry

    def coordinates(self, t):
        return self._positions.at(t)

    def adjacency(self, t):
        coords = self.coordinates(t)
        deltas = coords[:, np.newaxis, :] - coords[np.newaxis, :, :]
        linked = np.hypot(deltas[..., 0], deltas[..., 1]) <= self.radio.range_m
        np.fill_diagonal(linked, False)
        return linked

    def neighbors(self, node, t):
        """Return the ids of the nodes within radio range of `node` at time `t`."""
        coords = self.coordinates(t)
        offsets = coords - coords[node]
        linked = np.hypot(offsets[:, 0], offsets[:, 1]) <= self.radio.range_m
        linked[node] = False
        return set(np.flatnonzero(linked).tolist())

    def distance(self, a, b, t):
        coords = self.coordinates(t)
        return float(np.hypot(*(coords[a] - coords[b])))

    def propagation(self, a, b, t):
        return round(self.distance(a, b, t) / SPEED_OF_LIGHT * TICKS_PER_SECOND)

    # periodic neighbor refresh

    def start(self, end):
        self._end = end
        self._adjacency = self.adjacency(0)
        if self.radio.refresh_interval_s > 0:
            self._refresh_period = round(self.radio.refresh_interval_s * TICKS_PER_SECOND)
            self.engine.call_at(self._refresh_period, self._refresh, kind=EventKind.MOVEMENT)

    def _refresh(self):
        now = self.engine.now
        adjacency = self.adjacency(now)
        self.link_changes += int(np.count_nonzero(np.triu(adjacency != self._adjacency)))
        self._adjacency = adjacency
        if now + self._refresh_period <= self._end:
            self.engine.call_in(self._refresh_period, self._refresh, kind=EventKind.MOVEMENT)

    # interface queue

    def enqueue(self, node, packet, next_hop):
        """Put a packet into the interface queue of `node`.

        Returns:
            bool: False when the queue was full and the packet was dropped (IFQ).
        """
        interface = self.interfaces[node]
        if interface.full:
            self.sim.trace('d', node, 'MAC', packet, Drop.IFQ)
            return False
        interface.push(Frame(packet, node, next_hop, packet.wire_size + self.radio.frame_overhead))
        if interface.current is None:
            self._serve_next(interface)
        return True

    def _serve_next(self, interface):
        if not interface.queue:
            interface.current = None
            return
        interface.current = interface.queue.popleft()
        self._backoff(interface)

    def contention_window(self, failures):
        """Backoff window in microseconds after `failures` unacknowledged attempts.

        The span above `backoff_min_us` doubles with every failure, at most
        `backoff_doublings` times; a new frame starts from the base window.
        """
        span = self.radio.backoff_max_us - self.radio.backoff_min_us
        return self.radio.backoff_min_us, self.radio.backoff_min_us + span * 2 ** min(failures,
                                                                                      self.radio.backoff_doublings)

    def _backoff(self, interface):
        delay_us = self.stream.uniform(*self.contention_window(interface.current.failures))
        self.engine.call_in(round(delay_us * TICKS_PER_US), self._attempt, interface,
                            target=interface.node, kind=EventKind.MAC)

    def _attempt(self, interface):
        node = interface.node
        busy_until = max((tx.end for tx in self._active if node in tx.receivers), default=None)
        if busy_until is not None:
            self.engine.call_at(busy_until, self._backoff, interface, target=node, kind=EventKind.MAC)
            return
        self.transmit(interface.current, self.engine.now)

    # channel

    def transmit(self, frame, t):
        """Put a frame on the air at time `t` and schedule its outcome."""
        receivers = self.neighbors(frame.src, t) - self._transmitting
        tx = Transmission(frame, t, t + airtime(frame.size, self.radio.data_rate_bps), receivers)
        tx.delays = {receiver: self.propagation(frame.src, receiver, t) for receiver in receivers}
        for other in self._active if self.radio.collisions else ():
            overlap = receivers & other.receivers
            tx.corrupted |= overlap
            other.corrupted |= overlap
            if frame.src in other.receivers:
                other.corrupted.add(frame.src)
        self._active.append(tx)
        self._transmitting.add(frame.src)
        self.frames_sent += 1
        if frame.packet.is_data:
            self.header_bytes += frame.packet.header
        else:
            self.routing_bytes += frame.packet.wire_size
        self.engine.call_at(tx.end, self._finish, tx, target=frame.src, kind=EventKind.MAC)
        return tx

    def _finish(self, tx):
        self._active.remove(tx)
        self._transmitting.discard(tx.frame.src)
        frame = tx.frame
        interface = self.interfaces[frame.src]
        if frame.is_broadcast:
            for receiver in sorted(tx.receivers):
                if receiver in tx.corrupted:
                    self.sim.trace('d', receiver, 'MAC', frame.packet, Drop.COL)
                else:
                    self._deliver(tx, receiver)
            self._serve_next(interface)
            return
        if frame.dst in tx.receivers and frame.dst not in tx.corrupted:
            self._deliver(tx, frame.dst)
            self._serve_next(interface)
            return
        frame.failures += 1
        if frame.failures <= self.radio.retry_limit:
            self._backoff(interface)
            return
        self.sim.trace('d', frame.src, 'MAC', frame.packet, Drop.CBK)
        interface.current = None
        purged = link_break_signal(self, frame.src, frame.dst, frame.packet)
        logger.debug('link %d->%d broken, %d queued frames purged', frame.src, frame.dst, len(purged))
        if interface.current is None:
            self._serve_next(interface)

    def _deliver(self, tx, receiver):
        at = tx.end + tx.delays[receiver]
        self.engine.call_at(at, self.sim.receive, receiver, tx.frame.packet, tx.frame.src,
                            target=receiver, kind=EventKind.DELIVERY)

    def residual(self):
        """Data packets still held by interface queues."""
        held = []
        for interface in self.interfaces:
            frames = list(interface.queue) + ([interface.current] if interface.current else [])
            held.extend(frame.packet for frame in frames if frame.packet.is_data)
        return held


def transmission_time_s(payload, radio):
    """Airtime in seconds of a packet of `payload` bytes, frame overhead included."""
    return airtime(payload + radio.frame_overhead, radio.data_rate_bps) / TICKS_PER_SECOND


def link_break_signal(medium, src, dst, packet):
    """Report an undeliverable unicast from `src` to `dst` to the routing agent of `src`."""
    purged = medium.interfaces[src].purge(dst)
    medium.sim.link_break(src, dst, packet, purged)
    return purged
