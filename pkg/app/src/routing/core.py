"""
The routing-agent abstraction every protocol implements.

This module defines the packet taxonomy, the send buffer that holds data
packets while a reactive protocol looks for a route, and the `RoutingAgent`
base class. An agent only ever mutates the state of its own node; all
influence between nodes travels through transmitted packets.

Classes:
    - PacketKind: DATA or ROUTING.
    - Packet: A data or routing frame payload.
    - SendBuffer: FIFO of data packets awaiting a route.
    - Dispatch: Outcome of `dispatch_data`.
    - RoutingAgent: Base class of the four protocol agents.

Functions:
    - dispatch_data: Common front door for data packets.
    - expire_buffer: Drop buffered packets older than the timeout.
"""

import dataclasses
import logging
from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Any

from app.src.engine.engine import EventKind, seconds
from app.src.settings import settings

logger = logging.getLogger(__name__)

BROADCAST = -1


class PacketKind(Enum):
    DATA = 'data'
    ROUTING = 'routing'


class Drop(str, Enum):
    """Drop reason codes written to the trace."""

    IFQ = 'IFQ'
    IFQ_SB = 'IFQ-SB'
    NRTE = 'NRTE'
    TTL = 'TTL'
    CBK = 'CBK'
    COL = 'COL'
    TOUT = 'TOUT'


@dataclass(frozen=True)
class Packet:
    """
    A data or routing packet.

    Packets are immutable; forwarding produces a modified copy with `hop`.

    Attributes:
        uid (int): Unique per run; relayed copies keep the uid.
        kind (PacketKind): DATA or ROUTING.
        ptype (str): `cbr` or a protocol tag such as `aodv:rreq`.
        src, dst (int): Flow endpoints, `dst` is BROADCAST for flooded routing packets.
        size (int): Payload bytes.
        origin (int): Creation time in ticks.
        ttl (int): Remaining hop budget.
        flow_seq (int): Sequence number within the flow, -1 for routing packets.
        payload (Any): Protocol-specific routing body.
        route (tuple): Source route, empty when forwarded hop by hop.
        cursor (int): Index in `route` of the node that sent the packet last.
        header (int): Extra header bytes (source routes).
    """

    uid: int
    kind: PacketKind
    ptype: str
    src: int
    dst: int
    size: int
    origin: int
    ttl: int
    flow_seq: int = -1
    payload: Any = None
    route: tuple = ()
    cursor: int = 0
    header: int = 0

    @property
    def is_data(self):
        return self.kind is PacketKind.DATA

    @property
    def flow(self):
        return self.src, self.dst, self.flow_seq

    @property
    def wire_size(self):
        return self.size + self.header

    def hop(self, **changes):
        return dataclasses.replace(self, **changes)


class SendBuffer:
    """
    Data packets waiting for a route.

    Packets are kept FIFO per destination. When the buffer is full the
    oldest packet overall is evicted.

    Args:
        capacity (int): Maximum number of packets.
        timeout (int): Maximum buffering time in ticks.
    """

    def __init__(self, capacity, timeout):
        self.capacity = capacity
        self.timeout = timeout
        self._entries = OrderedDict()

    def __len__(self):
        return len(self._entries)

    def __contains__(self, dst):
        return any(packet.dst == dst for packet, _ in self._entries.values())

    def push(self, packet, now):
        """Buffer a packet; return the packets evicted to make room."""
        evicted = []
        while len(self._entries) >= self.capacity:
            _, (old, _) = self._entries.popitem(last=False)
            evicted.append(old)
        self._entries[packet.uid] = (packet, now)
        return evicted

    def pop(self, dst):
        """Remove and return the packets for `dst` in arrival order."""
        found = [uid for uid, (packet, _) in self._entries.items() if packet.dst == dst]
        return [self._entries.pop(uid)[0] for uid in found]

    def peek(self, dst):
        return next((packet for packet, _ in self._entries.values() if packet.dst == dst), None)

    def destinations(self):
        return list(dict.fromkeys(packet.dst for packet, _ in self._entries.values()))

    def oldest(self):
        if not self._entries:
            return None
        return next(iter(self._entries.values()))[1]

    def expire(self, now):
        expired = [uid for uid, (_, since) in self._entries.items() if now - since >= self.timeout]
        return [self._entries.pop(uid)[0] for uid in expired]


def expire_buffer(buffer, now):
    """Remove every packet buffered for at least the timeout and return them."""
    return buffer.expire(now)


class Dispatch(Enum):
    FORWARD = 'forward'
    BUFFER = 'buffer'
    DROP = 'drop'


def dispatch_data(agent, packet):
    """Route a data packet originated at the agent's node.

    A packet with a usable route is handed to the medium. Otherwise reactive
    agents buffer it and start route discovery, proactive agents drop it
    with reason NRTE.

    Returns:
        Dispatch: What happened to the packet.
    """
    resolved = agent.resolve(packet)
    if resolved is not None:
        next_hop, ready = resolved
        agent.transmit(ready, next_hop)
        return Dispatch.FORWARD
    if agent.reactive:
        agent.buffer_packet(packet)
        agent.discover(packet.dst)
        return Dispatch.BUFFER
    agent.drop(packet, Drop.NRTE)
    return Dispatch.DROP


class RoutingAgent(ABC):
    """
    Routing state and behavior of one node.

    Subclasses implement `resolve`, `on_packet_from_net` and
    `on_link_break`; reactive ones also implement `discover`.

    Args:
        node (int): Id of the node the agent runs on.
        sim: The run's node services (clock, timers, medium, trace, streams, config).
    """

    tag = ''
    reactive = False

    def __init__(self, node, sim):
        self.node = node
        self.sim = sim
        self.config = sim.config
        buffer_config = sim.config.buffer
        self.buffer = SendBuffer(buffer_config.capacity, seconds(buffer_config.timeout_s))
        self._sweep = None

    def __repr__(self):
        return f'{type(self).__name__}(node={self.node})'

    @property
    def now(self):
        return self.sim.now

    def start(self):
        """Schedule the agent's periodic work; called once before the run starts."""

    # callbacks

    def on_data_from_app(self, packet):
        return dispatch_data(self, packet)

    @abstractmethod
    def on_packet_from_net(self, packet, from_hop):
        """Handle a packet received from neighbor `from_hop`."""

    @abstractmethod
    def on_link_break(self, next_hop, packet):
        """Handle a unicast to `next_hop` that exhausted its retries."""

    def on_timer(self, callback, *args):
        callback(*args)

    @abstractmethod
    def resolve(self, packet):
        """Return `(next_hop, packet_ready_to_send)` or None when no usable route exists."""

    def discover(self, dst):
        raise NotImplementedError(f'{type(self).__name__} does not discover routes on demand')

    def freshness(self, dst):
        """Ordering key of the route to `dst` used by the forwarding monitor, None when not tracked."""
        return None

    # services

    def set_timer(self, delay, callback, *args):
        return self.sim.engine.call_in(delay, self.on_timer, callback, *args, target=self.node, kind=EventKind.TIMER)

    def jittered(self, interval_s):
        """An interval shortened by up to 10 percent, so periodic broadcasts of neighbors drift apart."""
        return seconds(interval_s * self.sim.stream.uniform(0.9, 1.0))

    def new_packet(self, ptype, dst, payload=None, ttl=1, size=None, **fields):
        """Build a routing packet originated by this node."""
        if size is None:
            size = settings.packet_sizes[ptype]
        return Packet(uid=self.sim.next_uid(), kind=PacketKind.ROUTING, ptype=ptype, src=self.node, dst=dst,
                      size=size, origin=self.now, ttl=ttl,
                      payload=payload, **fields)

    def transmit(self, packet, next_hop, event=None):
        """Queue a packet for the medium, tracing it at the routing layer when `event` is given."""
        if event is not None:
            self.sim.trace(event, self.node, 'RTR', packet)
        if packet.is_data:
            self.sim.observe(self, packet)
        self.sim.enqueue(self.node, packet, next_hop)

    def send_control(self, packet, next_hop=BROADCAST):
        self.transmit(packet, next_hop, 's')

    def relay_control(self, packet, next_hop=BROADCAST):
        self.transmit(packet, next_hop, 'f')

    def drop(self, packet, reason):
        self.sim.trace('d', self.node, 'RTR', packet, reason)

    def deliver(self, packet):
        self.sim.deliver(self.node, packet)

    def handle_data(self, packet):
        if packet.dst == self.node:
            self.deliver(packet)
        else:
            self.forward_data(packet)

    def forward_data(self, packet):
        """Relay a data packet that is not addressed to this node."""
        if packet.ttl <= 1:
            self.drop(packet, Drop.TTL)
            return False
        resolved = self.resolve(packet.hop(ttl=packet.ttl - 1))
        if resolved is None:
            self.drop(packet, Drop.NRTE)
            return False
        next_hop, ready = resolved
        self.transmit(ready, next_hop, 'f')
        return True

    def buffer_packet(self, packet):
        for evicted in self.buffer.push(packet, self.now):
            self.drop(evicted, Drop.IFQ_SB)
        if self._sweep is None:
            self._schedule_sweep()

    def _schedule_sweep(self):
        oldest = self.buffer.oldest()
        if oldest is None:
            self._sweep = None
            return
        self._sweep = self.set_timer(max(0, oldest + self.buffer.timeout - self.now), self._expire)

    def _expire(self):
        for packet in expire_buffer(self.buffer, self.now):
            self.drop(packet, Drop.TOUT)
        self._schedule_sweep()

    def flush(self, dst):
        """Send buffered packets for `dst` that now have a route."""
        first = self.buffer.peek(dst)
        if first is None or self.resolve(first) is None:
            return 0
        sent = 0
        for packet in self.buffer.pop(dst):
            next_hop, ready = self.resolve(packet)
            self.transmit(ready, next_hop)
            sent += 1
        if sent:
            logger.debug('node %d flushed %d packets for %d', self.node, sent, dst)
        return sent

    def drop_buffered(self, dst, reason=Drop.NRTE):
        for packet in self.buffer.pop(dst):
            self.drop(packet, reason)

    def reroute_purged(self, packets):
        """Handle packets taken out of the interface queue after a link break.

        Data packets this node originated go back through `dispatch_data`,
        every other packet is dropped.
        """
        for packet in packets:
            if packet.is_data and packet.src == self.node:
                dispatch_data(self, packet.hop(route=(), cursor=0, header=0))
            else:
                self.drop(packet, Drop.NRTE)
