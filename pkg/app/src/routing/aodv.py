"""
Ad-hoc On-demand Distance Vector routing.

Routes are discovered by flooding route requests with an expanding ring of
TTLs and answered with unicast replies along the reverse path. Destination
sequence numbers order route information; a node never replaces a route by
one with a smaller sequence number. Broken links are reported upstream with
route errors, and hello messages keep track of the neighbors of nodes that
take part in active routes.

Classes:
    - RouteState: VALID or INVALID.
    - AodvRoute: Routing state for one destination.
    - Rreq, Rrep, Rerr, Hello: Routing packet bodies.
    - AodvAgent: The per-node protocol.

Functions:
    - ring_schedule: TTLs of the successive route request attempts.
    - ring_wait: Waiting time after an attempt with a given TTL.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum

from app.src.engine.engine import seconds
from app.src.routing.core import BROADCAST, Drop, RoutingAgent
from app.src.settings import settings

logger = logging.getLogger(__name__)


class RouteState(Enum):
    VALID = 'valid'
    INVALID = 'invalid'


@dataclass
class AodvRoute:
    """
    Routing state for one destination.

    Attributes:
        dest (int): Destination.
        next_hop (int): Neighbor towards the destination.
        hops (int): Distance in hops.
        dest_seq (int): Destination sequence number.
        lifetime (int): Expiry time in ticks.
        state (RouteState): VALID or INVALID.
        seq_known (bool): False for neighbor routes learned without a sequence number.
        precursors (set): Neighbors that forward through this node towards `dest`.
    """

    dest: int
    next_hop: int
    hops: int
    dest_seq: int
    lifetime: int
    state: RouteState = RouteState.VALID
    seq_known: bool = True
    precursors: set = field(default_factory=set)

    @property
    def valid(self):
        return self.state is RouteState.VALID


@dataclass(frozen=True)
class Rreq:
    rreq_id: int
    originator: int
    orig_seq: int
    dest: int
    dest_seq: int | None
    hops: int = 0


@dataclass(frozen=True)
class Rrep:
    dest: int
    dest_seq: int
    originator: int
    hops: int
    lifetime: int


@dataclass(frozen=True)
class Rerr:
    unreachable: tuple

    @property
    def size(self):
        return settings.packet_sizes['aodv:rerr'] + settings.packet_sizes['aodv:rerr_entry'] * len(self.unreachable)


@dataclass(frozen=True)
class Hello:
    seq: int


def ring_schedule(config):
    """TTL of every route request attempt: the expanding ring, then the network diameter.

    With the default constants the schedule is 1, 3, 5, 7, 35, 35, 35.
    """
    ttls = list(range(config.ttl_start, config.ttl_threshold + 1, config.ttl_increment))
    return ttls + [config.net_diameter] * (config.rreq_retries + 1)


def ring_wait(ttl, config):
    """Ticks to wait for a reply to a request sent with `ttl`."""
    return seconds(2 * ttl * config.node_traversal_time_s)


class AodvAgent(RoutingAgent):
    """AODV on one node."""

    tag = 'aodv'
    reactive = True

    def __init__(self, node, sim):
        super().__init__(node, sim)
        self.settings = sim.config.aodv
        self.seq = 0
        self.rreq_id = 0
        self.routes = {}
        self.seen = set()
        self.heard = {}
        self.discoveries = {}

    def start(self):
        if self.settings.hello_enabled:
            offset = self.sim.stream.uniform(0.0, self.settings.hello_interval_s)
            self.set_timer(seconds(offset), self._hello_tick)

    # route table

    @property
    def _active_timeout(self):
        return seconds(self.settings.active_route_timeout_s)

    def valid_route(self, dest):
        route = self.routes.get(dest)
        if route is None or not route.valid:
            return None
        if route.lifetime < self.now:
            route.state = RouteState.INVALID
            return None
        return route

    def update_route(self, dest, next_hop, hops, dest_seq, lifetime):
        """Offer a route; install it when it is fresher or shorter than the current one.

        Returns:
            bool: True when the route was installed.
        """
        route = self.routes.get(dest)
        valid = self.valid_route(dest) is not None
        if route is not None and route.seq_known:
            fresher = dest_seq > route.dest_seq
            shorter = dest_seq == route.dest_seq and (not valid or hops < route.hops)
            if not (fresher or shorter):
                if valid and route.next_hop == next_hop and dest_seq == route.dest_seq and hops == route.hops:
                    route.lifetime = max(route.lifetime, lifetime)
                return False
        precursors = route.precursors if route is not None else set()
        self.routes[dest] = AodvRoute(dest, next_hop, hops, dest_seq, lifetime, precursors=precursors)
        self._route_ready(dest)
        return True

    def touch_neighbor(self, neighbor):
        """Make sure a one-hop route to a neighbor we just heard from exists."""
        self.heard[neighbor] = self.now
        if self.valid_route(neighbor) is not None:
            if self.routes[neighbor].next_hop == neighbor:
                self.routes[neighbor].lifetime = max(self.routes[neighbor].lifetime, self.now + self._active_timeout)
            return
        old = self.routes.get(neighbor)
        if old is not None and old.seq_known:
            return
        self.routes[neighbor] = AodvRoute(neighbor, neighbor, 1, old.dest_seq if old else 0,
                                          self.now + self._active_timeout, seq_known=False,
                                          precursors=old.precursors if old else set())
        self._route_ready(neighbor)

    def _route_ready(self, dest):
        if self.valid_route(dest) is None:
            return
        self.flush(dest)
        self._finish_discovery(dest)

    def freshness(self, dst):
        route = self.valid_route(dst)
        if route is None:
            return None
        return route.dest_seq, -route.hops

    def resolve(self, packet):
        route = self.valid_route(packet.dst)
        if route is None:
            return None
        route.lifetime = max(route.lifetime, self.now + self._active_timeout)
        hop_route = self.valid_route(route.next_hop)
        if hop_route is not None:
            hop_route.lifetime = max(hop_route.lifetime, self.now + self._active_timeout)
        return route.next_hop, packet

    # discovery

    def discover(self, dst):
        if dst in self.discoveries:
            return
        self.originate_discovery(dst, 0)

    def originate_discovery(self, dst, attempt):
        """Send route request number `attempt` for `dst`, or give up when the schedule is exhausted."""
        schedule = ring_schedule(self.settings)
        if attempt >= len(schedule):
            logger.debug('node %d: discovery of %d failed', self.node, dst)
            self.discoveries.pop(dst, None)
            self.drop_buffered(dst, Drop.NRTE)
            return
        ttl = schedule[attempt]
        self.seq += 1
        self.rreq_id += 1
        known = self.routes.get(dst)
        rreq = Rreq(self.rreq_id, self.node, self.seq, dst, known.dest_seq if known and known.seq_known else None)
        self.seen.add((self.node, self.rreq_id))
        self.send_control(self.new_packet('aodv:rreq', BROADCAST, payload=rreq, ttl=ttl))
        self.discoveries[dst] = self.set_timer(ring_wait(ttl, self.settings), self.originate_discovery, dst,
                                               attempt + 1)

    def _finish_discovery(self, dst):
        timer = self.discoveries.pop(dst, None)
        if timer is not None:
            timer.cancel()

    # receiving

    def on_packet_from_net(self, packet, from_hop):
        self.touch_neighbor(from_hop)
        if packet.is_data:
            self._handle_data(packet, from_hop)
            return
        match packet.ptype:
            case 'aodv:rreq':
                self.handle_rreq(packet, from_hop)
            case 'aodv:rrep':
                self.handle_rrep(packet, from_hop)
            case 'aodv:rerr':
                self.handle_rerr(packet, from_hop)
            case 'aodv:hello':
                self.handle_hello(packet, from_hop)

    def _handle_data(self, packet, from_hop):
        source = self.valid_route(packet.src)
        if source is not None:
            source.lifetime = max(source.lifetime, self.now + self._active_timeout)
        if packet.dst == self.node:
            self.deliver(packet)
            return
        route = self.valid_route(packet.dst)
        if route is None:
            self.drop(packet, Drop.NRTE)
            known = self.routes.get(packet.dst)
            self._send_rerr([(packet.dst, known.dest_seq if known else 0)])
            return
        route.precursors.add(from_hop)
        self.forward_data(packet)

    def handle_rreq(self, packet, from_hop):
        rreq = packet.payload
        key = (rreq.originator, rreq.rreq_id)
        if key in self.seen:
            return
        self.seen.add(key)
        hops = rreq.hops + 1
        self.update_route(rreq.originator, from_hop, hops, rreq.orig_seq, self.now + self._active_timeout)
        if rreq.dest == self.node:
            self.seq = max(self.seq, rreq.dest_seq or 0)
            self._send_rrep(Rrep(self.node, self.seq, rreq.originator, 0, self._active_timeout), from_hop)
            return
        route = self.valid_route(rreq.dest)
        if route is not None and route.seq_known and (rreq.dest_seq is None or route.dest_seq >= rreq.dest_seq):
            route.precursors.add(from_hop)
            reverse = self.routes[rreq.originator]
            reverse.precursors.add(route.next_hop)
            self._send_rrep(Rrep(rreq.dest, route.dest_seq, rreq.originator, route.hops,
                                 route.lifetime - self.now), from_hop)
            return
        if packet.ttl <= 1:
            return
        dest_seq = rreq.dest_seq
        if route is not None and route.seq_known:
            dest_seq = route.dest_seq if dest_seq is None else max(dest_seq, route.dest_seq)
        relayed = dataclasses.replace(rreq, hops=hops, dest_seq=dest_seq)
        self.relay_control(packet.hop(ttl=packet.ttl - 1, payload=relayed))

    def _send_rrep(self, rrep, next_hop):
        self.send_control(self.new_packet('aodv:rrep', rrep.originator, payload=rrep, ttl=self.settings.net_diameter),
                          next_hop)

    def handle_rrep(self, packet, from_hop):
        rrep = packet.payload
        hops = rrep.hops + 1
        self.update_route(rrep.dest, from_hop, hops, rrep.dest_seq, self.now + max(rrep.lifetime, 1))
        if rrep.originator == self.node:
            self._route_ready(rrep.dest)
            return
        reverse = self.valid_route(rrep.originator)
        if reverse is None:
            self.drop(packet, Drop.NRTE)
            return
        forward = self.routes[rrep.dest]
        forward.precursors.add(reverse.next_hop)
        reverse.precursors.add(from_hop)
        self.relay_control(packet.hop(payload=dataclasses.replace(rrep, hops=hops)), reverse.next_hop)

    # maintenance

    def handle_link_break(self, broken):
        """Invalidate every route through `broken` and report them to the precursors.

        Returns:
            list: (dest, dest_seq) of the invalidated routes.
        """
        self.heard.pop(broken, None)
        unreachable = []
        notify = False
        for route in self.routes.values():
            if route.valid and route.next_hop == broken:
                route.state = RouteState.INVALID
                route.dest_seq += 1
                unreachable.append((route.dest, route.dest_seq))
                notify = notify or bool(route.precursors - {broken})
        if unreachable and notify:
            self._send_rerr(unreachable)
        return unreachable

    def _send_rerr(self, unreachable):
        rerr = Rerr(tuple(unreachable))
        self.send_control(self.new_packet('aodv:rerr', BROADCAST, payload=rerr, size=rerr.size))

    def handle_rerr(self, packet, from_hop):
        unreachable = []
        notify = False
        for dest, dest_seq in packet.payload.unreachable:
            route = self.routes.get(dest)
            if route is None or not route.valid or route.next_hop != from_hop:
                continue
            route.state = RouteState.INVALID
            route.dest_seq = max(route.dest_seq + 1, dest_seq) if route.seq_known else dest_seq
            route.seq_known = True
            unreachable.append((dest, route.dest_seq))
            notify = notify or bool(route.precursors)
        if unreachable and notify:
            self._send_rerr(unreachable)

    def on_link_break(self, next_hop, packet):
        if self.settings.link_layer_detection:
            self.handle_link_break(next_hop)

    # hello messages

    def _hello_tick(self):
        self.hello_maintenance()
        self.set_timer(self.jittered(self.settings.hello_interval_s), self._hello_tick)

    def hello_maintenance(self):
        """Expire silent neighbors, then send a hello when the node takes part in a valid route.

        Returns:
            bool: True when a hello was sent.
        """
        limit = seconds(self.settings.hello_interval_s * self.settings.allowed_hello_loss)
        for neighbor, last in list(self.heard.items()):
            if self.now - last > limit:
                self.handle_link_break(neighbor)
        if not any(self.valid_route(dest) is not None for dest in list(self.routes)):
            return False
        self.send_control(self.new_packet('aodv:hello', BROADCAST, payload=Hello(self.seq)))
        return True

    def handle_hello(self, packet, from_hop):
        lifetime = self.now + seconds(self.settings.hello_interval_s * self.settings.allowed_hello_loss)
        self.update_route(from_hop, from_hop, 1, packet.payload.seq, lifetime)
