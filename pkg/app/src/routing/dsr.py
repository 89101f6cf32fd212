"""
Dynamic Source Routing.

A source stamps the complete route into every data packet. Routes come from
a per-node route cache filled by route discovery: a route request collects
the addresses of the nodes it crosses and the target, or a node that has
the rest of the path in its cache, returns the collected route in a reply.
A node that cannot reach the next hop of a source route sends a route error
back to the source and every node on the way drops the broken link from
its cache. Nothing is ever sent periodically.

Classes:
    - RouteCache: Cached source routes of one node.
    - DsrRreq, DsrRrep, DsrRerr: Routing packet bodies.
    - DsrAgent: The per-node protocol.
"""

import dataclasses
import logging
from collections import OrderedDict
from dataclasses import dataclass

from app.src.engine.engine import seconds
from app.src.routing.core import BROADCAST, RoutingAgent
from app.src.settings import settings

logger = logging.getLogger(__name__)


def _loop_free(route):
    return len(set(route)) == len(route)


def _links(route):
    return zip(route, route[1:])


class RouteCache:
    """
    Source routes known to a node.

    Every cached route starts at the owner and never repeats a node. A route
    also serves every node on it: the route to an intermediate node is the
    prefix ending there.

    Args:
        owner (int): The node the cache belongs to.
        capacity (int): Maximum number of routes, the oldest is evicted first.
        expiry (int): Ticks after which a route is no longer used.
    """

    def __init__(self, owner, capacity, expiry):
        self.owner = owner
        self.capacity = capacity
        self.expiry = expiry
        self._routes = OrderedDict()

    def __len__(self):
        return len(self._routes)

    def __iter__(self):
        return iter(self._routes)

    def add(self, route, now):
        """Cache a route; return False when it is rejected (too short, not ours, or looping)."""
        route = tuple(route)
        if len(route) < 2 or route[0] != self.owner or not _loop_free(route):
            return False
        if route in self._routes:
            self._routes[route] = now
            return True
        while len(self._routes) >= self.capacity:
            self._routes.popitem(last=False)
        self._routes[route] = now
        return True

    def find(self, dst, now):
        """Return the shortest, then freshest, unexpired route to `dst`, or None."""
        best = None
        for route, installed in self._routes.items():
            if now - installed >= self.expiry or dst not in route[1:]:
                continue
            candidate = route[:route.index(dst) + 1]
            key = (len(candidate), -installed)
            if best is None or key < best[0]:
                best = (key, candidate)
        return best[1] if best else None

    def remove_link(self, a, b):
        """Delete every cached route that uses the link a->b; return how many were deleted."""
        broken = [route for route in self._routes if (a, b) in set(_links(route))]
        for route in broken:
            del self._routes[route]
        return len(broken)

    def expire(self, now):
        stale = [route for route, installed in self._routes.items() if now - installed >= self.expiry]
        for route in stale:
            del self._routes[route]
        return len(stale)


@dataclass(frozen=True)
class DsrRreq:
    request_id: int
    originator: int
    target: int
    record: tuple


@dataclass(frozen=True)
class DsrRrep:
    route: tuple


@dataclass(frozen=True)
class DsrRerr:
    a: int
    b: int


def _hop_bytes(route):
    return settings.dsr_header_per_hop * len(route)


class DsrAgent(RoutingAgent):
    """DSR on one node."""

    tag = 'dsr'
    reactive = True

    def __init__(self, node, sim):
        super().__init__(node, sim)
        self.settings = sim.config.dsr
        self.cache = RouteCache(node, self.settings.cache_capacity, seconds(self.settings.cache_expiry_s))
        self.request_id = 0
        self.seen = set()
        self.requests = {}

    # sending

    def resolve(self, packet):
        if packet.route:
            index = packet.cursor + 1 if packet.route[packet.cursor] != self.node else packet.cursor
            if index + 1 >= len(packet.route) or packet.route[index] != self.node:
                return None
            return packet.route[index + 1], packet.hop(cursor=index)
        route = self.cache.find(packet.dst, self.now)
        if route is None:
            return None
        stamped = packet.hop(route=route, cursor=0, header=_hop_bytes(route))
        return route[1], stamped

    def discover(self, dst):
        if dst in self.requests:
            return
        self._send_rreq(dst, seconds(self.settings.request_period_s))

    def _send_rreq(self, dst, period):
        if dst not in self.buffer:
            self.requests.pop(dst, None)
            return
        self.request_id += 1
        self.seen.add((self.node, self.request_id))
        record = (self.node,)
        rreq = DsrRreq(self.request_id, self.node, dst, record)
        packet = self.new_packet('dsr:rreq', BROADCAST, payload=rreq, ttl=self.settings.max_route_length,
                                 size=settings.packet_sizes['dsr:rreq'] + _hop_bytes(record))
        self.send_control(packet)
        following = min(period * 2, seconds(self.settings.max_request_period_s))
        self.requests[dst] = self.set_timer(period, self._retry_request, dst, following)

    def _retry_request(self, dst, period):
        self.requests.pop(dst, None)
        if self.flush(dst):
            return
        self._send_rreq(dst, period)

    def _route_found(self, dst):
        timer = self.requests.pop(dst, None)
        if timer is not None:
            timer.cancel()
        self.flush(dst)

    # receiving

    def on_packet_from_net(self, packet, from_hop):
        if packet.is_data:
            self._learn(packet.route)
            self.handle_data(packet)
            return
        match packet.ptype:
            case 'dsr:rreq':
                self.handle_rreq(packet)
            case 'dsr:rrep':
                self.handle_rrep(packet)
            case 'dsr:rerr':
                self.handle_rerr(packet)

    def _learn(self, route):
        """Cache what a source route tells about the paths from this node."""
        if self.node not in route:
            return
        index = route.index(self.node)
        self.cache.add(route[index:], self.now)
        self.cache.add(tuple(reversed(route[:index + 1])), self.now)

    def handle_rreq(self, packet):
        rreq = packet.payload
        if rreq.originator == self.node or self.node in rreq.record:
            return
        key = (rreq.originator, rreq.request_id)
        if key in self.seen:
            return
        self.seen.add(key)
        record = rreq.record + (self.node,)
        self.cache.add(tuple(reversed(record)), self.now)
        if rreq.target == self.node:
            self._send_rrep(record, record)
            return
        cached = self.cache.find(rreq.target, self.now)
        if cached is not None and not set(cached[1:]) & set(record):
            self._send_rrep(record + cached[1:], record)
            return
        if packet.ttl <= 1 or len(record) >= self.settings.max_route_length:
            return
        relayed = dataclasses.replace(rreq, record=record)
        self.relay_control(packet.hop(ttl=packet.ttl - 1, payload=relayed,
                                      size=settings.packet_sizes['dsr:rreq'] + _hop_bytes(record)))

    def _send_rrep(self, route, record):
        back = tuple(reversed(record))
        packet = self.new_packet('dsr:rrep', record[0], payload=DsrRrep(tuple(route)), ttl=len(back),
                                 size=settings.packet_sizes['dsr:rrep'] + _hop_bytes(route),
                                 route=back, cursor=0, header=_hop_bytes(back))
        self.send_control(packet, back[1])

    def handle_rrep(self, packet):
        route = packet.payload.route
        self._learn(route)
        if packet.dst == self.node:
            self._route_found(route[-1])
            return
        self._relay_source_routed(packet)

    def _relay_source_routed(self, packet):
        resolved = self.resolve(packet)
        if resolved is None:
            return
        next_hop, ready = resolved
        self.relay_control(ready, next_hop)

    # maintenance

    def handle_link_break(self, broken, packet):
        """Prune the broken link and report it to the source of a source-routed data packet.

        Returns:
            bool: True when a route error was sent.
        """
        self.cache.remove_link(self.node, broken)
        if not packet.is_data or not packet.route or packet.src == self.node:
            return False
        prefix = packet.route[:packet.cursor + 1]
        if self.node not in prefix:
            return False
        back = tuple(reversed(prefix[:prefix.index(self.node) + 1]))
        rerr = self.new_packet('dsr:rerr', packet.src, payload=DsrRerr(self.node, broken), ttl=len(back),
                               route=back, cursor=0, header=_hop_bytes(back))
        self.send_control(rerr, back[1])
        return True

    def on_link_break(self, next_hop, packet):
        self.handle_link_break(next_hop, packet)

    def handle_rerr(self, packet):
        rerr = packet.payload
        removed = self.cache.remove_link(rerr.a, rerr.b)
        logger.debug('node %d pruned %d routes using %d->%d', self.node, removed, rerr.a, rerr.b)
        if packet.dst != self.node:
            self._relay_source_routed(packet)
