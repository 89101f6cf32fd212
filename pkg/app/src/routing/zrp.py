"""
Zone Routing Protocol.

Each node proactively maintains the topology of its zone, the nodes at most
`radius` hops away (IARP). Neighbors are found with beacons, and every node
floods its neighbor list `radius - 1` hops so that its zone members can
build the zone graph. Destinations outside the zone are found on demand
(IERP): the query is bordercast to the peripheral nodes of the zone, the
nodes exactly `radius` hops away, which either know the target inside
their own zone or bordercast the query further. The reply carries the
accumulated route back to the source, which source-routes its data.

Classes:
    - ZoneState: Link-state table and the zone computed from it.
    - IarpUpdate, IerpQuery, IerpReply, IerpError: Routing packet bodies.
    - ZrpAgent: The per-node protocol.

Functions:
    - compute_zone: Cutoff BFS over a link-state table.
"""

import dataclasses
import logging
from dataclasses import dataclass

import networkx as nx

from app.src.engine.engine import seconds
from app.src.routing.core import BROADCAST, Drop, RoutingAgent
from app.src.settings import settings

logger = logging.getLogger(__name__)


def compute_zone(node, links, radius):
    """Shortest paths from `node` to every node at most `radius` hops away.

    Args:
        node (int): The zone center.
        links (dict): Source node to the neighbors it advertises.
        radius (int): Zone radius in hops.

    Returns:
        dict: Member to shortest path (a tuple starting at `node`), the center included.
    """
    graph = nx.DiGraph()
    graph.add_node(node)
    for source in sorted(links):
        graph.add_edges_from((source, neighbor) for neighbor in sorted(links[source]))
    paths = nx.single_source_shortest_path(graph, node, cutoff=radius)
    return {member: tuple(path) for member, path in sorted(paths.items())}


class ZoneState:
    """
    IARP state of a node.

    Attributes:
        node (int): The zone center.
        radius (int): Zone radius in hops.
        neighbors (dict): Neighbor id to the time it was last heard.
        link_state (dict): Source id to (neighbors, seq, receive time) of its latest IARP update.
    """

    def __init__(self, node, radius, hold_time):
        self.node = node
        self.radius = radius
        self.hold_time = hold_time
        self.neighbors = {}
        self.link_state = {}
        self._paths = None

    def invalidate(self):
        self._paths = None

    def links(self, now):
        table = {self.node: frozenset(self.neighbors)}
        for source, (advertised, _, received) in self.link_state.items():
            if now - received <= self.hold_time:
                table.setdefault(source, advertised)
        return table

    def paths(self, now):
        if self._paths is None:
            self._paths = compute_zone(self.node, self.links(now), self.radius)
        return self._paths

    def members(self, now):
        return set(self.paths(now))

    def distance(self, dst, now):
        path = self.paths(now).get(dst)
        return None if path is None else len(path) - 1

    def peripheral(self, now):
        return {member for member, path in self.paths(now).items() if len(path) - 1 == self.radius}

    def next_hop(self, dst, now):
        path = self.paths(now).get(dst)
        if path is None or len(path) < 2:
            return None
        return path[1]

    def expire(self, now):
        stale = [source for source, (_, _, received) in self.link_state.items() if now - received > self.hold_time]
        for source in stale:
            del self.link_state[source]
        if stale:
            self.invalidate()
        return stale


@dataclass(frozen=True)
class IarpUpdate:
    source: int
    seq: int
    neighbors: tuple


@dataclass(frozen=True)
class IerpQuery:
    """
    A route query on its way through bordercast trees.

    Attributes:
        query_id (int): Counter of the originator.
        originator (int): Node looking for the route.
        target (int): Wanted destination.
        route (tuple): Nodes crossed so far, originator first.
        covered (frozenset): Nodes whose zones the query has already searched.
        relays (tuple): (next relay, peripheral nodes reached through it) pairs of the current bordercast.
    """

    query_id: int
    originator: int
    target: int
    route: tuple
    covered: frozenset
    relays: tuple

    def duty(self, node):
        for relay, targets in self.relays:
            if relay == node:
                return targets
        return None


@dataclass(frozen=True)
class IerpReply:
    route: tuple


@dataclass(frozen=True)
class IerpError:
    a: int
    b: int


def _splice(route, suffix):
    """Join a route and a path starting at its last node, cutting any loop."""
    for index, node in enumerate(suffix):
        if node in route:
            head = route[:route.index(node)]
            return head + suffix[index:]
    return route + suffix


def _hop_bytes(route):
    return settings.packet_sizes['hop'] * len(route)


class ZrpAgent(RoutingAgent):
    """ZRP on one node."""

    tag = 'zrp'
    reactive = True

    def __init__(self, node, sim):
        super().__init__(node, sim)
        self.settings = sim.config.zrp
        hold_time = seconds(self.settings.iarp_refresh_s * 3)
        self.zone = ZoneState(node, self.settings.radius, hold_time)
        self.iarp_seq = 0
        self.query_id = 0
        self.seen = set()
        self.queries = {}
        self.routes = {}
        self._last_iarp = None
        self._iarp_timer = None

    def start(self):
        offset = self.sim.stream.uniform(0.0, self.settings.beacon_interval_s)
        self.set_timer(seconds(offset), self._beacon_tick)
        self.set_timer(seconds(offset + self.settings.iarp_refresh_s), self._refresh_tick)

    # neighbor discovery

    def _beacon_tick(self):
        self._expire_neighbors()
        self.send_control(self.new_packet('zrp:beacon', BROADCAST))
        self.set_timer(self.jittered(self.settings.beacon_interval_s), self._beacon_tick)

    def _expire_neighbors(self):
        limit = seconds(self.settings.beacon_interval_s * self.settings.beacon_loss)
        lost = [neighbor for neighbor, last in self.zone.neighbors.items() if self.now - last > limit]
        for neighbor in lost:
            self._lose_neighbor(neighbor)

    def _hear(self, neighbor):
        known = neighbor in self.zone.neighbors
        self.zone.neighbors[neighbor] = self.now
        if not known:
            self.zone.invalidate()
            self.iarp_maintain()
            self._zone_changed()

    def _zone_changed(self):
        for dst in self.buffer.destinations():
            if self.zone.distance(dst, self.now) is not None:
                self._route_found(dst)

    def _lose_neighbor(self, neighbor):
        if self.zone.neighbors.pop(neighbor, None) is None:
            return
        self.zone.invalidate()
        self.iarp_maintain()

    # IARP

    def _refresh_tick(self):
        self.zone.expire(self.now)
        self._send_iarp()
        self.set_timer(seconds(self.settings.iarp_refresh_s), self._refresh_tick)

    def iarp_maintain(self):
        """Flood the neighbor list after a neighbor change, at most once per minimum interval."""
        spacing = seconds(self.settings.iarp_min_interval_s)
        if self._last_iarp is None or self.now - self._last_iarp >= spacing:
            self._send_iarp()
        elif self._iarp_timer is None:
            self._iarp_timer = self.set_timer(self._last_iarp + spacing - self.now, self._send_iarp)

    def _send_iarp(self):
        if self._iarp_timer is not None:
            self._iarp_timer.cancel()
            self._iarp_timer = None
        ttl = self.settings.radius - 1
        if ttl < 1:
            return
        self._last_iarp = self.now
        self.iarp_seq += 1
        update = IarpUpdate(self.node, self.iarp_seq, tuple(sorted(self.zone.neighbors)))
        size = settings.packet_sizes['zrp:iarp'] + _hop_bytes(update.neighbors)
        self.send_control(self.new_packet('zrp:iarp', BROADCAST, payload=update, ttl=ttl, size=size))

    def handle_iarp(self, packet):
        update = packet.payload
        if update.source == self.node:
            return
        known = self.zone.link_state.get(update.source)
        if known is not None and known[1] >= update.seq:
            return
        self.zone.link_state[update.source] = (frozenset(update.neighbors), update.seq, self.now)
        self.zone.invalidate()
        self._zone_changed()
        if packet.ttl > 1:
            self.relay_control(packet.hop(ttl=packet.ttl - 1))

    # routing

    def resolve(self, packet):
        if packet.route:
            index = packet.cursor + 1 if packet.route[packet.cursor] != self.node else packet.cursor
            if index + 1 >= len(packet.route) or packet.route[index] != self.node:
                return None
            return packet.route[index + 1], packet.hop(cursor=index)
        next_hop = self.zone.next_hop(packet.dst, self.now)
        if next_hop is not None:
            return next_hop, packet
        route = self.routes.get(packet.dst)
        if route is None:
            return None
        return route[1], packet.hop(route=route, cursor=0, header=_hop_bytes(route))

    def route(self, dst):
        """How a packet for `dst` would leave this node: 'local', 'intra', 'inter' or None (query needed)."""
        if dst == self.node:
            return 'local'
        if self.zone.next_hop(dst, self.now) is not None:
            return 'intra'
        if dst in self.routes:
            return 'inter'
        return None

    # IERP

    def discover(self, dst):
        if dst in self.queries:
            return
        self._query(dst, 0)

    def _query(self, dst, attempt):
        self.queries.pop(dst, None)
        if dst not in self.buffer:
            return
        if self.flush(dst):
            return
        if attempt >= self.settings.query_retries:
            logger.debug('node %d: no route to %d after %d queries', self.node, dst, attempt)
            self.drop_buffered(dst, Drop.NRTE)
            return
        self.query_id += 1
        self.seen.add((self.node, self.query_id))
        query = IerpQuery(self.query_id, self.node, dst, (self.node,), frozenset(), ())
        bordercast = self.bordercast(query)
        if bordercast is not None:
            self.send_control(self.new_packet('zrp:ierp_q', BROADCAST, payload=bordercast,
                                              ttl=settings.data_ttl, size=self._query_size(bordercast)))
        timeout = seconds(self.settings.query_timeout_s * 2 ** attempt)
        self.queries[dst] = self.set_timer(timeout, self._query, dst, attempt + 1)

    @staticmethod
    def _query_size(query):
        return settings.packet_sizes['zrp:ierp_q'] + _hop_bytes(query.route)

    def bordercast(self, query):
        """Prepare the relay of a query from this node to its uncovered peripheral nodes.

        The node's zone is added to the covered set. Returns None when no
        peripheral node is left to reach.
        """
        targets = self.zone.peripheral(self.now) - query.covered
        covered = query.covered | self.zone.members(self.now)
        return self._relay_plan(query, targets, covered)

    def _relay_plan(self, query, targets, covered):
        relays = {}
        for target in sorted(targets):
            hop = self.zone.next_hop(target, self.now)
            if hop is not None and hop not in query.route:
                relays.setdefault(hop, []).append(target)
        if not relays:
            return None
        plan = tuple((hop, tuple(found)) for hop, found in sorted(relays.items()))
        return dataclasses.replace(query, covered=frozenset(covered), relays=plan)

    def handle_query(self, packet):
        query = packet.payload
        duty = query.duty(self.node)
        if duty is None or query.originator == self.node:
            return
        key = (query.originator, query.query_id)
        if key in self.seen:
            return
        self.seen.add(key)
        route = query.route + (self.node,)
        if self.node in duty:
            self._border(packet, dataclasses.replace(query, route=route))
            return
        covered = query.covered | self.zone.members(self.now)
        relayed = self._relay_plan(dataclasses.replace(query, route=route), set(duty), covered)
        if relayed is not None and packet.ttl > 1:
            self.relay_control(packet.hop(ttl=packet.ttl - 1, payload=relayed, size=self._query_size(relayed)))

    def _border(self, packet, query):
        """Answer a query at a peripheral node, or bordercast it further."""
        path = self.zone.paths(self.now).get(query.target)
        if path is not None:
            self._reply(_splice(query.route[:-1], path), query.route)
            return
        relayed = self.bordercast(query)
        if relayed is not None and packet.ttl > 1:
            self.relay_control(packet.hop(ttl=packet.ttl - 1, payload=relayed, size=self._query_size(relayed)))

    def _reply(self, route, record):
        back = tuple(reversed(record))
        if len(back) < 2:
            return
        packet = self.new_packet('zrp:ierp_r', route[0], payload=IerpReply(route), ttl=len(back),
                                 size=settings.packet_sizes['zrp:ierp_r'] + _hop_bytes(route),
                                 route=back, cursor=0, header=_hop_bytes(back))
        self.send_control(packet, back[1])

    def handle_reply(self, packet):
        route = packet.payload.route
        if packet.dst == self.node:
            self.routes[route[-1]] = route
            self._route_found(route[-1])
            return
        self._relay_source_routed(packet)

    def _route_found(self, dst):
        timer = self.queries.pop(dst, None)
        if timer is not None:
            timer.cancel()
        self.flush(dst)

    def _relay_source_routed(self, packet):
        resolved = self.resolve(packet)
        if resolved is None:
            self.drop(packet, Drop.NRTE)
            return
        next_hop, ready = resolved
        self.relay_control(ready, next_hop)

    # maintenance

    def ierp_maintain(self, broken, packet):
        """Report a broken link of a source route to the source of the packet.

        Returns:
            bool: True when an error packet was sent.
        """
        self._forget_link(self.node, broken)
        if not packet.route or packet.src == self.node:
            return False
        prefix = packet.route[:packet.cursor + 1]
        if self.node not in prefix:
            return False
        back = tuple(reversed(prefix[:prefix.index(self.node) + 1]))
        error = self.new_packet('zrp:ierp_e', packet.src, payload=IerpError(self.node, broken), ttl=len(back),
                                route=back, cursor=0, header=_hop_bytes(back))
        self.send_control(error, back[1])
        return True

    def _forget_link(self, a, b):
        broken = [dst for dst, route in self.routes.items() if (a, b) in set(zip(route, route[1:]))]
        for dst in broken:
            del self.routes[dst]
        return broken

    def handle_error(self, packet):
        error = packet.payload
        self._forget_link(error.a, error.b)
        if packet.dst != self.node:
            self._relay_source_routed(packet)

    def on_link_break(self, next_hop, packet):
        self._lose_neighbor(next_hop)
        self._forget_link(self.node, next_hop)
        if packet.is_data and packet.route:
            self.ierp_maintain(next_hop, packet)

    # receiving

    def on_packet_from_net(self, packet, from_hop):
        self._hear(from_hop)
        if packet.is_data:
            self.handle_data(packet)
            return
        match packet.ptype:
            case 'zrp:iarp':
                self.handle_iarp(packet)
            case 'zrp:ierp_q':
                self.handle_query(packet)
            case 'zrp:ierp_r':
                self.handle_reply(packet)
            case 'zrp:ierp_e':
                self.handle_error(packet)
