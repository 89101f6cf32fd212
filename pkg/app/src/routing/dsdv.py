"""
Destination-Sequenced Distance Vector routing.

Every node keeps a route to every known destination together with the
latest sequence number generated by that destination. Sequence numbers
issued by destinations are even; a node that loses the next hop of a route
advertises it with metric infinity and the odd successor of the last known
sequence number.

Classes:
    - DsdvEntry: Routing state for one destination.
    - UpdateKind: FULL_DUMP or INCREMENTAL.
    - DsdvUpdate: Body of a `dsdv` routing packet.
    - DsdvAgent: The per-node protocol.

Functions:
    - integrate: Apply one advertised (dest, metric, seq) to a table.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

from app.src.engine.engine import seconds
from app.src.routing.core import BROADCAST, RoutingAgent
from app.src.settings import settings

logger = logging.getLogger(__name__)

INFINITY = math.inf


@dataclass
class DsdvEntry:
    dest: int
    next_hop: int
    metric: float
    seq: int
    installed: int = 0

    @property
    def reachable(self):
        return self.metric != INFINITY


class UpdateKind(Enum):
    FULL_DUMP = 'full'
    INCREMENTAL = 'incremental'


@dataclass(frozen=True)
class DsdvUpdate:
    kind: UpdateKind
    entries: tuple

    @property
    def size(self):
        return settings.packet_sizes['dsdv'] + settings.packet_sizes['dsdv_entry'] * len(self.entries)


def integrate(table, advert, from_hop, now=0):
    """Apply an advertisement heard from neighbor `from_hop`.

    The entry is replaced when the advertised sequence number is higher, or
    equal with a strictly better metric. Stale adverts are ignored.

    Args:
        table (dict): Destination to `DsdvEntry`.
        advert (tuple): (dest, metric, seq) as sent by the neighbor.
        from_hop (int): The advertising neighbor.
        now (int): Install time.

    Returns:
        DsdvEntry: The installed entry, or None when the table is unchanged.
    """
    dest, metric, seq = advert
    offered = metric + 1
    entry = table.get(dest)
    if entry is not None and not (seq > entry.seq or (seq == entry.seq and offered < entry.metric)):
        return None
    table[dest] = DsdvEntry(dest, from_hop, offered, seq, now)
    return table[dest]


class DsdvAgent(RoutingAgent):
    """
    DSDV on one node.

    Periodic updates go out every `update_interval_s` from a random initial
    offset; every `full_dump_every`-th one is a full dump. Changes heard from
    neighbors are propagated by triggered incremental updates spaced at least
    `trigger_spacing_s` apart, while broken routes are advertised at once.
    """

    tag = 'dsdv'
    reactive = False

    def __init__(self, node, sim):
        super().__init__(node, sim)
        self.settings = sim.config.dsdv
        self.table = {node: DsdvEntry(node, node, 0, 0)}
        self.ticks = 0
        self.heard = {}
        self._since_dump = set()
        self._pending = set()
        self._last_trigger = None
        self._trigger_timer = None

    @property
    def seq(self):
        return self.table[self.node].seq

    def start(self):
        offset = self.sim.stream.uniform(0.0, 1.0)
        self.set_timer(seconds(offset), self._tick)

    def route(self, dst):
        entry = self.table.get(dst)
        if entry is None or not entry.reachable or dst == self.node:
            return None
        return entry

    def resolve(self, packet):
        entry = self.route(packet.dst)
        if entry is None:
            return None
        return entry.next_hop, packet

    # periodic updates

    def _tick(self):
        self._expire_neighbors()
        self.send_update(self.periodic_advertise())
        self.set_timer(seconds(self.settings.update_interval_s), self._tick)

    def periodic_advertise(self):
        """Build the update of the current periodic tick.

        The own sequence number advances by 2 on every tick, so even an
        incremental update carries the self entry.
        """
        own = self.table[self.node]
        own.seq += 2
        self._mark(self.node)
        full = self.ticks % self.settings.full_dump_every == 0
        self.ticks += 1
        if full:
            self._since_dump.clear()
            return self._update(UpdateKind.FULL_DUMP, self.table)
        return self._update(UpdateKind.INCREMENTAL, self._since_dump)

    def _update(self, kind, dests):
        entries = tuple((dest, self.table[dest].metric, self.table[dest].seq) for dest in sorted(dests))
        self._pending.clear()
        return DsdvUpdate(kind, entries)

    def send_update(self, update):
        if not update.entries:
            return
        packet = self.new_packet('dsdv', BROADCAST, payload=update, size=update.size)
        self.send_control(packet)

    def _mark(self, dest):
        self._since_dump.add(dest)
        self._pending.add(dest)

    # triggered updates

    def _trigger(self, immediate=False):
        spacing = seconds(self.settings.trigger_spacing_s)
        if immediate or self._last_trigger is None or self.now - self._last_trigger >= spacing:
            self._send_triggered()
        elif self._trigger_timer is None:
            self._trigger_timer = self.set_timer(self._last_trigger + spacing - self.now, self._send_triggered)

    def _send_triggered(self):
        if self._trigger_timer is not None:
            self._trigger_timer.cancel()
            self._trigger_timer = None
        if not self._pending:
            return
        self._last_trigger = self.now
        self.send_update(self._update(UpdateKind.INCREMENTAL, self._pending))

    # receiving

    def on_packet_from_net(self, packet, from_hop):
        if packet.is_data:
            self.handle_data(packet)
            return
        self.heard[from_hop] = self.now
        changed = False
        for advert in packet.payload.entries:
            if advert[0] == self.node:
                self._refute(advert)
                continue
            if integrate(self.table, advert, from_hop, self.now) is not None:
                self._mark(advert[0])
                changed = True
        if changed:
            self._trigger()

    def _refute(self, advert):
        """Answer a broken route to this node with a fresh even sequence number at once."""
        _, metric, seq = advert
        own = self.table[self.node]
        if metric != INFINITY or seq < own.seq:
            return
        own.seq = seq + 1 if seq % 2 else seq + 2
        self._mark(self.node)
        self._trigger(immediate=True)

    # link maintenance

    def _expire_neighbors(self):
        limit = seconds(self.settings.update_interval_s * self.settings.missed_updates)
        for neighbor, last in list(self.heard.items()):
            if self.now - last > limit:
                self.handle_link_break(neighbor)

    def handle_link_break(self, lost):
        """Poison every route through `lost` and advertise the change immediately.

        Returns:
            list: The destinations that became unreachable.
        """
        self.heard.pop(lost, None)
        broken = []
        for dest, entry in self.table.items():
            if dest != self.node and entry.next_hop == lost and entry.reachable:
                entry.metric = INFINITY
                entry.seq += 1
                entry.installed = self.now
                self._mark(dest)
                broken.append(dest)
        if broken:
            logger.debug('node %d lost %d, %d routes broken', self.node, lost, len(broken))
            self._trigger(immediate=True)
        return broken

    def on_link_break(self, next_hop, packet):
        self.handle_link_break(next_hop)
