"""
This module contains the Simulation class, one run of one protocol over one scenario.

The simulation owns the engine, the medium, one routing agent per node and
the tracer, and offers agents and the medium the node services they share
(clock, uids, tracing, packet hand-over between layers).

Classes:
    - RunResult: Tallies of a finished run.
    - Simulation: Wiring of a single run.

Functions:
    - protocol_class: Look up the agent class of a protocol name.
"""

import logging
from dataclasses import dataclass

from app.src.engine.engine import Engine, EventKind, RandomStream, format_time, seconds
from app.src.entities.traffic import Flow, emit
from app.src.errors import ConfigError
from app.src.medium.medium import Medium
from app.src.metrics.metrics import ForwardingMonitor
from app.src.metrics.trace import TraceRecord, Tracer
from app.src.routing.aodv import AodvAgent
from app.src.routing.core import Drop
from app.src.routing.dsdv import DsdvAgent
from app.src.routing.dsr import DsrAgent
from app.src.routing.zrp import ZrpAgent
from app.src.settings.config import SimConfig

logger = logging.getLogger(__name__)

PROTOCOLS = {
    'dsdv': DsdvAgent,
    'aodv': AodvAgent,
    'dsr': DsrAgent,
    'zrp': ZrpAgent,
}


def protocol_class(name):
    try:
        return PROTOCOLS[name.lower()]
    except KeyError:
        raise ConfigError(f'unknown protocol {name!r}, expected one of {", ".join(PROTOCOLS)}') from None


@dataclass(frozen=True)
class RunResult:
    """
    Outcome of a run besides the trace itself.

    Attributes:
        events (int): Events dispatched.
        records (int): Trace records written.
        digest (str): SHA-256 of the trace text.
        residual (int): Data packets still in buffers, queues or on air at the end.
        held (int): Data packets found in send buffers and interface queues at the end.
        link_changes (int): Link up/down transitions seen by the neighbor refresh.
        routing_bytes (int): Bytes of routing packet transmissions.
        header_bytes (int): Source route header bytes carried by data transmissions.
        path_checks (int): Forwarding steps checked for route freshness.
        freshness_violations (int): Forwarding steps where route freshness decreased.
    """

    events: int
    records: int
    digest: str
    residual: int
    held: int
    link_changes: int
    routing_bytes: int
    header_bytes: int
    path_checks: int
    freshness_violations: int

    def as_dict(self):
        return dict(self.__dict__)


class Simulation:
    """
    One run of a routing protocol over a mobility and a traffic plan.

    Args:
        protocol (str): `dsdv`, `aodv`, `dsr` or `zrp`.
        plan (MobilityPlan): Node movement, also fixes the node count and run length.
        traffic (TrafficPlan): CBR connections.
        seed (int): Seed of the `mac-jitter` and `protocol` streams.
        config (SimConfig): Tunables, defaults when None.
        tracer (Tracer): Trace destination, an in-memory tracer when None.
    """

    def __init__(self, protocol, plan, traffic, seed, config=None, tracer=None):
        self.protocol = protocol.lower()
        self.plan = plan
        self.traffic = traffic
        self.seed = seed
        self.config = config or SimConfig()
        self.duration = plan.duration
        self.engine = Engine()
        self.streams = {label: RandomStream(seed, label) for label in RandomStream.LABELS}
        self.tracer = tracer if tracer is not None else Tracer(keep=True)
        self.monitor = ForwardingMonitor()
        self.medium = Medium(self, plan, self.config.radio, self.streams['mac-jitter'])
        agent_class = protocol_class(self.protocol)
        self.agents = [agent_class(node, self) for node in range(plan.size)]
        self.flows = [Flow(connection, self.config.buffer.data_ttl) for connection in traffic.connections]
        self._uid = 0
        for flow in self.flows:
            if flow.connection.src >= plan.size or flow.connection.dst >= plan.size:
                raise ConfigError(f'connection {flow.connection} refers to a node outside 0..{plan.size - 1}')

    def __repr__(self):
        return f'Simulation({self.protocol}, nodes={self.plan.size}, seed={self.seed})'

    @property
    def now(self):
        return self.engine.now

    @property
    def stream(self):
        return self.streams['protocol']

    def next_uid(self):
        uid = self._uid
        self._uid += 1
        return uid

    # services used by agents and the medium

    def trace(self, event, node, layer, packet, reason='-'):
        if isinstance(reason, Drop):
            reason = reason.value
        self.tracer.record(TraceRecord(event, self.engine.now, node, layer, packet.uid, packet.ptype, packet.size,
                                       packet.src, packet.dst, reason))

    def enqueue(self, node, packet, next_hop):
        return self.medium.enqueue(node, packet, next_hop)

    def neighbors(self, node):
        return self.medium.neighbors(node, self.engine.now)

    def receive(self, node, packet, from_hop):
        self.agents[node].on_packet_from_net(packet, from_hop)

    def deliver(self, node, packet):
        self.trace('r', node, 'AGT', packet)
        self.monitor.forget(packet.uid)

    def link_break(self, node, next_hop, packet, purged):
        agent = self.agents[node]
        agent.on_link_break(next_hop, packet)
        agent.reroute_purged(purged)

    def observe(self, agent, packet):
        self.monitor.observe(agent, packet)

    # traffic

    def _emit(self, flow):
        packet, following = emit(flow, self.engine.now, self.next_uid())
        self.trace('s', packet.src, 'AGT', packet)
        self.agents[packet.src].on_data_from_app(packet)
        if following < self.duration:
            self.engine.call_at(following, self._emit, flow, target=packet.src, kind=EventKind.TRAFFIC)

    def start(self):
        self.medium.start(self.duration)
        for agent in self.agents:
            agent.start()
        for flow in self.flows:
            if flow.connection.start < self.duration:
                self.engine.call_at(flow.connection.start, self._emit, flow, target=flow.connection.src,
                                    kind=EventKind.TRAFFIC)

    def held(self):
        """Count the data packets sitting in send buffers and interface queues."""
        return sum(len(agent.buffer) for agent in self.agents) + len(self.medium.residual())

    def run(self):
        """Run the scenario to its end and return the run tallies."""
        self.start()
        summary = self.engine.run_until(self.duration)
        logger.debug('%r finished at %s: %d events, %d records', self, format_time(summary.clock),
                     summary.dispatched, self.tracer.count)
        return RunResult(
            events=summary.dispatched,
            records=self.tracer.count,
            digest=self.tracer.digest,
            residual=self.tracer.residual,
            held=self.held(),
            link_changes=self.medium.link_changes,
            routing_bytes=self.medium.routing_bytes,
            header_bytes=self.medium.header_bytes,
            path_checks=self.monitor.checks,
            freshness_violations=len(self.monitor.violations),
        )


def run_for(sim, duration_s):
    """Advance an already started simulation by `duration_s` seconds."""
    return sim.engine.run_until(sim.engine.now + seconds(duration_s))
