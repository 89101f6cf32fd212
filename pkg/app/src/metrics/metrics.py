"""
The "metrics" module computes the four performance metrics from a trace.

    throughput       delivered / generated data packets (AGT receives over AGT sends)
    average delay    mean AGT receive time minus AGT send time of delivered packets
    dropped packets  drop records of data packets, whatever the layer and reason
    routing overhead `s` and `f` records at RTR of routing packets, one per hop-wise transmission

All metrics accept `warmup_s`: data packets generated before it, and routing
transmissions before it, are left out.

Classes:
    - MetricsReport: Metric values plus raw tallies.
    - MetricsAccumulator: One-pass computation over a stream of records.
    - PathTracker: Hop sequences of data packets, for loop detection.
    - ForwardingMonitor: Per-hop checks made while a run is in progress.

Functions:
    - throughput, average_delay, dropped_packets, routing_overhead: The four metrics.
    - compute_report: All metrics at once.
    - path_revisits: Delivered data packets whose hop sequence revisits a node.
"""

import math
from collections import Counter
from dataclasses import dataclass, field

from app.src.engine.engine import TICKS_PER_SECOND, seconds
from app.src.errors import UndefinedMetricError


@dataclass(frozen=True)
class MetricsReport:
    """
    Result of a trace evaluation.

    Attributes:
        throughput (float): Delivery ratio in [0, 1], NaN when nothing was generated.
        avg_delay (float): Seconds, NaN when nothing was delivered.
        dropped (int): Dropped data packets.
        overhead (int): Routing packet transmissions.
        generated (int): Data packets sent by applications.
        delivered (int): Data packets received by their destination.
        residual (int): Data packets neither delivered nor dropped at the end.
        drops (dict): Dropped data packets per reason.
    """

    throughput: float
    avg_delay: float
    dropped: int
    overhead: int
    generated: int
    delivered: int
    residual: int = 0
    drops: dict = field(default_factory=dict)

    @property
    def conserved(self):
        return self.generated == self.delivered + self.dropped + self.residual

    def row(self):
        return {
            'throughput': _cell(self.throughput),
            'avg_delay_s': _cell(self.avg_delay),
            'dropped': self.dropped,
            'overhead': self.overhead,
            'generated': self.generated,
            'delivered': self.delivered,
        }


def _cell(value):
    return '' if math.isnan(value) else f'{value:.6f}'


class MetricsAccumulator:
    """
    Streams over trace records keeping a map from uid to AGT send time.

    Args:
        warmup_s (float): Exclusion window at the start of the run.
    """

    def __init__(self, warmup_s=0.0):
        self.warmup = seconds(warmup_s)
        self.sent = {}
        self.excluded = set()
        self.open = set()
        self.delivered = 0
        self.delay_total = 0
        self.dropped = 0
        self.overhead = 0
        self.drops = Counter()

    def add(self, record):
        if not record.is_data:
            if record.layer == 'RTR' and record.event in 'sf' and record.time >= self.warmup:
                self.overhead += 1
            return
        uid = record.uid
        if uid in self.excluded:
            return
        if record.event == 's' and record.layer == 'AGT':
            if record.time < self.warmup:
                self.excluded.add(uid)
                return
            self.sent[uid] = record.time
            self.open.add(uid)
        elif record.event == 'r' and record.layer == 'AGT':
            if uid in self.sent:
                self.delivered += 1
                self.delay_total += record.time - self.sent[uid]
                self.open.discard(uid)
        elif record.event == 'd':
            self.dropped += 1
            self.drops[record.reason] += 1
            self.open.discard(uid)

    def extend(self, records):
        for record in records:
            self.add(record)
        return self

    @property
    def generated(self):
        return len(self.sent)

    def throughput(self):
        if not self.sent:
            raise UndefinedMetricError('throughput is undefined: no data packet was generated')
        return self.delivered / self.generated

    def average_delay(self):
        if not self.delivered:
            raise UndefinedMetricError('average delay is undefined: no data packet was delivered')
        return self.delay_total / self.delivered / TICKS_PER_SECOND

    def report(self):
        throughput = self.delivered / self.generated if self.generated else math.nan
        delay = self.delay_total / self.delivered / TICKS_PER_SECOND if self.delivered else math.nan
        return MetricsReport(throughput, delay, self.dropped, self.overhead, self.generated, self.delivered,
                             len(self.open), dict(sorted(self.drops.items())))


def throughput(trace, warmup_s=0.0):
    """Ratio of data packets received by destinations to those generated by sources.

    Raises:
        UndefinedMetricError: When no data packet was generated.
    """
    return MetricsAccumulator(warmup_s).extend(trace).throughput()


def average_delay(trace, warmup_s=0.0):
    """Mean source-to-destination delay in seconds of the delivered data packets.

    Raises:
        UndefinedMetricError: When no data packet was delivered.
    """
    return MetricsAccumulator(warmup_s).extend(trace).average_delay()


def dropped_packets(trace, warmup_s=0.0):
    return MetricsAccumulator(warmup_s).extend(trace).dropped


def routing_overhead(trace, warmup_s=0.0):
    return MetricsAccumulator(warmup_s).extend(trace).overhead


def compute_report(trace, warmup_s=0.0):
    """Evaluate every metric in one pass; undefined ratios come back as NaN."""
    return MetricsAccumulator(warmup_s).extend(trace).report()


class PathTracker:
    """
    Follows the hop sequence of every data packet.

    The hop sequence of a packet is the AGT sender, every RTR forwarder and
    the AGT receiver, in trace order. `looped` collects the uids of
    delivered packets whose sequence visits a node twice.
    """

    def __init__(self):
        self.looped = []
        self._paths = {}

    def add(self, record):
        if not record.is_data:
            return
        if record.event == 's' and record.layer == 'AGT':
            self._paths[record.uid] = [record.node]
        elif record.event == 'f' and record.uid in self._paths:
            self._paths[record.uid].append(record.node)
        elif record.event == 'r' and record.layer == 'AGT' and record.uid in self._paths:
            path = self._paths.pop(record.uid) + [record.node]
            if len(set(path)) != len(path):
                self.looped.append(record.uid)
        elif record.event == 'd':
            self._paths.pop(record.uid, None)

    def extend(self, records):
        for record in records:
            self.add(record)
        return self


def path_revisits(trace):
    """Return the uids of delivered data packets whose hop sequence visits a node twice."""
    return PathTracker().extend(trace).looped


class ForwardingMonitor:
    """
    Watches data packets as they leave each node.

    For agents that expose route freshness (AODV), the key
    `(dest_seq, -hops)` seen at successive transmitters of one packet must
    never decrease.
    """

    def __init__(self):
        self.checks = 0
        self.violations = []
        self._last = {}

    def observe(self, agent, packet):
        key = agent.freshness(packet.dst)
        if key is None:
            return
        if packet.src == agent.node:
            self._last.pop(packet.uid, None)
        last = self._last.get(packet.uid)
        self.checks += 1
        if last is not None and key < last:
            self.violations.append((packet.uid, agent.node, last, key))
        self._last[packet.uid] = key

    def forget(self, uid):
        self._last.pop(uid, None)
