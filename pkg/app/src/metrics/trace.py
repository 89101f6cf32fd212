"""
This module defines the trace record, its text form and the run tracer.

A trace line has ten space-separated fields:

    <event> <time> <node> <layer> <uid> <ptype> <size> <flow src> <flow dst> <reason>

for example `s 10.250000000 3 AGT 42 cbr 512 3 7 -`. Time always carries
nine decimals and `reason` is `-` for every event except drops.

Classes:
    - TraceRecord: One trace line.
    - Tracer: Writes the trace of a run and tracks the fate of data packets.

Functions:
    - parse: Read a trace line.
    - read_trace: Iterate over the records of a trace file.
"""

import hashlib
import re
from dataclasses import dataclass

from app.src.engine.engine import TICKS_PER_SECOND, format_time
from app.src.errors import ConservationError, HarnessError, TraceParseError

EVENTS = frozenset('srdf')
LAYERS = frozenset(('AGT', 'RTR', 'MAC'))
REASONS = frozenset(('IFQ', 'IFQ-SB', 'NRTE', 'TTL', 'CBK', 'COL', 'TOUT'))
DATA_PTYPE = 'cbr'

_TIME = re.compile(r'(0|[1-9]\d*)\.(\d{9})')
_COUNT = re.compile(r'0|[1-9]\d*')
_NODE = re.compile(r'0|-?[1-9]\d*')
_PTYPE = re.compile(r'[a-z]+(:[a-z_]+)?')
FIELDS = ('event', 'time', 'node', 'layer', 'uid', 'ptype', 'size', 'src', 'dst', 'reason')


@dataclass(frozen=True)
class TraceRecord:
    """
    One trace line.

    Attributes:
        event (str): `s`, `r`, `d` or `f`.
        time (int): Event time in ticks.
        node (int): Node where the event happened.
        layer (str): `AGT`, `RTR` or `MAC`.
        uid (int): Packet uid.
        ptype (str): `cbr` or a routing packet tag.
        size (int): Payload bytes.
        src, dst (int): Flow endpoints, dst is -1 for broadcast routing packets.
        reason (str): Drop reason, `-` for other events.
    """

    event: str
    time: int
    node: int
    layer: str
    uid: int
    ptype: str
    size: int
    src: int
    dst: int
    reason: str = '-'

    @property
    def seconds(self):
        return self.time / TICKS_PER_SECOND

    @property
    def is_data(self):
        return self.ptype == DATA_PTYPE

    def format(self):
        return (f'{self.event} {format_time(self.time)} {self.node} {self.layer} {self.uid} {self.ptype} '
                f'{self.size} {self.src} {self.dst} {self.reason}')

    def __str__(self):
        return self.format()


def _field(pattern, value, name, line):
    if not pattern.fullmatch(value):
        raise TraceParseError(name, line)
    return int(value)


def parse(line):
    """Parse one trace line.

    Raises:
        TraceParseError: Naming the first malformed field.
    """
    text = line.rstrip('\n')
    words = text.split(' ')
    if len(words) != len(FIELDS):
        raise TraceParseError('line', text, f'expected {len(FIELDS)} fields, got {len(words)}')
    event, time, node, layer, uid, ptype, size, src, dst, reason = words
    if event not in EVENTS:
        raise TraceParseError('event', text)
    match = _TIME.fullmatch(time)
    if not match:
        raise TraceParseError('time', text)
    ticks = int(match.group(1)) * TICKS_PER_SECOND + int(match.group(2))
    if layer not in LAYERS:
        raise TraceParseError('layer', text)
    if not _PTYPE.fullmatch(ptype):
        raise TraceParseError('ptype', text)
    if event == 'd' and reason not in REASONS:
        raise TraceParseError('reason', text)
    if event != 'd' and reason != '-':
        raise TraceParseError('reason', text)
    return TraceRecord(event, ticks, _field(_COUNT, node, 'node', text), layer, _field(_COUNT, uid, 'uid', text),
                       ptype, _field(_COUNT, size, 'size', text), _field(_NODE, src, 'src', text),
                       _field(_NODE, dst, 'dst', text), reason)


def read_trace(path):
    """Yield the records of a trace file."""
    try:
        with open(path, encoding='utf-8') as trace_file:
            for line in trace_file:
                if line.strip():
                    yield parse(line)
    except OSError as error:
        raise HarnessError(f'cannot read trace {path}: {error}') from error


class Tracer:
    """
    Trace writer of one run.

    Every record is formatted, hashed and written to `sink`, then handed to
    the listeners. The tracer also follows each data uid from its AGT send
    to its single terminal record (AGT receive or drop).

    Args:
        sink: Object with a `write` method, or None to discard text.
        keep (bool): Keep the records in memory (`records`).
    """

    def __init__(self, sink=None, keep=False):
        self.sink = sink
        self.keep = keep
        self.records = []
        self.listeners = []
        self.count = 0
        self._digest = hashlib.sha256()
        self._live = set()
        self._closed = set()

    @property
    def digest(self):
        return self._digest.hexdigest()

    @property
    def residual(self):
        return len(self._live)

    def live(self):
        return sorted(self._live)

    def record(self, record):
        if record.is_data:
            self._account(record)
        line = record.format() + '\n'
        self._digest.update(line.encode('utf-8'))
        if self.sink is not None:
            self.sink.write(line)
        if self.keep:
            self.records.append(record)
        for listener in self.listeners:
            listener.add(record)
        self.count += 1

    def _account(self, record):
        uid = record.uid
        if record.event == 's' and record.layer == 'AGT':
            self._live.add(uid)
        elif record.event == 'd' or (record.event == 'r' and record.layer == 'AGT'):
            if uid in self._closed:
                raise ConservationError(f'data packet {uid} reached a second terminal outcome: {record}')
            self._live.discard(uid)
            self._closed.add(uid)
