"""
The "engine" module provides the deterministic discrete-event core of the simulator.

Time is an integer number of nanoseconds since the start of a run. Events are
dispatched in strict (time, insertion sequence) order, so two runs that
schedule the same events in the same order behave identically on every
platform. Random draws come from named `RandomStream`s, one per concern, so
that consuming more numbers for one concern never shifts another.

Classes:
    - EventKind: What an event stands for.
    - Event: A timestamped unit of simulation work.
    - RunSummary: Result of `Engine.run_until`.
    - Engine: Virtual clock and event queue.
    - RandomStream: Seeded pseudo-random stream with a purpose label.

Functions:
    - seconds: Convert seconds to simulation ticks.
    - format_time: Render ticks as seconds with nine decimals.
    - draw_uniform: Uniform draw from a stream.
"""

import heapq
import logging
import zlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from app.src.errors import SchedulingError

logger = logging.getLogger(__name__)

TICKS_PER_SECOND = 1_000_000_000
SYSTEM = -1


def seconds(value):
    """Convert a duration in seconds to integer ticks (nanoseconds)."""
    return int(round(value * TICKS_PER_SECOND))


def format_time(ticks):
    """Render a tick count as seconds with exactly nine decimals."""
    whole, fraction = divmod(ticks, TICKS_PER_SECOND)
    return f'{whole}.{fraction:09d}'


class EventKind(Enum):
    DELIVERY = 'delivery'
    TIMER = 'timer'
    MOVEMENT = 'movement'
    TRAFFIC = 'traffic'
    MAC = 'mac'


@dataclass(order=True)
class Event:
    """
    A timestamped unit of work.

    Attributes:
        at (int): Dispatch time in ticks.
        seq (int): Insertion counter, breaks ties between equal times.
        target (int): Node id, or `SYSTEM` for run-wide components.
        kind (EventKind): What the event stands for.
        action (callable): Called with `args` on dispatch.
        cancelled (bool): Cancelled events stay queued but are skipped.
    """

    at: int
    seq: int
    target: int = field(compare=False, default=SYSTEM)
    kind: EventKind = field(compare=False, default=EventKind.TIMER)
    action: object = field(compare=False, default=None, repr=False)
    args: tuple = field(compare=False, default=(), repr=False)
    cancelled: bool = field(compare=False, default=False)

    def cancel(self):
        self.cancelled = True


@dataclass(frozen=True)
class RunSummary:
    dispatched: int
    clock: int


class Engine:
    """
    Virtual clock and ordered event queue of one simulation run.

    An engine instance belongs to a single run and a single thread for its
    whole lifetime.
    """

    def __init__(self):
        self.clock = 0
        self._queue = []
        self._seq = 0
        self.dispatched = 0

    def __len__(self):
        return len(self._queue)

    @property
    def now(self):
        return self.clock

    def next_seq(self):
        seq = self._seq
        self._seq += 1
        return seq

    def schedule(self, event):
        """Enqueue an event.

        Args:
            event (Event): Event with `at` not earlier than the clock.

        Raises:
            SchedulingError: If the event lies in the past.
        """
        if event.at < self.clock:
            raise SchedulingError(f'event at {format_time(event.at)} is before the clock {format_time(self.clock)}')
        heapq.heappush(self._queue, event)
        return event

    def call_at(self, at, action, *args, target=SYSTEM, kind=EventKind.TIMER):
        """Schedule `action(*args)` at absolute time `at`."""
        return self.schedule(Event(at, self.next_seq(), target, kind, action, args))

    def call_in(self, delay, action, *args, target=SYSTEM, kind=EventKind.TIMER):
        """Schedule `action(*args)` after `delay` ticks."""
        return self.call_at(self.clock + delay, action, *args, target=target, kind=kind)

    def run_until(self, end):
        """Dispatch every event with `at <= end` and leave the clock at `end`.

        Events after `end` stay queued.

        Returns:
            RunSummary: Number of events dispatched by this call and the final clock.
        """
        dispatched = 0
        queue = self._queue
        while queue and queue[0].at <= end:
            event = heapq.heappop(queue)
            if event.cancelled:
                continue
            self.clock = event.at
            if event.action is not None:
                event.action(*event.args)
            dispatched += 1
        self.clock = max(self.clock, end)
        self.dispatched += dispatched
        logger.debug('run_until %s: %d events, %d pending', format_time(end), dispatched, len(queue))
        return RunSummary(dispatched, self.clock)


class RandomStream:
    """
    Deterministic pseudo-random stream.

    The generator is numpy's PCG64 seeded with `SeedSequence([seed, crc32(label)])`.
    The same (seed, label) pair yields the same draw sequence on every
    platform; different labels give independent sequences.

    Args:
        seed (int): 64-bit scenario seed.
        label (str): Purpose tag, one of `mobility`, `traffic`, `mac-jitter`, `protocol`.
    """

    LABELS = ('mobility', 'traffic', 'mac-jitter', 'protocol')

    def __init__(self, seed, label):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.label = label
        entropy = [self.seed, zlib.crc32(label.encode('utf-8'))]
        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def __repr__(self):
        return f'RandomStream(seed={self.seed}, label={self.label!r})'

    def uniform(self, lo, hi):
        return draw_uniform(self, lo, hi)

    def integers(self, lo, hi):
        """Uniform integer in [lo, hi)."""
        if lo >= hi:
            raise SchedulingError(f'empty integer range [{lo}, {hi})')
        return int(self.generator.integers(lo, hi))


def draw_uniform(stream, lo, hi):
    """Draw a real number uniformly from [lo, hi).

    Raises:
        SchedulingError: If `lo >= hi`.
    """
    if not lo < hi:
        raise SchedulingError(f'empty range [{lo}, {hi})')
    value = lo + (hi - lo) * float(stream.generator.random())
    if value >= hi:
        value = float(np.nextafter(hi, lo))
    return max(value, lo)
