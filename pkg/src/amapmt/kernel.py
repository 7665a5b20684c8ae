"""Discrete-event engine: integer microsecond clock, (due, seq) event queue,
seeded per-consumer random streams."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable, TextIO

import numpy as np

TICKS_PER_SECOND = 1_000_000
TICKS_PER_MS = 1_000

# Event kinds.
ARRIVAL = "arrival"
RA_SLOT = "ra-slot"
FRAME_BOUNDARY = "frame-boundary"
SLOT_START = "slot-start"
PACKET_DELIVERED = "packet-delivered"
TTL_SWEEP = "ttl-sweep"

EVENT_KINDS = (ARRIVAL, RA_SLOT, FRAME_BOUNDARY, SLOT_START, PACKET_DELIVERED, TTL_SWEEP)


def seconds(s: float) -> int:
    return int(round(s * TICKS_PER_SECOND))


def ms(value: float) -> int:
    return int(round(value * TICKS_PER_MS))


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(order=True, frozen=True)
class Event:
    due: int
    seq: int
    target: str = field(compare=False)
    kind: str = field(compare=False)
    payload: Any = field(default=None, compare=False)


Handler = Callable[[Event], None]


class Simulator:
    """Single-threaded event loop.

    Handlers are registered per event kind. Dispatch order is strictly
    lexicographic in ``(due, seq)``; ``seq`` is issued at schedule time, so
    events sharing a due time run in the order they were scheduled.
    """

    def __init__(self, trace: TextIO | None = None):
        self._now = 0
        self._seq = 0
        self._queue: list[tuple[int, int, str, str, Any]] = []
        self._handlers: dict[str, Handler] = {}
        self._trace = trace
        self.dispatched = 0

    def now(self) -> int:
        return self._now

    def on(self, kind: str, handler: Handler) -> None:
        self._handlers[kind] = handler

    def schedule(self, due: int, target: str, kind: str, payload: Any = None) -> int:
        if due < self._now:
            raise SchedulingError(
                f"event {kind!r} for {target!r} due at {due} but clock is at {self._now}"
            )
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (due, seq, target, kind, payload))
        return seq

    def pending(self) -> int:
        return len(self._queue)

    def run_until(self, t: int) -> int:
        """Dispatch every event with ``due <= t`` and leave the clock at ``t``."""
        if t < self._now:
            raise SchedulingError(f"run_until({t}) is before the clock ({self._now})")
        queue = self._queue
        handlers = self._handlers
        trace = self._trace
        count = 0
        while queue and queue[0][0] <= t:
            due, seq, target, kind, payload = heapq.heappop(queue)
            self._now = due
            if trace is not None:
                trace.write(f"{due},{seq},{target},{kind}\n")
            handler = handlers.get(kind)
            if handler is not None:
                handler(Event(due, seq, target, kind, payload))
            count += 1
        self._now = t
        self.dispatched += count
        return count


class RngStream:
    """Independent pseudo-random stream keyed by ``(seed, stream_id)``."""

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed: int, stream_id: int):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        seq = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream_id])
        self._gen = np.random.Generator(np.random.PCG64(seq))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def random(self) -> float:
        return float(self._gen.random())

    def exponential(self, mean: float) -> float:
        return float(self._gen.exponential(mean))

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in ``[low, high]`` inclusive."""
        return int(self._gen.integers(low, high, endpoint=True))

    def binomial(self, n: int, p: float) -> int:
        return int(self._gen.binomial(n, p))


# Stream id bases; one stream per consumer so that adding a consumer leaves the
# others' draws untouched.
TRAFFIC_STREAM = 1_000_000
CHANNEL_STREAM = 2_000_000
BACKOFF_STREAM = 3_000_000
