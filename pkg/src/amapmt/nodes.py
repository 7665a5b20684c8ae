"""Source stations, mobiles and the base station request table."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .channel import ChannelState
from .traffic import DataPacket, MediaClass, Priority, Transaction

DEFAULT_BUFFER_BYTES = 512 * 1024

IDLE = "idle"
CONTENDING = "contending"
RESIDENT = "table-resident"


@dataclass(frozen=True)
class RequestAccessPacket:
    source: int
    destination: str
    media: MediaClass
    bit_rate: float
    deadline: int
    csi: ChannelState
    qos: str
    priority: Priority
    weight: int
    pending: int

    def __post_init__(self):
        if self.pending < 1:
            raise ValueError("a request must carry at least one pending packet")


@dataclass(slots=True)
class RequestTableEntry:
    station: int
    media: MediaClass
    priority: Priority
    deadline: int
    ber: float
    pending: int
    ra_arrival: int
    eligible_from: int
    weight: int = 1
    credit: int = 0

    @property
    def key(self) -> tuple[int, MediaClass]:
        return (self.station, self.media)


@dataclass(frozen=True)
class GrantDecision:
    frame_start: int
    assignments: tuple[tuple[int, int, MediaClass], ...]
    denied: tuple[tuple[int, MediaClass], ...] = ()

    def slots_for(self, station: int, media: MediaClass) -> list[int]:
        return [slot for slot, s, m in self.assignments if s == station and m == media]


def expire_ttl(queue: deque, now: int) -> list[DataPacket]:
    """Remove and return every packet whose deadline is ``<= now``."""
    if not queue:
        return []
    expired = [p for p in queue if p.deadline <= now]
    if expired:
        kept = [p for p in queue if p.deadline > now]
        queue.clear()
        queue.extend(kept)
    return expired


@dataclass
class _RaState:
    state: str = IDLE
    attempt: int = 0


class SourceStation:
    """A source station hosting one FIFO per media class behind a shared
    byte-bounded buffer."""

    def __init__(self, station_id: int, mobile: int, capacity: int = DEFAULT_BUFFER_BYTES,
                 ber: float = 1e-6):
        self.id = station_id
        self.mobile = mobile
        self.capacity = capacity
        self.channel = ChannelState(ber)
        self.buffered = 0
        self.queues: dict[MediaClass, deque] = {m: deque() for m in MediaClass}
        self.ra: dict[MediaClass, _RaState] = {m: _RaState() for m in MediaClass}
        self.denied: dict[MediaClass, bool] = {m: False for m in MediaClass}

    def enqueue(self, txn: Transaction, packets: list[DataPacket]) -> bool:
        """Accept the whole transaction or drop it whole on overflow."""
        if self.buffered + txn.size > self.capacity:
            return False
        self.queues[txn.media].extend(packets)
        self.buffered += txn.size
        return True

    def expire(self, media: MediaClass, now: int) -> list[DataPacket]:
        expired = expire_ttl(self.queues[media], now)
        for p in expired:
            self.buffered -= p.size
        return expired

    def on_grant(self, media: MediaClass, now: int) -> DataPacket | None:
        """Hand the head-of-line packet to the slot, stamping the piggyback
        fields. Returns None when the queue is empty (wasted slot).

        Callers expire stale packets first.
        """
        queue = self.queues[media]
        if not queue:
            return None
        packet = queue.popleft()
        self.buffered -= packet.size
        packet.backlog = len(queue)
        packet.pgbk = packet.backlog > 0
        packet.head_deadline = queue[0].deadline if queue else None
        packet.sent_at = now
        if not packet.pgbk:
            # Leaving the bit clear releases the reservation.
            self.ra[media].state = IDLE
        return packet

    def request(self, media: MediaClass, profile_rate: float, priority: Priority,
                weight: int) -> RequestAccessPacket:
        queue = self.queues[media]
        return RequestAccessPacket(
            source=self.id,
            destination="bs",
            media=media,
            bit_rate=profile_rate,
            deadline=min(p.deadline for p in queue),
            csi=self.channel,
            qos=media.tag,
            priority=priority,
            weight=weight,
            pending=len(queue),
        )

    def buffered_packets(self) -> dict[MediaClass, int]:
        return {m: len(q) for m, q in self.queues.items()}


class Mobile:
    """Relays RA and data packets from its stations to the base station.

    Relay buffers are unbounded and FIFO; with a fixed relay delay the
    delivery order matches the order of hand-off.
    """

    def __init__(self, mobile_id: int, stations: Iterable[int], delay: int = 0):
        self.id = mobile_id
        self.stations = tuple(stations)
        self.delay = delay
        self.ra_forwarded = 0
        self.data_forwarded = 0

    def forward_ra(self, now: int) -> int:
        self.ra_forwarded += 1
        return now + self.delay

    def forward_data(self, now: int) -> int:
        self.data_forwarded += 1
        return now + self.delay


@dataclass
class BaseStation:
    frame_duration: int
    table: dict[tuple[int, MediaClass], RequestTableEntry] = field(default_factory=dict)
    acks: int = 0
    purged: int = 0
    purged_pending: int = 0
    stray_data: int = 0

    def on_ra(self, ra: RequestAccessPacket, now: int) -> RequestTableEntry:
        """Acknowledge and file a request; it becomes grantable at the next
        frame boundary."""
        self.acks += 1
        key = (ra.source, ra.media)
        entry = self.table.get(key)
        if entry is None:
            entry = RequestTableEntry(
                station=ra.source,
                media=ra.media,
                priority=ra.priority,
                deadline=ra.deadline,
                ber=ra.csi.ber,
                pending=ra.pending,
                ra_arrival=now,
                eligible_from=(now // self.frame_duration + 1) * self.frame_duration,
                weight=ra.weight,
            )
            self.table[key] = entry
        else:
            entry.deadline = min(entry.deadline, ra.deadline)
            entry.pending += ra.pending
            entry.ber = ra.csi.ber
        return entry

    def on_data(self, packet: DataPacket) -> bool:
        """Apply an intact packet's piggyback. Returns True when the
        reservation was released."""
        entry = self.table.get((packet.station, packet.media))
        if entry is None:
            self.stray_data += 1
            return False
        entry.pending = packet.backlog
        if packet.pgbk:
            entry.deadline = packet.head_deadline
            return False
        del self.table[(packet.station, packet.media)]
        return True

    def ttl_sweep(self, now: int) -> list[RequestTableEntry]:
        expired = [e for e in self.table.values() if e.deadline <= now]
        for e in expired:
            del self.table[e.key]
            self.purged += 1
            self.purged_pending += e.pending
        return expired
