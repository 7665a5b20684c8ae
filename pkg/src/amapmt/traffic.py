"""Traffic classes, source profiles, transaction generation and packetization."""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field

from .kernel import RngStream


class MediaClass(enum.Enum):
    CBR = "voice"
    RT_VBR = "video"
    NRT_VBR = "ftp"
    ABR = "data"
    UBR = "email"

    @property
    def tag(self) -> str:
        return self.name.replace("_", "-")

    @property
    def application(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "MediaClass":
        key = text.strip().lower()
        for media in cls:
            if key in (media.value, media.tag.lower(), media.name.lower()):
                return media
        raise ValueError(f"unknown media class {text!r}")


MEDIA_ORDER = tuple(MediaClass)


@functools.total_ordering
@dataclass(frozen=True)
class Priority:
    """Source priority. ``level=None`` is the low-latency level, which ranks
    above every numeric level; numeric levels compare numerically."""

    level: int | None = None

    def __post_init__(self):
        if self.level is not None and (not isinstance(self.level, int) or self.level <= 0):
            raise ValueError(f"priority level must be a positive integer, got {self.level!r}")

    @property
    def low_latency(self) -> bool:
        return self.level is None

    def rank(self) -> tuple[int, int]:
        return (1, 0) if self.level is None else (0, self.level)

    def __lt__(self, other: "Priority") -> bool:
        if not isinstance(other, Priority):
            return NotImplemented
        return self.rank() < other.rank()

    def __str__(self) -> str:
        return "low-latency" if self.level is None else str(self.level)

    @classmethod
    def parse(cls, text: str | int) -> "Priority":
        if isinstance(text, int):
            return cls(text)
        key = text.strip().lower().replace("_", "-").replace(" ", "-")
        if key in ("low-latency", "ll", "lowlatency"):
            return cls(None)
        return cls(int(key))


LOW_LATENCY = Priority(None)


class Distribution(enum.Enum):
    CONSTANT = "constant"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class SourceProfile:
    station: int
    media: MediaClass
    distribution: Distribution
    mean_interarrival: int  # ticks
    mean_size: int  # bytes
    ttl: int  # ticks
    priority: Priority
    weight: int = 1

    def __post_init__(self):
        if self.mean_interarrival <= 0:
            raise ValueError("mean inter-arrival must be positive")
        if self.mean_size < 1:
            raise ValueError("mean transaction size must be at least 1 byte")
        if self.ttl <= 0:
            raise ValueError("ttl must be positive")
        if self.weight <= 0:
            raise ValueError("wrr weight must be a positive integer")


@dataclass(frozen=True)
class Transaction:
    id: int
    station: int
    media: MediaClass
    size: int
    created: int
    deadline: int

    def __post_init__(self):
        if self.deadline <= self.created:
            raise ValueError("transaction deadline must be after creation")


@dataclass(slots=True)
class DataPacket:
    txn: int
    index: int
    station: int
    media: MediaClass
    size: int
    created: int
    deadline: int
    last: bool = False
    # Set at transmit time.
    pgbk: bool = False
    backlog: int = 0
    head_deadline: int | None = None
    sent_at: int | None = field(default=None)

    @property
    def uid(self) -> tuple[int, int]:
        return (self.txn, self.index)


def next_arrival(profile: SourceProfile, rng: RngStream) -> int:
    """Ticks until the source's next transaction."""
    if profile.distribution is Distribution.CONSTANT:
        return profile.mean_interarrival
    return max(1, int(round(rng.exponential(profile.mean_interarrival))))


def draw_size(profile: SourceProfile, rng: RngStream) -> int:
    if profile.distribution is Distribution.CONSTANT:
        return profile.mean_size
    return max(1, int(round(rng.exponential(profile.mean_size))))


def make_transaction(profile: SourceProfile, now: int, rng: RngStream, txn_id: int) -> Transaction:
    return Transaction(
        id=txn_id,
        station=profile.station,
        media=profile.media,
        size=draw_size(profile, rng),
        created=now,
        deadline=now + profile.ttl,
    )


def packet_count(size: int, cell_payload: int) -> int:
    return -(-size // cell_payload)


def packetize(txn: Transaction, cell_payload: int) -> list[DataPacket]:
    if cell_payload < 1:
        raise ValueError("cell payload must be at least 1 byte")
    n = packet_count(txn.size, cell_payload)
    packets = []
    for i in range(n):
        size = cell_payload if i < n - 1 else txn.size - cell_payload * (n - 1)
        packets.append(
            DataPacket(
                txn=txn.id,
                index=i,
                station=txn.station,
                media=txn.media,
                size=size,
                created=txn.created,
                deadline=txn.deadline,
                last=i == n - 1,
            )
        )
    return packets


def interarrival_for_rate(mean_size: int, bytes_per_second: float) -> int:
    """Mean inter-arrival (ticks) giving ``bytes_per_second`` at ``mean_size``."""
    return max(1, int(round(mean_size / bytes_per_second * 1_000_000)))

