"""Event-sourced loss/delay/throughput accounting."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .kernel import TICKS_PER_SECOND
from .traffic import MEDIA_ORDER, DataPacket, MediaClass

DELIVERED = "delivered"
OVERFLOW = "overflow"
TTL = "ttl"
CSI = "csi"
CORRUPTED = "corrupted"
DROP_CAUSES = (OVERFLOW, TTL, CSI, CORRUPTED)
TERMINAL = (DELIVERED,) + DROP_CAUSES


class AccountingError(RuntimeError):
    """A packet was given two terminal outcomes, or an unknown one."""


@dataclass
class ClassCounters:
    offered_pkts: int = 0
    offered_bytes: int = 0
    delivered_pkts: int = 0
    delivered_bytes: int = 0
    drop_overflow: int = 0
    drop_ttl: int = 0
    drop_csi: int = 0
    drop_corrupt: int = 0
    wasted_slots: int = 0
    delay_sum: int = 0
    late: int = 0
    txn_offered: int = 0
    txn_lost: int = 0

    @property
    def dropped(self) -> int:
        return self.drop_overflow + self.drop_ttl + self.drop_csi + self.drop_corrupt

    def add(self, other: "ClassCounters") -> None:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))


_DROP_FIELD = {
    OVERFLOW: "drop_overflow",
    TTL: "drop_ttl",
    CSI: "drop_csi",
    CORRUPTED: "drop_corrupt",
}


class Recorder:
    """Counts every offered packet once and every terminal outcome once.

    Terminal outcomes are keyed by packet uid; recording a second outcome for
    the same packet raises ``AccountingError``.
    """

    def __init__(self, log: list | None = None):
        self.counters: dict[MediaClass, ClassCounters] = {m: ClassCounters() for m in MEDIA_ORDER}
        self._settled: set[tuple[int, int]] = set()
        self._lost_txns: set[int] = set()
        self.log = log

    def offer(self, packets: list[DataPacket], now: int) -> None:
        c = self.counters[packets[0].media]
        c.txn_offered += 1
        c.offered_pkts += len(packets)
        c.offered_bytes += sum(p.size for p in packets)
        if self.log is not None:
            p = packets[0]
            self.log.append(("offered", p.txn, len(packets), p.media.value, now))

    def record(self, kind: str, packet: DataPacket, now: int) -> None:
        uid = (packet.txn, packet.index)
        if uid in self._settled:
            raise AccountingError(f"packet {uid} already settled; second outcome {kind!r}")
        c = self.counters[packet.media]
        if kind == DELIVERED:
            c.delivered_pkts += 1
            c.delivered_bytes += packet.size
            c.delay_sum += now - packet.created
            if now >= packet.deadline:
                c.late += 1
        elif kind in _DROP_FIELD:
            name = _DROP_FIELD[kind]
            setattr(c, name, getattr(c, name) + 1)
            if packet.txn not in self._lost_txns:
                self._lost_txns.add(packet.txn)
                c.txn_lost += 1
        else:
            raise AccountingError(f"unknown outcome {kind!r}")
        self._settled.add(uid)
        if self.log is not None:
            self.log.append((kind, packet.txn, packet.index, packet.media.value, now))

    def wasted(self, media: MediaClass) -> None:
        self.counters[media].wasted_slots += 1

    def settled(self, media: MediaClass) -> int:
        c = self.counters[media]
        return c.delivered_pkts + c.dropped


@dataclass(frozen=True)
class ClassReport:
    media: str
    offered_pkts: int
    offered_bytes: int
    delivered_pkts: int
    delivered_bytes: int
    drop_overflow: int
    drop_ttl: int
    drop_csi: int
    drop_corrupt: int
    in_flight: int
    wasted_slots: int
    late: int
    txn_offered: int
    txn_lost: int
    delay_sum_us: int
    plr: float | None
    mptd_us: float | None
    throughput_bps: float
    rho: float

    @property
    def dropped(self) -> int:
        return self.drop_overflow + self.drop_ttl + self.drop_csi + self.drop_corrupt

    @property
    def mptd_s(self) -> float | None:
        return None if self.mptd_us is None else self.mptd_us / TICKS_PER_SECOND


@dataclass(frozen=True)
class MetricsReport:
    horizon: int
    link_rate: float
    classes: dict[str, ClassReport] = field(default_factory=dict)
    aggregate: ClassReport | None = None

    def rows(self) -> list[ClassReport]:
        return [self.classes[m.value] for m in MEDIA_ORDER] + [self.aggregate]

    def __getitem__(self, media: str) -> ClassReport:
        if media == "all":
            return self.aggregate
        return self.classes[media]


def _class_report(name: str, c: ClassCounters, in_flight: int, horizon: int,
                  link_rate: float) -> ClassReport:
    settled = c.offered_pkts - in_flight
    secs = horizon / TICKS_PER_SECOND
    return ClassReport(
        media=name,
        offered_pkts=c.offered_pkts,
        offered_bytes=c.offered_bytes,
        delivered_pkts=c.delivered_pkts,
        delivered_bytes=c.delivered_bytes,
        drop_overflow=c.drop_overflow,
        drop_ttl=c.drop_ttl,
        drop_csi=c.drop_csi,
        drop_corrupt=c.drop_corrupt,
        in_flight=in_flight,
        wasted_slots=c.wasted_slots,
        late=c.late,
        txn_offered=c.txn_offered,
        txn_lost=c.txn_lost,
        delay_sum_us=c.delay_sum,
        plr=c.dropped / settled if settled > 0 else None,
        mptd_us=c.delay_sum / c.delivered_pkts if c.delivered_pkts else None,
        throughput_bps=c.delivered_bytes * 8 / secs if secs else 0.0,
        rho=c.offered_bytes * 8 / secs / link_rate if secs else 0.0,
    )


def finalize(counters: dict[MediaClass, ClassCounters], in_flight: dict[MediaClass, int],
             horizon: int, link_rate: float) -> MetricsReport:
    """Turn run counters into PLR / MPTD / throughput / rho per class and
    aggregate. Packets still buffered or in the air at the horizon are left
    out of PLR and MPTD."""
    total = ClassCounters()
    classes = {}
    for m in MEDIA_ORDER:
        c = counters[m]
        total.add(c)
        classes[m.value] = _class_report(m.value, c, in_flight.get(m, 0), horizon, link_rate)
    agg = _class_report("all", total, sum(in_flight.values()), horizon, link_rate)
    return MetricsReport(horizon, link_rate, classes, agg)


def pool(reports: list[MetricsReport]) -> MetricsReport:
    """Merge reports from independent runs: counts summed, means pooled."""
    if not reports:
        raise ValueError("nothing to pool")
    horizon = sum(r.horizon for r in reports)
    link_rate = reports[0].link_rate
    counters = {m: ClassCounters() for m in MEDIA_ORDER}
    in_flight = {m: 0 for m in MEDIA_ORDER}
    for r in reports:
        for m in MEDIA_ORDER:
            cr = r.classes[m.value]
            counters[m].add(ClassCounters(
                offered_pkts=cr.offered_pkts, offered_bytes=cr.offered_bytes,
                delivered_pkts=cr.delivered_pkts, delivered_bytes=cr.delivered_bytes,
                drop_overflow=cr.drop_overflow, drop_ttl=cr.drop_ttl, drop_csi=cr.drop_csi,
                drop_corrupt=cr.drop_corrupt, wasted_slots=cr.wasted_slots,
                delay_sum=cr.delay_sum_us, late=cr.late, txn_offered=cr.txn_offered,
                txn_lost=cr.txn_lost,
            ))
            in_flight[m] += cr.in_flight
    return finalize(counters, in_flight, horizon, link_rate)
