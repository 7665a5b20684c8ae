"""One simulation run: base station, mobiles and source stations on the
event kernel."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TextIO

from . import kernel as k
from .channel import FrameLayout, backoff_delay, ra_minislot_resolve, transmit
from .config import Scenario
from .kernel import RngStream, Simulator
from .metrics import CORRUPTED, CSI, DELIVERED, OVERFLOW, TTL, MetricsReport, Recorder, finalize
from .nodes import (
    CONTENDING,
    IDLE,
    RESIDENT,
    BaseStation,
    GrantDecision,
    Mobile,
    RequestAccessPacket,
    SourceStation,
)
from .scheduler import Mode, PolicyConfig, ServeStats, serve_queue
from .traffic import (
    MEDIA_ORDER,
    MediaClass,
    SourceProfile,
    make_transaction,
    next_arrival,
    packetize,
)

log = logging.getLogger(__name__)


class ConservationError(AssertionError):
    """Offered packets do not match delivered + dropped + in flight."""


@dataclass
class Audit:
    """Invariant violations observed during a run (all should stay zero)."""

    frames_checked: int = 0
    gate_violations: int = 0
    edf_violations: int = 0
    order_violations: int = 0
    pgbk_violations: int = 0
    buffer_violations: int = 0
    slot_overlaps: int = 0
    decisions: list[GrantDecision] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not (self.gate_violations or self.edf_violations or self.order_violations
                    or self.pgbk_violations or self.buffer_violations or self.slot_overlaps)


class Network:
    def __init__(
        self,
        scenario: Scenario,
        policy: PolicyConfig | None = None,
        seed: int = 1,
        trace: TextIO | None = None,
        check_conservation: bool = False,
        audit: bool = False,
        keep_decisions: bool = False,
        outcome_log: list | None = None,
    ):
        self.scenario = scenario
        self.policy = policy or scenario.policy
        self.seed = seed
        self.layout: FrameLayout = scenario.layout()
        self.sim = Simulator(trace)
        self.recorder = Recorder(outcome_log)
        self.check_conservation = check_conservation
        self.conservation_checks = 0
        self.audit = Audit() if audit else None
        self.keep_decisions = keep_decisions
        self.serve_stats = ServeStats()
        self.ttl_aware = self.policy.mode.ttl_aware

        spm = scenario.stations_per_mobile
        self.stations = [
            SourceStation(s, s // spm, scenario.buffer_bytes, scenario.station_ber(s))
            for s in range(scenario.station_count)
        ]
        self.mobiles = [
            Mobile(m, range(m * spm, (m + 1) * spm), scenario.mobile_delay_us)
            for m in range(scenario.mobiles)
        ]
        self.bs = BaseStation(self.layout.frame_duration)

        self.profiles: dict[tuple[int, MediaClass], SourceProfile] = {}
        self.traffic_rng: dict[tuple[int, MediaClass], RngStream] = {}
        self.txn_counter: dict[tuple[int, MediaClass], int] = {}
        self.source_index: dict[tuple[int, MediaClass], int] = {}
        for i, profile in enumerate(scenario.profiles()):
            key = (profile.station, profile.media)
            self.profiles[key] = profile
            self.source_index[key] = i
            self.traffic_rng[key] = RngStream(seed, k.TRAFFIC_STREAM + i)
            self.txn_counter[key] = 0
        self.channel_rng = [RngStream(seed, k.CHANNEL_STREAM + s) for s in range(len(self.stations))]
        self.backoff_rng = [RngStream(seed, k.BACKOFF_STREAM + s) for s in range(len(self.stations))]

        self.minislots: dict[int, list[tuple[int, MediaClass]]] = {}
        self.in_transit = {m: 0 for m in MEDIA_ORDER}
        self.last_delivered: dict[tuple[int, MediaClass], tuple[int, int]] = {}
        self.delivery_delay = self.layout.slot_duration + scenario.mobile_delay_us
        self.traffic_log: list[tuple] = []

        sim = self.sim
        sim.on(k.ARRIVAL, self._on_arrival)
        sim.on(k.TTL_SWEEP, self._on_ttl_sweep)
        sim.on(k.RA_SLOT, self._on_ra_slot)
        sim.on(k.FRAME_BOUNDARY, self._on_frame)
        sim.on(k.SLOT_START, self._on_slot)
        sim.on(k.PACKET_DELIVERED, self._on_delivered)

    # -- setup ---------------------------------------------------------

    def _start(self) -> None:
        for key, profile in self.profiles.items():
            rng = self.traffic_rng[key]
            if profile.distribution.value == "constant":
                first = rng.integers(0, profile.mean_interarrival - 1)
            else:
                first = next_arrival(profile, rng)
            self.sim.schedule(first, _src(key), k.ARRIVAL, key)
        self.sim.schedule(0, "bs", k.FRAME_BOUNDARY, 0)

    def run(self) -> MetricsReport:
        self._start()
        horizon = self.scenario.duration_ticks
        self.sim.run_until(horizon)
        if self.check_conservation:
            self._conservation_check()
        return self.report()

    def in_flight(self) -> dict[MediaClass, int]:
        out = dict(self.in_transit)
        for st in self.stations:
            for m, q in st.queues.items():
                out[m] += len(q)
        return out

    def report(self) -> MetricsReport:
        return finalize(self.recorder.counters, self.in_flight(), self.sim.now(),
                        self.scenario.link_rate)

    # -- helpers -------------------------------------------------------

    def _drop_cause(self, station: SourceStation, media: MediaClass) -> str:
        return CSI if station.denied[media] else TTL

    def _expire(self, station: SourceStation, media: MediaClass, now: int) -> None:
        if not self.ttl_aware:
            return
        expired = station.expire(media, now)
        if expired:
            cause = self._drop_cause(station, media)
            for p in expired:
                self.recorder.record(cause, p, now)

    def _contend(self, station: int, media: MediaClass, minislot: int) -> None:
        bucket = self.minislots.get(minislot)
        if bucket is None:
            bucket = self.minislots[minislot] = []
            end = self.layout.minislot_start(minislot) + self.layout.minislot_duration
            self.sim.schedule(end, "ra", k.RA_SLOT, minislot)
        bucket.append((station, media))

    def _begin_contention(self, station: SourceStation, media: MediaClass, now: int) -> None:
        ra = station.ra[media]
        ra.state = CONTENDING
        ra.attempt = 0
        self._contend(station.id, media, self.layout.next_minislot(now))

    def _conservation_check(self) -> None:
        in_flight = self.in_flight()
        self.conservation_checks += 1
        for m in MEDIA_ORDER:
            c = self.recorder.counters[m]
            if c.offered_pkts != c.delivered_pkts + c.dropped + in_flight[m]:
                raise ConservationError(
                    f"{m.value} at t={self.sim.now()}: offered {c.offered_pkts} != delivered "
                    f"{c.delivered_pkts} + dropped {c.dropped} + in flight {in_flight[m]}"
                )

    # -- handlers ------------------------------------------------------

    def _on_arrival(self, ev: k.Event) -> None:
        key = ev.payload
        now = ev.due
        profile = self.profiles[key]
        rng = self.traffic_rng[key]
        n = self.txn_counter[key]
        self.txn_counter[key] = n + 1
        txn_id = (self.source_index[key] << 32) | n
        txn = make_transaction(profile, now, rng, txn_id)
        self.sim.schedule(now + next_arrival(profile, rng), ev.target, k.ARRIVAL, key)

        packets = packetize(txn, self.scenario.cell_bytes)
        self.recorder.offer(packets, now)
        self.traffic_log.append((txn.id, txn.station, txn.media.value, txn.size, txn.created))
        station = self.stations[txn.station]
        self._expire(station, txn.media, now)
        if not station.enqueue(txn, packets):
            for p in packets:
                self.recorder.record(OVERFLOW, p, now)
            return
        if self.audit is not None and station.buffered > station.capacity:
            self.audit.buffer_violations += 1
        if self.ttl_aware:
            self.sim.schedule(txn.deadline, ev.target, k.TTL_SWEEP, key)
        if station.ra[txn.media].state == IDLE:
            self._begin_contention(station, txn.media, now)

    def _on_ttl_sweep(self, ev: k.Event) -> None:
        station_id, media = ev.payload
        self._expire(self.stations[station_id], media, ev.due)

    def _on_ra_slot(self, ev: k.Event) -> None:
        now = ev.due
        minislot = ev.payload
        contenders = []
        for station_id, media in self.minislots.pop(minislot):
            station = self.stations[station_id]
            self._expire(station, media, now)
            if station.queues[media]:
                contenders.append((station_id, media))
            else:
                station.ra[media].state = IDLE
        outcome = ra_minislot_resolve(contenders)
        if outcome.tag == "success":
            station_id, media = outcome.winner
            station = self.stations[station_id]
            profile = self.profiles[(station_id, media)]
            rate = profile.mean_size * 8 * k.TICKS_PER_SECOND / profile.mean_interarrival
            ra = station.request(media, rate, profile.priority, profile.weight)
            station.ra[media].state = RESIDENT
            due = self.mobiles[station.mobile].forward_ra(now)
            self.sim.schedule(due, "bs", k.PACKET_DELIVERED, ra)
        elif outcome.tag == "collision":
            for station_id, media in sorted(contenders, key=_contender_key):
                state = self.stations[station_id].ra[media]
                state.attempt += 1
                wait = backoff_delay(state.attempt, self.backoff_rng[station_id])
                self._contend(station_id, media, minislot + 1 + wait)

    def _on_frame(self, ev: k.Event) -> None:
        now = ev.due
        frame = ev.payload
        if self.check_conservation:
            self._conservation_check()
        for entry in self.bs.ttl_sweep(now) if self.ttl_aware else ():
            station = self.stations[entry.station]
            state = station.ra[entry.media]
            if state.state == RESIDENT:
                state.state = IDLE
                self._expire(station, entry.media, now)
                if station.queues[entry.media]:
                    self._begin_contention(station, entry.media, now)

        decision = serve_queue(self.bs.table.values(), self.layout, self.policy, now,
                               self.serve_stats)
        if self.audit is not None:
            self._audit_decision(decision, now)
        for station_id, media in decision.denied:
            self.stations[station_id].denied[media] = True
        for slot, station_id, media in decision.assignments:
            self.stations[station_id].denied[media] = False
            self.sim.schedule(self.layout.slot_start(frame, slot), f"st{station_id}",
                              k.SLOT_START, (station_id, media))
        self.sim.schedule(now + self.layout.frame_duration, "bs", k.FRAME_BOUNDARY, frame + 1)

    def _on_slot(self, ev: k.Event) -> None:
        now = ev.due
        station_id, media = ev.payload
        station = self.stations[station_id]
        arrival = now + self.delivery_delay
        # Anything that cannot land before its deadline is stale already.
        self._expire(station, media, arrival)
        packet = station.on_grant(media, now)
        if packet is None:
            self.recorder.wasted(media)
            return
        if self.audit is not None and packet.pgbk != (packet.backlog > 0):
            self.audit.pgbk_violations += 1
        intact = transmit(packet.size, station.channel, self.channel_rng[station_id])
        self.in_transit[media] += 1
        self.mobiles[station.mobile].forward_data(now + self.layout.slot_duration)
        self.sim.schedule(arrival, "bs", k.PACKET_DELIVERED, (packet, intact))

    def _on_delivered(self, ev: k.Event) -> None:
        now = ev.due
        payload = ev.payload
        if isinstance(payload, RequestAccessPacket):
            self.bs.on_ra(payload, now)
            return
        packet, intact = payload
        self.in_transit[packet.media] -= 1
        if not intact:
            self.recorder.record(CORRUPTED, packet, now)
            return
        self.bs.on_data(packet)
        # Stale data is useless to the receiver even if the MAC carried it.
        self.recorder.record(DELIVERED if now < packet.deadline else TTL, packet, now)
        if self.audit is not None:
            key = (packet.station, packet.media)
            uid = (packet.txn, packet.index)
            prev = self.last_delivered.get(key)
            if prev is not None and prev >= uid:
                self.audit.order_violations += 1
            self.last_delivered[key] = uid

    def _audit_decision(self, decision: GrantDecision, now: int) -> None:
        a = self.audit
        a.frames_checked += 1
        if self.keep_decisions:
            a.decisions.append(decision)
        slots = [s for s, _, _ in decision.assignments]
        if len(set(slots)) != len(slots) or len(slots) > self.layout.data_slots:
            a.slot_overlaps += 1
        granted = {(s, m) for _, s, m in decision.assignments}
        table = self.bs.table
        if self.policy.mode is Mode.AMAPMT:
            thr = self.policy.csi_threshold
            for key in granted:
                if table[key].ber > thr:
                    a.gate_violations += 1
            if self.policy.key_order[0] != "deadline":
                return
            deadlines = [table[key].deadline for key in granted]
            latest_granted = max(deadlines) if deadlines else None
            if latest_granted is not None:
                for key, e in table.items():
                    if key in granted or e.pending <= 0 or e.eligible_from > now or e.ber > thr:
                        continue
                    if e.deadline < latest_granted:
                        a.edf_violations += 1


def _src(key: tuple[int, MediaClass]) -> str:
    return f"st{key[0]}/{key[1].value}"


def _contender_key(c: tuple[int, MediaClass]) -> tuple[int, int]:
    return (c[0], MEDIA_ORDER.index(c[1]))


def simulate(scenario: Scenario, mode: Mode | str | None = None, seed: int = 1,
             **kwargs) -> tuple[MetricsReport, Network]:
    policy = scenario.policy
    if mode is not None:
        policy = policy.with_mode(Mode.parse(mode) if isinstance(mode, str) else mode)
    net = Network(scenario, policy, seed, **kwargs)
    return net.run(), net
