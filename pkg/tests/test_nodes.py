import random
from collections import deque

import pytest

from amapmt.channel import ChannelState
from amapmt.nodes import (
    DEFAULT_BUFFER_BYTES,
    IDLE,
    RESIDENT,
    BaseStation,
    Mobile,
    RequestAccessPacket,
    SourceStation,
    expire_ttl,
)
from amapmt.traffic import LOW_LATENCY, MediaClass, Priority, Transaction, packetize

FRAME = 4672


def txn(size, media=MediaClass.CBR, created=0, deadline=10_000, txn_id=1, station=0):
    t = Transaction(txn_id, station, media, size, created, deadline)
    return t, packetize(t, 53)


def ra(station=0, media=MediaClass.CBR, deadline=10_000, pending=3, ber=1e-6):
    return RequestAccessPacket(station, "bs", media, 8000.0, deadline, ChannelState(ber),
                               media.tag, LOW_LATENCY, 1, pending)


def test_default_buffer_is_half_a_mebibyte():
    assert DEFAULT_BUFFER_BYTES == 524_288


def test_overflow_drops_whole_transaction():
    st = SourceStation(0, 0)
    st.buffered = DEFAULT_BUFFER_BYTES - 100
    t, pkts = txn(1000)
    assert not st.enqueue(t, pkts)
    assert st.buffered == DEFAULT_BUFFER_BYTES - 100
    assert not st.queues[MediaClass.CBR]


def test_exact_fill_is_accepted():
    st = SourceStation(0, 0)
    st.buffered = DEFAULT_BUFFER_BYTES - 1000
    t, pkts = txn(1000)
    assert st.enqueue(t, pkts)
    assert st.buffered == DEFAULT_BUFFER_BYTES


def test_buffer_is_shared_across_media():
    st = SourceStation(0, 0, capacity=2000)
    a, pa = txn(1500, MediaClass.CBR)
    b, pb = txn(600, MediaClass.UBR, txn_id=2)
    assert st.enqueue(a, pa)
    assert not st.enqueue(b, pb)


def test_grant_sets_pgbk_when_more_remain():
    st = SourceStation(0, 0)
    t, pkts = txn(106)  # two cells
    st.enqueue(t, pkts)
    first = st.on_grant(MediaClass.CBR, 500)
    assert first.pgbk and first.backlog == 1 and first.head_deadline == 10_000
    assert first.sent_at == 500
    second = st.on_grant(MediaClass.CBR, 800)
    assert not second.pgbk and second.backlog == 0 and second.head_deadline is None
    assert st.ra[MediaClass.CBR].state == IDLE
    assert st.buffered == 0


def test_wasted_slot_after_last_packet():
    # Grants keep coming for a frame after the last packet; those slots waste.
    st = SourceStation(0, 0)
    t, pkts = txn(53)
    st.enqueue(t, pkts)
    assert st.on_grant(MediaClass.CBR, 0) is not None
    assert st.on_grant(MediaClass.CBR, 275) is None


def test_expire_ttl_matches_filter_oracle():
    rnd = random.Random(3)
    for _ in range(200):
        items = []
        for i in range(rnd.randint(0, 30)):
            t = Transaction(i, 0, MediaClass.ABR, 53, 0, rnd.randint(1, 100))
            items.extend(packetize(t, 53))
        now = rnd.randint(0, 110)
        q = deque(items)
        expired = expire_ttl(q, now)
        assert expired == [p for p in items if p.deadline <= now]
        assert list(q) == [p for p in items if p.deadline > now]


def test_station_expire_releases_bytes():
    st = SourceStation(0, 0)
    t, pkts = txn(106, deadline=50)
    st.enqueue(t, pkts)
    assert len(st.expire(MediaClass.CBR, 50)) == 2
    assert st.buffered == 0


def test_request_carries_queue_summary():
    st = SourceStation(4, 1, ber=1e-3)
    a, pa = txn(106, deadline=900)
    b, pb = txn(53, deadline=700, txn_id=2)
    st.enqueue(a, pa)
    st.enqueue(b, pb)
    r = st.request(MediaClass.CBR, 100.0, Priority(8), 2)
    assert (r.source, r.pending, r.deadline, r.csi.ber, r.weight) == (4, 3, 700, 1e-3, 2)
    assert r.qos == "CBR"


def test_request_needs_pending():
    with pytest.raises(ValueError):
        ra(pending=0)


def test_mobile_relay_delay():
    m = Mobile(0, range(4), delay=25)
    assert m.forward_ra(100) == 125
    assert m.forward_data(200) == 225
    assert (m.ra_forwarded, m.data_forwarded) == (1, 1)


def test_bs_new_entry_eligible_next_frame():
    bs = BaseStation(FRAME)
    e = bs.on_ra(ra(), now=100)
    assert e.eligible_from == FRAME
    assert bs.on_ra(ra(station=1), now=FRAME).eligible_from == 2 * FRAME
    assert bs.acks == 2


def test_bs_duplicate_request_merges():
    bs = BaseStation(FRAME)
    bs.on_ra(ra(deadline=900, pending=2), now=10)
    e = bs.on_ra(ra(deadline=500, pending=3, ber=1e-5), now=20)
    assert len(bs.table) == 1
    assert (e.deadline, e.pending, e.ber, e.ra_arrival) == (500, 5, 1e-5, 10)


def test_bs_piggyback_updates_and_release():
    bs = BaseStation(FRAME)
    bs.on_ra(ra(pending=2), now=0)
    st = SourceStation(0, 0)
    t, pkts = txn(106, deadline=7000)
    st.enqueue(t, pkts)
    p1 = st.on_grant(MediaClass.CBR, 10)
    assert not bs.on_data(p1)
    entry = bs.table[(0, MediaClass.CBR)]
    assert (entry.pending, entry.deadline) == (1, 7000)
    p2 = st.on_grant(MediaClass.CBR, 20)
    assert bs.on_data(p2)
    assert not bs.table


def test_bs_stray_data_is_counted():
    bs = BaseStation(FRAME)
    t, pkts = txn(53)
    assert not bs.on_data(pkts[0])
    assert bs.stray_data == 1


def test_bs_ttl_sweep():
    bs = BaseStation(FRAME)
    bs.on_ra(ra(station=0, deadline=100, pending=4), now=0)
    bs.on_ra(ra(station=1, deadline=300), now=0)
    gone = bs.ttl_sweep(100)
    assert [e.station for e in gone] == [0]
    assert list(bs.table) == [(1, MediaClass.CBR)]
    assert (bs.purged, bs.purged_pending) == (1, 4)


def test_resident_state_constant():
    assert RESIDENT == "table-resident"
