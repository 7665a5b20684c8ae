import pytest

from amapmt.metrics import (
    CORRUPTED,
    CSI,
    DELIVERED,
    OVERFLOW,
    TTL,
    AccountingError,
    ClassCounters,
    Recorder,
    finalize,
    pool,
)
from amapmt.traffic import MEDIA_ORDER, MediaClass, Transaction, packetize


def packets(n, media=MediaClass.CBR, txn_id=1, deadline=1000):
    t = Transaction(txn_id, 0, media, 53 * n, 0, deadline)
    return packetize(t, 53)


def test_plr_example():
    rec = Recorder()
    pkts = packets(10)
    rec.offer(pkts, 0)
    for p in pkts[:7]:
        rec.record(DELIVERED, p, 100)
    rec.record(TTL, pkts[7], 100)
    rec.record(CSI, pkts[8], 100)
    rec.record(CORRUPTED, pkts[9], 100)
    report = finalize(rec.counters, {}, 1_000_000, 1_544_000)
    voice = report["voice"]
    assert voice.plr == pytest.approx(0.3)
    assert voice.mptd_us == 100
    assert voice.throughput_bps == 7 * 53 * 8
    assert report["all"].plr == pytest.approx(0.3)


def test_in_flight_excluded_from_plr():
    rec = Recorder()
    pkts = packets(4)
    rec.offer(pkts, 0)
    rec.record(DELIVERED, pkts[0], 10)
    rec.record(OVERFLOW, pkts[1], 10)
    report = finalize(rec.counters, {MediaClass.CBR: 2}, 10**6, 1_544_000)
    assert report["voice"].plr == 0.5
    assert report["voice"].in_flight == 2


def test_nothing_offered_gives_undefined_plr():
    report = finalize(Recorder().counters, {}, 10**6, 1_544_000)
    assert report["email"].plr is None
    assert report["email"].mptd_us is None


def test_rho_for_default_load():
    c = {m: ClassCounters() for m in MEDIA_ORDER}
    c[MediaClass.CBR].offered_bytes = 50_000 * 60
    report = finalize(c, {}, 60 * 10**6, 1_544_000)
    assert report["all"].rho == pytest.approx(0.259, abs=0.001)


def test_second_outcome_raises():
    rec = Recorder()
    p = packets(1)
    rec.offer(p, 0)
    rec.record(DELIVERED, p[0], 5)
    with pytest.raises(AccountingError):
        rec.record(TTL, p[0], 6)


def test_unknown_outcome_raises():
    rec = Recorder()
    p = packets(1)
    with pytest.raises(AccountingError):
        rec.record("lost", p[0], 0)


def test_late_delivery_is_counted():
    rec = Recorder()
    p = packets(1, deadline=50)
    rec.offer(p, 0)
    rec.record(DELIVERED, p[0], 50)
    assert rec.counters[MediaClass.CBR].late == 1


def test_transaction_loss_counted_once():
    rec = Recorder()
    p = packets(3)
    rec.offer(p, 0)
    for q in p:
        rec.record(TTL, q, 10)
    assert rec.counters[MediaClass.CBR].txn_lost == 1


def test_replaying_outcome_log_reproduces_report():
    log = []
    rec = Recorder(log)
    a = packets(3, MediaClass.CBR, txn_id=1)
    b = packets(2, MediaClass.UBR, txn_id=2)
    rec.offer(a, 0)
    rec.offer(b, 1)
    rec.record(DELIVERED, a[0], 10)
    rec.record(CORRUPTED, a[1], 11)
    rec.record(DELIVERED, b[0], 12)
    rec.wasted(MediaClass.UBR)
    first = finalize(rec.counters, {MediaClass.CBR: 1, MediaClass.UBR: 1}, 100, 1e6)

    replay = Recorder()
    by_txn = {1: a, 2: b}
    for kind, txn_id, idx, media, now in log:
        if kind == "offered":
            replay.offer(by_txn[txn_id], now)
        else:
            replay.record(kind, by_txn[txn_id][idx], now)
    replay.wasted(MediaClass.UBR)
    second = finalize(replay.counters, {MediaClass.CBR: 1, MediaClass.UBR: 1}, 100, 1e6)
    assert first == second


def test_pool_sums_counts_and_horizons():
    rec = Recorder()
    p = packets(2)
    rec.offer(p, 0)
    rec.record(DELIVERED, p[0], 10)
    rec.record(TTL, p[1], 10)
    r = finalize(rec.counters, {}, 10**6, 1e6)
    pooled = pool([r, r])
    assert pooled["voice"].offered_pkts == 4
    assert pooled["voice"].plr == 0.5
    assert pooled["voice"].throughput_bps == r["voice"].throughput_bps
    with pytest.raises(ValueError):
        pool([])
