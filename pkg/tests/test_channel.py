import math

import pytest

from amapmt.channel import (
    ChannelState,
    FrameLayout,
    backoff_delay,
    corrupted_count,
    corruption_probability,
    ra_minislot_resolve,
    transmit,
)
from amapmt.kernel import RngStream


def test_default_frame_layout_timings():
    layout = FrameLayout.for_link()
    # 53-byte slot at 1.544 Mbit/s is 274.6 us, rounded up to whole ticks.
    assert layout.slot_duration == 275
    assert layout.minislot_duration == 34
    assert layout.frame_duration == 16 * 275 + 8 * 34 == 4672


def test_frame_duration_identity():
    layout = FrameLayout(10, 4, 100, 7)
    assert layout.frame_duration == 10 * 100 + 4 * 7


def test_slot_and_minislot_positions():
    layout = FrameLayout(4, 2, 100, 10)
    assert layout.frame_duration == 420
    assert layout.minislot_start(0) == 0
    assert layout.minislot_start(1) == 10
    assert layout.minislot_start(2) == 420
    assert layout.slot_start(0, 0) == 20
    assert layout.slot_start(1, 3) == 420 + 20 + 300


def test_next_minislot():
    layout = FrameLayout(4, 2, 100, 10)
    assert layout.next_minislot(0) == 0
    assert layout.next_minislot(1) == 1
    assert layout.next_minislot(10) == 1
    assert layout.next_minislot(11) == 2  # next frame's first minislot
    assert layout.next_minislot(419) == 2


def test_invalid_layout():
    with pytest.raises(ValueError):
        FrameLayout(0, 1, 1, 1)


def test_channel_state_range():
    with pytest.raises(ValueError):
        ChannelState(1.0)


def test_zero_ber_always_delivers():
    rng = RngStream(1, 1)
    assert all(transmit(53, ChannelState(0.0), rng) for _ in range(1000))


def test_corruption_probability_closed_form():
    assert corruption_probability(1e-6, 53) == pytest.approx(4.2391e-4, rel=1e-4)
    assert corruption_probability(1e-12, 53) == pytest.approx(4.24e-10, rel=1e-3)


def test_transmit_matches_bulk_law():
    rng = RngStream(5, 5)
    state = ChannelState(1e-3)
    trials = 20_000
    bad = sum(not transmit(53, state, rng) for _ in range(trials))
    p = corruption_probability(1e-3, 53)
    se = math.sqrt(p * (1 - p) / trials)
    assert abs(bad / trials - p) < 4 * se


def test_monte_carlo_corruption_ten_million_trials():
    rng = RngStream(2024, 8)
    trials = 10**7
    bad = corrupted_count(53, ChannelState(1e-6), rng, trials)
    p = 1 - (1 - 1e-6) ** 424
    se = math.sqrt(p * (1 - p) / trials)
    assert abs(bad / trials - p) <= 3 * se


def test_ra_resolution():
    assert ra_minislot_resolve([]).tag == "idle"
    success = ra_minislot_resolve([("A",)])
    assert success.tag == "success" and success.winner == ("A",)
    coll = ra_minislot_resolve(["A", "B"])
    assert coll.tag == "collision" and coll.contenders == {"A", "B"}


def test_backoff_ranges():
    rng = RngStream(1, 3)
    assert {backoff_delay(1, rng) for _ in range(200)} == {0, 1}
    tenth = {backoff_delay(10, rng) for _ in range(5000)}
    assert min(tenth) == 0 and max(tenth) == 63
    with pytest.raises(ValueError):
        backoff_delay(0, rng)


def test_slotted_aloha_success_rate_matches_g_exp_minus_g():
    # Poisson offered load G per minislot, no retries: success iff exactly one.
    gen = RngStream(99, 0).generator
    for g in (0.25, 0.5, 1.0, 2.0):
        counts = gen.poisson(g, size=200_000)
        outcomes = [ra_minislot_resolve(range(c)).tag for c in counts[:5000]]
        assert outcomes.count("success") == int((counts[:5000] == 1).sum())
        rate = float((counts == 1).mean())
        assert rate == pytest.approx(g * math.exp(-g), abs=0.005)
