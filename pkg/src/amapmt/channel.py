"""TDMA frame structure, slotted-ALOHA request minislots and BER-driven
packet corruption."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable

from .kernel import TICKS_PER_SECOND, RngStream

DEFAULT_LINK_RATE = 1_544_000
DEFAULT_CELL_BYTES = 53
MAX_BACKOFF_WINDOW = 64


@dataclass(frozen=True)
class FrameLayout:
    """Uplink frame: ``ra_minislots`` request minislots followed by
    ``data_slots`` data slots."""

    data_slots: int
    ra_minislots: int
    slot_duration: int
    minislot_duration: int

    def __post_init__(self):
        if self.data_slots <= 0 or self.ra_minislots <= 0:
            raise ValueError("frame needs at least one data slot and one minislot")
        if self.slot_duration <= 0 or self.minislot_duration <= 0:
            raise ValueError("slot durations must be positive")

    @classmethod
    def for_link(
        cls,
        link_rate: int = DEFAULT_LINK_RATE,
        cell_bytes: int = DEFAULT_CELL_BYTES,
        data_slots: int = 16,
        ra_minislots: int = 8,
        minislot_divisor: int = 8,
    ) -> "FrameLayout":
        slot = math.ceil(cell_bytes * 8 * TICKS_PER_SECOND / link_rate)
        return cls(data_slots, ra_minislots, slot, max(1, slot // minislot_divisor))

    @property
    def ra_period(self) -> int:
        return self.ra_minislots * self.minislot_duration

    @property
    def frame_duration(self) -> int:
        return self.data_slots * self.slot_duration + self.ra_period

    def frame_start(self, frame: int) -> int:
        return frame * self.frame_duration

    def slot_start(self, frame: int, slot: int) -> int:
        return self.frame_start(frame) + self.ra_period + slot * self.slot_duration

    def minislot_start(self, minislot: int) -> int:
        """Start time of global minislot number ``minislot``."""
        frame, idx = divmod(minislot, self.ra_minislots)
        return self.frame_start(frame) + idx * self.minislot_duration

    def next_minislot(self, now: int) -> int:
        """First global minislot that begins at or after ``now``."""
        frame, offset = divmod(now, self.frame_duration)
        if offset < self.ra_period:
            idx = -(-offset // self.minislot_duration)
            if idx < self.ra_minislots:
                return frame * self.ra_minislots + idx
        return (frame + 1) * self.ra_minislots

    def data_capacity_bps(self, cell_bytes: int) -> float:
        return self.data_slots * cell_bytes * 8 * TICKS_PER_SECOND / self.frame_duration


@dataclass(frozen=True)
class ChannelState:
    ber: float

    def __post_init__(self):
        if not 0.0 <= self.ber < 1.0:
            raise ValueError(f"ber must lie in [0, 1), got {self.ber}")


def corruption_probability(ber: float, payload_bytes: int) -> float:
    """P(at least one bit error) for independent bit errors."""
    return -math.expm1(8 * payload_bytes * math.log1p(-ber))


def transmit(payload_bytes: int, state: ChannelState, rng: RngStream) -> bool:
    """Returns True if the packet arrives intact.

    Bit errors are drawn directly (binomial over the packet's bits), so the
    closed form in ``corruption_probability`` stays an independent check.
    """
    if state.ber == 0.0:
        return True
    return rng.binomial(8 * payload_bytes, state.ber) == 0


def corrupted_count(payload_bytes: int, state: ChannelState, rng: RngStream, trials: int) -> int:
    """Vectorised ``transmit`` over ``trials`` packets; returns how many were corrupted."""
    if state.ber == 0.0:
        return 0
    errors = rng.generator.binomial(8 * payload_bytes, state.ber, size=trials)
    return int((errors > 0).sum())


@dataclass(frozen=True)
class RaOutcome:
    tag: str  # idle | success | collision
    contenders: frozenset

    @property
    def winner(self):
        if self.tag != "success":
            raise ValueError("no winner for a non-success outcome")
        return next(iter(self.contenders))


IDLE = RaOutcome("idle", frozenset())


def ra_minislot_resolve(contenders: Iterable[Hashable]) -> RaOutcome:
    group = frozenset(contenders)
    if not group:
        return IDLE
    if len(group) == 1:
        return RaOutcome("success", group)
    return RaOutcome("collision", group)


def backoff_delay(attempt: int, rng: RngStream) -> int:
    """Binary exponential backoff in minislots, window capped at 64."""
    if attempt < 1:
        raise ValueError("attempt must be >= 1")
    window = min(2 ** min(attempt, 7), MAX_BACKOFF_WINDOW)
    return rng.integers(0, window - 1)
