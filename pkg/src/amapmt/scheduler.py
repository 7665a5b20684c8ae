"""Per-frame grant selection (the Serve Queue function) and its ablations."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from itertools import groupby
from typing import Iterable, Sequence

from .channel import FrameLayout
from .nodes import GrantDecision, RequestTableEntry
from .traffic import MEDIA_ORDER


class Mode(enum.Enum):
    AMAPMT = "amapmt"
    BASELINE_NONE = "baseline-none"
    PRIORITY_ONLY = "priority-only"
    TTL_ONLY = "ttl-only"

    @classmethod
    def parse(cls, text: str) -> "Mode":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown policy mode {text!r}; expected one of {[m.value for m in cls]}"
            ) from None

    @property
    def ttl_aware(self) -> bool:
        """Modes that use deadlines: stale packets and reservations are
        purged before they consume slots."""
        return self in (Mode.AMAPMT, Mode.TTL_ONLY)


ALL_MODES = (Mode.AMAPMT, Mode.PRIORITY_ONLY, Mode.TTL_ONLY, Mode.BASELINE_NONE)
ORDER_KEYS = ("deadline", "priority", "csi")


@dataclass(frozen=True)
class PolicyConfig:
    mode: Mode = Mode.AMAPMT
    csi_threshold: float = 1e-4
    key_order: tuple[str, ...] = ORDER_KEYS
    # "fair": ceil(slots * weight / total weight) per entry per frame;
    # "none": limited by pending only; an int: fixed per-entry limit.
    slot_cap: str | int = "fair"

    def __post_init__(self):
        if not (self.slot_cap in ("fair", "none") or
                (isinstance(self.slot_cap, int) and self.slot_cap >= 1)):
            raise ValueError("slot cap must be 'fair', 'none' or a positive integer")
        if not 0.0 < self.csi_threshold < 1.0:
            raise ValueError("csi threshold must lie in (0, 1)")
        if sorted(self.key_order) != sorted(ORDER_KEYS):
            raise ValueError(f"key order must be a permutation of {ORDER_KEYS}")

    def with_mode(self, mode: Mode) -> "PolicyConfig":
        return PolicyConfig(mode, self.csi_threshold, self.key_order, self.slot_cap)


def csi_gate(entry: RequestTableEntry, threshold: float) -> bool:
    """True (pass) unless the entry's channel BER exceeds ``threshold``."""
    return entry.ber <= threshold


def _field(entry: RequestTableEntry, name: str):
    if name == "deadline":
        return entry.deadline
    if name == "priority":
        hi, level = entry.priority.rank()
        return (-hi, -level)
    return entry.ber


def sort_key(entry: RequestTableEntry, policy: PolicyConfig) -> tuple:
    """The mode-specific part of the ordering; smaller sorts first."""
    mode = policy.mode
    if mode is Mode.AMAPMT:
        return tuple(_field(entry, name) for name in policy.key_order)
    if mode is Mode.PRIORITY_ONLY:
        return (_field(entry, "priority"),)
    if mode is Mode.TTL_ONLY:
        return (entry.deadline,)
    return (entry.ra_arrival,)


def _tiebreak(entry: RequestTableEntry) -> tuple:
    return (-entry.credit, entry.ra_arrival, entry.station, MEDIA_ORDER.index(entry.media))


def wrr_pick(candidates: Sequence[RequestTableEntry],
             group: Sequence[RequestTableEntry] | None = None) -> RequestTableEntry:
    """Smooth weighted round robin among entries that tie on every sort key.

    Each pick adds every group member's weight to its credit, serves the
    candidate with the highest credit and charges it the group's total
    weight. ``group`` defaults to ``candidates``; passing the full tie group
    keeps members that already hit their per-frame cap accruing credit, so
    they catch up in later frames and long-run grants follow the weights.
    """
    if not candidates:
        raise ValueError("wrr_pick needs at least one entry")
    total = 0
    for e in group if group is not None else candidates:
        e.credit += e.weight
        total += e.weight
    chosen = min(candidates, key=_tiebreak)
    chosen.credit -= total
    return chosen


def slot_quota(entry: RequestTableEntry, slots: int, total_weight: int,
               cap: str | int = "fair") -> int:
    if cap == "none":
        return entry.pending
    if cap == "fair":
        return min(entry.pending, math.ceil(slots * entry.weight / total_weight))
    return min(entry.pending, cap)


@dataclass
class ServeStats:
    frames: int = 0
    granted: int = 0
    idle: int = 0
    denied: int = 0


def serve_queue(
    table: Iterable[RequestTableEntry],
    layout: FrameLayout,
    policy: PolicyConfig,
    now: int,
    stats: ServeStats | None = None,
) -> GrantDecision:
    """Assign this frame's data slots.

    Entries that are not yet eligible (request filed during the current
    frame) or have nothing pending are skipped; in ``amapmt`` mode entries
    over the CSI threshold are denied. The rest are ranked by the mode's
    sort key, then granted in rank order, each up to its weighted per-frame
    cap, with WRR deciding the order within a group of exact ties.
    Unassigned slots stay idle. WRR credits on the entries are updated.
    """
    denied = []
    eligible = []
    gate = policy.mode is Mode.AMAPMT
    for entry in table:
        if entry.pending <= 0 or entry.eligible_from > now:
            continue
        if gate and not csi_gate(entry, policy.csi_threshold):
            denied.append(entry.key)
            continue
        eligible.append(entry)

    slots = layout.data_slots
    assignments: list[tuple[int, int, object]] = []
    if eligible:
        total_weight = sum(e.weight for e in eligible)
        quota = {e.key: slot_quota(e, slots, total_weight, policy.slot_cap) for e in eligible}
        ranked = sorted(eligible, key=lambda e: (sort_key(e, policy), _tiebreak(e)))
        for _, tied in groupby(ranked, key=lambda e: sort_key(e, policy)):
            group = list(tied)
            members = list(group)
            while members and len(assignments) < slots:
                entry = wrr_pick(members, group)
                assignments.append((len(assignments), entry.station, entry.media))
                quota[entry.key] -= 1
                if quota[entry.key] == 0:
                    members.remove(entry)
            if len(assignments) == slots:
                break

    if stats is not None:
        stats.frames += 1
        stats.granted += len(assignments)
        stats.idle += slots - len(assignments)
        stats.denied += len(denied)
    return GrantDecision(now, tuple(assignments), tuple(denied))
