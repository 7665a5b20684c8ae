"""Scenario definitions: the INI-style file format, validation and the
built-in parameter-table presets.

File grammar (``configparser`` INI, ``#`` comments)::

    [scenario]      name, duration (simulated seconds), seeds (comma list)
    [topology]      mobiles, stations_per_mobile, buffer_bytes, mobile_delay_us
    [channel]       link_rate (bit/s), cell_bytes, data_slots, ra_minislots,
                    minislot_divisor, ber, ber_overrides ("station:ber, ...")
    [traffic]       distribution (constant|exponential), aggregate_rate
                    (bytes/s over all sources), mean_size (bytes), ttl_unit
                    (us|ms|s)
    [policy]        mode, csi_threshold, key_order, slot_cap (fair|none|N)
    [source.<app>]  one per media class (voice, video, ftp, data, email):
                    priority (low-latency or a positive integer), ttl (one
                    value per station position within a mobile, or a single
                    value for all), weight, and optional mean_size /
                    rate_share overrides

Only ``[scenario]`` and the five ``[source.*]`` sections are required; every
other key falls back to the default shown by ``amapmt presets --dump``.
"""

from __future__ import annotations

import configparser
import io
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .channel import DEFAULT_CELL_BYTES, DEFAULT_LINK_RATE, ChannelState, FrameLayout
from .nodes import DEFAULT_BUFFER_BYTES
from .scheduler import ORDER_KEYS, Mode, PolicyConfig
from .traffic import (
    LOW_LATENCY,
    MEDIA_ORDER,
    Distribution,
    MediaClass,
    Priority,
    SourceProfile,
    interarrival_for_rate,
)

TTL_UNITS = {"us": 1, "ms": 1_000, "s": 1_000_000}


class ConfigError(ValueError):
    """Scenario rejected; the message carries ``path:line`` diagnostics."""


@dataclass(frozen=True)
class SourceSpec:
    priority: Priority
    ttl: tuple[float, ...]  # one per station position, in ttl_unit
    weight: int = 1
    mean_size: int | None = None
    rate_share: float | None = None  # fraction of aggregate_rate


@dataclass(frozen=True)
class Scenario:
    name: str
    sources: dict[MediaClass, SourceSpec]
    duration: float = 60.0
    seeds: tuple[int, ...] = (1,)
    mobiles: int = 5
    stations_per_mobile: int = 4
    buffer_bytes: int = DEFAULT_BUFFER_BYTES
    mobile_delay_us: int = 0
    link_rate: int = DEFAULT_LINK_RATE
    cell_bytes: int = DEFAULT_CELL_BYTES
    data_slots: int = 16
    ra_minislots: int = 8
    minislot_divisor: int = 8
    ber: float = 1e-6
    ber_overrides: tuple[tuple[int, float], ...] = ()
    distribution: Distribution = Distribution.CONSTANT
    aggregate_rate: float = 50_000.0
    mean_size: int = 5300
    ttl_unit: str = "ms"
    policy: PolicyConfig = field(default_factory=PolicyConfig)

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.duration <= 0:
            out.append("duration must be positive")
        if not self.seeds:
            out.append("at least one seed is required")
        if self.mobiles < 1 or self.stations_per_mobile < 1:
            out.append("topology needs at least one mobile and one station per mobile")
        if self.buffer_bytes < 1:
            out.append("buffer_bytes must be positive")
        if self.mobile_delay_us < 0:
            out.append("mobile_delay_us must be non-negative")
        if self.link_rate <= 0 or self.cell_bytes < 1:
            out.append("link_rate and cell_bytes must be positive")
        if self.data_slots < 1 or self.ra_minislots < 1 or self.minislot_divisor < 1:
            out.append("frame layout counts must be positive")
        if self.aggregate_rate <= 0 or self.mean_size < 1:
            out.append("aggregate_rate and mean_size must be positive")
        if self.ttl_unit not in TTL_UNITS:
            out.append(f"ttl_unit must be one of {sorted(TTL_UNITS)}")
        try:
            ChannelState(self.ber)
        except ValueError as exc:
            out.append(str(exc))
        for station, ber in self.ber_overrides:
            if not 0 <= station < self.station_count:
                out.append(f"ber override references unknown station {station}")
            if not 0.0 <= ber < 1.0:
                out.append(f"ber override for station {station} outside [0, 1)")
        missing = [m.value for m in MEDIA_ORDER if m not in self.sources]
        if missing:
            out.append(f"missing source sections: {', '.join(missing)}")
        for media, spec in self.sources.items():
            if len(spec.ttl) not in (1, self.stations_per_mobile):
                out.append(
                    f"source.{media.value}: ttl needs 1 or {self.stations_per_mobile} values"
                )
            if any(t <= 0 for t in spec.ttl):
                out.append(f"source.{media.value}: ttl values must be positive")
            if spec.weight < 1:
                out.append(f"source.{media.value}: weight must be a positive integer")
            if spec.mean_size is not None and spec.mean_size < 1:
                out.append(f"source.{media.value}: mean_size must be positive")
            if spec.rate_share is not None and spec.rate_share <= 0:
                out.append(f"source.{media.value}: rate_share must be positive")
        return out

    @property
    def station_count(self) -> int:
        return self.mobiles * self.stations_per_mobile

    @property
    def duration_ticks(self) -> int:
        return int(round(self.duration * 1_000_000))

    def layout(self) -> FrameLayout:
        return FrameLayout.for_link(
            self.link_rate, self.cell_bytes, self.data_slots, self.ra_minislots,
            self.minislot_divisor,
        )

    def station_ber(self, station: int) -> float:
        return dict(self.ber_overrides).get(station, self.ber)

    def ttl_ticks(self, media: MediaClass, position: int) -> int:
        ttl = self.sources[media].ttl
        value = ttl[0] if len(ttl) == 1 else ttl[position]
        return int(round(value * TTL_UNITS[self.ttl_unit]))

    def profiles(self) -> list[SourceProfile]:
        """One profile per (station, media), stations in id order.

        Sources without an explicit ``rate_share`` split what is left of the
        aggregate rate equally.
        """
        explicit = sum(s.rate_share for s in self.sources.values() if s.rate_share is not None)
        implicit = [m for m, s in self.sources.items() if s.rate_share is None]
        leftover = max(0.0, 1.0 - explicit)
        out = []
        for station in range(self.station_count):
            position = station % self.stations_per_mobile
            for media in MEDIA_ORDER:
                spec = self.sources[media]
                share = spec.rate_share if spec.rate_share is not None else leftover / len(implicit)
                rate = self.aggregate_rate * share / self.station_count
                size = spec.mean_size if spec.mean_size is not None else self.mean_size
                out.append(SourceProfile(
                    station=station,
                    media=media,
                    distribution=self.distribution,
                    mean_interarrival=interarrival_for_rate(size, rate),
                    mean_size=size,
                    ttl=self.ttl_ticks(media, position),
                    priority=spec.priority,
                    weight=spec.weight,
                ))
        return out

    def with_overrides(self, **changes) -> "Scenario":
        return replace(self, **changes)


# -- presets -------------------------------------------------------------

_TTL_SAME = {m: (10, 10, 10, 10) for m in MEDIA_ORDER}
_TTL_DIFF = {
    MediaClass.CBR: (10, 35, 60, 85),
    MediaClass.RT_VBR: (15, 40, 65, 90),
    MediaClass.NRT_VBR: (20, 45, 70, 95),
    MediaClass.ABR: (25, 50, 75, 100),
    MediaClass.UBR: (30, 55, 80, 105),
}
_PRIO_SAME = {
    MediaClass.CBR: LOW_LATENCY,
    MediaClass.RT_VBR: Priority(16),
    MediaClass.NRT_VBR: Priority(16),
    MediaClass.ABR: Priority(16),
    MediaClass.UBR: Priority(16),
}
_PRIO_DIFF = {
    MediaClass.CBR: LOW_LATENCY,
    MediaClass.RT_VBR: Priority(16),
    MediaClass.NRT_VBR: Priority(8),
    MediaClass.ABR: Priority(4),
    MediaClass.UBR: Priority(2),
}
_TABLES = {
    "table-5-1": (_TTL_SAME, _PRIO_SAME),
    "table-5-2": (_TTL_SAME, _PRIO_DIFF),
    "table-5-3": (_TTL_DIFF, _PRIO_SAME),
    "table-5-4": (_TTL_DIFF, _PRIO_DIFF),
}
PRESET_BERS = {"": 1e-6, "-ber1e-12": 1e-12}


def _preset(table: str, ber: float, name: str) -> Scenario:
    ttls, prios = _TABLES[table]
    sources = {m: SourceSpec(priority=prios[m], ttl=tuple(float(t) for t in ttls[m]))
               for m in MEDIA_ORDER}
    return Scenario(name=name, sources=sources, ber=ber)


PRESETS: dict[str, Scenario] = {
    table + suffix: _preset(table, ber, table + suffix)
    for table in _TABLES
    for suffix, ber in PRESET_BERS.items()
}


def preset(name: str) -> Scenario:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}") from None


# -- INI serialisation ---------------------------------------------------

_SECTION_KEYS = {
    "scenario": {"name", "duration", "seeds"},
    "topology": {"mobiles", "stations_per_mobile", "buffer_bytes", "mobile_delay_us"},
    "channel": {"link_rate", "cell_bytes", "data_slots", "ra_minislots", "minislot_divisor",
                "ber", "ber_overrides"},
    "traffic": {"distribution", "aggregate_rate", "mean_size", "ttl_unit"},
    "policy": {"mode", "csi_threshold", "key_order", "slot_cap"},
}
_SOURCE_KEYS = {"priority", "ttl", "weight", "mean_size", "rate_share"}


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_ttl(values: tuple[float, ...]) -> str:
    return ", ".join(str(int(v)) if float(v).is_integer() else repr(v) for v in values)


def dumps(scenario: Scenario) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp["scenario"] = {
        "name": scenario.name,
        "duration": _fmt_float(scenario.duration),
        "seeds": ", ".join(str(s) for s in scenario.seeds),
    }
    cp["topology"] = {
        "mobiles": str(scenario.mobiles),
        "stations_per_mobile": str(scenario.stations_per_mobile),
        "buffer_bytes": str(scenario.buffer_bytes),
        "mobile_delay_us": str(scenario.mobile_delay_us),
    }
    cp["channel"] = {
        "link_rate": str(scenario.link_rate),
        "cell_bytes": str(scenario.cell_bytes),
        "data_slots": str(scenario.data_slots),
        "ra_minislots": str(scenario.ra_minislots),
        "minislot_divisor": str(scenario.minislot_divisor),
        "ber": _fmt_float(scenario.ber),
        "ber_overrides": ", ".join(f"{s}:{_fmt_float(b)}" for s, b in scenario.ber_overrides),
    }
    cp["traffic"] = {
        "distribution": scenario.distribution.value,
        "aggregate_rate": _fmt_float(scenario.aggregate_rate),
        "mean_size": str(scenario.mean_size),
        "ttl_unit": scenario.ttl_unit,
    }
    cp["policy"] = {
        "mode": scenario.policy.mode.value,
        "csi_threshold": _fmt_float(scenario.policy.csi_threshold),
        "key_order": ", ".join(scenario.policy.key_order),
        "slot_cap": str(scenario.policy.slot_cap),
    }
    for media in MEDIA_ORDER:
        spec = scenario.sources[media]
        section = {
            "priority": str(spec.priority),
            "ttl": _fmt_ttl(spec.ttl),
            "weight": str(spec.weight),
        }
        if spec.mean_size is not None:
            section["mean_size"] = str(spec.mean_size)
        if spec.rate_share is not None:
            section["rate_share"] = _fmt_float(spec.rate_share)
        cp[f"source.{media.value}"] = section
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def dump(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps(scenario))


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return lineno
            continue
        if key is not None and current == section:
            m = re.match(r"^([^=:#;]+?)\s*[=:]", line)
            if m and m.group(1).strip().lower() == key:
                return lineno
    return None


class _Reader:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        self.errors: list[str] = []

    def where(self, section: str, key: str | None = None) -> str:
        line = _line_of(self.text, section, key)
        return f"{self.source}:{line}" if line else self.source

    def fail(self, section: str, key: str | None, message: str) -> None:
        self.errors.append(f"{self.where(section, key)}: {message}")

    def get(self, cp, section, key, conv, default=None, required=False):
        if not cp.has_section(section) or not cp.has_option(section, key):
            if required:
                self.fail(section, None, f"[{section}] is missing required key {key!r}")
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            self.fail(section, key, f"bad value for {key!r}: {raw!r} ({exc})")
            return default


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.replace(",", " ").split())


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.replace(",", " ").split())


def _overrides(raw: str) -> tuple[tuple[int, float], ...]:
    out = []
    for part in raw.replace(",", " ").split():
        station, _, ber = part.partition(":")
        out.append((int(station), float(ber)))
    return tuple(out)


def _key_order(raw: str) -> tuple[str, ...]:
    keys = tuple(k.strip().lower() for k in raw.replace(",", " ").split())
    if sorted(keys) != sorted(ORDER_KEYS):
        raise ValueError(f"must be a permutation of {', '.join(ORDER_KEYS)}")
    return keys


def _slot_cap(raw: str) -> str | int:
    raw = raw.strip().lower()
    if raw in ("fair", "none"):
        return raw
    value = int(raw)
    if value < 1:
        raise ValueError("must be fair, none or a positive integer")
    return value


def loads(text: str, source: str = "<scenario>") -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    r = _Reader(text, source)
    for section in cp.sections():
        if section.startswith("source."):
            app = section.split(".", 1)[1]
            try:
                MediaClass.parse(app)
            except ValueError:
                r.fail(section, None, f"unknown media in section [{section}]")
                continue
            allowed = _SOURCE_KEYS
        elif section in _SECTION_KEYS:
            allowed = _SECTION_KEYS[section]
        else:
            r.fail(section, None, f"unknown section [{section}]")
            continue
        for key in cp.options(section):
            if key not in allowed:
                r.fail(section, key, f"unknown key {key!r} in [{section}]")
    if not cp.has_section("scenario"):
        r.errors.append(f"{source}: missing required section [scenario]")

    d = Scenario.__dataclass_fields__
    kw = {
        "name": r.get(cp, "scenario", "name", str.strip, required=True),
        "duration": r.get(cp, "scenario", "duration", float, required=True),
        "seeds": r.get(cp, "scenario", "seeds", _ints, required=True),
        "mobiles": r.get(cp, "topology", "mobiles", int, d["mobiles"].default),
        "stations_per_mobile": r.get(cp, "topology", "stations_per_mobile", int,
                                     d["stations_per_mobile"].default),
        "buffer_bytes": r.get(cp, "topology", "buffer_bytes", int, d["buffer_bytes"].default),
        "mobile_delay_us": r.get(cp, "topology", "mobile_delay_us", int,
                                 d["mobile_delay_us"].default),
        "link_rate": r.get(cp, "channel", "link_rate", int, d["link_rate"].default),
        "cell_bytes": r.get(cp, "channel", "cell_bytes", int, d["cell_bytes"].default),
        "data_slots": r.get(cp, "channel", "data_slots", int, d["data_slots"].default),
        "ra_minislots": r.get(cp, "channel", "ra_minislots", int, d["ra_minislots"].default),
        "minislot_divisor": r.get(cp, "channel", "minislot_divisor", int,
                                  d["minislot_divisor"].default),
        "ber": r.get(cp, "channel", "ber", float, d["ber"].default),
        "ber_overrides": r.get(cp, "channel", "ber_overrides", _overrides, ()),
        "distribution": r.get(cp, "traffic", "distribution",
                              lambda s: Distribution(s.strip().lower()), Distribution.CONSTANT),
        "aggregate_rate": r.get(cp, "traffic", "aggregate_rate", float,
                                d["aggregate_rate"].default),
        "mean_size": r.get(cp, "traffic", "mean_size", int, d["mean_size"].default),
        "ttl_unit": r.get(cp, "traffic", "ttl_unit", str.strip, d["ttl_unit"].default),
    }
    policy_kw = {
        "mode": r.get(cp, "policy", "mode", Mode.parse, Mode.AMAPMT),
        "csi_threshold": r.get(cp, "policy", "csi_threshold", float, 1e-4),
        "key_order": r.get(cp, "policy", "key_order", _key_order, ORDER_KEYS),
        "slot_cap": r.get(cp, "policy", "slot_cap", _slot_cap, "fair"),
    }
    sources = {}
    for media in MEDIA_ORDER:
        section = f"source.{media.value}"
        if not cp.has_section(section):
            r.errors.append(f"{source}: missing required section [{section}]")
            continue
        prio = r.get(cp, section, "priority", Priority.parse, required=True)
        ttl = r.get(cp, section, "ttl", _floats, required=True)
        weight = r.get(cp, section, "weight", int, 1)
        mean_size = r.get(cp, section, "mean_size", int, None)
        share = r.get(cp, section, "rate_share", float, None)
        if prio is not None and ttl is not None:
            sources[media] = SourceSpec(prio, ttl, weight, mean_size, share)

    if not r.errors:
        try:
            kw["policy"] = PolicyConfig(**policy_kw)
        except ValueError as exc:
            r.fail("policy", None, str(exc))
    if r.errors:
        raise ConfigError("\n".join(r.errors))
    try:
        return Scenario(sources=sources, **kw)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario file, or a preset when ``path`` names one."""
    p = Path(path)
    if not p.exists():
        if str(path) in PRESETS:
            return PRESETS[str(path)]
        raise ConfigError(f"{path}: no such scenario file or preset")
    return loads(p.read_text(), source=str(p))
