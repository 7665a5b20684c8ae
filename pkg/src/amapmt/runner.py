"""Policy × seed matrices and their delimited reports."""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .config import Scenario
from .metrics import ClassReport, MetricsReport, pool
from .network import Audit, Network
from .scheduler import ALL_MODES, Mode

RUN_COLUMNS = (
    "scenario", "policy", "seed", "media",
    "offered_pkts", "delivered_pkts", "drop_overflow", "drop_ttl", "drop_csi", "drop_corrupt",
    "wasted_slots", "plr", "mptd_us", "throughput_bps", "rho",
    "in_flight", "late", "txn_offered", "txn_lost",
)
COMPARISON_COLUMNS = (
    "scenario", "policy", "media", "seeds", "offered_pkts", "delivered_pkts",
    "plr", "plr_se", "mptd_us", "mptd_se", "throughput_bps", "rho",
)


@dataclass(frozen=True)
class RunResult:
    scenario: str
    policy: Mode
    seed: int
    report: MetricsReport
    wall_s: float
    audit: Audit | None = None
    frames: int = 0
    conservation_checks: int = 0


def run_one(scenario: Scenario, policy: Mode | str, seed: int, *, trace=None,
            check_conservation: bool = False, audit: bool = False) -> RunResult:
    mode = Mode.parse(policy) if isinstance(policy, str) else policy
    start = time.perf_counter()
    net = Network(scenario, scenario.policy.with_mode(mode), seed, trace=trace,
                  check_conservation=check_conservation, audit=audit)
    report = net.run()
    return RunResult(scenario.name, mode, seed, report, time.perf_counter() - start, net.audit,
                     net.serve_stats.frames, net.conservation_checks)


def _run_args(args) -> RunResult:
    scenario, mode, seed, conservation, audit = args
    return run_one(scenario, mode, seed, check_conservation=conservation, audit=audit)


def run_matrix(scenario: Scenario, policies: Sequence[Mode | str] = ALL_MODES,
               seeds: Sequence[int] | None = None, *, workers: int = 1,
               check_conservation: bool = False, audit: bool = False) -> list[RunResult]:
    """Run every (policy, seed) pair.

    Traffic streams depend on the seed only, so all policies see the same
    arrivals for a given seed. Results come back ordered by policy (as
    given) then seed, whatever the worker count.
    """
    modes = [Mode.parse(p) if isinstance(p, str) else p for p in policies]
    seeds = list(scenario.seeds if seeds is None else seeds)
    jobs = [(scenario, m, s, check_conservation, audit) for m in modes for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool_:
            results = list(pool_.map(_run_args, jobs))
    else:
        results = [_run_args(j) for j in jobs]
    return results


# -- reporting -------------------------------------------------------------


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return f"{x:.6g}"


def _row(result: RunResult, c: ClassReport) -> list[str]:
    return [
        result.scenario, result.policy.value, str(result.seed), c.media,
        *(_num(getattr(c, name)) for name in RUN_COLUMNS[4:]),
    ]


def standard_error(values: Sequence[float]) -> float | None:
    values = [v for v in values if v is not None]
    if len(values) < 2:
        return None
    return statistics.stdev(values) / math.sqrt(len(values))


@dataclass(frozen=True)
class PolicySummary:
    policy: Mode
    seeds: tuple[int, ...]
    pooled: MetricsReport
    plr_se: dict[str, float | None]
    mptd_se: dict[str, float | None]


def summarize(results: Sequence[RunResult]) -> list[PolicySummary]:
    """Pool each policy's runs; standard errors are across seeds."""
    by_policy: dict[Mode, list[RunResult]] = {}
    for r in results:
        by_policy.setdefault(r.policy, []).append(r)
    out = []
    for mode, runs in by_policy.items():
        pooled = pool([r.report for r in runs])
        names = [c.media for c in pooled.rows()]
        out.append(PolicySummary(
            mode,
            tuple(r.seed for r in runs),
            pooled,
            {n: standard_error([r.report[n].plr for r in runs]) for n in names},
            {n: standard_error([r.report[n].mptd_us for r in runs]) for n in names},
        ))
    return out


def _csv(rows: list[list[str]], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def runs_csv(results: Sequence[RunResult]) -> str:
    rows = [_row(r, c) for r in results for c in r.report.rows()]
    return _csv(rows, RUN_COLUMNS)


def comparison_csv(results: Sequence[RunResult]) -> str:
    rows = []
    scenario = results[0].scenario
    for s in summarize(results):
        for c in s.pooled.rows():
            rows.append([
                scenario, s.policy.value, c.media, str(len(s.seeds)),
                str(c.offered_pkts), str(c.delivered_pkts), _num(c.plr), _num(s.plr_se[c.media]),
                _num(c.mptd_us), _num(s.mptd_se[c.media]), _num(c.throughput_bps), _num(c.rho),
            ])
    return _csv(rows, COMPARISON_COLUMNS)


def _cell(x, scale=1.0, fmt="{:.4f}") -> str:
    return "-" if x is None else fmt.format(x * scale)


def summary_text(results: Sequence[RunResult]) -> str:
    summaries = summarize(results)
    media = [c.media for c in summaries[0].pooled.rows()]
    lines = [f"scenario {results[0].scenario}, seeds "
             f"{','.join(str(s) for s in summaries[0].seeds)}", ""]
    for title, get, scale, fmt in (
        ("PLR", lambda c: c.plr, 1.0, "{:.4f}"),
        ("MPTD (ms)", lambda c: c.mptd_us, 1e-3, "{:.2f}"),
        ("throughput (kbit/s)", lambda c: c.throughput_bps, 1e-3, "{:.1f}"),
    ):
        lines.append(title)
        lines.append(f"  {'policy':<15}" + "".join(f"{m:>10}" for m in media))
        for s in summaries:
            cells = "".join(f"{_cell(get(s.pooled[m]), scale, fmt):>10}" for m in media)
            lines.append(f"  {s.policy.value:<15}{cells}")
        lines.append("")
    return "\n".join(lines)


def emit_report(results: Sequence[RunResult], out_dir: str | Path) -> list[Path]:
    """Write runs.csv, comparison.csv and summary.txt into ``out_dir``.

    Output depends only on the results' reports, so re-emitting the same
    results gives byte-identical files.
    """
    if not results:
        raise ValueError("no results to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "runs.csv": runs_csv(results),
        "comparison.csv": comparison_csv(results),
        "summary.txt": summary_text(results),
    }
    paths = []
    for name, text in files.items():
        path = out / name
        path.write_text(text)
        paths.append(path)
    return paths
