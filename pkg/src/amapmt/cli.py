"""Command line entry point: ``amapmt run | compare | presets``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import PRESETS, ConfigError, dumps, load_scenario
from .runner import emit_report, run_matrix, run_one, summary_text
from .scheduler import ALL_MODES, Mode
from .traffic import Distribution

log = logging.getLogger("amapmt")


def _seeds(text: str) -> tuple[int, ...]:
    """``3`` or ``1,4,7`` or ``1-10``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty seed list")
    return tuple(out)


def _scenario(args):
    sc = load_scenario(args.scenario)
    changes = {}
    if args.duration is not None:
        changes["duration"] = args.duration
    if args.distribution is not None:
        changes["distribution"] = Distribution(args.distribution)
    if args.mean_size is not None:
        changes["mean_size"] = args.mean_size
    if getattr(args, "seeds", None) is not None:
        changes["seeds"] = args.seeds
    return replace(sc, **changes) if changes else sc


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", default="table-5-4",
                   help="scenario file or preset name (default: table-5-4)")
    p.add_argument("--duration", type=float, help="simulated seconds")
    p.add_argument("--distribution", choices=[d.value for d in Distribution],
                   help="override the arrival/size distribution")
    p.add_argument("--mean-size", type=int, help="override the mean transaction size (bytes)")
    p.add_argument("--out", help="directory for runs.csv, comparison.csv, summary.txt")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amapmt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one scenario, policy and seed")
    _add_common(run)
    run.add_argument("--policy", default=None, help="policy mode (default: the scenario's)")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--trace", help="write the event trace to this file")
    run.add_argument("--check", action="store_true",
                     help="verify packet conservation at every frame boundary")

    cmp_ = sub.add_parser("compare", help="every policy over a seed list")
    _add_common(cmp_)
    cmp_.add_argument("--policy", action="append",
                      help="policy mode, repeatable (default: all four)")
    cmp_.add_argument("--seeds", type=_seeds, help="e.g. 1-10 or 1,2,5")
    cmp_.add_argument("--workers", type=int, default=1)
    cmp_.add_argument("--check", action="store_true")

    pre = sub.add_parser("presets", help="list built-in scenarios or dump one")
    pre.add_argument("--dump", metavar="NAME", help="print the named preset as a scenario file")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (ConfigError, ValueError) as exc:
        print(f"amapmt: error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "presets":
        if args.dump:
            if args.dump not in PRESETS:
                raise ConfigError(f"unknown preset {args.dump!r}")
            sys.stdout.write(dumps(PRESETS[args.dump]))
        else:
            for name in PRESETS:
                print(name)
        return 0

    sc = _scenario(args)
    if args.command == "run":
        mode = Mode.parse(args.policy) if args.policy else sc.policy.mode
        seed = args.seed if args.seed is not None else sc.seeds[0]
        if args.trace:
            with open(args.trace, "w") as trace:
                result = run_one(sc, mode, seed, trace=trace, check_conservation=args.check)
        else:
            result = run_one(sc, mode, seed, check_conservation=args.check)
        results = [result]
    else:
        modes = [Mode.parse(p) for p in args.policy] if args.policy else list(ALL_MODES)
        results = run_matrix(sc, modes, workers=args.workers, check_conservation=args.check)
    for r in results:
        log.info("%s seed %d: %.2f s wall", r.policy.value, r.seed, r.wall_s)
    if args.out:
        for path in emit_report(results, args.out):
            print(path)
    else:
        print(summary_text(results))
    return 0


if __name__ == "__main__":
    sys.exit(main())
