"""Command-line entry point: ``planpace run|oracle|report``.

Exit codes: 0 ok, 1 run failure, 2 config or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness

EXIT_OK, EXIT_RUN, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="planpace", description="Budget pacing with spending plans: simulations and baselines.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate the configured learner over seeds and horizons")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--seed", type=int, default=None, help="run only this seed")
    r.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
    r.add_argument("--strict", action="store_true", help="fail on any clamped payoff")

    o = sub.add_parser("oracle", help="print the optimal baselines for each configured horizon")
    o.add_argument("--config", required=True, type=Path)

    rep = sub.add_parser("report", help="aggregate summary CSVs into a sweep table")
    rep.add_argument("--in", dest="indir", required=True, type=Path)
    rep.add_argument("--svg", action="store_true", help="also write a log-log chart of median regret")
    rep.add_argument("--strict", action="store_true", help="nonzero exit if any row was malformed")
    return p


def cmd_run(args) -> int:
    try:
        cfg = harness.load_config(args.config)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.seeds = [args.seed]
    try:
        results = harness.execute(cfg, strict=args.strict)
    except Exception as exc:  # ZeroRhoMin, RunFailure, LP errors, ...: all map to exit 1
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUN
    out = harness.write_outputs(cfg, results, args.out)
    print(f"wrote {len(results)} summary rows to {out / 'summary.csv'}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        cfg = harness.load_config(args.config)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text = harness.oracle_csv(cfg)
    except Exception as exc:
        print(f"oracle failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUN
    sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        res = harness.sweep_report(args.indir)
    except harness.EmptyInput as exc:
        print(f"report: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    (args.indir / "aggregate.csv").write_text(res.csv_text, encoding="utf-8")
    sys.stdout.write(res.csv_text)
    if args.svg:
        try:
            (args.indir / "regret.svg").write_text(harness.svg_chart(res.groups), encoding="utf-8")
        except Exception as exc:  # plotting never decides the exit code
            print(f"warning: chart not written ({exc})", file=sys.stderr)
    if res.skipped:
        print(f"warning: skipped {res.skipped} malformed rows", file=sys.stderr)
        if args.strict:
            return EXIT_RUN
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return {"run": cmd_run, "oracle": cmd_oracle, "report": cmd_report}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
