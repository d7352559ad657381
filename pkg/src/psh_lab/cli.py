"""``psh-lab`` command line.

Exit codes: 0 every hard check passed, 1 some check failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import report
from .report import ConfigError, RunConfig

COMMANDS = {
    "verify-lemmas": ["lemmas"],
    "counterexample": ["counterexample"],
    "constants": ["constants"],
    "curves": ["curves"],
    "all": None,  # the config's suite list
}


def _parser():
    p = argparse.ArgumentParser(prog="psh-lab", description="Numerical checks for the psh interpolant construction.")
    p.add_argument("command", choices=list(COMMANDS))
    p.add_argument("--config", help="JSON run configuration (defaults apply when omitted)")
    p.add_argument("--points", type=int, help="sample count for the lemma sweep")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--out", help="directory for report JSON and sweep CSV")
    p.add_argument("--quiet", action="store_true", help="print the summary only")
    return p


def _load(args) -> RunConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                d = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {args.config}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {args.config} is not valid JSON: {e}") from None
    else:
        d = {}
    d = dict(d)
    if args.points is not None:
        if args.points < 1:
            raise ConfigError("--points must be positive")
        grids = dict(d.get("grids", {}))
        lem = dict(grids.get("lemmas", {}))
        lem["points"] = args.points
        grids["lemmas"] = lem
        d["grids"] = grids
    if args.seed is not None:
        d["seed"] = args.seed
    if args.out is not None:
        d["output"] = {**d.get("output", {}), "dir": args.out}
    return RunConfig.from_dict(d)


def _run_suite(name, cfg, log):
    if name == "lemmas":
        return report.run_lemmas(cfg, log), None
    if name == "counterexample":
        return report.run_counterexample(cfg, log), None
    if name == "constants":
        return report.run_constants(cfg, log), None
    return report.run_curves(cfg, log)


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    try:
        cfg = _load(args)
    except ConfigError as e:
        print(f"psh-lab: config error: {e}", file=sys.stderr)
        return 2

    log = None if args.quiet else print
    suites = COMMANDS[args.command] or cfg.suites
    out_dir = cfg.output.get("dir")
    status = 0
    for name in suites:
        if log:
            log(f"== {name}")
        try:
            rep, csv = _run_suite(name, cfg, log)
        except ConfigError as e:
            print(f"psh-lab: config error: {e}", file=sys.stderr)
            return 2
        except Exception as e:  # numerical failure inside a suite
            print(f"psh-lab: suite {name} failed: {type(e).__name__}: {e}", file=sys.stderr)
            status = 1
            continue
        failed = [c.name for c in rep.checks if c.hard and c.status == "fail"]
        flagged = sum(c.status == "flagged" for c in rep.checks)
        print(f"{name}: {rep.status.upper()} ({len(rep.checks)} checks, {len(failed)} failed, {flagged} flagged)")
        if rep.status == "fail":
            status = 1
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, f"report_{name}.json"), "w") as fh:
                fh.write(rep.to_json())
            if csv is not None:
                with open(os.path.join(out_dir, cfg.output.get("csv", "curves.csv")), "w") as fh:
                    fh.write(csv)
    return status


if __name__ == "__main__":
    sys.exit(main())
