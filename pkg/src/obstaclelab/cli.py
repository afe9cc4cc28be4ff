"""Command line front end: ``obstaclelab <command> --config FILE --out DIR``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import parse_config, parse_config_text
from .errors import ConfigurationError
from .experiments import run, summary_lines

COMMANDS = {
    "solve": "solve",
    "ladder": "epsilon-ladder",
    "monotonicity": "monotonicity",
    "probe": "regularity-sweep",
    "convergence": "convergence",
    "validate": "validate",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obstaclelab", description="Two-phase parabolic obstacle problem lab.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, kind in COMMANDS.items():
        s = sub.add_parser(name, help=f"run a {kind} experiment")
        s.add_argument("--config", help="key = value config file (defaults are used when omitted)")
        s.add_argument("--out", help="output directory (overrides output.dir)")
        s.add_argument("--workers", type=int, help="parallel worker processes (overrides run.workers)")
        s.add_argument("--seedless", action="store_true", help="accepted for compatibility; every run is deterministic")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
        s.add_argument("-q", "--quiet", action="store_true", help="print only the final status line")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    overrides = {"kind": COMMANDS[args.command]}
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return 2
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.workers is not None:
        overrides["run.workers"] = args.workers
    try:
        if args.config:
            cfg = parse_config(args.config, overrides)
        else:
            cfg = parse_config_text("", "<defaults>", overrides)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    res = run(cfg, args.out)
    if not args.quiet:
        for line in summary_lines(res):
            print(line)
    status = "PASS" if res.passed else ("ERROR" if res.error else "FAIL")
    print(f"{status}: {cfg.kind} -> {res.out_dir}")
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
