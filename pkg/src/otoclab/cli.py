"""Command-line driver.

``otoclab <mode> --out DIR [--config FILE] [--KEY VALUE ...]`` where mode
is one of otoc, classical, rmt, husimi, sweep.  Flags override keys from
the config file.  Exit codes: 0 success, 2 configuration error, 3
numerical or fit failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import (KEYS, MODES, ConfigError, ExperimentConfig, apply_overrides,
                     parse_config)
from .io import to_jsonable
from .runner import ExperimentError, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _grid_arg(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected AXIS=v1,v2,...")
    k, v = text.split("=", 1)
    return k.strip(), v


def build_parser():
    parser = argparse.ArgumentParser(
        prog="otoclab", description="OTOCs of coupled kicked rotors.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="mode", required=True)
    epilog = "config keys, settable as --KEY VALUE: " + ", ".join(
        f"--{k.replace('_', '-')}" for k in KEYS if k != "mode")
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run a {mode} experiment", epilog=epilog)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="key = value config file")
        for key in KEYS:
            if key == "mode":
                continue
            p.add_argument(f"--{key.replace('_', '-')}", dest=f"set_{key}",
                           metavar="VALUE", help=argparse.SUPPRESS)
        if mode == "sweep":
            p.add_argument("--grid", action="append", type=_grid_arg, default=[],
                           metavar="AXIS=V1,V2", help="sweep axis (repeatable)")
    return parser


def load_config(args):
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
        if cfg.mode != args.mode:
            cfg = cfg.replace(mode=args.mode)
    else:
        cfg = None
    overrides = {k[4:]: v for k, v in vars(args).items()
                 if k.startswith("set_") and v is not None}
    grid = dict(getattr(args, "grid", []) or [])
    if cfg is None:
        # validated below, once flags (and a sweep's grid) are applied
        cfg = ExperimentConfig(mode=args.mode)
    return apply_overrides(cfg, overrides, grid)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run_experiment(cfg, args.out)
    except ExperimentError as exc:
        kind = "config error" if exc.exit_code == EXIT_CONFIG else "numeric error"
        print(f"{kind}: {exc}", file=sys.stderr)
        return exc.exit_code
    summary = {"out": args.out, "outputs": sorted(manifest["outputs"]),
               "derived": manifest["derived"]}
    print(json.dumps(to_jsonable(summary), indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
