"""``slowlayer <subcommand> --config <path> [--out <dir>] [--plot]``"""
from __future__ import annotations

import argparse
import json
import sys
import traceback

from .config import SUBCOMMANDS, load_config
from .errors import SlowLayerError

EXIT_CODES = {"schema": 2, "domain": 3, "numerical": 4, "resolution": 5, "tracking": 6,
              "positivity": 7}


def _module_of(exc):
    """Innermost package module in the traceback, for error context."""
    mod = None
    for fr in traceback.extract_tb(exc.__traceback__):
        if "slowlayer" in fr.filename:
            mod = fr.filename.rsplit("/", 1)[-1].removesuffix(".py")
    return mod


def build_parser():
    ap = argparse.ArgumentParser(prog="slowlayer",
                                 description="Slow motion of viscous transition layers.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="experiment config ([section] key = value)")
    ap.add_argument("--out", default=None, help="output directory (overrides output.directory)")
    ap.add_argument("--plot", action="store_true", default=None, help="also write SVG plots")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from .experiments import run_experiment  # heavy imports after argument parsing
    try:
        cfg = load_config(args.config)
        ctx = run_experiment(cfg, args.subcommand, out_dir=args.out, plot=args.plot)
    except SlowLayerError as exc:
        err = {"error": exc.category, "type": type(exc).__name__, "message": str(exc),
               "module": _module_of(exc)}
        if getattr(exc, "keys", None):
            err["keys"] = exc.keys
        print(json.dumps(err), file=sys.stderr)
        return EXIT_CODES.get(exc.category, 4)
    except (FloatingPointError, ArithmeticError, ValueError) as exc:
        err = {"error": "numerical", "type": type(exc).__name__, "message": str(exc),
               "module": _module_of(exc)}
        print(json.dumps(err), file=sys.stderr)
        return EXIT_CODES["numerical"]
    for p in ctx.files:
        print(p)
    for k, v in sorted(ctx.summary.items()):
        print(f"{k} = {v}")
    return 0


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
