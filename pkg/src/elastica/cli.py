"""Command-line entry point: ``elastica <command> [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .config import COMMANDS, DESIGN_INITIALIZATIONS, ConfigError, parse_config
from .experiments import run_experiment
from .state import STATE_INITIALIZATIONS

# flag -> help; all values are passed through as strings and parsed with the config file rules
_FLAGS = {
    "level-coarse": "coarsest grid level of the multilevel solve",
    "level-fine": "finest grid level (N = 2^level + 1 nodes)",
    "delta": "force magnitude",
    "K0": "clamp angle in radians",
    "a": "soft material stiffness",
    "b": "hard material stiffness",
    "stiffness": "homogeneous stiffness for solve-state (default b)",
    "cl": "cost per unit length of hard material",
    "cp": "perimeter weight",
    "eps": "interface width (default h)",
    "init": f"state initialization, one of {', '.join(STATE_INITIALIZATIONS)}",
    "design-init": f"phase-field initialization, one of {', '.join(DESIGN_INITIALIZATIONS)}",
    "constraints": 'point constraints, e.g. "(0.5, -0.3, 0); (1, -0.6, 0)"',
    "max-iter": "BFGS iteration limit",
    "theta": "constant volume fraction for homogenize",
    "periods": "laminate period counts for homogenize, e.g. 8,32,128",
    "placement": "laminate layout for homogenize, leading or centered",
    "out": "output directory",
    "seed": "random seed for the random phase-field initialization",
    "base-command": "command run at every sweep point",
    "sweep-param": "config key varied by sweep",
    "sweep-values": "comma-separated values for the sweep parameter",
    "workers": "concurrent sweep runs",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elastica", description="Optimal material layout for a clamped elastic beam.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", help="plain key = value configuration file")
        for flag, text in _FLAGS.items():
            p.add_argument(f"--{flag}", dest=flag.replace("-", "_"), metavar="VALUE", help=text)
        # aliases for the sweep flags
        p.add_argument("--param", dest="sweep_param", metavar="VALUE", help=argparse.SUPPRESS)
        p.add_argument("--values", dest="sweep_values", metavar="VALUE", help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "verbose") and v is not None}
    try:
        cfg = parse_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"elastica: configuration error: {exc}", file=sys.stderr)
        return 2
    start = time.perf_counter()
    art = run_experiment(cfg)
    elapsed = time.perf_counter() - start
    rec = art.record
    print(f"{cfg.command}: {rec['status']} in {elapsed:.1f} s, results in {art.directory}")
    for line in rec["violations"][:20]:
        print(f"  {line}")
    if len(rec["violations"]) > 20:
        print(f"  ... {len(rec['violations']) - 20} more in the record")
    return art.exit_code


if __name__ == "__main__":
    sys.exit(main())
