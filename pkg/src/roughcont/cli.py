"""Command line entry point.

    roughcont commutator --config c07_commutator --out runs/c07 --format json

Exit status: 0 when every check passes, 1 when a check fails, 2 on a
configuration or I/O error.
"""

from __future__ import annotations

import argparse
import sys

from . import _accel
from .config import ConfigError, load_config
from .harness import emit_outputs

DEFAULT_CONFIG = {
    "simulate": "c01_mass",
    "seminorm": "c09_seminorm",
    "commutator": "c07_commutator",
    "convergence": "c06_convergence",
    "besov-check": "c08_besov",
    "regularity-envelope": "c05_envelope",
    "calibrate": "calibrate",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="roughcont", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, default in DEFAULT_CONFIG.items():
        p = sub.add_parser(name, help=f"run a {name} experiment (default config: {default})")
        p.add_argument("--config", default=default, help="INI file or the name of a pinned config")
        p.add_argument("--seed", type=int, default=None, help="override [meta] seed")
        p.add_argument("--out", default=None, help="output directory (default: [output] dir)")
        p.add_argument("--format", choices=("csv", "json", "svg"), default=None)
        p.add_argument("--threads", type=int, default=0, help="numba worker threads (0: library default)")
        p.add_argument("--quiet", action="store_true")
    return parser


def _report(rec, stream):
    for c in rec.checks:
        mark = "PASS" if c.passed else "FAIL"
        extra = f"  ({c.detail})" if c.detail else ""
        print(f"{mark}  {c.name}: {c.value:.6g} vs {c.threshold:.6g}{extra}", file=stream)
    print(f"{rec.kind} done in {rec.wall_clock:.1f}s [{rec.backend}]", file=stream)


def main(argv=None):
    from .experiments import run_experiment

    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.kind != args.command:
            raise ConfigError(f"config {args.config} is a {cfg.kind!r} experiment, not {args.command!r}")
        if args.seed is not None:
            cfg = cfg.with_overrides(meta__seed=args.seed)
        _accel.set_threads(args.threads)
        rec = run_experiment(cfg)
        fmt = args.format or cfg["output"]["format"]
        out = args.out or cfg["output"]["dir"]
        paths = emit_outputs([rec], fmt, out, stem=cfg["meta"]["name"] or args.command)
    except (ValueError, OSError) as exc:  # ConfigError and violated preconditions
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        _report(rec, sys.stdout)
        for p in paths:
            print(f"wrote {p}")
    return 0 if rec.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
