"""Command-line harness for the experiments and primitive inspection.

Subcommands: ``toy1d``, ``loss-scan``, ``moments``, ``sample-sweep``
(each reading an optional INI config and writing CSVs plus a run
manifest), ``blur-demo`` (prints the knots of a blurred unit-interval
step), and ``selfcheck`` (runs the built-in oracle suite).

Exit codes: 0 success, 1 runtime failure (or failed selfcheck), 2 bad
config or usage.
"""

import argparse
import dataclasses
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .configfile import ConfigError, load_config
from .experiments import (
    MomentConfig,
    ScanConfig,
    SweepConfig,
    Toy1DConfig,
    config_comment,
    run_loss_scan,
    run_moment_report,
    run_sample_sweep,
    run_toy1d,
)
from .selfcheck import run_selfcheck
from .stepfun import StepFunction, blur_stepfun

EXPERIMENTS = {
    "toy1d": (Toy1DConfig, run_toy1d),
    "loss-scan": (ScanConfig, run_loss_scan),
    "moments": (MomentConfig, run_moment_report),
    "sample-sweep": (SweepConfig, run_sample_sweep),
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="prefield",
        description="Anti-aliased grid-feature and histogram-loss experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="INI config file (defaults used when omitted)")
        p.add_argument("--out", default=f"out/{name}", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--fast-erf", action="store_true",
                       help="use the fast erf approximation for downweighting")
    demo = sub.add_parser("blur-demo", help="blur the unit-interval step and print knots")
    demo.add_argument("--r", type=float, default=0.25, help="pulse radius")
    sub.add_parser("selfcheck", help="run the built-in oracle suite")
    return parser


def _resolve_config(args):
    cls, runner = EXPERIMENTS[args.command]
    section = args.command.replace("-", "_")
    if args.config:
        config = load_config(args.config, section, cls)
    else:
        config = cls()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.fast_erf and any(f.name == "use_fast_erf" for f in dataclasses.fields(cls)):
        updates["use_fast_erf"] = True
    if updates:
        config = dataclasses.replace(config, **updates)
    return config, runner


def _write_manifest(out_dir, command, config):
    resolved = config_comment(config)
    manifest = {
        "command": command,
        "config": resolved,
        "config_sha256": hashlib.sha256(resolved.encode()).hexdigest(),
        "seed": getattr(config, "seed", None),
        "prefield_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "python_version": platform.python_version(),
    }
    path = Path(out_dir) / "run_manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)

    if args.command == "selfcheck":
        all_ok, results = run_selfcheck()
        width = max(len(name) for name, _, _ in results)
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
        print("selfcheck:", "all checks passed" if all_ok else "FAILURES above")
        return 0 if all_ok else 1

    if args.command == "blur-demo":
        try:
            out = blur_stepfun(StepFunction(np.array([0.0, 1.0]), np.array([1.0])), args.r)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for x, y in zip(out.knots, out.values):
            print(f"({x:.17g}, {y:.17g})")
        return 0

    try:
        config, runner = _resolve_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        runner(config, out_dir=args.out)
        manifest = _write_manifest(args.out, args.command, config)
    except Exception as exc:  # runtime failure, distinct from bad config
        print(f"error: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    print(f"{args.command}: outputs in {args.out} (manifest: {manifest})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
