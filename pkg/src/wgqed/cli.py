"""wgqed command-line interface.

    wgqed spectrum --config exp.yaml --out results/
    wgqed presets list
    wgqed presets run fig3b --out results/fig3b --workers 4

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from wgqed.config import ConfigError, load_config, save_config
from wgqed.experiments import TOLERANCE_PROFILES, run_experiment
from wgqed.presets import PRESETS
from wgqed.waveguide_green import FieldMapError, UnphysicalCouplingError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
VERBS = ("spectrum", "g2", "populations", "coupling-map")


def _common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", required=True, help="YAML experiment file")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--tolerance-profile", choices=sorted(TOLERANCE_PROFILES), default="default")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wgqed", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        _common(sub.add_parser(verb, help=f"run a {verb} experiment from a config file"))
    pre = sub.add_parser("presets", help="figure presets")
    psub = pre.add_subparsers(dest="action", required=True)
    psub.add_parser("list", help="list presets")
    run = psub.add_parser("run", help="run a preset and its checks")
    run.add_argument("name")
    _common(run, config=False)
    return ap


def _run_config(args) -> int:
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    if cfg.command != args.verb:
        print(f"error: {args.config}: command is {cfg.command!r} but verb is {args.verb!r}",
              file=sys.stderr)
        return EXIT_CONFIG
    bundle = run_experiment(cfg, workers=args.workers, tolerance_profile=args.tolerance_profile,
                            base_dir=Path(args.config).resolve().parent)
    for p in bundle.write(args.out):
        print(p)
    return EXIT_OK


def _run_preset(args) -> int:
    preset = PRESETS.get(args.name)
    if preset is None:
        print(f"error: unknown preset {args.name!r}; try 'wgqed presets list'", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if preset.prepare:
        preset.prepare(out)
    save_config(preset.config, out / "config.yaml")
    bundle = run_experiment(preset.config, workers=args.workers,
                            tolerance_profile=args.tolerance_profile, base_dir=out)
    checks = preset.checks(bundle)
    bundle = replace(bundle, provenance={**bundle.provenance,
                                         "checks": [c.__dict__ for c in checks]})
    bundle.write(out)
    for c in checks:
        print(c.line())
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "presets":
            if args.action == "list":
                for name, p in PRESETS.items():
                    print(f"{name:16s} {p.description}")
                return EXIT_OK
            return _run_preset(args)
        return _run_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"I/O error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FieldMapError, UnphysicalCouplingError) as exc:
        print(f"field map error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
