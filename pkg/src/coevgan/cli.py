"""Command-line entry point: ``coevgan <experiment> [options]``.

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from . import experiments
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, default_out_dir, load_config

log = logging.getLogger("coevgan")

# Keys with a dedicated global flag; every other config key gets --<key>.
_GLOBAL_KEYS = {"master_seed", "paper_scale", "workers", "fitness_weighting", "execution", "experiment"}


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", metavar="PATH", help="flat key = value config file")
    g.add_argument("--seed", type=int, dest="master_seed", help="master seed")
    g.add_argument("--out", metavar="DIR", help="output directory (default: $COEVGAN_OUT or ./results)")
    g.add_argument("--paper-scale", action="store_const", const=True, dest="paper_scale",
                   help="full 0.1-step heatmap sweep with 120 runs per bin")
    g.add_argument("--workers", type=int, help="parallel workers")
    g.add_argument("--weighted-fitness", action="store_const", const="weighted", dest="fitness_weighting",
                   help="weight fitness terms by the mixture weights")
    mode = g.add_mutually_exclusive_group()
    mode.add_argument("--async", action="store_const", const="async", dest="execution")
    mode.add_argument("--sync", action="store_const", const="sync", dest="execution")
    g.add_argument("-v", "--verbose", action="store_true")
    k = p.add_argument_group("config keys (override the file)")
    for f in fields(ExperimentConfig):
        if f.name in _GLOBAL_KEYS:
            continue
        k.add_argument("--" + f.name.replace("_", "-"), dest=f.name, metavar=f.type.upper(), default=None)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coevgan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common])
    return parser


def _overrides(args) -> dict:
    skip = {"command", "config", "out", "verbose"}
    return {k: v for k, v in vars(args).items() if k not in skip and v is not None}


def _report(command, cfg, summary):
    if command in ("converge", "baseline"):
        for key, val in summary.items():
            if key.endswith("successes"):
                print(f"{key}: {val}/{summary['runs']}")
    elif command == "mode-collapse":
        for name, res in summary.items():
            print(f"{name}: mean success {res.success_rate.mean():.3f}, "
                  f"diagonal {experiments.diagonal_mean(res):.3f}")
    elif command == "disc-collapse":
        res, _ = summary
        print("success rate (rows top to bottom: right sign +/-; cols: left sign -/+)")
        print(res.success_rate[::-1])
    elif command == "grid-run":
        print(f"best neighborhood k={summary['k']} g={summary['g']:.6g}")


def run(command: str, cfg: ExperimentConfig, out: str):
    if command == "converge":
        return experiments.converge(cfg, out)
    if command == "baseline":
        return experiments.baseline(cfg, out)
    if command == "mode-collapse":
        return experiments.mode_collapse_heatmap(cfg, out)
    if command == "disc-collapse":
        return experiments.disc_collapse_heatmap(cfg, out)
    if command == "grid-run":
        return experiments.grid_run(cfg, out)
    raise ConfigError(f"unknown experiment {command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = _overrides(args)
        overrides["experiment"] = args.command
        cfg = load_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"coevgan: configuration error: {exc}", file=sys.stderr)
        return 1
    out = args.out or default_out_dir()
    try:
        summary = run(args.command, cfg, out)
    except Exception as exc:  # noqa: BLE001
        log.debug("run failed", exc_info=True)
        print(f"coevgan: {args.command} failed: {exc}", file=sys.stderr)
        return 2
    _report(args.command, cfg, summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
