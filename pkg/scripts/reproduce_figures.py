"""Run every experiment at desk scale into one output directory.

    python3 scripts/reproduce_figures.py [--out results] [--workers N] [--paper-scale]

Produces the convergence traces, both heatmaps (CSV + PGM + SVG), the
discriminator-collapse traces and a spatial grid run with its mixture report.
The paper-scale sweep takes days on one core.
"""
import argparse
import sys

from coevgan.cli import main as cli

RUNS = (
    ("converge", []),
    ("baseline", []),
    ("mode-collapse", ["--svg", "1"]),
    ("disc-collapse", ["--svg", "1", "--trace", "1"]),
    ("grid-run", ["--grid-m", "3", "--generations", "50"]),
)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--paper-scale", action="store_true")
    args = ap.parse_args()
    common = ["--out", args.out, "--workers", str(args.workers), "--seed", str(args.seed)]
    if args.paper_scale:
        common.append("--paper-scale")
    for name, extra in RUNS:
        print(f"== {name}", flush=True)
        code = cli([name, *common, *extra])
        if code:
            sys.exit(code)


if __name__ == "__main__":
    main()
