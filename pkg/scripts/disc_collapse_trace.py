"""Print one discriminator-collapse trace side by side.

    python3 scripts/disc_collapse_trace.py [--run 0] [--every 10]

Columns: generation, then interval lengths and loss of the best
discriminator under coevolution and under the gradient baseline, both
started from the same short generator-dominated intervals.
"""
import argparse

from coevgan.config import ExperimentConfig
from coevgan.experiments import disc_collapse_traces


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--run", type=int, default=0)
    ap.add_argument("--every", type=int, default=10)
    args = ap.parse_args()
    coev, base = disc_collapse_traces(ExperimentConfig(), args.run)
    print(f"{'gen':>4} {'coev_left':>10} {'coev_right':>10} {'coev_L':>8} {'base_left':>10} {'base_right':>10} {'base_L':>8}")
    for c, b in zip(coev, base):
        if c[1] % args.every == 0 or c[1] == coev[-1][1]:
            print(f"{c[1]:4d} {c[6]:10.4f} {c[7]:10.4f} {c[8]:8.4f} {b[6]:10.2e} {b[7]:10.2e} {b[8]:8.4f}")


if __name__ == "__main__":
    main()
