"""Pilot run behind the convergence threshold.

Measures the coevolution success fraction of the convergence setup
(T=10, 100 generations, sigma=1, target (-3, 3), 30 seeded runs) for a few
selection settings and writes tests/fixtures/convergence_pilot.csv.

    python3 scripts/pilot_convergence.py [--runs 30] [--out PATH]
"""
import argparse
import dataclasses
from pathlib import Path

from coevgan import coevo, experiments
from coevgan.config import ExperimentConfig
from coevgan.experiments import write_csv
from coevgan.problem import TheoreticalGAN, success

SELECTION = (1.0, 0.9, 0.5, 0.0)


def success_fraction(cfg):
    problem = TheoreticalGAN(cfg.target)
    ok = 0
    for run in range(cfg.runs):
        rng = experiments.stream(cfg, experiments.EXP_CONVERGE, run)
        gens, discs = experiments.init_population(cfg, rng)
        u, _ = coevo.run_basic(gens, discs, problem, experiments.coev_config(cfg, cfg.generations), rng)
        ok += success(u[0].params, cfg.target, cfg.success_threshold)
    return ok


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--runs", type=int, default=30)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests/fixtures/convergence_pilot.csv"))
    args = ap.parse_args()
    rows = []
    for alpha in SELECTION:
        cfg = dataclasses.replace(ExperimentConfig(), runs=args.runs, selection_prob=alpha)
        ok = success_fraction(cfg)
        rows.append((alpha, ok, cfg.runs, ok / cfg.runs))
        print(f"selection_prob={alpha}: {ok}/{cfg.runs}")
    write_csv(args.out, ("selection_prob", "successes", "runs", "success_rate"), rows)


if __name__ == "__main__":
    main()
