"""Experiment drivers behind the CLI.

Every (bin, run) pair draws from its own stream,
``SeedSequence(master_seed, spawn_key=(experiment_id, bin, run))``, so the
output does not depend on how work is split across processes.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import coevo, grid as gridmod
from .coevo import CoevConfig, Individual
from .config import ExperimentConfig
from .mixture import NegL2DensityDistance, select_best_mixture
from .problem import (GeneratorParams, InfeasibleQuadrant, TheoreticalGAN, loss, repair,
                      sample_disc_in_quadrant, simultaneous_gradient_step, success)

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("run", "generation", "mu1", "mu2", "l1", "r1", "l2", "r2", "best_gen_fitness", "best_disc_fitness")
HEATMAP_COLUMNS = ("dynamic", "row", "col", "mu1_lo", "mu1_hi", "mu2_lo", "mu2_hi", "successes", "runs", "success_rate")
DISC_HEATMAP_COLUMNS = ("dynamic", "left_sign", "right_sign", "applicable", "successes", "runs", "success_rate")
DISC_TRACE_COLUMNS = ("dynamic", "generation", "l1", "r1", "l2", "r2", "left_length", "right_length", "loss")
NEIGHBORHOOD_COLUMNS = ("k", "row", "col", "generation", "g", "selected")
MIXTURE_COLUMNS = ("k", "component", "weight", "mu1", "mu2")
QUADRANTS = ((1, 1), (-1, 1), (1, -1), (-1, -1))  # (left sign, right sign)

EXP_CONVERGE, EXP_MODE, EXP_DISC, EXP_GRID, EXP_BASELINE = range(5)


def stream(cfg: ExperimentConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=cfg.master_seed, spawn_key=key))


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def coev_config(cfg: ExperimentConfig, generations: int, **extra) -> CoevConfig:
    return CoevConfig(generations=generations, selection_probs=cfg.selection_prob,
                      mutation_probs=cfg.mutation_prob, mutation_step=cfg.mutation_step,
                      lr_mutation_sigma=cfg.lr_mutation_sigma, mutation_kind=cfg.mutation_kind,
                      fitness_weighting=cfg.fitness_weighting, **extra)


def init_population(cfg, rng, gen_box=None):
    """Generators uniform in ``gen_box`` ((lo1, hi1), (lo2, hi2)), discriminators sorted uniform."""
    if gen_box is None:
        gen_box = ((cfg.gen_init_lo, cfg.gen_init_hi),) * 2
    lo = np.array([gen_box[0][0], gen_box[1][0]])
    hi = np.array([gen_box[0][1], gen_box[1][1]])
    gens = [Individual(rng.uniform(lo, hi), cfg.initial_lr) for _ in range(cfg.pop_size)]
    discs = [Individual(np.asarray(repair(rng.uniform(cfg.disc_init_lo, cfg.disc_init_hi, size=4))), cfg.initial_lr)
             for _ in range(cfg.pop_size)]
    return gens, discs


# -- convergence traces -------------------------------------------------------

def run_coev_trace(cfg, problem, gens, discs, generations, rng, run=0):
    records = []

    def observe(g, u, v, fm):
        records.append((run, g, *u[0].params, *v[0].params, u[0].fitness, v[0].fitness))

    u, v = coevo.run_basic(gens, discs, problem, coev_config(cfg, generations), rng, observer=observe)
    return records, GeneratorParams(*u[0].params)


def run_baseline_trace(cfg, target, gen, disc, generations, run=0, lr_gen=None):
    gen = GeneratorParams(*map(float, gen))
    disc = repair(disc)
    lr_gen = cfg.baseline_lr_gen if lr_gen is None else lr_gen
    records = []

    def record(g):
        L = loss(gen, disc, target)
        records.append((run, g, *gen, *disc, -L, L))

    record(0)
    for g in range(1, generations + 1):
        for _ in range(cfg.baseline_steps_per_generation):
            gen, disc = simultaneous_gradient_step(gen, disc, target, lr_gen, cfg.baseline_lr_disc,
                                                   cfg.baseline_alternating, cfg.baseline_constraint)
        record(g)
    return records, gen


def converge(cfg: ExperimentConfig, out_dir) -> dict:
    """Coevolution and gradient-baseline traces from shared initializations."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = TheoreticalGAN(cfg.target)
    coev_rows, base_rows = [], []
    coev_ok = base_ok = 0
    for run in range(cfg.runs):
        rng = stream(cfg, EXP_CONVERGE, run)
        gens, discs = init_population(cfg, rng)
        rows, best = run_coev_trace(cfg, problem, gens, discs, cfg.generations, rng, run)
        coev_rows += rows
        coev_ok += success(best, cfg.target, cfg.success_threshold)
        rows, final = run_baseline_trace(cfg, cfg.target, gens[0].params, discs[0].params, cfg.generations, run)
        base_rows += rows
        base_ok += success(final, cfg.target, cfg.success_threshold)
    write_csv(out / "converge_coev.csv", TRACE_COLUMNS, coev_rows)
    write_csv(out / "converge_baseline.csv", TRACE_COLUMNS, base_rows)
    return {"coev_successes": coev_ok, "baseline_successes": base_ok, "runs": cfg.runs}


def baseline(cfg: ExperimentConfig, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    ok = 0
    for run in range(cfg.runs):
        rng = stream(cfg, EXP_BASELINE, run)
        gen = rng.uniform(cfg.gen_init_lo, cfg.gen_init_hi, size=2)
        disc = rng.uniform(cfg.disc_init_lo, cfg.disc_init_hi, size=4)
        r, final = run_baseline_trace(cfg, cfg.target, gen, disc, cfg.generations, run)
        rows += r
        ok += success(final, cfg.target, cfg.success_threshold)
    write_csv(out / "baseline.csv", TRACE_COLUMNS, rows)
    return {"baseline_successes": ok, "runs": cfg.runs}


# -- heatmaps -----------------------------------------------------------------

@dataclass
class HeatmapResult:
    """Success counts per bin; rows index the second axis, columns the first."""

    x_edges: np.ndarray
    y_edges: np.ndarray
    successes: np.ndarray  # int counts, shape (len(y_edges) - 1, len(x_edges) - 1)
    runs_per_cell: int
    applicable: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.applicable is None:
            self.applicable = np.ones(self.successes.shape, dtype=bool)

    @property
    def success_rate(self) -> np.ndarray:
        return self.successes / self.runs_per_cell


def bin_centers(cfg) -> np.ndarray:
    n = int(round((cfg.heatmap_hi - cfg.heatmap_lo) / cfg.heatmap_step)) + 1
    return cfg.heatmap_lo + cfg.heatmap_step * np.arange(n)


def _mode_collapse_bin(args):
    cfg, row, col = args
    centers = bin_centers(cfg)
    half = cfg.heatmap_step / 2.0
    box = ((centers[col] - half, centers[col] + half), (centers[row] - half, centers[row] + half))
    problem = TheoreticalGAN(cfg.target)
    n = len(centers)
    coev_ok = base_ok = 0
    for run in range(cfg.heatmap_runs):
        rng = stream(cfg, EXP_MODE, row * n + col, run)
        gens, discs = init_population(cfg, rng, box)
        u, _ = coevo.run_basic(gens, discs, problem, coev_config(cfg, cfg.heatmap_generations), rng)
        coev_ok += success(u[0].params, cfg.target, cfg.success_threshold)
        _, final = run_baseline_trace(cfg, cfg.target, gens[0].params, discs[0].params, cfg.heatmap_generations)
        base_ok += success(final, cfg.target, cfg.success_threshold)
    return row, col, coev_ok, base_ok


def _pool_map(fn, tasks, workers):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def mode_collapse_heatmap(cfg: ExperimentConfig, out_dir=None, workers: int | None = None):
    """Success rates per generator-initialization bin, for coevolution and the baseline."""
    centers = bin_centers(cfg)
    n = len(centers)
    edges = np.concatenate([centers - cfg.heatmap_step / 2, [centers[-1] + cfg.heatmap_step / 2]])
    tasks = [(cfg, r, c) for r in range(n) for c in range(n)]
    coev = np.zeros((n, n), dtype=int)
    base = np.zeros((n, n), dtype=int)
    for r, c, a, b in _pool_map(_mode_collapse_bin, tasks, workers or cfg.workers):
        coev[r, c] = a
        base[r, c] = b
    results = {"coev": HeatmapResult(edges, edges, coev, cfg.heatmap_runs),
               "baseline": HeatmapResult(edges, edges, base, cfg.heatmap_runs)}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for name, res in results.items():
            for r in range(n):
                for c in range(n):
                    rows.append((name, r, c, edges[c], edges[c + 1], edges[r], edges[r + 1],
                                 res.successes[r, c], res.runs_per_cell, res.success_rate[r, c]))
            write_pgm(out / f"mode_collapse_{name}.pgm", res.success_rate, cfg.image_scale)
            if cfg.svg:
                write_svg_heatmap(out / f"mode_collapse_{name}.svg", res)
        write_csv(out / "mode_collapse.csv", HEATMAP_COLUMNS, rows)
    return results


def diagonal_mean(res: HeatmapResult) -> float:
    return float(np.mean(np.diag(res.success_rate)))


def _disc_best_loss(problem, fixed, discs) -> float:
    return max(loss(fixed, d.params, problem.target) for d in discs)


def _disc_collapse_quadrant(args):
    cfg, qi = args
    quadrant = QUADRANTS[qi]
    problem = TheoreticalGAN(cfg.target)
    fixed = GeneratorParams(cfg.fixed_mu1, cfg.fixed_mu2)
    width = cfg.disc_max_width or None
    ok = 0
    ccfg = coev_config(cfg, cfg.generations, freeze_generators=True)
    for run in range(cfg.disc_runs):
        rng = stream(cfg, EXP_DISC, qi, run)
        try:
            discs = [Individual(np.asarray(sample_disc_in_quadrant(
                quadrant, fixed, cfg.target, (cfg.disc_bound_lo, cfg.disc_bound_hi), rng,
                cfg.quadrant_attempts, width)), cfg.initial_lr) for _ in range(cfg.pop_size)]
        except InfeasibleQuadrant:
            return qi, False, 0
        gens = [Individual(np.array(fixed), cfg.initial_lr) for _ in range(cfg.pop_size)]
        before = _disc_best_loss(problem, fixed, discs)
        _, v = coevo.run_basic(gens, discs, problem, ccfg, rng)
        after = loss(fixed, v[0].params, cfg.target)
        ok += after >= before + cfg.disc_margin
    return qi, True, ok


def collapse_init(cfg, rng):
    """A bottom-left (both intervals generator-dominated) discriminator with short intervals."""
    fixed = GeneratorParams(cfg.fixed_mu1, cfg.fixed_mu2)
    return sample_disc_in_quadrant((-1, -1), fixed, cfg.target, (cfg.collapse_bound_lo, cfg.collapse_bound_hi),
                                   rng, cfg.quadrant_attempts, cfg.collapse_max_width or None)


def disc_collapse_traces(cfg: ExperimentConfig, run: int = 0):
    """Best-discriminator traces from one collapse-setup init: (coev rows, baseline rows)."""
    problem = TheoreticalGAN(cfg.target)
    fixed = GeneratorParams(cfg.fixed_mu1, cfg.fixed_mu2)
    rng = stream(cfg, EXP_DISC, len(QUADRANTS), run)
    discs = [Individual(np.asarray(collapse_init(cfg, rng)), cfg.initial_lr) for _ in range(cfg.pop_size)]
    gens = [Individual(np.array(fixed), cfg.initial_lr) for _ in range(cfg.pop_size)]
    coev_rows = []

    def observe(g, u, v, fm):
        d = v[0].params
        coev_rows.append(("coev", g, *d, d[1] - d[0], d[3] - d[2], loss(fixed, d, cfg.target)))

    coevo.run_basic(gens, discs, problem, coev_config(cfg, cfg.generations, freeze_generators=True), rng,
                    observer=observe)
    # The baseline starts from the best initial discriminator.
    start = max(discs, key=lambda d: loss(fixed, d.params, cfg.target)).params
    rows, _ = run_baseline_trace(cfg, cfg.target, fixed, start, cfg.generations, lr_gen=0.0)
    base_rows = [("baseline", r[1], *r[4:8], r[5] - r[4], r[7] - r[6], r[9]) for r in rows]
    return coev_rows, base_rows


def disc_collapse_heatmap(cfg: ExperimentConfig, out_dir=None, workers: int | None = None):
    results = _pool_map(_disc_collapse_quadrant, [(cfg, qi) for qi in range(len(QUADRANTS))],
                        workers or cfg.workers)
    succ = np.zeros((2, 2), dtype=int)
    applicable = np.zeros((2, 2), dtype=bool)
    # rows: right sign (- at the bottom), cols: left sign (- on the left)
    for qi, ok_flag, ok in results:
        left, right = QUADRANTS[qi]
        r, c = (0 if right < 0 else 1), (0 if left < 0 else 1)
        succ[r, c] = ok
        applicable[r, c] = ok_flag
    edges = np.array([-1.0, 0.0, 1.0])
    res = HeatmapResult(edges, edges.copy(), succ, cfg.disc_runs, applicable)
    traces = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for qi, ok_flag, ok in results:
            left, right = QUADRANTS[qi]
            rate = ok / cfg.disc_runs if ok_flag else "NA"
            rows.append(("coev", left, right, ok_flag, ok, cfg.disc_runs, rate))
        write_csv(out / "disc_collapse.csv", DISC_HEATMAP_COLUMNS, rows)
        write_pgm(out / "disc_collapse.pgm", np.where(applicable, res.success_rate, 0.0), cfg.image_scale)
        if cfg.svg:
            write_svg_heatmap(out / "disc_collapse.svg", res)
        if cfg.trace:
            coev_rows, base_rows = disc_collapse_traces(cfg)
            traces = (coev_rows, base_rows)
            write_csv(out / "disc_collapse_trace.csv", DISC_TRACE_COLUMNS, coev_rows + base_rows)
            fixed = (cfg.fixed_mu1, cfg.fixed_mu2)
            write_svg_bounds(out / "disc_collapse_first.svg", coev_rows[0][2:6], fixed, cfg.target)
            write_svg_bounds(out / "disc_collapse_last.svg", coev_rows[-1][2:6], fixed, cfg.target)
    return res, traces


# -- grid -----------------------------------------------------------------------

def grid_config(cfg: ExperimentConfig) -> gridmod.GridConfig:
    return gridmod.GridConfig(
        coev=coev_config(cfg, 1),
        metric=NegL2DensityDistance(cfg.metric_lo, cfg.metric_hi, cfg.metric_step),
        es_sigma=cfg.es_sigma, es_adapt=cfg.es_adapt, es_schedule=cfg.es_schedule,
        mode=cfg.execution, max_skew=cfg.max_skew or None, workers=cfg.workers,
        stagnation_window=cfg.stagnation_window or None)


def grid_run(cfg: ExperimentConfig, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = TheoreticalGAN(cfg.target)
    gcfg = grid_config(cfg)
    init = gridmod.uniform_initializer((cfg.gen_init_lo, cfg.gen_init_hi), (cfg.disc_init_lo, cfg.disc_init_hi),
                                       cfg.initial_lr)
    grid = gridmod.build_grid(cfg.grid_m, cfg.per_cell, init, stream(cfg, EXP_GRID), cfg.es_sigma)
    gridmod.run_grid(grid, problem, cfg.generations, gcfg, seed=cfg.master_seed)
    gridmod.save_checkpoint(grid, out / "grid_checkpoint.txt")
    return write_grid_report(grid, problem, gcfg.metric, out)


def write_grid_report(grid, problem, metric, out) -> dict:
    k_best, gens, w, g_best = select_best_mixture(grid, problem.target, metric)
    rows = []
    for k in range(grid.size):
        i, j = grid.coords(k)
        g = metric(grid.neighborhood_gen_params(k), grid.cells[k].mixture_weights, problem.target)
        rows.append((k, i, j, grid.cells[k].generation_counter, g, k == k_best))
    write_csv(Path(out) / "grid_neighborhoods.csv", NEIGHBORHOOD_COLUMNS, rows)
    write_csv(Path(out) / "grid_mixture.csv", MIXTURE_COLUMNS,
              [(k_best, i, w[i], gens[i][0], gens[i][1]) for i in range(len(w))])
    return {"k": k_best, "g": g_best, "weights": w, "gens": gens}


# -- images ---------------------------------------------------------------------

def write_pgm(path, rates, scale: int = 1) -> None:
    """Plain (P2) graymap; row 0 of ``rates`` is drawn at the bottom."""
    img = np.round(np.asarray(rates, dtype=float)[::-1] * 255).astype(int)
    img = np.kron(img, np.ones((scale, scale), dtype=int))
    h, w = img.shape
    lines = ["P2", f"{w} {h}", "255"] + [" ".join(str(v) for v in row) for row in img]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def write_svg_heatmap(path, res: HeatmapResult, cell_px: int = 20) -> None:
    rates = res.success_rate
    ny, nx = rates.shape
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{nx * cell_px}" height="{ny * cell_px}">']
    for r in range(ny):
        for c in range(nx):
            v = int(round(rates[r, c] * 255)) if res.applicable[r, c] else 0
            y = (ny - 1 - r) * cell_px
            parts.append(f'<rect x="{c * cell_px}" y="{y}" width="{cell_px}" height="{cell_px}" '
                         f'fill="rgb({v},{v},{v})"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="ascii")


def write_svg_bounds(path, disc, gen, target, lo=-8.0, hi=8.0, width=480, height=200) -> None:
    """Target and generator densities with the discriminator intervals shaded."""
    from .gaussmix import mixture_pdf_grid

    xs = np.linspace(lo, hi, 321)
    sx = lambda x: (x - lo) / (hi - lo) * width  # noqa: E731
    sy = lambda y: height - y / 0.45 * height  # noqa: E731
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">']
    for a, b in ((disc[0], disc[1]), (disc[2], disc[3])):
        a, b = max(a, lo), min(b, hi)
        if b > a:
            parts.append(f'<rect x="{sx(a):.2f}" y="0" width="{sx(b) - sx(a):.2f}" height="{height}" fill="#ddd"/>')
    for means, color in ((target, "black"), (gen, "red")):
        ys = mixture_pdf_grid(list(means), [0.5, 0.5], xs)
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="ascii")
