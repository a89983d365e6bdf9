"""Spatial coevolution on an m x m torus.

Every cell owns a small generator and discriminator sub-population plus a
mixture-weight vector over the generators of its five-cell neighborhood.
A cell step runs the basic coevolution loop on the union of its
neighborhood, keeps the top-n of each population for itself, then takes one
(1+1)-ES step on its weights.

Concurrency contract: a cell is only ever written by the worker stepping
it, under that cell's lock; everybody else reads it through ``snapshot``
(a deep copy taken under the same lock).
"""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import coevo
from .coevo import CoevConfig, Individual
from .mixture import DEFAULT_METRIC, check_simplex, es_step, one_fifth_sigma

NEIGHBORHOOD_SIZE = 5
CHECKPOINT_MAGIC = "coevgan-grid-checkpoint"
CHECKPOINT_VERSION = 1
CHECKPOINT_FIELDS = ("index", "row", "col", "generation", "gen_params", "gen_lrs",
                     "disc_params", "disc_lrs", "weights", "es_sigma")


class CellFailure(RuntimeError):
    def __init__(self, k, cause):
        super().__init__(f"cell {k} failed: {cause!r}")
        self.k = k


@dataclass
class Cell:
    center_gens: list
    center_discs: list
    mixture_weights: np.ndarray
    generation_counter: int = 0
    es_sigma: float = 0.01

    def snapshot(self) -> "Cell":
        return Cell([g.copy() for g in self.center_gens],
                    [d.copy() for d in self.center_discs],
                    np.array(self.mixture_weights, dtype=float),
                    self.generation_counter, self.es_sigma)


@dataclass(frozen=True)
class Neighborhood:
    k: int
    cells: tuple  # cell indices, center first
    members: tuple  # Cell snapshots aligned with ``cells``

    def gens(self) -> list:
        return [g for c in self.members for g in c.center_gens]

    def discs(self) -> list:
        return [d for c in self.members for d in c.center_discs]


@dataclass
class GridConfig:
    coev: CoevConfig = field(default_factory=lambda: CoevConfig(generations=1))
    metric: object = DEFAULT_METRIC
    es_sigma: float = 0.01
    es_adapt: bool = False
    es_schedule: str = "per_cell"  # or "per_generation" (synchronous only)
    mode: str = "sync"  # or "async"
    max_skew: Optional[int] = None  # async only; None = unbounded
    workers: int = 1
    stagnation_window: Optional[int] = None  # sync early stop; None = off

    def __post_init__(self):
        if self.mode not in ("sync", "async"):
            raise ValueError(f"unknown execution mode {self.mode!r}")
        if self.es_schedule not in ("per_cell", "per_generation"):
            raise ValueError(f"unknown es_schedule {self.es_schedule!r}")
        if self.es_schedule == "per_generation" and self.mode != "sync":
            raise ValueError("es_schedule 'per_generation' needs synchronous execution")
        if self.max_skew is not None and self.max_skew < 1:
            raise ValueError("max_skew must be >= 1 (or None for unbounded)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


class Grid:
    def __init__(self, m: int, cells: list, per_cell: int):
        if m < 1:
            raise ValueError(f"grid side must be >= 1, got {m}")
        if len(cells) != m * m:
            raise ValueError(f"expected {m * m} cells, got {len(cells)}")
        self.m = m
        self.per_cell = per_cell
        self.cells = cells
        self._locks = [threading.Lock() for _ in cells]
        self.max_observed_skew = 0

    @property
    def size(self) -> int:
        return self.m * self.m

    @property
    def neighborhood_pop_size(self) -> int:
        return NEIGHBORHOOD_SIZE * self.per_cell

    def coords(self, k: int) -> tuple[int, int]:
        return divmod(k, self.m)

    def index(self, i: int, j: int) -> int:
        return (i % self.m) * self.m + (j % self.m)

    def neighborhood_cells(self, k: int) -> tuple:
        """Center, then (i-1, j), (i+1, j), (i, j-1), (i, j+1) on the torus."""
        i, j = self.coords(k)
        return (k, self.index(i - 1, j), self.index(i + 1, j), self.index(i, j - 1), self.index(i, j + 1))

    def adjacent_pairs(self):
        pairs = set()
        for k in range(self.size):
            for n in self.neighborhood_cells(k)[1:]:
                if n != k:
                    pairs.add((min(k, n), max(k, n)))
        return sorted(pairs)

    def snapshot(self, k: int) -> Cell:
        with self._locks[k]:
            return self.cells[k].snapshot()

    def commit(self, k: int, cell: Cell) -> None:
        with self._locks[k]:
            self.cells[k] = cell

    def counters(self) -> list:
        """Generation counters read atomically (all cell locks held at once)."""
        for lock in self._locks:
            lock.acquire()
        try:
            return [c.generation_counter for c in self.cells]
        finally:
            for lock in self._locks:
                lock.release()

    def adjacent_skew(self) -> int:
        counters = self.counters()
        return max((abs(counters[a] - counters[b]) for a, b in self.adjacent_pairs()), default=0)

    def neighborhood_gen_params(self, k: int) -> np.ndarray:
        return np.stack([g.params for n in self.neighborhood_cells(k) for g in self.cells[n].center_gens])

    def all_gens(self) -> list:
        return [g for c in self.cells for g in c.center_gens]

    def all_discs(self) -> list:
        return [d for c in self.cells for d in c.center_discs]

    def copy(self) -> "Grid":
        return Grid(self.m, [c.snapshot() for c in self.cells], self.per_cell)

    def same_as(self, other: "Grid") -> bool:
        if self.m != other.m or self.per_cell != other.per_cell:
            return False
        for a, b in zip(self.cells, other.cells):
            if a.generation_counter != b.generation_counter or not np.array_equal(a.mixture_weights, b.mixture_weights):
                return False
            if a.es_sigma != b.es_sigma:
                return False
            for x, y in zip(a.center_gens + a.center_discs, b.center_gens + b.center_discs):
                if not (np.array_equal(x.params, y.params) and x.learning_rate == y.learning_rate):
                    return False
        return True


def uniform_initializer(gen_range=(-10.0, 10.0), disc_range=(-10.0, 10.0), learning_rate=0.1, problem=None):
    """Initializer drawing generator means and sorted discriminator bounds uniformly."""
    from .problem import repair

    def init(rng, n):
        gens = [Individual(rng.uniform(*gen_range, size=2), learning_rate) for _ in range(n)]
        discs = [Individual(np.asarray(repair(rng.uniform(*disc_range, size=4))), learning_rate) for _ in range(n)]
        return gens, discs

    return init


def build_grid(m: int, per_cell_size: int, initializer: Callable, rng, es_sigma: float = 0.01) -> Grid:
    if m < 1:
        raise ValueError(f"grid side must be >= 1, got {m}")
    if per_cell_size < 1:
        raise ValueError(f"per-cell population size must be >= 1, got {per_cell_size}")
    n = NEIGHBORHOOD_SIZE * per_cell_size
    cells = []
    for _ in range(m * m):
        gens, discs = initializer(rng, per_cell_size)
        cells.append(Cell(gens, discs, np.full(n, 1.0 / n), 0, es_sigma))
    return Grid(m, cells, per_cell_size)


def gather_neighborhood(grid: Grid, k: int) -> Neighborhood:
    idx = grid.neighborhood_cells(k)
    return Neighborhood(k, idx, tuple(grid.snapshot(n) for n in idx))


def cell_rng(seed: int, k: int, generation: int) -> np.random.Generator:
    """Independent stream per (cell, generation), derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(k, generation)))


def _mixture_step(cell: Cell, gens_params, problem, config: GridConfig, rng) -> None:
    w, _, accepted = es_step(cell.mixture_weights, gens_params, problem.target, rng,
                             config.metric, cell.es_sigma, return_info=True)
    cell.mixture_weights = w
    if config.es_adapt:
        cell.es_sigma = one_fifth_sigma(cell.es_sigma, accepted, len(w))


def step_cell(grid: Grid, k: int, problem, config: GridConfig, rng,
              neighborhood: Neighborhood | None = None, commit: bool = True) -> Cell:
    """Evolve neighborhood k and return (and by default commit) the new center cell."""
    hood = neighborhood if neighborhood is not None else gather_neighborhood(grid, k)
    center = hood.members[0]
    n = len(center.center_gens)
    weights_u = weights_v = None
    if config.coev.fitness_weighting == "weighted":
        weights_u = center.mixture_weights
        weights_v = np.full(len(hood.discs()), 1.0 / len(hood.discs()))
    gens, discs = coevo.run_basic(hood.gens(), hood.discs(), problem, config.coev, rng,
                                  weights_u, weights_v)
    new = Cell([g.copy() for g in gens[:n]], [d.copy() for d in discs[:n]],
               center.mixture_weights.copy(), center.generation_counter + 1, center.es_sigma)
    if config.es_schedule == "per_cell":
        params = np.stack([g.params for g in new.center_gens]
                          + [g.params for c in hood.members[1:] for g in c.center_gens])
        _mixture_step(new, params, problem, config, rng)
    check_simplex(new.mixture_weights)
    if commit:
        grid.commit(k, new)
    return new


def _run_sync(grid, problem, total_generations, config, seed, on_generation):
    from .mixture import select_best_mixture

    best_g = -np.inf
    stale = 0
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for _ in range(total_generations):
            hoods = [gather_neighborhood(grid, k) for k in range(grid.size)]

            def work(k):
                try:
                    rng = cell_rng(seed, k, hoods[k].members[0].generation_counter)
                    return step_cell(grid, k, problem, config, rng, hoods[k], commit=False)
                except Exception as exc:  # noqa: BLE001
                    raise CellFailure(k, exc) from exc

            new_cells = list(pool.map(work, range(grid.size))) if pool else [work(k) for k in range(grid.size)]
            for k, cell in enumerate(new_cells):
                grid.commit(k, cell)
            if config.es_schedule == "per_generation":
                for k in range(grid.size):
                    cell = grid.cells[k]
                    rng = cell_rng(seed, grid.size + k, cell.generation_counter)
                    _mixture_step(cell, grid.neighborhood_gen_params(k), problem, config, rng)
            if on_generation is not None:
                on_generation(grid)
            if config.stagnation_window:
                g = select_best_mixture(grid, problem.target, config.metric)[3]
                if g > best_g:
                    best_g, stale = g, 0
                else:
                    stale += 1
                    if stale >= config.stagnation_window:
                        break
    finally:
        if pool:
            pool.shutdown()


def _run_async(grid, problem, total_generations, config, seed):
    cv = threading.Condition()
    busy = set()
    failure = []
    bound = config.max_skew
    neighbors = [set(grid.neighborhood_cells(k)[1:]) - {k} for k in range(grid.size)]
    targets = {k: grid.cells[k].generation_counter + total_generations for k in range(grid.size)}

    def eligible(k):
        c = grid.cells[k].generation_counter
        if k in busy or c >= targets[k]:
            return False
        if bound is None:
            return True
        return all(c + 1 - grid.cells[n].generation_counter <= bound for n in neighbors[k])

    def worker(own):
        while True:
            with cv:
                while True:
                    if failure:
                        return
                    todo = [k for k in own if grid.cells[k].generation_counter < targets[k]]
                    if not todo:
                        return
                    ready = [k for k in todo if eligible(k)]
                    if ready:
                        k = min(ready, key=lambda c: (grid.cells[c].generation_counter, c))
                        busy.add(k)
                        break
                    cv.wait(timeout=1.0)
            try:
                rng = cell_rng(seed, k, grid.cells[k].generation_counter)
                step_cell(grid, k, problem, config, rng)
            except Exception as exc:  # noqa: BLE001
                with cv:
                    failure.append(CellFailure(k, exc))
                    busy.discard(k)
                    cv.notify_all()
                return
            with cv:
                busy.discard(k)
                grid.max_observed_skew = max(grid.max_observed_skew, grid.adjacent_skew())
                cv.notify_all()

    n_workers = min(config.workers, grid.size)
    owned = [[k for k in range(grid.size) if k % n_workers == w] for w in range(n_workers)]
    threads = [threading.Thread(target=worker, args=(own,), daemon=True) for own in owned]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if failure:
        raise failure[0]


def run_grid(grid: Grid, problem, total_generations: int, config: GridConfig, seed: int = 0,
             on_generation: Callable | None = None) -> Grid:
    """Advance every cell by ``total_generations`` steps (in place; returns ``grid``).

    In sync mode all cells read the previous generation's state and the
    result is a deterministic function of (grid, seed, config).  In async
    mode each worker steps its own cells as soon as the skew bound allows,
    reading whatever its neighbors hold at that moment.
    """
    if total_generations < 0:
        raise ValueError("total_generations must be >= 0")
    if total_generations == 0:
        return grid
    if config.mode == "sync":
        _run_sync(grid, problem, total_generations, config, seed, on_generation)
    else:
        _run_async(grid, problem, total_generations, config, seed)
    return grid


# -- checkpoint format -------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_inds(inds) -> str:
    return ";".join(",".join(_fmt(v) for v in ind.params) for ind in inds)


def save_checkpoint(grid: Grid, path) -> None:
    """Write the grid as a versioned tab-separated text file.

    Layout: a magic/version line, ``m`` and ``per_cell`` lines, a ``fields``
    line naming the record columns, then one ``cell`` record per cell in
    index order.  Individuals are separated by ';', coordinates by ','.
    Floats use Python's shortest round-trip repr.
    """
    lines = [f"{CHECKPOINT_MAGIC}\t{CHECKPOINT_VERSION}", f"m\t{grid.m}", f"per_cell\t{grid.per_cell}",
             "fields\t" + "\t".join(CHECKPOINT_FIELDS)]
    for k, c in enumerate(grid.cells):
        i, j = grid.coords(k)
        rec = [str(k), str(i), str(j), str(c.generation_counter), _fmt_inds(c.center_gens),
               ";".join(_fmt(g.learning_rate) for g in c.center_gens), _fmt_inds(c.center_discs),
               ";".join(_fmt(d.learning_rate) for d in c.center_discs),
               ",".join(_fmt(w) for w in c.mixture_weights), _fmt(c.es_sigma)]
        lines.append("cell\t" + "\t".join(rec))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_inds(params: str, lrs: str) -> list:
    ps = [np.array([float(v) for v in chunk.split(",")]) for chunk in params.split(";")]
    ls = [float(v) for v in lrs.split(";")]
    if len(ps) != len(ls):
        raise ValueError("checkpoint: parameter and learning-rate counts differ")
    return [Individual(p, lr) for p, lr in zip(ps, ls)]


def load_checkpoint(path) -> Grid:
    with open(path, encoding="ascii") as fh:
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    if not rows or rows[0][0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a grid checkpoint")
    if int(rows[0][1]) != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {rows[0][1]}")
    header = {r[0]: r[1:] for r in rows[1:] if r[0] != "cell"}
    m = int(header["m"][0])
    per_cell = int(header["per_cell"][0])
    fields = header["fields"]
    cells = []
    for r in rows:
        if r[0] != "cell":
            continue
        rec = dict(zip(fields, r[1:]))
        if int(rec["index"]) != len(cells):
            raise ValueError(f"{path}: cell records out of order at {rec['index']}")
        cells.append(Cell(_parse_inds(rec["gen_params"], rec["gen_lrs"]),
                          _parse_inds(rec["disc_params"], rec["disc_lrs"]),
                          np.array([float(v) for v in rec["weights"].split(",")]),
                          int(rec["generation"]), float(rec["es_sigma"])))
    return Grid(m, cells, per_cell)
