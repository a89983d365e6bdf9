"""Paired-population competitive coevolution (the basic, non-spatial loop).

Both populations maximize their own fitness: a generator's fitness is the
negated sum of its losses against every discriminator, a discriminator's
the plain sum.  One generation is evaluate -> sort -> select -> mutate ->
replace, where a mutant only displaces its parent if it is strictly fitter
against the same opposing snapshot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

GENERATOR = "generator"
DISCRIMINATOR = "discriminator"


class UnsetFitnessError(RuntimeError):
    pass


@dataclass
class Individual:
    params: np.ndarray
    learning_rate: float = 0.1
    fitness: Optional[float] = None

    def __post_init__(self):
        self.params = np.array(self.params, dtype=float)

    def copy(self) -> "Individual":
        return Individual(self.params.copy(), self.learning_rate, self.fitness)

    def same_as(self, other: "Individual") -> bool:
        return (np.array_equal(self.params, other.params)
                and self.learning_rate == other.learning_rate
                and self.fitness == other.fitness)


Population = list  # list[Individual]
ProbSpec = Union[float, Sequence[float]]


@dataclass
class CoevConfig:
    generations: int = 100
    selection_probs: ProbSpec = 1.0
    mutation_probs: ProbSpec = 1.0
    mutation_step: float = 1.0
    lr_mutation_sigma: float = 1e-7
    mutation_kind: str = "gaussian"  # or "gradient"
    fitness_weighting: str = "uniform"  # or "weighted"
    gradient_opponents: str = "single"  # or "all"
    lr_floor: float = 1e-12
    freeze_generators: bool = False
    freeze_discriminators: bool = False

    def __post_init__(self):
        if self.generations < 0:
            raise ValueError(f"generations must be >= 0, got {self.generations}")
        if self.mutation_kind not in ("gaussian", "gradient"):
            raise ValueError(f"unknown mutation_kind {self.mutation_kind!r}")
        if self.fitness_weighting not in ("uniform", "weighted"):
            raise ValueError(f"unknown fitness_weighting {self.fitness_weighting!r}")
        if self.gradient_opponents not in ("single", "all"):
            raise ValueError(f"unknown gradient_opponents {self.gradient_opponents!r}")
        if self.mutation_step <= 0:
            raise ValueError("mutation_step must be positive")
        if self.lr_mutation_sigma < 0:
            raise ValueError("lr_mutation_sigma must be >= 0")
        for name in ("selection_probs", "mutation_probs"):
            vals = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any((vals < 0) | (vals > 1)):
                raise ValueError(f"{name} must lie in [0, 1]")

    def probs(self, name: str, size: int) -> np.ndarray:
        vals = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
        if vals.size == 1:
            return np.full(size, float(vals[0]))
        if vals.size != size:
            raise ValueError(f"{name} has length {vals.size}, population has {size}")
        return vals


@dataclass
class FitnessMatrix:
    values: np.ndarray  # values[i, j] = L(u_i, v_j)
    gen_fitness: np.ndarray
    disc_fitness: np.ndarray


def _params(pop) -> np.ndarray:
    return np.stack([ind.params for ind in pop])


def _check_weights(w, n, name):
    if w is None:
        return None
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"{name} has shape {w.shape}, expected ({n},)")
    return w


def _row_sums(m: np.ndarray) -> np.ndarray:
    # Exactly rounded, so a fitness does not depend on the opponents' order.
    return np.array([math.fsum(row) for row in m])


def evaluate(pop_u, pop_v, problem, weights_u=None, weights_v=None) -> FitnessMatrix:
    """All-pairs fitness; sets ``fitness`` on every individual in place."""
    if not pop_u or not pop_v:
        raise ValueError("both populations must be nonempty")
    if (weights_u is None) != (weights_v is None):
        raise ValueError("weighted evaluation needs weights for both populations")
    weights_u = _check_weights(weights_u, len(pop_u), "weights_u")
    weights_v = _check_weights(weights_v, len(pop_v), "weights_v")
    L = problem.loss_matrix(_params(pop_u), _params(pop_v))
    terms = L if weights_u is None else L * np.outer(weights_u, weights_v)
    f_u = -_row_sums(terms)
    f_v = _row_sums(terms.T)
    for ind, f in zip(pop_u, f_u):
        ind.fitness = float(f)
    for ind, f in zip(pop_v, f_v):
        ind.fitness = float(f)
    return FitnessMatrix(L, f_u, f_v)


def sort_order(pop) -> list[int]:
    if any(ind.fitness is None for ind in pop):
        raise UnsetFitnessError("cannot sort a population with unset fitness")
    return sorted(range(len(pop)), key=lambda i: -pop[i].fitness)


def sort(pop) -> list:
    """Stable sort by descending fitness."""
    return [pop[i] for i in sort_order(pop)]


def select_indices(pop, selection_probs, rng) -> list[int]:
    """Slot i keeps rank i with prob. alpha_i, else a binary tournament winner.

    Tournament draws are uniform with replacement; ties go to the better
    rank, so the winner is simply the smaller index of a sorted population.
    """
    n = len(pop)
    alphas = np.broadcast_to(np.asarray(selection_probs, dtype=float), (n,))
    out = []
    for i in range(n):
        if alphas[i] >= 1.0 or rng.random() < alphas[i]:
            out.append(i)
        else:
            a, b = rng.integers(0, n, size=2)
            out.append(int(min(a, b)))
    return out


def select(pop, selection_probs, rng) -> list:
    return [pop[i].copy() for i in select_indices(pop, selection_probs, rng)]


def mutate_learning_rate(ind: Individual, lr_mutation_sigma: float, rng, lr_floor: float = 1e-12) -> Individual:
    out = ind.copy()
    if lr_mutation_sigma > 0:
        out.learning_rate = max(lr_floor, ind.learning_rate + rng.normal(0.0, lr_mutation_sigma))
    else:
        out.learning_rate = max(lr_floor, ind.learning_rate)
    return out


def mutate_params(ind: Individual, role: str, opponent, problem, config: CoevConfig, rng,
                  mutation_prob: float = 1.0) -> Individual:
    """Gradient or Gaussian mutation of one individual.

    ``opponent`` is an Individual, or a list of them when gradients are
    summed over the whole opposing population.  With probability
    ``1 - mutation_prob`` an unchanged copy is returned.
    """
    if mutation_prob <= 0.0 or (mutation_prob < 1.0 and rng.random() >= mutation_prob):
        return ind.copy()
    child = mutate_learning_rate(ind, config.lr_mutation_sigma, rng, config.lr_floor)
    child.fitness = None
    if config.mutation_kind == "gaussian":
        child.params = ind.params + rng.normal(0.0, config.mutation_step, size=ind.params.shape)
        if role == DISCRIMINATOR:
            child.params = problem.repair_disc(child.params)
        return child
    opponents = opponent if isinstance(opponent, (list, tuple)) else [opponent]
    opp = np.stack([o.params for o in opponents])
    if role == GENERATOR:
        child.params = ind.params - child.learning_rate * problem.grad_gen(ind.params, opp)
    else:
        child.params = problem.project_disc(ind.params + child.learning_rate * problem.grad_disc(opp, ind.params))
    return child


def replace(pop, mutated) -> list:
    """Slot-wise: a mutant survives only if strictly fitter than the incumbent."""
    if len(pop) != len(mutated):
        raise ValueError(f"population sizes differ: {len(pop)} vs {len(mutated)}")
    out = []
    for old, new in zip(pop, mutated):
        if old.fitness is None or new.fitness is None:
            raise UnsetFitnessError("replace needs fitness on both populations")
        out.append(new if new.fitness > old.fitness else old)
    return out


def fitness_against(problem, role, inds, opposing, w_self=None, w_opp=None) -> np.ndarray:
    """Fitness of ``inds`` against a fixed opposing population (no side effects)."""
    P = _params(inds)
    Q = _params(opposing)
    if role == GENERATOR:
        L = problem.loss_matrix(P, Q)
        sign = -1.0
    else:
        L = problem.loss_matrix(Q, P).T
        sign = 1.0
    if w_self is not None:
        L = L * np.outer(w_self, w_opp)
    return sign * _row_sums(L)


Observer = Callable[[int, list, list, FitnessMatrix], None]


@dataclass
class _Side:
    pop: list
    weights: Optional[np.ndarray] = None
    role: str = GENERATOR

    def permute(self, idx):
        self.pop = [self.pop[i] for i in idx]
        if self.weights is not None:
            self.weights = self.weights[idx]


def _mutate_side(side: _Side, opp: _Side, problem, config, rng, frozen: bool) -> None:
    n = len(side.pop)
    betas = np.zeros(n) if frozen else config.probs("mutation_probs", n)
    children = []
    for i, ind in enumerate(side.pop):
        if config.mutation_kind == "gradient":
            if config.gradient_opponents == "all":
                opponent = opp.pop
            else:
                opponent = opp.pop[int(rng.integers(0, len(opp.pop)))]
        else:
            opponent = None
        children.append(mutate_params(ind, side.role, opponent, problem, config, rng, betas[i]))
    changed = [i for i, c in enumerate(children) if c.fitness is None]
    if changed:
        f = fitness_against(problem, side.role, [children[i] for i in changed], opp.pop,
                            None if side.weights is None else side.weights[changed],
                            opp.weights)
        for i, fi in zip(changed, f):
            children[i].fitness = float(fi)
    side.pop = replace(side.pop, children)


def run_basic(pop_u, pop_v, problem, config: CoevConfig, rng,
              weights_u=None, weights_v=None, observer: Observer | None = None):
    """Evolve both populations for ``config.generations`` generations.

    Returns new lists, evaluated against each other and sorted by
    descending fitness.  ``observer(generation, pop_u, pop_v, fm)`` sees
    the sorted populations right after every evaluation (generation 0 is
    the initial one, ``config.generations`` the final one).
    """
    weighted = config.fitness_weighting == "weighted"
    if weighted:
        weights_u = np.full(len(pop_u), 1.0 / len(pop_u)) if weights_u is None else np.asarray(weights_u, float)
        weights_v = np.full(len(pop_v), 1.0 / len(pop_v)) if weights_v is None else np.asarray(weights_v, float)
    else:
        weights_u = weights_v = None
    u = _Side([ind.copy() for ind in pop_u], weights_u, GENERATOR)
    v = _Side([ind.copy() for ind in pop_v], weights_v, DISCRIMINATOR)

    def evaluate_and_sort(gen_index):
        fm = evaluate(u.pop, v.pop, problem, u.weights, v.weights)
        u.permute(sort_order(u.pop))
        v.permute(sort_order(v.pop))
        if observer is not None:
            observer(gen_index, u.pop, v.pop, fm)
        return fm

    for gen_index in range(config.generations):
        evaluate_and_sort(gen_index)
        # Opposing snapshots for this generation's replacement decisions.
        u_ref = _Side(u.pop, u.weights, GENERATOR)
        v_ref = _Side(v.pop, v.weights, DISCRIMINATOR)
        u.permute(select_indices(u.pop, config.probs("selection_probs", len(u.pop)), rng))
        v.permute(select_indices(v.pop, config.probs("selection_probs", len(v.pop)), rng))
        u.pop = [ind.copy() for ind in u.pop]
        v.pop = [ind.copy() for ind in v.pop]
        _mutate_side(u, v_ref, problem, config, rng, config.freeze_generators)
        _mutate_side(v, u_ref, problem, config, rng, config.freeze_discriminators)
    evaluate_and_sort(config.generations)
    return u.pop, v.pop
