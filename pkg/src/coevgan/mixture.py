"""Generator-neighborhood mixtures: quality metric, (1+1)-ES on the weights,
and selection of the best neighborhood mixture."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussmix import UnitGaussianMixture, mixture_pdf_grid

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class NegL2DensityDistance:
    """g = -int (p_mix - p_target)^2 dx, trapezoid rule on a uniform grid."""

    grid_lo: float = -15.0
    grid_hi: float = 15.0
    grid_step: float = 0.01

    def __post_init__(self):
        if not self.grid_lo < self.grid_hi:
            raise ValueError(f"metric grid needs lo < hi, got [{self.grid_lo}, {self.grid_hi}]")
        if self.grid_step <= 0:
            raise ValueError(f"metric grid_step must be positive, got {self.grid_step}")

    def points(self) -> np.ndarray:
        n = int(round((self.grid_hi - self.grid_lo) / self.grid_step))
        return np.linspace(self.grid_lo, self.grid_lo + n * self.grid_step, n + 1)

    def __call__(self, gens, w, target) -> float:
        xs = self.points()
        means, weights = _components(gens, w)
        diff = mixture_pdf_grid(means, weights, xs) - mixture_pdf_grid(list(target), [0.5, 0.5], xs)
        return -float(np.trapezoid(diff * diff, xs))


@dataclass(frozen=True)
class CustomMetric:
    fn: object  # callable(gens, w, target) -> float

    def __call__(self, gens, w, target) -> float:
        return float(self.fn(gens, w, target))


DEFAULT_METRIC = NegL2DensityDistance()


def check_simplex(w, tol: float = SIMPLEX_TOL) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError(f"mixture weights must be a nonempty vector, got shape {w.shape}")
    if np.any(w < 0) or abs(math.fsum(w) - 1.0) > tol:
        raise ValueError(f"mixture weights are not on the simplex: {w}")
    return w


def _components(gens, w):
    gens = np.asarray(gens, dtype=float).reshape(-1, 2)
    w = np.asarray(w, dtype=float)
    if len(gens) != len(w):
        raise ValueError(f"{len(gens)} generators but {len(w)} weights")
    means = gens.reshape(-1)
    weights = np.repeat(w / 2.0, 2)
    return means, weights


def neighborhood_density(gens, w) -> UnitGaussianMixture:
    """The 2N-component mixture sum_i w_i G_{u_i}."""
    check_simplex(w)
    means, weights = _components(gens, w)
    return UnitGaussianMixture(means, weights)


def metric_g(gens, w, target, metric=DEFAULT_METRIC) -> float:
    return metric(gens, w, target)


def es_step(w, gens, target, rng, metric=DEFAULT_METRIC, sigma_w: float = 0.01,
            return_info: bool = False):
    """One (1+1)-ES step on the simplex.

    The candidate is w + N(0, sigma_w^2), clipped at zero and renormalized;
    it replaces w only if it scores strictly higher under ``metric``.
    """
    w = check_simplex(w)
    cand = np.clip(w + rng.normal(0.0, sigma_w, size=w.shape), 0.0, None)
    total = cand.sum()
    g_old = metric(gens, w, target)
    accepted = False
    g_new = g_old
    if total > 0:
        cand = cand / total
        g_cand = metric(gens, cand, target)
        if g_cand > g_old:
            w, g_new, accepted = cand, g_cand, True
    if return_info:
        return w, g_new, accepted
    return w


def one_fifth_sigma(sigma: float, accepted: bool, dim: int) -> float:
    """1/5th success rule: grow sigma on success, shrink on failure."""
    d = 1.0 + dim / 2.0
    return sigma * math.exp(((1.0 if accepted else 0.0) - 0.2) / d)


def select_best_mixture(grid, target, metric=DEFAULT_METRIC):
    """Argmax over neighborhoods of g(current generators, w^k); ties -> smallest k.

    Returns (k, generator params (N, 2), w, g).
    """
    best = None
    for k in range(grid.size):
        gens = grid.neighborhood_gen_params(k)
        w = grid.cells[k].mixture_weights
        g = metric(gens, w, target)
        if best is None or g > best[3]:
            best = (k, gens, w.copy(), g)
    return best
