"""The one-dimensional GAN toy game.

Generators are equal-weight mixtures 0.5 N(mu1, 1) + 0.5 N(mu2, 1); a
discriminator is the indicator of [l1, r1] u [l2, r2] with
l1 <= r1 <= l2 <= r2.  With the identity measuring function the loss is

    L(mu, l, r) = P_target(A) + 1 - P_mu(A),   A = [l1, r1] u [l2, r2]

which the generator minimizes and the discriminator maximizes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .gaussmix import normal_pdf, unit_mass, unit_pdf

ZERO_TOL = 1e-12


class GeneratorParams(NamedTuple):
    mu1: float
    mu2: float

    def swapped(self) -> "GeneratorParams":
        return GeneratorParams(self.mu2, self.mu1)


class DiscriminatorParams(NamedTuple):
    l1: float
    r1: float
    l2: float
    r2: float

    def is_ordered(self) -> bool:
        return self.l1 <= self.r1 <= self.l2 <= self.r2

    def lengths(self) -> tuple[float, float]:
        return self.r1 - self.l1, self.r2 - self.l2


@dataclass(frozen=True)
class ClosedForm:
    pass


@dataclass(frozen=True)
class MonteCarlo:
    sample_count: int
    seed: int = 0

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError(f"sample_count must be >= 1, got {self.sample_count}")


EvaluationMode = Union[ClosedForm, MonteCarlo]
CLOSED_FORM = ClosedForm()


def identity_measure(x):
    """The measuring function; fixed to the identity (WGAN choice)."""
    return x


class InfeasibleQuadrant(ValueError):
    def __init__(self, quadrant, attempts):
        super().__init__(f"no discriminator with fitness signs {quadrant} found in {attempts} attempts")
        self.quadrant = quadrant
        self.attempts = attempts


def _check_disc(disc) -> DiscriminatorParams:
    disc = DiscriminatorParams(*map(float, disc))
    if not disc.is_ordered():
        raise ValueError(f"discriminator bounds violate l1 <= r1 <= l2 <= r2: {tuple(disc)}")
    return disc


def _gen_prob(gen, disc) -> float:
    """P_gen([l1,r1]) + P_gen([l2,r2])."""
    lo = np.array([disc[0], disc[2]])
    hi = np.array([disc[1], disc[3]])
    means = np.array([gen[0], gen[1]])
    return float(0.5 * unit_mass(lo[None, :] - means[:, None], hi[None, :] - means[:, None]).sum())


def _interval_probs(gen, a, b) -> float:
    return 0.5 * float(unit_mass(np.array([a - gen[0], a - gen[1]]), np.array([b - gen[0], b - gen[1]])).sum())


def _density(gen, x) -> float:
    return 0.5 * (normal_pdf(x - gen[0]) + normal_pdf(x - gen[1]))


def _sample_mixture(gen, n, rng) -> np.ndarray:
    comp = rng.integers(0, 2, size=n)
    means = np.where(comp == 0, gen[0], gen[1])
    return means + rng.standard_normal(n)


def _indicator(x, disc) -> np.ndarray:
    return ((x >= disc[0]) & (x <= disc[1])) | ((x >= disc[2]) & (x <= disc[3]))


def loss(gen, disc, target, eval: EvaluationMode = CLOSED_FORM) -> float:
    disc = _check_disc(disc)
    if isinstance(eval, MonteCarlo):
        rng = np.random.default_rng(eval.seed)
        real = _sample_mixture(target, eval.sample_count, rng)
        fake = _sample_mixture(gen, eval.sample_count, rng)
        d_real = identity_measure(_indicator(real, disc).mean())
        d_fake = identity_measure(1.0 - _indicator(fake, disc).mean())
        return float(d_real + d_fake)
    return _gen_prob(target, disc) + 1.0 - _gen_prob(gen, disc)


def grad_generator(gen, disc, target=None) -> tuple[float, float]:
    """dL/dmu_c = -0.5 * sum_k [phi(l_k - mu_c) - phi(r_k - mu_c)]."""
    disc = _check_disc(disc)
    out = []
    for mu in (gen[0], gen[1]):
        d = 0.0
        for lo, hi in ((disc.l1, disc.r1), (disc.l2, disc.r2)):
            if lo != hi:
                d += normal_pdf(lo - mu) - normal_pdf(hi - mu)
        out.append(-0.5 * d)
    return out[0], out[1]


def grad_discriminator(gen, disc, target) -> tuple[float, float, float, float]:
    disc = _check_disc(disc)
    dl1 = _density(gen, disc.l1) - _density(target, disc.l1)
    dr1 = _density(target, disc.r1) - _density(gen, disc.r1)
    dl2 = _density(gen, disc.l2) - _density(target, disc.l2)
    dr2 = _density(target, disc.r2) - _density(gen, disc.r2)
    return dl1, dr1, dl2, dr2


def repair(values) -> DiscriminatorParams:
    """Sort four bounds into (l1, r1, l2, r2)."""
    vals = [float(v) for v in values]
    if len(vals) != 4 or not all(math.isfinite(v) for v in vals):
        raise ValueError(f"repair needs four finite values, got {values!r}")
    return DiscriminatorParams(*sorted(vals))


def project(values) -> DiscriminatorParams:
    """Euclidean projection onto l1 <= r1 <= l2 <= r2 (pool adjacent violators).

    Unlike ``repair``, crossing bounds are merged at their mean, so an
    interval squeezed by a gradient step collapses to zero length instead
    of flipping orientation.
    """
    vals = [float(v) for v in values]
    if len(vals) != 4 or not all(math.isfinite(v) for v in vals):
        raise ValueError(f"project needs four finite values, got {values!r}")
    blocks: list[list[float]] = []  # [mean, count]
    for v in vals:
        blocks.append([v, 1])
        while len(blocks) > 1 and blocks[-2][0] > blocks[-1][0]:
            m2, c2 = blocks.pop()
            m1, c1 = blocks.pop()
            blocks.append([(m1 * c1 + m2 * c2) / (c1 + c2), c1 + c2])
    out = []
    for m, c in blocks:
        out.extend([m] * c)
    return DiscriminatorParams(*out)


def gen_distance(gen, target) -> float:
    """Euclidean distance minimized over the component-label swap."""
    d1 = math.hypot(gen[0] - target[0], gen[1] - target[1])
    d2 = math.hypot(gen[0] - target[1], gen[1] - target[0])
    return min(d1, d2)


def success(best_gen, target, threshold: float = 0.1) -> bool:
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    return gen_distance(best_gen, target) < threshold


def _sign(x: float) -> int:
    if abs(x) < ZERO_TOL:
        return 0
    return 1 if x > 0 else -1


def interval_contributions(disc, gen_fixed, target) -> tuple[float, float]:
    disc = _check_disc(disc)
    left = _interval_probs(target, disc.l1, disc.r1) - _interval_probs(gen_fixed, disc.l1, disc.r1)
    right = _interval_probs(target, disc.l2, disc.r2) - _interval_probs(gen_fixed, disc.l2, disc.r2)
    return left, right


def interval_fitness_signs(disc, gen_fixed, target) -> tuple[int, int]:
    """Signs (-1, 0, +1) of P_target - P_gen on the left and right intervals."""
    left, right = interval_contributions(disc, gen_fixed, target)
    return _sign(left), _sign(right)


def sample_disc_in_quadrant(quadrant, gen_fixed, target, bound_range, rng,
                            max_attempts: int = 10_000, max_width: float | None = None,
                            return_attempts: bool = False):
    """Rejection-sample a discriminator whose interval signs equal ``quadrant``.

    Bounds are drawn uniformly from ``bound_range`` (an Interval or (lo, hi))
    and sorted.  ``max_width`` optionally also rejects wider intervals.
    """
    lo, hi = (bound_range.lo, bound_range.hi) if hasattr(bound_range, "lo") else bound_range
    quadrant = tuple(int(q) for q in quadrant)
    for attempt in range(1, max_attempts + 1):
        disc = repair(rng.uniform(lo, hi, size=4))
        if max_width is not None and max(disc.lengths()) > max_width:
            continue
        if interval_fitness_signs(disc, gen_fixed, target) == quadrant:
            return (disc, attempt) if return_attempts else disc
    raise InfeasibleQuadrant(quadrant, max_attempts)


def simultaneous_gradient_step(gen, disc, target, lr_gen: float, lr_disc: float,
                               alternating: bool = False, constraint: str = "project"):
    """One gradient descent (generator) / ascent (discriminator) step.

    Both gradients are taken at the incoming point unless ``alternating``,
    in which case the discriminator sees the already-updated generator.
    ``constraint`` picks how the bound ordering is restored: "project"
    (default) or "sort".
    """
    fix = project if constraint == "project" else repair
    disc = _check_disc(disc)
    g = grad_generator(gen, disc, target)
    new_gen = GeneratorParams(gen[0] - lr_gen * g[0], gen[1] - lr_gen * g[1])
    d = grad_discriminator(new_gen if alternating else gen, disc, target)
    new_disc = fix([disc[i] + lr_disc * d[i] for i in range(4)])
    return new_gen, new_disc


class TheoreticalGAN:
    """Array-level view of the toy game used by the coevolution engine.

    Generators are length-2 arrays, discriminators length-4 arrays.
    """

    gen_dim = 2
    disc_dim = 4

    def __init__(self, target=(-3.0, 3.0), eval: EvaluationMode = CLOSED_FORM):
        self.target = GeneratorParams(*map(float, target))
        self.eval = eval

    def gen_probs(self, gens, discs) -> np.ndarray:
        """(T, S) matrix of P_{gen_i}(A_j)."""
        gens = np.atleast_2d(np.asarray(gens, dtype=float))
        discs = np.atleast_2d(np.asarray(discs, dtype=float))
        lo = discs[:, [0, 2]]  # (S, 2)
        hi = discs[:, [1, 3]]
        # (T, 2 comps, S, 2 intervals)
        m = gens[:, :, None, None]
        mass = unit_mass(lo[None, None] - m, hi[None, None] - m)
        return 0.5 * mass.sum(axis=(1, 3))

    def loss_matrix(self, gens, discs) -> np.ndarray:
        if isinstance(self.eval, MonteCarlo):
            return np.array([[loss(g, d, self.target, self.eval) for d in discs] for g in gens])
        discs = np.atleast_2d(np.asarray(discs, dtype=float))
        real = self.gen_probs(np.asarray([self.target]), discs)[0]
        fake = self.gen_probs(gens, discs)
        return real[None, :] + 1.0 - fake

    def grad_gen(self, gen, discs) -> np.ndarray:
        """Sum over the given discriminators of dL/dmu."""
        discs = np.atleast_2d(np.asarray(discs, dtype=float))
        gen = np.asarray(gen, dtype=float)
        lo = discs[:, [0, 2]][None]  # (1, S, 2)
        hi = discs[:, [1, 3]][None]
        m = gen[:, None, None]
        d = np.where(hi > lo, unit_pdf(lo - m) - unit_pdf(hi - m), 0.0)
        return -0.5 * d.sum(axis=(1, 2))

    def grad_disc(self, gens, disc) -> np.ndarray:
        """Sum over the given generators of dL/d(l1, r1, l2, r2)."""
        gens = np.atleast_2d(np.asarray(gens, dtype=float))
        disc = np.asarray(disc, dtype=float)
        t = np.asarray(self.target)
        p_real = 0.5 * unit_pdf(disc[:, None] - t[None, :]).sum(axis=1)  # (4,)
        p_fake = 0.5 * unit_pdf(disc[None, :, None] - gens[:, None, :]).sum(axis=2).sum(axis=0)
        n = gens.shape[0]
        sign = np.array([-1.0, 1.0, -1.0, 1.0])
        return sign * (n * p_real - p_fake)

    def repair_disc(self, values) -> np.ndarray:
        return np.asarray(repair(values))

    def project_disc(self, values) -> np.ndarray:
        return np.asarray(project(values))
