import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coevgan.problem import (DiscriminatorParams, GeneratorParams, InfeasibleQuadrant, MonteCarlo, TheoreticalGAN,
                             grad_discriminator, grad_generator, interval_contributions, interval_fitness_signs, loss,
                             project, repair, sample_disc_in_quadrant, simultaneous_gradient_step, success)

TARGET = GeneratorParams(-3.0, 3.0)
# Monte Carlo (10**7 samples each from target and generator, seed 54321) for
# gen=(0,0), target=(-1,2.5), disc=(-3,-1,1,3).
MC_LOSS = 1.2479437999999998
MC_LOSS_SE = 0.00021487013574565453
# Fraction of 10**6 sorted uniform[-10,10] bound draws per sign quadrant,
# gen_fixed=(-1,2.5), target=(-3,3) (vectorized scipy.stats.norm classification, seed 2024).
QUADRANT_RATES = {(1, 1): 0.36339, (-1, 1): 0.265845, (1, -1): 0.349196, (-1, -1): 0.02011}

coord = st.floats(min_value=-10, max_value=10, allow_nan=False)


def random_case(rng):
    gen = GeneratorParams(*rng.uniform(-10, 10, 2))
    target = GeneratorParams(*rng.uniform(-10, 10, 2))
    while True:
        b = np.sort(rng.uniform(-10, 10, 4))
        if b[1] - b[0] >= 0.1 and b[3] - b[2] >= 0.1:
            return gen, DiscriminatorParams(*b), target


def fd_loss(f, x, i, h=1e-5):
    up = list(x)
    dn = list(x)
    up[i] += h
    dn[i] -= h
    return (f(up) - f(dn)) / (2 * h)


def close(exact, approx):
    return abs(exact - approx) <= 1e-5 * abs(exact) + 1e-10


def test_loss_equal_generators_is_one():
    disc = (-4.0, -2.0, 0.5, 6.0)
    assert loss(TARGET, disc, TARGET) == pytest.approx(1.0, abs=1e-12)


def test_empty_discriminator_loss():
    assert loss((0.3, 1.0), (1.0, 1.0, 2.0, 2.0), TARGET) == 1.0


def test_loss_closed_form_matches_monte_carlo():
    L = loss((0.0, 0.0), (-3.0, -1.0, 1.0, 3.0), (-1.0, 2.5))
    assert abs(L - MC_LOSS) < 3 * MC_LOSS_SE


def test_loss_rejects_unordered_disc():
    with pytest.raises(ValueError):
        loss((0, 0), (1.0, 0.0, 2.0, 3.0), TARGET)


def test_monte_carlo_mode_validation():
    with pytest.raises(ValueError):
        MonteCarlo(0)


@given(coord, coord, coord, coord, coord, coord)
def test_loss_bounds_and_label_symmetry(m1, m2, a, b, c, d):
    disc = repair((a, b, c, d))
    L = loss((m1, m2), disc, TARGET)
    assert 0.0 <= L <= 2.0
    assert loss((m2, m1), disc, TARGET) == pytest.approx(L, abs=1e-15)


def test_gradient_examples():
    assert grad_generator((1.0, 2.0), (0.0, 0.0, 3.0, 3.0), TARGET) == (0.0, 0.0)
    # Both components centred on the left interval, right interval empty.
    g = grad_generator((-1.0, -1.0), (-3.0, 1.0, 5.0, 5.0), TARGET)
    assert abs(g[0]) < 1e-15 and abs(g[1]) < 1e-15
    assert max(map(abs, grad_discriminator(TARGET, (-5.0, -1.0, 0.0, 2.0), TARGET))) <= 1e-12
    assert max(map(abs, grad_discriminator((-1.0, 4.0), (-50.0, -1.0, 0.0, 2.0), TARGET)[:1])) < 1e-100


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(11)
    for _ in range(200):
        gen, disc, target = random_case(rng)
        g = grad_generator(gen, disc, target)
        for i in range(2):
            approx = fd_loss(lambda x: loss(x, disc, target), gen, i)
            assert close(g[i], approx), (gen, disc, target, i)
        d = grad_discriminator(gen, disc, target)
        for i in range(4):
            approx = fd_loss(lambda x: loss(gen, x, target), disc, i)
            assert close(d[i], approx), (gen, disc, target, i)


def test_closed_form_vs_monte_carlo_randomized():
    rng = np.random.default_rng(3)
    n = 10**5
    for seed in range(20):
        gen, disc, target = random_case(rng)
        exact = loss(gen, disc, target)
        est = loss(gen, disc, target, MonteCarlo(n, seed))
        # Per-term Bernoulli variances from the exact probabilities; a far-away
        # mixture has no mass on A, which isolates each term.
        a = 1.0 - loss(gen, disc, (1e6, 1e6))  # P_gen(A)
        b = loss((1e6, 1e6), disc, target) - 1.0  # P_target(A)
        se = math.sqrt(a * (1 - a) / n + b * (1 - b) / n)
        assert abs(est - exact) <= 4 * se + 1e-12


def test_repair_examples():
    assert repair((1, 0, 3, 2)) == (0, 1, 2, 3)
    assert repair((0, 1, 2, 3)) == (0, 1, 2, 3)
    assert repair((5, 5, 5, 5)) == (5, 5, 5, 5)
    with pytest.raises(ValueError):
        repair((0, 1, math.inf, 2))


@given(st.lists(coord, min_size=4, max_size=4))
def test_repair_idempotent_and_permutation_invariant(vals):
    r = repair(vals)
    assert r.is_ordered()
    assert repair(r) == r
    for perm in itertools.permutations(vals):
        assert repair(perm) == r


@given(st.lists(coord, min_size=4, max_size=4))
def test_project_is_ordered_projection(vals):
    p = project(vals)
    assert p.is_ordered()
    assert project(p) == pytest.approx(p)
    # No ordered point is closer: check against a few feasible candidates.
    d = sum((x - y) ** 2 for x, y in zip(vals, p))
    for cand in (repair(vals), tuple([float(np.mean(vals))] * 4)):
        assert d <= sum((x - y) ** 2 for x, y in zip(vals, cand)) + 1e-9


def test_project_collapses_crossed_interval():
    assert project((1.0, 0.0, 2.0, 3.0)) == (0.5, 0.5, 2.0, 3.0)


def test_success():
    assert success(TARGET, TARGET)
    assert success(TARGET.swapped(), TARGET)
    assert not success((-2.8, 3.0), TARGET, 0.1)
    with pytest.raises(ValueError):
        success(TARGET, TARGET, 0.0)


@given(coord, coord)
def test_success_swap_invariant(a, b):
    gen = GeneratorParams(a, b)
    assert success(gen, TARGET, 1.0) == success(gen.swapped(), TARGET, 1.0) == success(gen, TARGET.swapped(), 1.0)


def test_interval_signs_examples():
    gen = GeneratorParams(-1.0, 2.5)
    assert interval_fitness_signs((-5, -1, 0, 2), gen, gen) == (0, 0)
    # Target mass dominates around -3.
    assert interval_fitness_signs((-4.0, -2.5, 5.0, 5.0), gen, TARGET)[0] == 1


def test_interval_signs_match_monte_carlo():
    rng = np.random.default_rng(5)
    gen = GeneratorParams(-1.0, 2.5)
    n = 10**6
    checked = 0
    while checked < 20:
        disc = repair(rng.uniform(-6, 6, 4))
        real = rng.standard_normal(n) + np.where(rng.integers(0, 2, n) == 0, TARGET[0], TARGET[1])
        fake = rng.standard_normal(n) + np.where(rng.integers(0, 2, n) == 0, gen[0], gen[1])
        signs = interval_fitness_signs(disc, gen, TARGET)
        for k, (lo, hi) in enumerate(((disc.l1, disc.r1), (disc.l2, disc.r2))):
            pr = np.mean((real >= lo) & (real <= hi))
            pf = np.mean((fake >= lo) & (fake <= hi))
            se = math.sqrt((pr * (1 - pr) + pf * (1 - pf)) / n)
            if abs(pr - pf) > 3 * se:
                assert signs[k] == int(np.sign(pr - pf))
                checked += 1


def test_quadrant_sampler():
    gen = GeneratorParams(-1.0, 2.5)
    rng = np.random.default_rng(0)
    with pytest.raises(InfeasibleQuadrant) as err:
        sample_disc_in_quadrant((1, -1), gen, gen, (-10, 10), rng, max_attempts=200)
    assert err.value.quadrant == (1, -1)
    disc = sample_disc_in_quadrant((-1, -1), gen, TARGET, (-10, 10), rng)
    assert interval_fitness_signs(disc, gen, TARGET) == (-1, -1)


@pytest.mark.parametrize("quadrant", list(QUADRANT_RATES))
def test_quadrant_acceptance_rate(quadrant):
    gen = GeneratorParams(-1.0, 2.5)
    rng = np.random.default_rng(0)
    draws = 1000
    attempts = sum(sample_disc_in_quadrant(quadrant, gen, TARGET, (-10, 10), rng, return_attempts=True)[1]
                   for _ in range(draws))
    # Attempts are geometric: mean 1/p, variance (1-p)/p^2.
    p = QUADRANT_RATES[quadrant]
    mean, sd = 1 / p, math.sqrt((1 - p) / p**2 / draws)
    assert abs(attempts / draws - mean) <= 3 * sd


def test_simultaneous_step_examples():
    disc = DiscriminatorParams(-4.0, -2.0, 1.0, 4.0)
    # At gen == target the discriminator has nothing to gain.
    g, d = simultaneous_gradient_step(TARGET, disc, TARGET, 0.0, 0.5)
    assert g == TARGET and d == pytest.approx(disc, abs=1e-15)
    gen = GeneratorParams(0.3, 1.2)
    g, d = simultaneous_gradient_step(gen, disc, TARGET, 0.0, 0.0)
    assert g == gen and d == disc


def test_simultaneous_step_matches_fd_oracle():
    rng = np.random.default_rng(23)
    for _ in range(50):
        gen, disc, target = random_case(rng)
        lr = 0.01
        gg = [fd_loss(lambda x: loss(x, disc, target), gen, i) for i in range(2)]
        gd = [fd_loss(lambda x: loss(gen, x, target), disc, i) for i in range(4)]
        exp_gen = [gen[i] - lr * gg[i] for i in range(2)]
        exp_disc = repair([disc[i] + lr * gd[i] for i in range(4)])
        g, d = simultaneous_gradient_step(gen, disc, target, lr, lr, constraint="sort")
        assert g == pytest.approx(exp_gen, abs=1e-8)
        assert d == pytest.approx(exp_disc, abs=1e-8)


def test_alternating_differs_from_simultaneous():
    gen, disc = GeneratorParams(0.0, 1.0), DiscriminatorParams(-1.0, 0.5, 1.5, 2.0)
    g1, d1 = simultaneous_gradient_step(gen, disc, TARGET, 1.0, 1.0)
    g2, d2 = simultaneous_gradient_step(gen, disc, TARGET, 1.0, 1.0, alternating=True)
    assert g1 == g2 and d1 != d2


def test_vectorized_problem_matches_scalar():
    rng = np.random.default_rng(1)
    prob = TheoreticalGAN(TARGET)
    gens = rng.uniform(-5, 5, (4, 2))
    discs = np.array([repair(rng.uniform(-6, 6, 4)) for _ in range(3)])
    L = prob.loss_matrix(gens, discs)
    for i, j in np.ndindex(L.shape):
        assert L[i, j] == pytest.approx(loss(gens[i], discs[j], TARGET), abs=1e-14)
    assert prob.grad_gen(gens[0], discs) == pytest.approx(
        np.sum([grad_generator(gens[0], d, TARGET) for d in discs], axis=0), abs=1e-14)
    assert prob.grad_disc(gens, discs[0]) == pytest.approx(
        np.sum([grad_discriminator(g, discs[0], TARGET) for g in gens], axis=0), abs=1e-14)


def test_interval_contributions_sum_to_loss_gap():
    disc = DiscriminatorParams(-4.0, -1.0, 0.0, 3.5)
    gen = GeneratorParams(-1.0, 2.5)
    left, right = interval_contributions(disc, gen, TARGET)
    assert left + right == pytest.approx(loss(gen, disc, TARGET) - 1.0, abs=1e-14)
