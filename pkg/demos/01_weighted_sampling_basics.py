#!/usr/bin/env python3
"""Where the trouble starts: importance weights that are slightly wrong.

Draws from the true distribution Q but weights by the nominal P.  With
exact weights (Q = P) the order-1 estimate is unbiased and its variance
is var_hh / m.  With Q merely close to P, averaging over many seeds does
not help: the estimate converges to the wrong number, and the gap matches
the closed-form expectation, not the target sum.
"""

import numpy as np

from noisysum.estimators import closed_form_expectation, estimate_sum
from noisysum.model import (
    Distribution,
    Population,
    draw_samples,
    make_perturbed,
    population_stats,
)

M = 400
REPEATS = 2000

values = np.array([3.0, -1.0, 0.5, 2.0, 0.25, 1.25])
pop = Population(values)
probs = np.array([0.30, 0.25, 0.15, 0.12, 0.10, 0.08])
nominal = Distribution(probs)
stats = population_stats(pop, nominal)
print(f"target sum mu = {stats.mu}, var_hh = {stats.var_hh:.4f}, n_tilde = {stats.n_tilde:.1f}")

# Exact weights first: Q = P, so deviations are all zero.
exact = make_perturbed(nominal, np.zeros(6), 0.5)
ests = [
    estimate_sum(draw_samples(exact, M, seed), 1, 0.0, pop, nominal).estimate
    for seed in range(REPEATS)
]
print(f"\nQ = P: mean over {REPEATS} seeds = {np.mean(ests):.4f} (mu = {stats.mu})")
print(f"       empirical variance = {np.var(ests):.6f} vs var_hh/m = {stats.var_hh / M:.6f}")

# Now tilt Q by up to 20% while keeping it a valid distribution.
devs = np.array([0.20, -0.12, -0.20, 0.05, 0.10, -0.125])
devs -= np.dot(devs, probs)  # zero nominal mass keeps Q summing to 1
pair = make_perturbed(nominal, devs, 0.25)
ests = [
    estimate_sum(draw_samples(pair, M, seed), 1, 0.0, pop, nominal).estimate
    for seed in range(REPEATS)
]
expected = closed_form_expectation(pop, pair, 1, 0.0)
print(f"\nQ close to P: mean over {REPEATS} seeds = {np.mean(ests):.4f}")
print(f"   closed-form expectation = {expected:.4f}, target mu = {stats.mu}")
print(f"   the bias {expected - stats.mu:+.4f} never averages out; more seeds only sharpen it")
