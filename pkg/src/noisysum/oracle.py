"""Exact estimator moments by full enumeration of sample outcomes.

Ground truth for testing: expectation and variance of the order-k
estimator are computed by walking every possible sample outcome and
weighting by its exact probability under the true distribution.  The
estimator value here is evaluated straight from its definition with
``math.comb``, deliberately not sharing code with the incremental-product
implementation it is used to check.

The estimator depends on a batch only through its frequency vector, so
outcomes are enumerated as multisets (combinations with replacement) and
weighted by exact multinomial coefficients; this visits each distinct
frequency vector once instead of each of the N^m ordered outcomes.
``outcome_count`` still reports N^m.  Accumulation uses ``math.fsum``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement, groupby

from .model import PerturbedPair, Population

DEFAULT_BUDGET = 10**7


class BudgetExceededError(RuntimeError):
    """The outcome space is too large to enumerate."""


@dataclass(frozen=True)
class ExactMoments:
    expectation: float
    variance: float
    outcome_count: int
    total_prob: float


def _multinomial(m: int, counts) -> int:
    # prod_j C(remaining, y_j); exact, bounded by N^m, no factorial blowup.
    coeff = 1
    remaining = m
    for y in counts:
        coeff *= math.comb(remaining, y)
        remaining -= y
    return coeff


def _enumerate(pop, pair, m, k, pilot, budget, value_fn):
    n = pop.size
    if pair.size != n:
        raise ValueError("population and pair disagree on N")
    if m < 1:
        raise ValueError("m must be at least 1")
    if not (1 <= k <= m):
        raise ValueError("need 1 <= k <= m")
    if n**m > budget:
        raise BudgetExceededError(f"N^m = {n}^{m} exceeds the budget {budget}")
    q = pair.true_dist.probs
    p = pair.nominal.probs
    xbar = pop.values - p * pilot
    probs, firsts, seconds = [], [], []
    for outcome in combinations_with_replacement(range(n), m):
        pairs = [(i, len(list(g))) for i, g in groupby(outcome)]
        weight = float(_multinomial(m, (y for _, y in pairs)))
        for i, y in pairs:
            weight *= q[i] ** y
        value = value_fn(pairs, xbar, p, m, k, pilot)
        probs.append(weight)
        firsts.append(weight * value)
        seconds.append(weight * value * value)
    total = math.fsum(probs)
    expectation = math.fsum(firsts)
    variance = math.fsum(seconds) - expectation**2
    if variance < 0.0:
        # Exact in theory; tiny negatives are float cancellation.
        variance = max(variance, -1e-12)
        variance = max(variance, 0.0)
    return ExactMoments(
        expectation=expectation,
        variance=variance,
        outcome_count=n**m,
        total_prob=total,
    )


def _estimator_value(pairs, xbar, p, m, k, pilot) -> float:
    value = pilot
    for h in range(1, k + 1):
        acc = math.fsum(
            math.comb(y, h) * xbar[i] / p[i] ** h for i, y in pairs if y >= h
        )
        value += (-1.0) ** (h + 1) * math.comb(k, h) * acc / math.comb(m, h)
    return value


def exact_estimator_moments(
    pop: Population,
    pair: PerturbedPair,
    m: int,
    k: int,
    pilot: float = 0.0,
    budget: int = DEFAULT_BUDGET,
) -> ExactMoments:
    """Exact expectation/variance of the order-k estimate from m samples."""
    return _enumerate(pop, pair, m, k, pilot, budget, _estimator_value)


def exact_xi_moments(
    pop: Population,
    pair: PerturbedPair,
    m: int,
    h: int,
    pilot: float = 0.0,
    budget: int = DEFAULT_BUDGET,
) -> ExactMoments:
    """Exact moments of the single order-h collision average."""

    def value_fn(pairs, xbar, p, m_, _k, _pilot):
        return math.fsum(
            math.comb(y, h) * xbar[i] / p[i] ** h for i, y in pairs if y >= h
        ) / math.comb(m_, h)

    return _enumerate(pop, pair, m, h, pilot, budget, value_fn)
