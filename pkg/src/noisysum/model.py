"""Populations, sampling distributions, and pointwise-close perturbations.

A population is a vector of real values x_1..x_N whose sum we want to
estimate.  Samples are drawn from a distribution Q that we cannot evaluate;
all we know is a nominal distribution P and a bound gamma such that

    (1 - gamma) * P(i) <= Q(i) <= (1 + gamma) * P(i)   for every i.

``PerturbedPair`` packages (P, Q) together with the per-index relative
deviations gamma_i defined by Q(i) = (1 + gamma_i) * P(i).

Index convention: element indices are 1-based across the public API,
matching the on-disk formats (``index`` column starts at 1).  Arrays held
by these types are plain 0-based numpy arrays; position ``i`` stores the
data for index ``i + 1``.

Randomness: sampling uses numpy's ``default_rng`` (PCG64).  A draw for a
given (distribution, m, seed) is reproducible: the sampler requests ``m``
uniform table slots, then ``m`` uniform acceptance variates, and resolves
each slot against an alias table built once per distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

# Absolute tolerance on probability normalization and mass-balance checks.
NORMALIZATION_ATOL = 1e-12
# Relative tolerance tying Q(i) to (1 + gamma_i) * P(i).
PAIR_RTOL = 1e-12


def _as_float_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Population:
    """Real-valued population x_1..x_N.

    Parameters
    ----------
    values : array-like of float
        The population values, position i holding x_{i+1}.
    """

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_float_vector(self.values, "values"))

    @property
    def size(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class Distribution:
    """Probability vector over indices 1..N.

    Entries must be nonnegative and sum to 1 within ``NORMALIZATION_ATOL``.
    Zero entries are allowed here; contexts that require strict positivity
    (any use as a nominal distribution) check it themselves.
    """

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_float_vector(self.probs, "probs"))
        if np.any(self.probs < 0.0):
            raise ValueError("probabilities must be nonnegative")
        total = float(np.sum(self.probs))
        if abs(total - 1.0) > NORMALIZATION_ATOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")

    @property
    def size(self) -> int:
        return int(self.probs.size)

    @cached_property
    def _alias_table(self) -> tuple[np.ndarray, np.ndarray]:
        return _build_alias_table(self.probs)

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``m`` 0-based indices. Slots first, then acceptance variates."""
        accept, alias = self._alias_table
        slots = rng.integers(0, self.size, size=m)
        u = rng.random(m)
        return np.where(u < accept[slots], slots, alias[slots])


def _build_alias_table(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose's alias method: O(N) setup, O(1) per draw.

    Returns (accept, alias): a slot j yields j with probability accept[j],
    otherwise alias[j].  Construction order is deterministic (ascending
    index scan feeding two explicit stacks), so tables are reproducible.
    """
    n = probs.size
    scaled = probs * n
    accept = np.ones(n, dtype=np.float64)
    alias = np.arange(n, dtype=np.int64)
    small = [j for j in range(n) if scaled[j] < 1.0]
    large = [j for j in range(n) if scaled[j] >= 1.0]
    scaled = scaled.copy()
    while small and large:
        s = small.pop()
        g = large.pop()
        accept[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        if scaled[g] < 1.0:
            small.append(g)
        else:
            large.append(g)
    # Leftovers are within rounding of 1; they keep accept = 1.
    for j in small + large:
        accept[j] = 1.0
        alias[j] = j
    accept.setflags(write=False)
    alias.setflags(write=False)
    return accept, alias


@dataclass(frozen=True)
class PerturbedPair:
    """Nominal distribution P, true distribution Q, and their deviations.

    Invariants checked at construction:

    - Q(i) = (1 + deviations[i]) * P(i) within relative ``PAIR_RTOL``,
    - |deviations[i]| <= gamma_bound for every i,
    - sum_i deviations[i] * P(i) = 0 within ``NORMALIZATION_ATOL``
      (both sides are probability distributions),
    - every P(i) > 0 (estimators divide by nominal probabilities).
    """

    nominal: Distribution
    true_dist: Distribution
    deviations: np.ndarray
    gamma_bound: float

    def __post_init__(self):
        object.__setattr__(
            self, "deviations", _as_float_vector(self.deviations, "deviations")
        )
        p = self.nominal.probs
        q = self.true_dist.probs
        d = self.deviations
        if not (p.size == q.size == d.size):
            raise ValueError("nominal, true distribution, and deviations disagree on N")
        if np.any(p <= 0.0):
            raise ValueError("nominal probabilities must be strictly positive")
        if not (0.0 <= self.gamma_bound < 1.0):
            raise ValueError("gamma_bound must lie in [0, 1)")
        if np.max(np.abs(d), initial=0.0) > self.gamma_bound:
            raise ValueError("a deviation exceeds gamma_bound")
        expected = (1.0 + d) * p
        if np.max(np.abs(q - expected)) > PAIR_RTOL * max(1.0, float(np.max(np.abs(q)))):
            raise ValueError("true distribution does not match (1 + deviation) * nominal")
        balance = float(np.dot(d, p))
        if abs(balance) > NORMALIZATION_ATOL:
            raise ValueError(f"deviations do not balance under nominal mass: {balance!r}")

    @property
    def size(self) -> int:
        return self.nominal.size


@dataclass(frozen=True)
class SampleBatch:
    """``m`` sampled indices (1-based) plus the seed that produced them."""

    indices: np.ndarray
    seed: int
    m: int

    def __post_init__(self):
        arr = np.asarray(self.indices, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("indices must be a 1-d vector")
        arr.setflags(write=False)
        object.__setattr__(self, "indices", arr)
        if self.m < 1:
            raise ValueError("a batch holds at least one sample")
        if arr.size != self.m:
            raise ValueError("m disagrees with the number of indices")
        if arr.size and int(arr.min()) < 1:
            raise ValueError("indices are 1-based")


@dataclass(frozen=True)
class PopulationStats:
    """Summary of a (population, nominal distribution) pair.

    mu       -- sum of the population values.
    mu_plus  -- sum of their absolute values.
    var_hh   -- single-draw variance of the importance-weighted estimator
                x_X / P(X) under X ~ P, i.e. sum_i P(i) (x_i/P(i) - mu)^2.
    n_tilde  -- max_i 1 / P(i), the effective support size.
    """

    mu: float
    mu_plus: float
    var_hh: float
    n_tilde: float


def population_stats(pop: Population, nominal: Distribution) -> PopulationStats:
    """Compute mu, mu_plus, the single-draw sampling variance, and n_tilde.

    Raises if sizes disagree or any nominal probability is zero.
    """
    p = nominal.probs
    x = pop.values
    if p.size != x.size:
        raise ValueError("population and distribution disagree on N")
    if np.any(p <= 0.0):
        raise ValueError("nominal probabilities must be strictly positive")
    mu = float(np.sum(x))
    mu_plus = float(np.sum(np.abs(x)))
    var_hh = float(np.sum(p * (x / p - mu) ** 2))
    n_tilde = float(np.max(1.0 / p))
    return PopulationStats(mu=mu, mu_plus=mu_plus, var_hh=var_hh, n_tilde=n_tilde)


def make_perturbed(
    nominal: Distribution, deviations, gamma: float
) -> PerturbedPair:
    """Build the pair (P, Q) with Q(i) = (1 + deviations[i]) * P(i).

    Parameters
    ----------
    nominal : Distribution
        The known distribution P; must be strictly positive.
    deviations : array-like of float
        Per-index relative deviations gamma_i.  Must satisfy
        |gamma_i| <= gamma and sum_i gamma_i P(i) = 0 (within tolerance),
        otherwise Q would not be a distribution gamma-close to P.
    gamma : float
        The closeness bound, 0 <= gamma < 1.
    """
    d = _as_float_vector(deviations, "deviations")
    q = (1.0 + d) * nominal.probs
    true_dist = Distribution(q)
    return PerturbedPair(
        nominal=nominal, true_dist=true_dist, deviations=d, gamma_bound=float(gamma)
    )


def worst_case_pair(nominal: Distribution, gamma: float, split) -> PerturbedPair:
    """Saturating perturbation: +gamma on ``split``, -gamma elsewhere.

    ``split`` is a collection of 1-based indices whose nominal mass must
    equal the mass of its complement within ``NORMALIZATION_ATOL``; the
    resulting deviations then balance exactly and every |gamma_i| = gamma.
    """
    p = nominal.probs
    idx = np.asarray(sorted(set(int(i) for i in split)), dtype=np.int64)
    if idx.size and (idx.min() < 1 or idx.max() > p.size):
        raise ValueError("split indices out of range")
    mask = np.zeros(p.size, dtype=bool)
    mask[idx - 1] = True
    mass_in = float(np.sum(p[mask]))
    mass_out = float(np.sum(p[~mask]))
    if abs(mass_in - mass_out) > NORMALIZATION_ATOL:
        raise ValueError(
            f"split mass {mass_in!r} does not balance complement mass {mass_out!r}"
        )
    d = np.where(mask, gamma, -gamma)
    return make_perturbed(nominal, d, gamma)


def draw_samples(source, m: int, seed: int) -> SampleBatch:
    """Draw ``m`` indices from the true distribution.

    ``source`` is a ``PerturbedPair`` (samples come from its true
    distribution) or a bare ``Distribution``.  Identical (source, m, seed)
    triples produce identical batches.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    dist = source.true_dist if isinstance(source, PerturbedPair) else source
    if not isinstance(dist, Distribution):
        raise TypeError("source must be a PerturbedPair or a Distribution")
    rng = np.random.default_rng(seed)
    idx0 = dist.sample(m, rng)
    return SampleBatch(indices=idx0 + 1, seed=int(seed), m=int(m))
