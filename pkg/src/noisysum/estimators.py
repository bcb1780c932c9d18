"""Sum estimators that cancel bias from imprecisely known sampling weights.

The plain importance-weighted estimator (1/m) sum_j x_{X_j} / P(X_j) is
unbiased only when samples really come from P.  When they come from an
unknown Q with Q(i) = (1 + gamma_i) P(i), its expectation picks up the
weighted deviation sum_i gamma_i x_i.  The estimators here combine
collision statistics of several orders so that all deviation terms up to
order k cancel:

    estimate = W + sum_{h=1..k} (-1)^(h+1) C(k,h) * A_h

    A_h = (1 / C(m,h)) * sum_i C(Y_i,h) * (x_i - P(i) W) / P(i)^h

where Y_i counts occurrences of index i among the m samples and W is a
centering pilot value (an earlier rough estimate of the sum).  The exact
expectation, conditional on W, is

    W + sum_i (x_i - P(i) W) * (1 + (-1)^(k+1) gamma_i^k),

so the residual bias is bounded by gamma^k * sum_i |x_i - P(i) W|.

Numerics: binomial ratios are never formed from factorials.  Each
per-index term C(Y_i,h) / (C(m,h) P(i)^h) is the incremental product
prod_{j<h} (Y_i - j) / ((m - j) P(i)); if a running product leaves the
float range it is redone in log space (all factors are positive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .model import (
    Distribution,
    PerturbedPair,
    Population,
    SampleBatch,
    draw_samples,
)

# Orders beyond this are numerically pointless: gamma^k underflows any
# realistic tolerance long before, and coefficient growth hurts variance.
K_MAX = 32
# Running products above this magnitude switch to a log-space recompute.
OVERFLOW_GUARD = 1e300


class InfeasiblePlanError(ValueError):
    """A requested accuracy cannot be planned within supported orders."""


@dataclass(frozen=True)
class FrequencyVector:
    """Occurrence counts Y_1..Y_N of a sample batch; sums to m."""

    counts: np.ndarray
    m: int

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("counts must be a non-empty 1-d vector")
        if np.any(arr < 0):
            raise ValueError("counts must be nonnegative")
        if int(arr.sum()) != self.m:
            raise ValueError("counts do not sum to m")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @cached_property
    def sampled(self) -> tuple[np.ndarray, np.ndarray]:
        """0-based positions with nonzero counts, and those counts."""
        nz = np.nonzero(self.counts)[0]
        return nz, self.counts[nz]


@dataclass(frozen=True)
class EstimatorReport:
    """Result of one estimator evaluation.

    ``estimate`` always equals ``pilot_W`` plus the alternating binomial
    combination of ``xi_values`` (checked at construction); ``t`` is the
    pilot-stage sample count, 0 when the pilot was supplied directly.
    """

    estimate: float
    k: int
    m: int
    t: int
    pilot_W: float
    xi_values: tuple[float, ...]
    seed: int

    def __post_init__(self):
        if self.k < 1 or len(self.xi_values) != self.k:
            raise ValueError("xi_values must hold orders 1..k")
        if self.m < 1 or self.t < 0:
            raise ValueError("m must be positive and t nonnegative")
        recombined = self.pilot_W + math.fsum(
            (-1.0) ** (h + 1) * math.comb(self.k, h) * self.xi_values[h - 1]
            for h in range(1, self.k + 1)
        )
        scale = max(1.0, abs(self.estimate), abs(recombined))
        if not math.isfinite(self.estimate) or abs(self.estimate - recombined) > 1e-9 * scale:
            raise ValueError("estimate does not recombine from xi_values")

    def to_json_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "k": self.k,
            "m": self.m,
            "t": self.t,
            "pilot_W": self.pilot_W,
            "xi_values": list(self.xi_values),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class PlanParameters:
    """Planned (k, m, t) for target accuracy (eps1, eps2) at closeness gamma."""

    k: int
    m: int
    t: int
    eps1: float
    eps2: float
    gamma: float
    c_m: float
    c_t: float

    def __post_init__(self):
        if not (self.m >= self.k >= 1 and self.t >= 1):
            raise ValueError("plans require m >= k >= 1 and t >= 1")
        if self.k != required_order(self.gamma, self.eps1):
            raise ValueError("k disagrees with ceil(lg eps1 / lg gamma)")


def required_order(gamma: float, eps1: float) -> int:
    """Smallest k with gamma^k <= eps1, i.e. ceil(lg eps1 / lg gamma).

    Ratios within 1e-9 of an integer snap down so exact powers (for
    example gamma=0.1, eps1=0.01) are not inflated by float log noise.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    if not (0.0 < eps1 < 1.0):
        raise ValueError("eps1 must lie in (0, 1)")
    ratio = math.log(eps1) / math.log(gamma)
    k = math.ceil(ratio - 1e-9)
    return max(1, k)


def plan_parameters(
    gamma: float,
    eps1: float,
    eps2: float,
    n_tilde: float,
    var_hh: float,
    c_m: float = 4.0,
    c_t: float = 16.0,
) -> PlanParameters:
    """Choose the estimator order and the two sample budgets.

    k = ceil(lg eps1 / lg gamma) cancels bias down to eps1 relative;
    m = ceil(c_m * (n_tilde^(k-1) * var_hh / eps2^2)^(1/k)) controls the
    main-stage fluctuation at the eps2 scale, clamped to at least k;
    t = ceil(c_t * (1 + gamma^(2k) * var_hh / eps2^2)) sizes the pilot.

    The constants default to the calibrated values c_m=4, c_t=16
    (see demos/06_calibrate_plan_constants.py).
    """
    if eps2 <= 0.0:
        raise ValueError("eps2 must be positive")
    if var_hh < 0.0:
        raise ValueError("var_hh must be nonnegative")
    if n_tilde < 1.0:
        raise ValueError("n_tilde must be at least 1")
    if c_m <= 0.0 or c_t <= 0.0:
        raise ValueError("plan constants must be positive")
    k = required_order(gamma, eps1)
    if k > K_MAX:
        raise InfeasiblePlanError(
            f"target eps1={eps1!r} at gamma={gamma!r} needs order {k} > {K_MAX}"
        )
    if var_hh == 0.0:
        m = k
        t = max(1, math.ceil(c_t))
    else:
        log_core = ((k - 1) * math.log(n_tilde) + math.log(var_hh) - 2.0 * math.log(eps2)) / k
        m = max(k, math.ceil(c_m * math.exp(log_core)))
        t = max(1, math.ceil(c_t * (1.0 + gamma ** (2 * k) * var_hh / eps2**2)))
    return PlanParameters(
        k=k, m=m, t=t, eps1=eps1, eps2=eps2, gamma=gamma, c_m=c_m, c_t=c_t
    )


def frequency_vector(batch: SampleBatch, n: int) -> FrequencyVector:
    """Count occurrences of each index 1..n in the batch."""
    idx = batch.indices
    if int(idx.max()) > n:
        raise ValueError(f"batch contains an index above N={n}")
    counts = np.bincount(idx, minlength=n + 1)[1:]
    return FrequencyVector(counts=counts, m=batch.m)


def _log_space_terms(cnt: np.ndarray, h: int, m: int, p: np.ndarray) -> np.ndarray:
    """Recompute prod_{j<h} (cnt-j)/((m-j) p) via exp(sum of logs).

    Factors are strictly positive here (cnt >= h guarantees cnt - j >= 1),
    so no sign bookkeeping is needed beyond the caller's value sign.
    """
    logs = np.zeros(cnt.shape, dtype=np.float64)
    for j in range(h):
        logs += np.log(cnt - j) - np.log(m - j) - np.log(p)
    return np.exp(logs)


def collision_estimator(
    freq: FrequencyVector,
    h: int,
    pop: Population,
    nominal: Distribution,
    pilot: float,
) -> float:
    """Order-h collision average A_h over the sampled indices.

    A_h = (1/C(m,h)) sum_i C(Y_i,h) (x_i - P(i) pilot) / P(i)^h.  Indices
    sampled fewer than h times contribute nothing, so the work after the
    count pass scales with the number of distinct sampled indices.
    """
    m = freq.m
    if not (1 <= h <= m):
        raise ValueError("h must lie in 1..m")
    if freq.counts.size != pop.size or pop.size != nominal.size:
        raise ValueError("population, distribution, and counts disagree on N")
    if np.any(nominal.probs <= 0.0):
        raise ValueError("nominal probabilities must be strictly positive")
    idx, cnt = freq.sampled
    keep = cnt >= h
    if not np.any(keep):
        return 0.0
    idx = idx[keep]
    cnt = cnt[keep].astype(np.float64)
    p = nominal.probs[idx]
    terms = np.ones(idx.size, dtype=np.float64)
    overflowed = np.zeros(idx.size, dtype=bool)
    with np.errstate(over="ignore"):
        for j in range(h):
            terms *= (cnt - j) / ((m - j) * p)
            overflowed |= np.abs(terms) > OVERFLOW_GUARD
    if np.any(overflowed):
        terms = terms.copy()
        terms[overflowed] = _log_space_terms(cnt[overflowed], h, m, p[overflowed])
    centered = pop.values[idx] - p * pilot
    return float(math.fsum(terms * centered))


def estimate_sum(
    batch: SampleBatch,
    k: int,
    pilot: float,
    pop: Population,
    nominal: Distribution,
) -> EstimatorReport:
    """Order-k bias-reduced estimate of sum_i x_i from one sample batch.

    ``pilot`` centers the population values; any fixed value is valid and
    a value near the true sum shrinks both bias and variance.  Requires
    1 <= k <= min(m, K_MAX).
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > K_MAX:
        raise ValueError(f"k={k} exceeds the supported maximum {K_MAX}")
    if k > batch.m:
        raise ValueError("k cannot exceed the batch size m")
    if not math.isfinite(pilot):
        raise ValueError("pilot must be finite")
    freq = frequency_vector(batch, pop.size)
    xi = tuple(collision_estimator(freq, h, pop, nominal, pilot) for h in range(1, k + 1))
    estimate = pilot + math.fsum(
        (-1.0) ** (h + 1) * math.comb(k, h) * xi[h - 1] for h in range(1, k + 1)
    )
    return EstimatorReport(
        estimate=estimate,
        k=k,
        m=batch.m,
        t=0,
        pilot_W=pilot,
        xi_values=xi,
        seed=batch.seed,
    )


def improved_estimate_sum(
    pop: Population,
    pair: PerturbedPair,
    m: int,
    t: int,
    k: int,
    seed: int,
) -> EstimatorReport:
    """Two-stage estimate: a t-sample order-1 pilot, then the order-k pass.

    The stages draw from independent streams derived from ``seed``, so a
    sweep over consecutive seeds never reuses a stream across stages.
    """
    if t < 1:
        raise ValueError("the pilot stage needs t >= 1")
    s1, s2 = (int(s) for s in np.random.SeedSequence(seed).generate_state(2, np.uint64))
    pilot_batch = draw_samples(pair, t, s1)
    pilot = estimate_sum(pilot_batch, 1, 0.0, pop, pair.nominal).estimate
    main_batch = draw_samples(pair, m, s2)
    report = estimate_sum(main_batch, k, pilot, pop, pair.nominal)
    return replace(report, t=t, seed=int(seed))


def closed_form_expectation(
    pop: Population, pair: PerturbedPair, k: int, pilot: float
) -> float:
    """Exact expectation of the order-k estimate, conditional on the pilot.

    Equals pilot + sum_i (x_i - P(i) pilot) (1 + (-1)^(k+1) gamma_i^k);
    no sampling involved.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    p = pair.nominal.probs
    if pop.size != pair.size:
        raise ValueError("population and pair disagree on N")
    centered = pop.values - p * pilot
    sign = (-1.0) ** (k + 1)
    return pilot + float(math.fsum(centered * (1.0 + sign * pair.deviations**k)))


def bias_bound(
    pop: Population,
    nominal: Distribution,
    gamma: float,
    k: int,
    pilot: float,
) -> float:
    """Worst-case |expectation - mu| over all gamma-close perturbations.

    Orders k >= 2 obey gamma^k * sum_i |x_i - P(i) pilot|.  Order 1 is
    special: the deviations carry zero nominal mass, so the bound tightens
    to gamma * sum_i |x_i - P(i) mu| (the pilot drops out exactly).
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not (0.0 <= gamma < 1.0):
        raise ValueError("gamma must lie in [0, 1)")
    p = nominal.probs
    if pop.size != nominal.size:
        raise ValueError("population and distribution disagree on N")
    centered = pop.values - p * pilot
    if k == 1:
        mu_centered = float(np.sum(centered))
        return gamma * float(np.sum(np.abs(centered - p * mu_centered)))
    return gamma**k * float(np.sum(np.abs(centered)))


def variance_bound(
    pop: Population,
    nominal: Distribution,
    gamma: float,
    k: int,
    m: int,
    pilot: float,
) -> float:
    """Upper bound on the variance of the order-k estimate from m samples.

    With S = sum_i (x_i - P(i) pilot)^2 / P(i):

    - k == 1: (1 + gamma) * sum_i (xbar_i - P(i) mubar)^2 / P(i) / m,
      the importance-weighted second moment of the centered values;
    - k >= 2: max of the order-1-dominated term
      2 (1+gamma) gamma^(2k-2) k^2 S / m and the collision-dominated term
      2^k (1+gamma)^k k^(3k) n_tilde^(k-1) S / m^k.
    """
    if k < 1 or m < k:
        raise ValueError("need m >= k >= 1")
    if not (0.0 <= gamma < 1.0):
        raise ValueError("gamma must lie in [0, 1)")
    p = nominal.probs
    if pop.size != nominal.size:
        raise ValueError("population and distribution disagree on N")
    centered = pop.values - p * pilot
    if k == 1:
        mu_centered = float(np.sum(centered))
        resid = centered - p * mu_centered
        return (1.0 + gamma) * float(np.sum(resid**2 / p)) / m
    s = float(np.sum(centered**2 / p))
    n_tilde = float(np.max(1.0 / p))
    first = 2.0 * (1.0 + gamma) * gamma ** (2 * k - 2) * k**2 * s / m
    log_second = (
        k * math.log(2.0 * (1.0 + gamma))
        + 3.0 * k * math.log(k)
        + (k - 1) * math.log(n_tilde)
        + (math.log(s) if s > 0.0 else -math.inf)
        - k * math.log(m)
    )
    second = math.exp(log_second) if s > 0.0 else 0.0
    return max(first, second)
