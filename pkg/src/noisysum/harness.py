"""Monte-Carlo experiments: trial sweeps, bias decay, counting, separability.

Determinism: trial i always uses seed ``base_seed + i``.  Parallel runs
split the trial range into contiguous chunks, compute each chunk in a
worker process, and fold the results back in trial order, so statistics
are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimators import (
    closed_form_expectation,
    estimate_sum,
    improved_estimate_sum,
    required_order,
)
from .lowerbound import RealizedPair, build_reduction_instance
from .model import (
    Distribution,
    PerturbedPair,
    Population,
    draw_samples,
    population_stats,
    worst_case_pair,
)

# Success budgets, named by what they measure:
#   positive_sum : eps1 * sum_i |x_i|                     + eps2
#   mean_abs_dev : eps1 * (1+gamma) * E_P|x_X/P(X) - mu|  + eps2
#   zero_one     : eps1 * (mu + sqrt(mu * N))   (counting instances)
ERROR_FUNCTIONALS = ("positive_sum", "mean_abs_dev", "zero_one")


@dataclass(frozen=True)
class TrialConfig:
    """One repeated-trial experiment.

    ``t > 0`` runs the two-stage estimator; ``t == 0`` runs the single
    stage with the supplied ``fixed_pilot``.
    """

    pop: Population
    pair: PerturbedPair
    k: int
    m: int
    t: int
    trials: int
    base_seed: int
    eps1: float
    eps2: float
    error_functional: str = "mean_abs_dev"
    fixed_pilot: float | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.error_functional not in ERROR_FUNCTIONALS:
            raise ValueError(f"unknown error functional {self.error_functional!r}")
        if self.t == 0 and self.fixed_pilot is None:
            raise ValueError("t == 0 requires a fixed_pilot")
        if self.t > 0 and self.fixed_pilot is not None:
            raise ValueError("fixed_pilot only applies when t == 0")


@dataclass(frozen=True)
class TrialStats:
    empirical_mean: float
    empirical_variance: float
    success_rate: float
    error_quantiles: tuple[float, float, float]  # |error| at 50/90/99%
    samples_per_trial: int


def success_budget(config: TrialConfig) -> float:
    """The absolute error a trial may incur and still count as a success."""
    stats = population_stats(config.pop, config.pair.nominal)
    if config.error_functional == "positive_sum":
        return config.eps1 * stats.mu_plus + config.eps2
    if config.error_functional == "mean_abs_dev":
        p = config.pair.nominal.probs
        mad = float(np.sum(p * np.abs(config.pop.values / p - stats.mu)))
        return config.eps1 * (1.0 + config.pair.gamma_bound) * mad + config.eps2
    if stats.mu < 0.0:
        raise ValueError("the zero_one budget needs a nonnegative mu")
    return config.eps1 * (stats.mu + math.sqrt(stats.mu * config.pop.size))


def _chunk_estimates(config: TrialConfig, start: int, stop: int) -> list[float]:
    out = []
    for i in range(start, stop):
        seed = config.base_seed + i
        if config.t == 0:
            batch = draw_samples(config.pair, config.m, seed)
            report = estimate_sum(
                batch, config.k, config.fixed_pilot, config.pop, config.pair.nominal
            )
        else:
            report = improved_estimate_sum(
                config.pop, config.pair, config.m, config.t, config.k, seed
            )
        out.append(report.estimate)
    return out


def _collect_estimates(config: TrialConfig, threads: int) -> np.ndarray:
    trials = config.trials
    if threads <= 1 or trials < 2:
        values = _chunk_estimates(config, 0, trials)
        return np.asarray(values, dtype=np.float64)
    workers = min(threads, trials)
    bounds = np.linspace(0, trials, workers + 1, dtype=int)
    ranges = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_chunk_estimates, config, a, b) for a, b in ranges]
        chunks = [f.result() for f in futures]
    # Chunks are folded in trial order regardless of completion order.
    values: list[float] = []
    for chunk in chunks:
        values.extend(chunk)
    return np.asarray(values, dtype=np.float64)


def run_trials(config: TrialConfig, threads: int = 1) -> TrialStats:
    """Run ``config.trials`` independent estimates and summarize them."""
    estimates = _collect_estimates(config, threads)
    mu = float(np.sum(config.pop.values))
    errors = np.abs(estimates - mu)
    budget = success_budget(config)
    q50, q90, q99 = (float(v) for v in np.quantile(errors, [0.5, 0.9, 0.99]))
    variance = float(np.var(estimates, ddof=1)) if estimates.size > 1 else 0.0
    return TrialStats(
        empirical_mean=float(np.mean(estimates)),
        empirical_variance=variance,
        success_rate=float(np.mean(errors <= budget)),
        error_quantiles=(q50, q90, q99),
        samples_per_trial=config.m + config.t,
    )


@dataclass(frozen=True)
class BiasDecayRow:
    k: int
    exact_bias: float
    bound: float
    ratio: float


def _balanced_prefix_split(nominal: Distribution) -> list[int]:
    cum = np.cumsum(nominal.probs)
    j = int(np.searchsorted(cum, 0.5))
    if j >= nominal.size or abs(float(cum[j]) - 0.5) > 1e-12:
        raise ValueError("no prefix of indices carries exactly half the nominal mass")
    return list(range(1, j + 2))


def bias_decay_sweep(
    pop: Population, nominal: Distribution, gamma: float, ks
) -> tuple[BiasDecayRow, ...]:
    """Exact bias of the worst-case perturbation against gamma^k * mu_plus.

    No sampling: the bias comes from the closed-form expectation.  The
    worst-case pair puts +gamma on a mass-balanced prefix of the indices.
    The ratio never exceeds 1; it hits 1 exactly when the deviation signs
    align with the value signs at order k (parity matters: on x=(1,1) the
    odd orders cancel instead of saturating).
    """
    split = _balanced_prefix_split(nominal)
    pair = worst_case_pair(nominal, gamma, split)
    stats = population_stats(pop, nominal)
    rows = []
    for k in ks:
        exact_bias = abs(closed_form_expectation(pop, pair, k, 0.0) - stats.mu)
        bound = gamma**k * stats.mu_plus
        if bound == 0.0:
            ratio = 0.0 if exact_bias == 0.0 else math.inf
        else:
            ratio = exact_bias / bound
        rows.append(BiasDecayRow(k=k, exact_bias=exact_bias, bound=bound, ratio=ratio))
    return tuple(rows)


@dataclass(frozen=True)
class ZeroOneOutcome:
    """A planned counting run: 0/1 values, uniform nominal, worst-case skew."""

    stats: TrialStats
    k: int
    m: int
    t: int
    mu: float
    eps2: float
    budget: float


def zero_one_experiment(
    n: int,
    fraction_ones: float,
    gamma: float,
    eps: float,
    trials: int,
    base_seed: int,
    c_m: float = 4.0,
    c_t: float = 16.0,
    threads: int = 1,
) -> ZeroOneOutcome:
    """Count ceil(fraction_ones * n) ones out of n under adversarial skew.

    The perturbation oversamples the first half of the index range (which
    contains the ones block) by (1+gamma).  The order follows from the
    target: k = ceil(lg eps / lg gamma), m = ceil(c_m n^(1-1/k) eps^(-2/k)),
    and the pilot budget t comes from the variance at scale
    eps2 = eps * sqrt(mu n).  Success means |estimate - sum| <=
    eps * (mu + sqrt(mu n)).
    """
    if not (0.0 < eps < gamma < 1.0):
        raise ValueError("need 0 < eps < gamma < 1")
    if n < 2 or n % 2 != 0:
        raise ValueError("n must be even so a balanced split exists")
    if not (0.0 <= fraction_ones <= 1.0):
        raise ValueError("fraction_ones must lie in [0, 1]")
    ones = math.ceil(fraction_ones * n)
    x = np.zeros(n)
    x[:ones] = 1.0
    pop = Population(x)
    nominal = Distribution(np.full(n, 1.0 / n))
    pair = worst_case_pair(nominal, gamma, range(1, n // 2 + 1))
    stats = population_stats(pop, nominal)
    k = required_order(gamma, eps)
    m = max(k, math.ceil(c_m * n ** (1.0 - 1.0 / k) * eps ** (-2.0 / k)))
    if stats.var_hh == 0.0:
        t = max(1, math.ceil(c_t))
        eps2 = 0.0
    else:
        eps2 = eps * math.sqrt(stats.mu * n)
        t = max(1, math.ceil(c_t * (1.0 + gamma ** (2 * k) * stats.var_hh / eps2**2)))
    config = TrialConfig(
        pop=pop,
        pair=pair,
        k=k,
        m=m,
        t=t,
        trials=trials,
        base_seed=base_seed,
        eps1=eps,
        eps2=eps2,
        error_functional="zero_one",
    )
    budget = success_budget(config)
    return ZeroOneOutcome(
        stats=run_trials(config, threads=threads),
        k=k,
        m=m,
        t=t,
        mu=stats.mu,
        eps2=eps2,
        budget=budget,
    )


@dataclass(frozen=True)
class SeparationRow:
    m: int
    mean_ones_large: float
    mean_other: float
    separation_z: float


def distinguishability_experiment(
    realized: RealizedPair,
    m_values,
    trials: int,
    base_seed: int,
    threads: int = 1,
    null_calibration: bool = False,
) -> tuple[SeparationRow, ...]:
    """How many samples until the two matched instances pull apart.

    For each m, both scenario instances are estimated ``trials`` times
    with the two-stage estimator (pilot budget t = m).  The estimator
    runs at order k+1, one above the matched moments: orders up to k are
    blind to the gap by construction, since the bias they leave behind
    absorbs exactly the difference the spectra were built to hide.  At
    order k+1 the arm expectations split by roughly the support gap, so
    separation_z (gap of arm means over pooled standard error) stays in
    the noise for small m and climbs once m tames the variance.  With
    ``null_calibration`` both arms run the same scenario, so z should
    stay below ~3.
    """
    if trials < 30:
        raise ValueError("need at least 30 trials per arm for a stable z")
    order = realized.k + 1
    if any(int(m) < order for m in m_values):
        raise ValueError(f"every m must be at least k+1 = {order}")
    seeds = [int(s) for s in np.random.SeedSequence(base_seed).generate_state(4, np.uint64)]
    scenario_b = "ones-large" if null_calibration else "ones-small"
    inst_a = build_reduction_instance(realized, "ones-large", seeds[0])
    inst_b = build_reduction_instance(realized, scenario_b, seeds[1])
    rows = []
    for m in m_values:
        m = int(m)
        means = []
        variances = []
        for inst, trial_base in ((inst_a, seeds[2]), (inst_b, seeds[3])):
            config = TrialConfig(
                pop=inst.population,
                pair=inst.pair,
                k=order,
                m=m,
                t=m,
                trials=trials,
                base_seed=trial_base,
                eps1=1.0,
                eps2=0.0,
                error_functional="positive_sum",
            )
            estimates = _collect_estimates(config, threads)
            means.append(float(np.mean(estimates)))
            variances.append(float(np.var(estimates, ddof=1)))
        pooled = math.sqrt(variances[0] / trials + variances[1] / trials)
        gap = abs(means[0] - means[1])
        if pooled == 0.0:
            z = 0.0 if gap == 0.0 else math.inf
        else:
            z = gap / pooled
        rows.append(
            SeparationRow(
                m=m, mean_ones_large=means[0], mean_other=means[1], separation_z=z
            )
        )
    return tuple(rows)


# ---------------------------------------------------------------------------
# Tabular output records

EXPERIMENT_COLUMNS = (
    "exp", "n", "gamma", "eps1", "eps2", "k", "m", "t", "T", "seed",
    "mean", "var", "q50", "q90", "q99", "success_rate",
)


@dataclass(frozen=True)
class ExperimentRecord:
    """One experiment configuration with its summary statistics."""

    exp: str
    n: int
    gamma: float
    eps1: float
    eps2: float
    k: int
    m: int
    t: int
    T: int
    seed: int
    stats: TrialStats

    def row(self) -> dict:
        q50, q90, q99 = self.stats.error_quantiles
        return {
            "exp": self.exp,
            "n": self.n,
            "gamma": self.gamma,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "k": self.k,
            "m": self.m,
            "t": self.t,
            "T": self.T,
            "seed": self.seed,
            "mean": self.stats.empirical_mean,
            "var": self.stats.empirical_variance,
            "q50": q50,
            "q90": q90,
            "q99": q99,
            "success_rate": self.stats.success_rate,
        }
