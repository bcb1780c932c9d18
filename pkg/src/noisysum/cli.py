"""Command-line interface.

Exit codes: 0 success; 1 a checked property failed (identity residual over
tolerance); 2 unusable input (flags or data files); 3 infeasible request
(missing sampling source, plan order out of range, enumeration budget).

Outputs go to --output via write-to-temp-then-rename, or to stdout.  Runs
are deterministic for fixed flags; --threads (or NOISYSUM_THREADS) changes
only elapsed time, never bytes.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import os
import sys
from dataclasses import replace
from fractions import Fraction

import numpy as np

from .estimators import (
    InfeasiblePlanError,
    estimate_sum,
    improved_estimate_sum,
    plan_parameters,
    required_order,
)
from .harness import (
    ERROR_FUNCTIONALS,
    EXPERIMENT_COLUMNS,
    ExperimentRecord,
    TrialConfig,
    bias_decay_sweep,
    distinguishability_experiment,
    run_trials,
    zero_one_experiment,
)
from .identities import identity_report
from .io import InputFormatError, atomic_write_text, load_population, load_sample_indices
from .lowerbound import (
    build_reduction_instance,
    construct_matched_pair,
    frequency_moment,
    realize_integer_counts,
    spectrum_to_json_dict,
    support_gap_closed_form,
)
from .model import PerturbedPair, SampleBatch, population_stats
from .oracle import BudgetExceededError, exact_estimator_moments

RESIDUAL_TOLERANCE = 1e-9


class PropertyViolation(Exception):
    """A checked mathematical property failed; maps to exit code 1."""


def _emit(args, text: str) -> None:
    if getattr(args, "output", None):
        atomic_write_text(args.output, text)
    else:
        sys.stdout.write(text)


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _csv_text(columns, rows) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row[c] for c in columns])
    return buf.getvalue()


def _resolve_threads(args) -> int:
    if args.threads is not None:
        value = args.threads
    else:
        env = os.environ.get("NOISYSUM_THREADS", "1")
        try:
            value = int(env)
        except ValueError:
            raise InputFormatError(f"NOISYSUM_THREADS={env!r} is not an integer") from None
    if value < 1:
        raise InputFormatError("thread count must be at least 1")
    return value


def _pair_from_columns(data, gamma_flag):
    p = data.nominal.probs
    q = data.true_dist.probs
    deviations = q / p - 1.0
    measured = float(np.max(np.abs(deviations)))
    gamma = gamma_flag if gamma_flag is not None else measured
    if measured > gamma:
        raise InputFormatError(
            f"q column deviates from p by {measured!r}, above --gamma {gamma!r}"
        )
    return PerturbedPair(
        nominal=data.nominal, true_dist=data.true_dist, deviations=deviations,
        gamma_bound=gamma,
    ), gamma


def cmd_estimate(args) -> int:
    data = load_population(args.input)
    pop, nominal = data.population, data.nominal
    seed = args.seed if args.seed is not None else 0
    if args.samples:
        indices = load_sample_indices(args.samples)
        t = args.t if args.t is not None else 0
        if t < 0 or t >= indices.size:
            raise InputFormatError("--t must leave at least one sample for the main stage")
        if args.k is not None:
            k = args.k
        elif args.gamma is not None and args.eps1 is not None:
            k = required_order(args.gamma, args.eps1)
        else:
            raise InputFormatError("offline mode needs --k, or --gamma with --eps1")
        pilot = args.w
        if t > 0:
            pilot_batch = SampleBatch(indices=indices[:t], seed=seed, m=t)
            pilot = estimate_sum(pilot_batch, 1, 0.0, pop, nominal).estimate
        main = SampleBatch(indices=indices[t:], seed=seed, m=int(indices.size - t))
        report = estimate_sum(main, k, pilot, pop, nominal)
        if t > 0:
            report = replace(report, t=t)
    elif data.true_dist is not None:
        pair, gamma = _pair_from_columns(data, args.gamma)
        if args.k is not None and args.m is not None:
            k, m = args.k, args.m
            t = args.t if args.t is not None else m
        else:
            if args.eps1 is None or args.eps2 is None:
                raise InputFormatError(
                    "simulation mode needs --k and --m, or --eps1 with --eps2"
                )
            stats = population_stats(pop, nominal)
            plan = plan_parameters(
                gamma, args.eps1, args.eps2, stats.n_tilde, stats.var_hh,
                c_m=args.cm, c_t=args.ct,
            )
            k, m, t = plan.k, plan.m, plan.t
        report = improved_estimate_sum(pop, pair, m, t, k, seed)
    else:
        raise InfeasiblePlanError(
            "no sampling source: add a q column to the input (simulation mode) "
            "or pass --samples with pre-drawn indices (offline mode)"
        )
    _emit(args, _json_text(report.to_json_dict()))
    return 0


def cmd_simulate(args) -> int:
    threads = _resolve_threads(args)
    seed = args.seed if args.seed is not None else 0
    fmt = args.format
    if args.exp == "zero-one":
        if args.gamma is None or args.eps1 is None:
            raise InputFormatError("zero-one needs --gamma and --eps1")
        outcome = zero_one_experiment(
            n=args.n, fraction_ones=args.fraction_ones, gamma=args.gamma,
            eps=args.eps1, trials=args.trials, base_seed=seed,
            c_m=args.cm, c_t=args.ct, threads=threads,
        )
        record = ExperimentRecord(
            exp="zero-one", n=args.n, gamma=args.gamma, eps1=args.eps1,
            eps2=outcome.eps2, k=outcome.k, m=outcome.m, t=outcome.t,
            T=args.trials, seed=seed, stats=outcome.stats,
        )
        rows = [record.row()]
        text = _csv_text(EXPERIMENT_COLUMNS, rows) if fmt == "csv" else _json_text(rows)
    elif args.exp == "trials":
        data = load_population(args.input) if args.input else None
        if data is None or data.true_dist is None:
            raise InputFormatError("trials mode needs --input with a q column")
        pair, gamma = _pair_from_columns(data, args.gamma)
        stats = population_stats(data.population, data.nominal)
        if args.k is not None and args.m is not None:
            k, m = args.k, args.m
            t = args.t if args.t is not None else m
            eps1 = args.eps1 if args.eps1 is not None else 0.0
            eps2 = args.eps2 if args.eps2 is not None else 0.0
        else:
            if args.eps1 is None or args.eps2 is None:
                raise InputFormatError("trials mode needs --k/--m or --eps1/--eps2")
            plan = plan_parameters(
                gamma, args.eps1, args.eps2, stats.n_tilde, stats.var_hh,
                c_m=args.cm, c_t=args.ct,
            )
            k, m, t = plan.k, plan.m, plan.t
            eps1, eps2 = args.eps1, args.eps2
        config = TrialConfig(
            pop=data.population, pair=pair, k=k, m=m, t=t, trials=args.trials,
            base_seed=seed, eps1=eps1, eps2=eps2, error_functional=args.functional,
        )
        record = ExperimentRecord(
            exp="trials", n=data.population.size, gamma=gamma, eps1=eps1, eps2=eps2,
            k=k, m=m, t=t, T=args.trials, seed=seed,
            stats=run_trials(config, threads=threads),
        )
        rows = [record.row()]
        text = _csv_text(EXPERIMENT_COLUMNS, rows) if fmt == "csv" else _json_text(rows)
    elif args.exp == "bias-decay":
        if args.input is None or args.gamma is None:
            raise InputFormatError("bias-decay needs --input and --gamma")
        data = load_population(args.input)
        rows = [
            {"k": r.k, "exact_bias": r.exact_bias, "bound": r.bound, "ratio": r.ratio}
            for r in bias_decay_sweep(
                data.population, data.nominal, args.gamma, range(1, args.kmax + 1)
            )
        ]
        columns = ("k", "exact_bias", "bound", "ratio")
        text = _csv_text(columns, rows) if fmt == "csv" else _json_text(rows)
    else:  # distinguish
        if args.gamma is None or args.k is None or args.n0 is None:
            raise InputFormatError("distinguish needs --k, --gamma, and --n0")
        pair = construct_matched_pair(args.k, Fraction(args.gamma), args.n0)
        realized = realize_integer_counts(pair)
        m_values = [int(v) for v in args.m_grid.split(",") if v.strip()]
        if not m_values:
            raise InputFormatError("--m-grid must list at least one m")
        rows = [
            {
                "m": r.m,
                "mean_ones_large": r.mean_ones_large,
                "mean_other": r.mean_other,
                "separation_z": r.separation_z,
            }
            for r in distinguishability_experiment(
                realized, m_values, trials=args.trials, base_seed=seed,
                threads=threads, null_calibration=args.null,
            )
        ]
        columns = ("m", "mean_ones_large", "mean_other", "separation_z")
        text = _csv_text(columns, rows) if fmt == "csv" else _json_text(rows)
    _emit(args, text)
    return 0


def cmd_oracle(args) -> int:
    data = load_population(args.input)
    if data.true_dist is None:
        raise InputFormatError("the oracle needs a q column in the input")
    pair, _ = _pair_from_columns(data, args.gamma)
    moments = exact_estimator_moments(
        data.population, pair, m=args.m, k=args.k, pilot=args.w
    )
    _emit(
        args,
        _json_text(
            {
                "expectation": moments.expectation,
                "variance": moments.variance,
                "outcome_count": moments.outcome_count,
                "total_prob": moments.total_prob,
                "m": args.m,
                "k": args.k,
                "pilot_W": args.w,
            }
        ),
    )
    return 0


def cmd_identities(args) -> int:
    report = identity_report(args.kmax, seed=args.seed or 0, trials=args.trials)
    report["tolerance"] = RESIDUAL_TOLERANCE
    worst = max(
        report["bias_cancellation_max_residual"],
        report["centered_product_max_residual"],
        report["centered_sum_max_residual"],
    )
    ok = worst <= RESIDUAL_TOLERANCE and report["collision_coefficient_mismatches"] == 0
    report["ok"] = ok
    _emit(args, _json_text(report))
    if not ok:
        raise PropertyViolation(f"identity residual {worst!r} above {RESIDUAL_TOLERANCE}")
    return 0


def cmd_lowerbound(args) -> int:
    gamma = Fraction(args.gamma)
    pair = construct_matched_pair(args.k, gamma, args.n0)
    moments = []
    for ell in range(1, args.k + 2):
        m1 = frequency_moment(pair.d1, ell)
        m2 = frequency_moment(pair.d2, ell)
        moments.append(
            {"ell": ell, "d1": str(m1), "d2": str(m2), "equal": m1 == m2}
        )
    payload = {
        "k": args.k,
        "gamma": str(gamma),
        "n0": args.n0,
        "n1": str(pair.n1),
        "n2": str(pair.n2),
        "gap": str(pair.gap),
        "closed_form_gap": str(support_gap_closed_form(args.k, gamma, args.n0)),
        "d1": spectrum_to_json_dict(pair.d1),
        "d2": spectrum_to_json_dict(pair.d2),
        "moments": moments,
    }
    if args.realize:
        realized = realize_integer_counts(pair)
        payload["realized"] = {
            "n1": realized.n1,
            "n2": realized.n2,
            "gap": realized.gap,
            "moment_error": realized.moment_error,
            "d1": spectrum_to_json_dict(realized.d1),
            "d2": spectrum_to_json_dict(realized.d2),
        }
        if args.scenario:
            inst = build_reduction_instance(realized, args.scenario, args.seed or 0)
            payload["instance"] = {
                "scenario": inst.scenario,
                "N": inst.population.size,
                "true_sum": inst.true_sum,
                "closeness": inst.closeness,
            }
    _emit(args, _json_text(payload))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisysum",
        description="Bias-reducing sum estimation under imprecise sampling weights",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, threads=False):
        p.add_argument("--output", help="write here (atomic); stdout otherwise")
        p.add_argument("--seed", type=int, default=None)
        if threads:
            p.add_argument(
                "--threads", type=int, default=None,
                help="worker count (default: NOISYSUM_THREADS or 1); never changes results",
            )

    p_est = sub.add_parser("estimate", help="one estimate from a population file")
    p_est.add_argument("--input", required=True)
    p_est.add_argument("--samples", help="pre-drawn 1-based indices, one per line")
    p_est.add_argument("--gamma", type=float)
    p_est.add_argument("--eps1", type=float)
    p_est.add_argument("--eps2", type=float)
    p_est.add_argument("--k", type=int)
    p_est.add_argument("--m", type=int)
    p_est.add_argument("--t", type=int)
    p_est.add_argument("--w", type=float, default=0.0, help="fixed pilot when t = 0")
    p_est.add_argument("--cm", type=float, default=4.0)
    p_est.add_argument("--ct", type=float, default=16.0)
    common(p_est)

    p_sim = sub.add_parser("simulate", help="repeated-trial experiments")
    p_sim.add_argument(
        "--exp", choices=("zero-one", "trials", "bias-decay", "distinguish"),
        default="zero-one",
    )
    p_sim.add_argument("--input")
    p_sim.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sim.add_argument("--n", type=int, default=10000)
    p_sim.add_argument("--fraction-ones", type=float, default=0.5)
    p_sim.add_argument("--gamma", help="float for zero-one/bias-decay/trials; exact '1/2' for distinguish")
    p_sim.add_argument("--eps1", type=float)
    p_sim.add_argument("--eps2", type=float)
    p_sim.add_argument("--k", type=int)
    p_sim.add_argument("--m", type=int)
    p_sim.add_argument("--t", type=int)
    p_sim.add_argument("--cm", type=float, default=4.0)
    p_sim.add_argument("--ct", type=float, default=16.0)
    p_sim.add_argument("--trials", type=int, default=1000)
    p_sim.add_argument("--kmax", type=int, default=6)
    p_sim.add_argument("--n0", type=int)
    p_sim.add_argument("--m-grid", default="200,600,2000")
    p_sim.add_argument("--null", action="store_true", help="feed both arms the same scenario")
    p_sim.add_argument("--functional", choices=ERROR_FUNCTIONALS, default="mean_abs_dev")
    common(p_sim, threads=True)

    p_or = sub.add_parser("oracle", help="exact moments by enumeration")
    p_or.add_argument("--input", required=True)
    p_or.add_argument("--m", type=int, required=True)
    p_or.add_argument("--k", type=int, required=True)
    p_or.add_argument("--w", type=float, default=0.0)
    p_or.add_argument("--gamma", type=float)
    common(p_or)

    p_id = sub.add_parser("identities", help="residuals of the cancellation identities")
    p_id.add_argument("--kmax", type=int, default=20)
    p_id.add_argument("--trials", type=int, default=100)
    common(p_id)

    p_lb = sub.add_parser("lowerbound", help="moment-matched spectra, exact rationals")
    p_lb.add_argument("--k", type=int, required=True)
    p_lb.add_argument("--gamma", required=True, help="exact rational, e.g. '1/2'")
    p_lb.add_argument("--n0", type=int, required=True)
    p_lb.add_argument("--realize", action="store_true")
    p_lb.add_argument("--scenario", choices=("ones-large", "ones-small"))
    common(p_lb)

    return parser


_DISPATCH = {
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "identities": cmd_identities,
    "lowerbound": cmd_lowerbound,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        # Some subcommands convert float gamma lazily; normalize here.
        if args.command in ("simulate",) and args.exp in ("zero-one", "bias-decay", "trials"):
            if args.gamma is not None:
                args.gamma = float(args.gamma)
        if args.command == "simulate" and args.exp == "distinguish":
            pass  # gamma stays an exact string
        return _DISPATCH[args.command](args)
    except PropertyViolation as exc:
        print(f"noisysum: {exc}", file=sys.stderr)
        return 1
    except InputFormatError as exc:
        print(f"noisysum: {exc}", file=sys.stderr)
        return 2
    except (InfeasiblePlanError, BudgetExceededError) as exc:
        print(f"noisysum: {exc}", file=sys.stderr)
        return 3
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        print(f"noisysum: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
