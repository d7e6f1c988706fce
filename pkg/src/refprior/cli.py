"""Batch command-line frontend.

Four subcommands: ``capacity`` (deterministic grid solve), ``refprior``
(sampling iteration), ``ks-verify`` (common-random-numbers coverage
study), and ``jeffreys`` (square-root-Fisher grid prior).  Each run writes
its data files, the resolved configuration, a timestamp metadata file, and
(unless disabled) rendered figures into the output directory.

Exit codes: 0 success; 1 configuration error; 2 capacity solve hit the
iteration cap; 3 sampling run hit a non-finite accumulator; 4 coverage
below target; 5 sample-size bound infeasible.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .ba_grid import ba_solve
from .ba_mcmc import run_mcmc_ba
from .common_random import coverage_study
from .config import (
    RunSpec,
    build_constraint,
    build_family,
    build_grid,
    build_mcmc_config,
    load_config,
    resolved_text,
)
from .errors import (
    ConfigError,
    DomainError,
    InfeasibleSampleBoundError,
    NonfiniteAccumulatorError,
)
from .family import jeffreys_weights
from .infomath import mutual_information
from . import plotting, report

_LN2 = math.log(2.0)


def _emit_warning_json(message, category, filename, lineno, file=None, line=None):
    payload = {"warning": str(message), "category": category.__name__}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _outdir(spec: RunSpec, args) -> Path:
    out = args.out if args.out is not None else spec.get("output", "dir")
    if out is None:
        raise ConfigError("no output directory: set [output] dir or pass --out")
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _overrides(args) -> dict:
    over = {}
    if args.seed is not None:
        over[("mcmc", "seed")] = args.seed
        over[("verify", "seed")] = args.seed
    if args.out is not None:
        over[("output", "dir")] = str(Path(args.out))
    return over


def _figures_enabled(spec: RunSpec, args) -> bool:
    if args.no_plot:
        return False
    return bool(spec.get("output", "figures"))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_capacity(spec: RunSpec, args) -> int:
    family = build_family(spec)
    constraint = build_constraint(spec)
    grid = build_grid(spec, family)
    block = spec.sections["capacity"]
    outdir = _outdir(spec, args)

    started = time.time()
    result = ba_solve(
        family,
        grid,
        tol=block["tol"],
        max_iter=block["max_iter"],
        constraint=constraint,
    )
    finished = time.time()

    report.write_prior_csv(outdir / "prior.csv", result.prior)
    bounds_rows = ["iteration,lower_nats,upper_nats"]
    for i, (lo, hi) in enumerate(zip(result.lower_bound_trace, result.upper_bound_trace)):
        bounds_rows.append(f"{i},{lo:.12g},{hi:.12g}")
    (outdir / "bounds_trace.csv").write_text("\n".join(bounds_rows) + "\n")

    summary = {
        "command": "capacity",
        "family": family.name,
        "capacity_nats": result.capacity,
        "iterations": result.iterations,
        "converged": result.converged,
        "tol": block["tol"],
        "grid_points": int(grid.size),
    }
    if args.bits:
        summary["capacity_bits"] = result.capacity / _LN2
    if result.expected_expense is not None:
        summary["expected_expense"] = result.expected_expense
        summary["constraint_multiplier"] = constraint.multiplier
    report.write_json(outdir / "summary.json", summary)
    report.write_resolved_config(outdir, resolved_text(spec, _overrides(args)))
    report.write_metadata(outdir / "metadata.json", started, finished)

    if _figures_enabled(spec, args):
        plotting.save_prior_figure(
            result.prior.grid, result.prior.weights, outdir / "prior.png",
            title=f"{family.name}: converged prior",
        )
        plotting.save_bounds_figure(
            result.lower_bound_trace, result.upper_bound_trace,
            outdir / "bounds.png",
        )

    shown = result.capacity / _LN2 if args.bits else result.capacity
    unit = "bits" if args.bits else "nats"
    print(f"capacity {shown:.9g} {unit} ({'converged' if result.converged else 'iteration cap'})")
    return 0 if result.converged else 2


def cmd_refprior(spec: RunSpec, args) -> int:
    family = build_family(spec)
    config = build_mcmc_config(spec, family, seed_override=args.seed)
    block = spec.sections["mcmc"]
    outdir = _outdir(spec, args)
    hist_bins = block["hist_bins"]
    hist_every = block["hist_every"]
    lo, hi = family.theta_lo, family.theta_hi

    oracle_grid = None
    if block["compute_oracle"]:
        oracle_grid = np.linspace(lo, hi, block["oracle_grid_points"])

    logged: list[tuple] = []

    def sample_hook(sample_set):
        s = sample_set.iteration
        if s % hist_every != 0 and s != config.iterations:
            return
        b_lo, b_hi, counts = report.histogram(sample_set.thetas, hist_bins, lo, hi)
        report.write_hist_csv(outdir / f"hist_{s}.csv", b_lo, b_hi, counts)
        logged.append((f"sample {s} (n={sample_set.thetas.size})", b_lo, b_hi, counts))

    def progress(rec):
        line = (
            f"[refprior] iter={rec.iteration} n={rec.n_samples} "
            f"acc={rec.acceptance_rate:.3f} risk={rec.minimax_estimate:.6f} "
            f"tau_sq={rec.tau_sq:.3e}"
        )
        if rec.ks_to_oracle is not None:
            line += f" ks={rec.ks_to_oracle:.4f}"
        print(line, file=sys.stderr)

    started = time.time()
    try:
        trace = run_mcmc_ba(
            config, oracle_grid=oracle_grid, progress=progress,
            sample_hook=sample_hook,
        )
    except NonfiniteAccumulatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    finished = time.time()

    rows = []
    for rec in trace.records:
        row = {
            "iter": rec.iteration,
            "n_samples": rec.n_samples,
            "acceptance_rate": rec.acceptance_rate,
            "minimax_estimate_nats": rec.minimax_estimate,
            "tau_sq": rec.tau_sq,
        }
        if rec.ks_to_oracle is not None:
            row["ks_to_oracle"] = rec.ks_to_oracle
        rows.append(row)
    report.write_trace_jsonl(outdir / "trace.jsonl", rows)
    report.write_samples_csv(outdir / "samples.csv", trace.final.thetas)

    summary = {
        "command": "refprior",
        "family": family.name,
        "iterations": config.iterations,
        "seed": config.seed,
        "final_n_samples": int(trace.final.thetas.size),
        "hist_bins": hist_bins,
    }
    if trace.records:
        summary["final_minimax_estimate_nats"] = trace.records[-1].minimax_estimate
        summary["final_tau_sq"] = trace.records[-1].tau_sq
        if trace.records[-1].ks_to_oracle is not None:
            summary["final_ks_to_oracle"] = trace.records[-1].ks_to_oracle
        if args.bits:
            summary["final_minimax_estimate_bits"] = (
                trace.records[-1].minimax_estimate / _LN2
            )
    report.write_json(outdir / "summary.json", summary)
    report.write_resolved_config(outdir, resolved_text(spec, _overrides(args)))
    report.write_metadata(
        outdir / "metadata.json", started, finished,
        extra={"wallclock_ms_per_iteration": [r.wallclock_ms for r in trace.records]},
    )

    if _figures_enabled(spec, args):
        if logged:
            plotting.save_histogram_panel(
                logged, outdir / "histograms.png",
                title=f"{family.name}: sample histograms",
            )
            last = logged[-1]
            plotting.save_histogram_figure(
                last[1], last[2], last[3], outdir / "hist_final.png",
                title=f"{family.name}: final sample",
            )
        if rows:
            plotting.save_trace_figure(rows, outdir / "trace.png")
    return 0


def cmd_ks_verify(spec: RunSpec, args) -> int:
    family = build_family(spec)
    grid = build_grid(spec, family)
    block = spec.sections["verify"]
    seed = args.seed if args.seed is not None else block["seed"]
    outdir = _outdir(spec, args)

    started = time.time()
    try:
        result = coverage_study(
            family,
            grid,
            n=block["n_steps"],
            epsilon=block["epsilon"],
            alpha=block["alpha"],
            replications=block["replications"],
            seed=seed,
            lipschitz_trials=block["lipschitz_trials"],
            beta_inflation=block["beta_inflation"],
            beta_override=block["beta_override"],
            max_samples=block["max_samples"],
        )
    except InfeasibleSampleBoundError as exc:
        print(
            f"error: infeasible sample-size regime, bound requires "
            f"N >= {exc.required} (budget {exc.budget})",
            file=sys.stderr,
        )
        return 5
    finished = time.time()

    report.write_json(outdir / "summary.json", result.summary())
    rep_rows = ["replication,ks_distance"]
    rep_rows.extend(
        f"{i},{ks:.12g}" for i, ks in enumerate(result.ks_values)
    )
    (outdir / "replications.csv").write_text("\n".join(rep_rows) + "\n")
    report.write_resolved_config(outdir, resolved_text(spec, _overrides(args)))
    report.write_metadata(
        outdir / "metadata.json", started, finished,
        extra={"beta_used": result.beta_used, "n_steps": result.n_steps},
    )

    if _figures_enabled(spec, args):
        plotting.save_coverage_figure(
            result.ks_values, result.epsilon, outdir / "coverage.png",
        )

    target = 1.0 - result.alpha
    print(
        f"coverage {result.coverage:.4f} over {result.replications} replications "
        f"(target >= {target:.4f}, N = {result.n_samples})"
    )
    return 0 if result.coverage >= target else 4


def cmd_jeffreys(spec: RunSpec, args) -> int:
    family = build_family(spec)
    grid = build_grid(spec, family)
    outdir = _outdir(spec, args)

    started = time.time()
    try:
        prior = jeffreys_weights(family, grid)
    except DomainError as exc:
        print(
            f"error: {exc}; use a grid strictly interior to the parameter "
            f"domain",
            file=sys.stderr,
        )
        return 1
    finished = time.time()

    report.write_prior_csv(outdir / "prior.csv", prior)
    summary = {
        "command": "jeffreys",
        "family": family.name,
        "grid_points": int(grid.size),
        "mutual_information_nats": mutual_information(prior, family),
    }
    report.write_json(outdir / "summary.json", summary)
    report.write_resolved_config(outdir, resolved_text(spec, _overrides(args)))
    report.write_metadata(outdir / "metadata.json", started, finished)

    if _figures_enabled(spec, args):
        plotting.save_prior_figure(
            prior.grid, prior.weights, outdir / "prior.png",
            title=f"{family.name}: square-root-Fisher prior",
        )
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "capacity": cmd_capacity,
    "refprior": cmd_refprior,
    "ks-verify": cmd_ks_verify,
    "jeffreys": cmd_jeffreys,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refprior",
        description="capacity, minimax risk, and reference priors for "
        "parametric families",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("capacity", "deterministic grid capacity solve"),
        ("refprior", "sampling iteration for a finite-trial reference prior"),
        ("ks-verify", "coverage study for the common-random-numbers bound"),
        ("jeffreys", "square-root-Fisher grid prior"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="run configuration file")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
        cmd.add_argument("--out", default=None,
                         help="override the output directory")
        cmd.add_argument("--bits", action="store_true",
                         help="also report capacity-like quantities in bits")
        cmd.add_argument("--no-plot", action="store_true",
                         help="skip figure rendering")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    warnings.showwarning = _emit_warning_json
    try:
        spec = load_config(args.config, args.command)
        return _COMMANDS[args.command](spec, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
