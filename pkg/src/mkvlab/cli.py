"""Command-line front end.

    mkvlab <subcommand> --scenario <path> --out <dir> [--force]
           [--threads <n>] [--seed-override <u64>]

Subcommands: check, simulate, couple, zvonkin, uniqueness, chaos.  Each run
writes a manifest plus the subcommand's artifacts into the output directory.
Exit status 0 on success, 2 when `check` refutes a hypothesis, 1 on any
runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import _config
from .errors import MkvlabError
from .particles import simulate, simulate_coupled
from .persist import (
    prepare_out_dir,
    write_difference_csv,
    write_grid_field_csv,
    write_json,
    write_manifest,
    write_paths_bin,
    write_trajectory_csv,
)
from .regularity import check_hypotheses
from .scenario import Scenario, load_scenario
from .uniqueness import (
    chaos_scaling,
    interval_iteration,
    perturbed_pair,
    run_uniqueness_experiment,
)
from .zvonkin import (
    freeze_coefficients,
    gradient_field,
    martingale_residual,
    solve_backward_pde,
    transform_path,
    verify_norm_equivalence,
)

SUBCOMMANDS = ("check", "simulate", "couple", "zvonkin", "uniqueness", "chaos")

_EXIT_OK = 0
_EXIT_ERROR = 1
_EXIT_REFUTED = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mkvlab",
        description="particle, transform and uniqueness experiments "
        "for distribution-dependent diffusions",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--force", action="store_true",
                       help="write into a non-empty output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: MKVLAB_THREADS or 1)")
        p.add_argument("--seed-override", type=int, default=None,
                       help="replace the scenario's base seed")
    return parser


def _resolve_threads(value) -> int:
    if value is None:
        value = os.environ.get("MKVLAB_THREADS", "1")
        try:
            value = int(value)
        except ValueError:
            raise MkvlabError(
                f"MKVLAB_THREADS must be an integer, got {value!r}"
            ) from None
    if value < 1:
        raise MkvlabError("thread count must be >= 1")
    return value


def _run_check(scenario: Scenario, out) -> int:
    spec = scenario.kernel_spec()
    report = check_hypotheses(
        spec, scenario.solver.initial_law, seed=scenario.solver.seed
    )
    write_json(out / "hypotheses.json", {
        "conditions": report.as_json(),
        "overall": "pass" if report.overall_pass else "refuted",
        "warnings": list(report.warnings),
    })
    for c in report.conditions:
        print(f"condition ({c.condition}): {c.verdict} (statistic {c.statistic:.6g})")
    if not report.overall_pass:
        refuted = [c.condition for c in report.conditions if c.refuted]
        print(f"hypotheses refuted: {', '.join(refuted)}")
        return _EXIT_REFUTED
    print("hypotheses not refuted")
    return _EXIT_OK


def _run_simulate(scenario: Scenario, out) -> int:
    spec = scenario.kernel_spec()
    rec = simulate(spec, scenario.solver, record_paths=scenario.record_paths)
    write_trajectory_csv(out / "trajectory.csv", rec)
    if rec.paths is not None:
        write_paths_bin(out / "paths.bin", rec)
    print(
        f"simulated {scenario.solver.n_particles} particles for "
        f"{scenario.solver.n_steps} steps; terminal m2 = {rec.second_moments[-1]:.6g}"
    )
    return _EXIT_OK


def _run_couple(scenario: Scenario, out) -> int:
    spec = scenario.kernel_spec()
    pert = scenario.experiment.perturbation
    spec_b, config_b = perturbed_pair(spec, scenario.solver, pert)
    rec_a, rec_b, trace = simulate_coupled(
        spec, scenario.solver, spec_b, config_b, perturbation=pert.as_dict()
    )
    write_trajectory_csv(out / "trajectory_a.csv", rec_a)
    write_trajectory_csv(out / "trajectory_b.csv", rec_b)
    write_difference_csv(out / "difference.csv", trace)
    print(f"coupled run ({pert.kind}): terminal trace = {trace.terminal():.6g}")
    return _EXIT_OK


def _run_zvonkin(scenario: Scenario, out) -> int:
    spec = scenario.kernel_spec()
    pert = scenario.experiment.perturbation
    spec_b, config_b = perturbed_pair(spec, scenario.solver, pert)
    rec_a, rec_b, trace = simulate_coupled(
        spec, scenario.solver, spec_b, config_b,
        record_paths=True, perturbation=pert.as_dict(),
    )
    coeffs = freeze_coefficients(rec_a, spec, scenario.pde)
    field = solve_backward_pde(coeffs)
    # Keep a 2-length buffer against the truncation boundary but never less
    # than the half-box default, so wide ensembles fit while the statistics
    # stay clear of boundary pollution.
    margin = max(field.R / 2.0, field.R - 2.0)
    grad = gradient_field(field, margin=margin)
    write_grid_field_csv(out / "grid_field.csv", field, grad)

    x_a = rec_a.paths[..., 0]
    x_b = rec_b.paths[..., 0]
    y_a = transform_path(field, rec_a.times, x_a, margin=margin)
    y_b = transform_path(field, rec_b.times, x_b, margin=margin)
    equivalence = verify_norm_equivalence(grad, (x_a, x_b), (y_a, y_b))
    residual = martingale_residual(y_a, scenario.solver.dt)
    lo, hi = grad.grad_range()
    report = {
        "gradient_deviation": grad.deviation(),
        "grad_min": lo,
        "grad_max": hi,
        "c_theory": grad.c_theory(),
        "c_measured": equivalence.c_measured,
        "norm_equivalence_ok": equivalence.ok,
        "martingale_residual": residual.max_abs,
        "margin": grad.margin,
        "pde": {"R": field.R, "h": field.h},
        "horizon": scenario.solver.horizon,
    }
    write_json(out / "zvonkin_report.json", report)
    print(
        f"gradient deviation {report['gradient_deviation']:.4g}, "
        f"C = {equivalence.c_measured:.4g} (theory cap {report['c_theory']:.4g}), "
        f"residual {report['martingale_residual']:.4g}"
    )
    return _EXIT_OK


def _gate_hypotheses(scenario: Scenario, spec) -> None:
    report = check_hypotheses(
        spec, scenario.solver.initial_law, seed=scenario.solver.seed
    )
    if not report.overall_pass:
        refuted = ", ".join(c.condition for c in report.conditions if c.refuted)
        raise MkvlabError(
            f"hypotheses refuted ({refuted}); set "
            "experiment.allow_refuted_hypotheses for negative controls"
        )


def _run_uniqueness(scenario: Scenario, out) -> int:
    spec = scenario.kernel_spec()
    exp = scenario.experiment
    if not exp.allow_refuted_hypotheses:
        _gate_hypotheses(scenario, spec)
    seeds = exp.seeds(scenario.solver.seed)
    if exp.t_block is not None:
        _screen_block_gradient(scenario, spec)
        reports = interval_iteration(
            spec, scenario.solver, exp.t_block, exp.n_blocks,
            exp.perturbation, seeds=seeds,
        )
        write_json(out / "uniqueness.json", {"blocks": [r.as_json() for r in reports]})
        for i, rep in enumerate(reports):
            write_difference_csv(out / f"difference_block_{i + 1}.csv", rep.trace)
            print(f"block {i + 1}: {rep.verdict} (C = {rep.gronwall_c:.4g})")
        refuted = any(r.verdict != "consistent-with-uniqueness" for r in reports)
        return _EXIT_ERROR if refuted else _EXIT_OK
    report = run_uniqueness_experiment(
        spec, scenario.solver, exp.perturbation, seeds=seeds, dt_ladder=exp.dt_ladder
    )
    write_json(out / "uniqueness.json", report.as_json())
    write_difference_csv(out / "difference.csv", report.trace)
    print(
        f"{report.verdict}: C = {report.gronwall_c:.4g}, "
        f"violations = {report.bound_violations}, "
        f"ladder inversions = {report.ladder_inversions}"
    )
    return _EXIT_OK if report.verdict == "consistent-with-uniqueness" else _EXIT_ERROR


def _screen_block_gradient(scenario: Scenario, spec) -> None:
    """Gradient-smallness screen for blockwise iteration: the transform on
    one block must stay invertible (gradient bounded away from 0)."""
    from dataclasses import replace

    cfg = replace(scenario.solver, horizon=scenario.experiment.t_block)
    rec = simulate(spec, cfg, record_paths=True)
    coeffs = freeze_coefficients(rec, spec, scenario.pde)
    grad = gradient_field(solve_backward_pde(coeffs))
    if grad.deviation() >= 1.0:
        raise MkvlabError(
            f"t_block = {cfg.horizon} fails the gradient smallness screen "
            f"(sup|du/dx - 1| = {grad.deviation():.4g} >= 1); shorten the block"
        )


def _run_chaos(scenario: Scenario, out) -> int:
    spec = scenario.kernel_spec()
    exp = scenario.experiment
    result = chaos_scaling(
        spec, scenario.solver, exp.n_ladder, seeds=exp.seeds(scenario.solver.seed)
    )
    write_json(out / "chaos.json", result.as_json())
    print(
        f"chaos slope {result.slope:.4g} over N = {list(result.ns)} "
        f"(oracle value {result.oracle_value:.6g})"
    )
    return _EXIT_OK


_RUNNERS = {
    "check": _run_check,
    "simulate": _run_simulate,
    "couple": _run_couple,
    "zvonkin": _run_zvonkin,
    "uniqueness": _run_uniqueness,
    "chaos": _run_chaos,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    started = time.monotonic()
    try:
        threads = _resolve_threads(args.threads)
        _config.set_num_threads(threads)
        scenario = load_scenario(args.scenario)
        if args.seed_override is not None:
            if not 0 <= args.seed_override < 2**64:
                raise MkvlabError("--seed-override must fit in an unsigned 64-bit int")
            scenario = scenario.with_seed(args.seed_override)
        out = prepare_out_dir(args.out, force=args.force)
        status = _RUNNERS[args.subcommand](scenario, out)
        write_manifest(
            out, args.subcommand, scenario, threads, time.monotonic() - started
        )
    except (MkvlabError, OSError) as exc:
        print(f"mkvlab: {exc}", file=sys.stderr)
        return _EXIT_ERROR
    return status


if __name__ == "__main__":
    sys.exit(main())
