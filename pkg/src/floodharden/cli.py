"""Command-line entry point.

Exit codes: 0 success, 1 bad input or unwritable output, 2 time limit hit,
3 model infeasible (or unbounded).
"""

from __future__ import annotations

import argparse
import itertools
import math
import os
import sys
from pathlib import Path

from . import analysis as an
from . import formulations as fm
from .grid import GridError, load_grid, validate_grid
from .milp import (GAP_REACHED, INFEASIBLE, OPTIMAL, TIME_LIMIT, UNBOUNDED, SolveParams, export_mps, solve,
                   warm_start_from)
from .scenario import ScenarioError, load_scenarios
from .svg import histogram_panels, line_chart

EXIT_OK, EXIT_INPUT, EXIT_TIME_LIMIT, EXIT_INFEASIBLE = 0, 1, 2, 3
_STATUS_EXIT = {OPTIMAL: EXIT_OK, GAP_REACHED: EXIT_OK, TIME_LIMIT: EXIT_TIME_LIMIT,
                INFEASIBLE: EXIT_INFEASIBLE, UNBOUNDED: EXIT_INFEASIBLE}


class InputError(Exception):
    """A failure reported to the user with exit code ``code``."""

    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def status_exit(status: str) -> int:
    return _STATUS_EXIT[status]


def _floats(text: str) -> list[float]:
    try:
        values = [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _common(require_scenarios: bool = True) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--grid", required=True, help="grid JSON file")
    p.add_argument("--scenarios", required=require_scenarios, help="flood scenario JSON file")
    p.add_argument("--ceil-depths", action="store_true",
                   help="round fractional flood depths up instead of rejecting them")
    return p


def _solver_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--gap", type=float, default=0.0,
                   help="relative MIP gap (default %(default)s)")
    p.add_argument("--time-limit", type=float, default=SolveParams.time_limit,
                   help="seconds per MILP solve (default %(default)s)")
    p.add_argument("--jobs", type=int, default=an.default_jobs(),
                   help="concurrent per-scenario solves (default: processor count)")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, default=None,
                   help="seed for tie-breaking randomness; all current algorithms are deterministic")
    return p


def _economics(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma", type=_floats, help="expected storms over the horizon (list)")
    p.add_argument("--hours", type=_floats, help="restoration hours per storm (list)")
    p.add_argument("--voll", type=_floats, help="value of lost load, $/MWh (list)")
    p.add_argument("--omega", type=_floats, help="combined weight gamma*hours*voll, $/MW (list)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floodharden",
                                     description="Substation flood-hardening planner.")
    sub = parser.add_subparsers(dest="command", required=True)
    common, solver = _common(), _solver_flags()

    p = sub.add_parser("validate", parents=[_common(require_scenarios=False)],
                       help="check grid (and scenario) files")

    p = sub.add_parser("solve", parents=[common, solver], help="solve the stochastic or robust model")
    p.add_argument("variant", choices=["so", "ro"])
    p.add_argument("--budget", type=float, required=True, help="hardening budget in dollars")
    p.add_argument("--export-mps", action="store_true", help="also write model.mps")

    p = sub.add_parser("min-budget", parents=[common, solver],
                       help="least hardening spend that avoids all load shed")
    p.add_argument("--export-mps", action="store_true", help="also write model.mps")

    p = sub.add_parser("evaluate", parents=[common, solver], help="shed of a fixed plan per scenario")
    p.add_argument("--plan", help="plan.csv to evaluate (default: no hardening)")

    p = sub.add_parser("sweep", parents=[common, solver],
                       help="budget sweep with bounds and shed histograms")
    p.add_argument("--budgets", type=_floats, help="ascending budgets (default: grid up to the zero-shed budget)")
    p.add_argument("--bin-width", type=float, help="histogram bin width in MW")

    p = sub.add_parser("optimal-budget", parents=[common, solver],
                       help="exact and grid-approximate optimal budgets per disaster-cost weight")
    p.add_argument("--budgets", type=_floats, help="sweep grid for the approximation")
    _economics(p)
    return parser


# ------------------------------------------------------------- plumbing
def _load(args):
    try:
        grid = load_grid(args.grid)
    except OSError as exc:
        raise InputError(f"cannot read grid file: {exc}") from None
    except GridError as exc:
        raise InputError(f"grid: {exc}") from None
    scenarios = None
    if getattr(args, "scenarios", None):
        try:
            scenarios = load_scenarios(args.scenarios, grid, ceil_fractional=args.ceil_depths)
        except OSError as exc:
            raise InputError(f"cannot read scenario file: {exc}") from None
        except ScenarioError as exc:
            raise InputError(f"scenarios: {exc}") from None
    return grid, scenarios


def _params(args) -> SolveParams:
    try:
        return SolveParams(relative_gap=args.gap, time_limit=args.time_limit)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _outdir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise InputError(f"output directory {out} is not writable")
    return out


def _write(path: Path, text: str | bytes) -> None:
    try:
        if isinstance(text, bytes):
            path.write_bytes(text)
        else:
            with open(path, "w", newline="") as fh:
                fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from None


def _report_line(label: str, report, scale: float, unit: str) -> str:
    return (f"{label}: status={report.status} objective={an.fmt(report.objective_value * scale)} {unit} "
            f"bound={an.fmt(report.best_bound * scale)} gap={an.fmt(report.gap)} "
            f"nodes={report.node_count} time={report.wall_time:.3f}s")


def _check_jobs(args):
    if args.jobs < 1:
        raise InputError("--jobs must be at least 1")


# ------------------------------------------------------------- commands
def cmd_validate(args) -> int:
    grid, scenarios = _load(args)
    problems = validate_grid(grid)
    for p in problems:
        print(p, file=sys.stderr)
    if problems:
        return EXIT_INPUT
    print(f"grid ok: {len(grid.substations)} substations, {len(grid.buses)} buses, "
          f"{len(grid.branches)} branches")
    if scenarios is not None:
        print(f"scenarios ok: {len(scenarios)} scenarios, "
              f"{len(scenarios.flooded_substations)} flooded substations")
    return EXIT_OK


def cmd_solve(args) -> int:
    grid, scenarios = _load(args)
    params = _params(args)
    if not (math.isfinite(args.budget) and args.budget >= 0):
        raise InputError("--budget must be a non-negative number")
    out = _outdir(args)
    variant = args.variant.upper()
    model = an.build_variant(grid, scenarios, args.budget, variant)
    if args.export_mps:
        _write(out / "model.mps", export_mps(model))
    warm = fm.shutdown_assignment(model, grid, fm.HardeningPlan.zero(grid), scenarios)
    report = solve(model, warm_start_from(warm, params))
    print(_report_line(f"{args.variant} budget={an.dollars(args.budget)}", report, grid.base_mva, "MW"))
    if report.has_solution:
        plan = fm.plan_from_assignment(grid, report.assignment)
        _write(out / "plan.csv", an.plan_csv(grid, plan))
        print(f"plan cost={an.dollars(plan.cost)}")
    return status_exit(report.status)


def cmd_min_budget(args) -> int:
    grid, scenarios = _load(args)
    params = _params(args)
    out = _outdir(args)
    model = fm.build_min_budget_zero_shed(grid, scenarios)
    if args.export_mps:
        _write(out / "model.mps", export_mps(model))
    report = solve(model, params)
    print(_report_line("min-budget", report, 1.0, "$"))
    if report.status == INFEASIBLE:
        print("no hardening plan avoids load shed in every scenario", file=sys.stderr)
    if report.has_solution:
        plan = fm.plan_from_assignment(grid, report.assignment)
        _write(out / "plan.csv", an.plan_csv(grid, plan))
        print(f"B*={an.dollars(plan.cost)}")
    return status_exit(report.status)


def cmd_evaluate(args) -> int:
    grid, scenarios = _load(args)
    _check_jobs(args)
    if args.plan:
        try:
            plan = an.read_plan_csv(Path(args.plan).read_text(), grid)
        except (OSError, ValueError, KeyError) as exc:
            raise InputError(f"plan: {exc}") from None
    else:
        plan = fm.HardeningPlan.zero(grid)
    out = _outdir(args)
    try:
        ev = an.evaluate_plan(grid, scenarios, plan, jobs=args.jobs)
    except fm.PlanError as exc:
        raise InputError(f"plan: {exc}") from None
    rows = [(sc.id, sc.probability, ev.per_scenario_shed[sc.id]) for sc in scenarios]
    _write(out / "evaluation.csv", an.csv_text(rows, an.EVALUATION_COLUMNS))
    print(f"plan cost={an.dollars(plan.cost)} expected_shed={an.fmt(ev.expected_shed)} MW "
          f"max_shed={an.fmt(ev.max_shed)} MW")
    return EXIT_OK


def _budgets(args, grid, scenarios, params) -> list[float]:
    if args.budgets:
        budgets = list(args.budgets)
        if any(b < 0 for b in budgets) or any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
            raise InputError("--budgets must be non-negative and strictly ascending")
        return budgets
    try:
        b_star, _, _ = an.min_zero_shed_budget(grid, scenarios, params=params)
    except an.AnalysisError as exc:
        raise InputError(f"cannot derive a default budget grid ({exc}); pass --budgets",
                         EXIT_INFEASIBLE) from None
    return an.default_budget_grid(b_star)


def cmd_sweep(args) -> int:
    grid, scenarios = _load(args)
    params = _params(args)
    _check_jobs(args)
    if args.bin_width is not None and not args.bin_width > 0:
        raise InputError("--bin-width must be positive")
    out = _outdir(args)
    budgets = _budgets(args, grid, scenarios, params)

    so = an.budget_sweep(grid, scenarios, budgets, fm.SO, params=params, jobs=args.jobs)
    ro = an.budget_sweep(grid, scenarios, budgets, fm.RO, params=params, jobs=args.jobs)
    records = []
    for p_so, p_ro in zip(so, ro):
        try:
            records.append(an.compute_bounds(grid, scenarios, p_so.budget, params=params,
                                             jobs=args.jobs, so_point=p_so, ro_point=p_ro))
        except an.AnalysisError as exc:
            print(f"budget {an.dollars(p_so.budget)}: bounds skipped ({exc})", file=sys.stderr)

    solved = [p for p in so + ro if p.report.has_solution]
    width = args.bin_width or an.default_bin_width(
        v for p in solved for v in p.per_scenario_shed.values())
    panels = [(p.variant, p.budget, an.shed_histogram(p.per_scenario_shed, width)) for p in solved]

    _write(out / "sweep.csv", an.sweep_csv(so))
    _write(out / "sweep_ro.csv", an.sweep_csv(ro))
    _write(out / "bounds.csv", an.bounds_csv(records))
    _write(out / "histogram.csv", an.histogram_csv(panels))
    if records:
        x = [r.budget for r in records]
        _write(out / "sweep.svg", line_chart(
            x, {"wait-and-see": [r.ws for r in records], "stochastic": [r.so for r in records],
                "mean-scenario plan": [r.ev_eval for r in records],
                "robust plan (expected)": [r.ro_eval for r in records],
                "robust (worst case)": [r.ro_opt for r in records]},
            title="Load shed vs hardening budget", xlabel="budget ($)", ylabel="load shed (MW)"))
    _write(out / "histogram.svg", histogram_panels(
        [(f"{v} ${an.dollars(b):,}", [(h.lo, h.hi, h.count) for h in bins]) for v, b, bins in panels],
        title="Load shed across scenarios"))

    for p in so:
        print(f"SO budget={an.dollars(p.budget)} status={p.status} expected_shed={an.fmt(p.expected_shed)} "
              f"max_shed={an.fmt(p.max_shed)} plan_cost={an.dollars(p.plan.cost)}")
    if not solved:
        return status_exit(so[0].status) if so else EXIT_INPUT
    return EXIT_OK


def _weights(args) -> list[float]:
    omegas = list(args.omega or [])
    triple = (args.gamma, args.hours, args.voll)
    if any(t is not None for t in triple):
        if not all(t is not None for t in triple):
            raise InputError("--gamma, --hours and --voll must be given together")
        omegas += [fm.StudyParams(g, h, d).omega for g, h, d in itertools.product(*triple)]
    if not omegas:
        raise InputError("give --omega or --gamma/--hours/--voll")
    if any(not (math.isfinite(w) and w >= 0) for w in omegas):
        raise InputError("disaster-cost weights must be non-negative")
    return omegas


def cmd_optimal_budget(args) -> int:
    grid, scenarios = _load(args)
    params = _params(args)
    _check_jobs(args)
    omegas = _weights(args)
    out = _outdir(args)
    budgets = _budgets(args, grid, scenarios, params)
    sweep = an.budget_sweep(grid, scenarios, budgets, fm.SO, params=params, jobs=args.jobs)
    step = an.grid_step(budgets)
    rows, curves, code = [], {}, EXIT_OK
    for omega in omegas:
        study = fm.StudyParams.from_omega(omega)
        report = solve(fm.build_tdm(grid, scenarios, study), params)
        if not report.has_solution or report.status not in an.SOLVED:
            code = max(code, status_exit(report.status))
            print(f"omega={an.fmt(omega)}: exact solve ended {report.status}", file=sys.stderr)
            continue
        exact_budget = fm.plan_from_assignment(grid, report.assignment).cost
        approx_budget, approx_total = an.approx_optimal_budget(sweep, study)
        rows.append((omega, exact_budget, report.objective_value, approx_budget, approx_total, step))
        curves[f"omega={an.fmt(omega)}"] = [
            an.disaster_cost(p.expected_shed, study) + p.budget for p in sweep]
        print(f"omega={an.fmt(omega)} exact_budget={an.dollars(exact_budget)} "
              f"exact_total={an.dollars(report.objective_value)} approx_budget={an.dollars(approx_budget)} "
              f"approx_total={an.dollars(approx_total)}")
    _write(out / "sweep.csv", an.sweep_csv(sweep))
    _write(out / "optimal_budget.csv", an.optimal_budget_csv(rows))
    _write(out / "optimal_budget.svg", line_chart(
        [p.budget for p in sweep], curves, title="Total disaster management cost",
        xlabel="budget ($)", ylabel="cost ($)"))
    return code


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "min-budget": cmd_min_budget,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "optimal-budget": cmd_optimal_budget,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; usage errors are input errors here
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
