"""Experiments on top of the formulations: plan evaluation, budget sweeps,
stochastic/robust bounds, disaster-cost budgets and shed distributions.

Shed values leaving this module are in MW (per-unit times ``base_mva``);
money is in dollars.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import formulations as fm
from .formulations import SO, RO, HardeningPlan, RecourseSolution, StudyParams
from .grid import Grid
from .milp import INFEASIBLE, OPTIMAL, GAP_REACHED, SolveParams, SolveReport, solve, warm_start_from
from .scenario import ScenarioSet

SOLVED = (OPTIMAL, GAP_REACHED)
EXACT = SolveParams(relative_gap=0.0)


class AnalysisError(RuntimeError):
    pass


def default_jobs() -> int:
    return os.cpu_count() or 1


# ------------------------------------------------------------ evaluation
@dataclass(frozen=True)
class PlanEvaluation:
    plan: HardeningPlan
    per_scenario_shed: Mapping[str, float]
    expected_shed: float
    max_shed: float
    solutions: Mapping[str, RecourseSolution] = field(repr=False)


def _recourse_context(grid: Grid, scenarios: ScenarioSet, plan: HardeningPlan) -> ScenarioSet | None:
    # plans produced by the models respect the set-wide caps; anything else
    # falls back to caps derived from the scenario and plan themselves
    return scenarios if not fm.plan_violations(grid, scenarios, plan) else None


def recourse_shed(grid: Grid, plan: HardeningPlan, scenario, context: ScenarioSet | None = None,
                  params: SolveParams = EXACT) -> RecourseSolution:
    """Solve one scenario's recourse problem exactly; shed in per-unit."""
    model = fm.build_recourse(grid, plan, scenario, context)
    report = solve(model, params)
    if report.status not in SOLVED:
        raise AnalysisError(f"recourse solve for scenario {scenario.id!r} ended {report.status}")
    return fm.recourse_from_assignment(grid, scenario.id, report.assignment)


def evaluate_plan(grid: Grid, scenarios: ScenarioSet, plan: HardeningPlan, *,
                  jobs: int | None = None, params: SolveParams = EXACT) -> PlanEvaluation:
    """Per-scenario shed of a fixed plan, with its expectation and maximum (MW)."""
    context = _recourse_context(grid, scenarios, plan)
    jobs = jobs or default_jobs()

    def one(sc):
        return recourse_shed(grid, plan, sc, context, params)

    if jobs > 1 and len(scenarios) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            sols = list(pool.map(one, scenarios))
    else:
        sols = [one(sc) for sc in scenarios]
    base = grid.base_mva
    per = {sc.id: sol.shed * base for sc, sol in zip(scenarios, sols)}
    expected = math.fsum(sc.probability * per[sc.id] for sc in scenarios)
    return PlanEvaluation(plan, per, expected, max(per.values()),
                          {sol.scenario_id: sol for sol in sols})


# ----------------------------------------------------------------- sweep
@dataclass(frozen=True)
class SweepPoint:
    budget: float
    plan: HardeningPlan
    expected_shed: float
    max_shed: float
    per_scenario_shed: Mapping[str, float]
    report: SolveReport
    variant: str = SO
    base_mva: float = 1.0

    @property
    def status(self) -> str:
        return self.report.status

    @property
    def objective_mw(self) -> float:
        """Model objective in MW (expected shed for SO, worst-case for RO)."""
        return self.report.objective_value * self.base_mva


def build_variant(grid: Grid, scenarios: ScenarioSet, budget: float, variant: str):
    if variant == SO:
        return fm.build_so(grid, scenarios, budget)
    if variant == RO:
        return fm.build_ro(grid, scenarios, budget)
    raise ValueError(f"variant must be one of {fm.VARIANTS}, got {variant!r}")


def solve_point(grid: Grid, scenarios: ScenarioSet, budget: float, variant: str = SO, *,
                params: SolveParams = EXACT, warm: Mapping[str, float] | None = None,
                jobs: int | None = None) -> SweepPoint:
    """Solve one budget level and evaluate the resulting plan in every scenario.

    Without an explicit warm start the all-dark, unhardened completion seeds
    the incumbent; it is feasible at any budget.
    """
    model = build_variant(grid, scenarios, budget, variant)
    if warm is None:
        warm = fm.shutdown_assignment(model, grid, HardeningPlan.zero(grid), scenarios)
    report = solve(model, warm_start_from(warm, params))
    if report.has_solution:
        plan = fm.plan_from_assignment(grid, report.assignment)
        ev = evaluate_plan(grid, scenarios, plan, jobs=jobs)
        per, exp, mx = ev.per_scenario_shed, ev.expected_shed, ev.max_shed
    else:
        plan = HardeningPlan.zero(grid)
        per, exp, mx = {}, math.nan, math.nan
    return SweepPoint(budget, plan, exp, mx, per, report, variant, grid.base_mva)


def budget_sweep(grid: Grid, scenarios: ScenarioSet, budgets: Sequence[float], variant: str = SO, *,
                 params: SolveParams = EXACT, jobs: int | None = None,
                 warm_start: bool = True) -> list[SweepPoint]:
    """One point per budget, each solve seeded with the previous optimum."""
    budgets = list(budgets)
    if any(b < 0 for b in budgets):
        raise ValueError("budgets must be non-negative")
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValueError("budgets must be strictly ascending")
    points: list[SweepPoint] = []
    previous = None
    for budget in budgets:
        point = solve_point(grid, scenarios, budget, variant, params=params,
                            warm=previous if warm_start else None, jobs=jobs)
        points.append(point)
        if point.report.has_solution:
            previous = point.report.assignment
    return points


def cold_solves(grid: Grid, scenarios: ScenarioSet, budgets: Iterable[float], variant: str = SO,
                params: SolveParams = EXACT) -> list[SolveReport]:
    return [solve(build_variant(grid, scenarios, b, variant), params) for b in budgets]


# ---------------------------------------------------------------- bounds
@dataclass(frozen=True)
class BoundsRecord:
    budget: float
    ws: float
    so: float
    ev_eval: float
    ro_eval: float
    ro_opt: float

    @property
    def vss(self) -> float:
        return self.ev_eval - self.so

    @property
    def evpi(self) -> float:
        return self.so - self.ws

    @property
    def robust_premium(self) -> float:
        """Extra expected shed paid for planning against the worst case."""
        return self.ro_eval - self.so


def wait_and_see(grid: Grid, scenarios: ScenarioSet, budget: float, *,
                 params: SolveParams = EXACT, jobs: int | None = None) -> float:
    """Probability-weighted per-scenario optima (MW)."""
    jobs = jobs or default_jobs()

    def one(sc):
        rep = solve(fm.build_ws(grid, sc, budget), params)
        if rep.status not in SOLVED:
            raise AnalysisError(f"wait-and-see solve for {sc.id!r} ended {rep.status}")
        return rep.objective_value

    if jobs > 1 and len(scenarios) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(one, scenarios))
    else:
        values = [one(sc) for sc in scenarios]
    return grid.base_mva * math.fsum(sc.probability * v for sc, v in zip(scenarios, values))


def expected_value_plan(grid: Grid, scenarios: ScenarioSet, budget: float, *,
                        params: SolveParams = EXACT) -> HardeningPlan:
    rep = solve(fm.build_ev(grid, scenarios, budget), params)
    if rep.status not in SOLVED:
        raise AnalysisError(f"mean-scenario solve ended {rep.status}")
    return fm.plan_from_assignment(grid, rep.assignment)


def compute_bounds(grid: Grid, scenarios: ScenarioSet, budget: float, *,
                   params: SolveParams = EXACT, jobs: int | None = None,
                   so_point: SweepPoint | None = None,
                   ro_point: SweepPoint | None = None) -> BoundsRecord:
    """Wait-and-see, stochastic, mean-scenario and robust values at one budget (MW).

    Already-solved SO/RO sweep points at the same budget can be passed in to
    avoid solving those models again.
    """
    for pt, variant in ((so_point, SO), (ro_point, RO)):
        if pt is not None and (pt.budget != budget or pt.variant != variant):
            raise ValueError(f"{variant} point does not belong to budget {budget}")
    so_point = so_point or solve_point(grid, scenarios, budget, SO, params=params, jobs=jobs)
    ro_point = ro_point or solve_point(grid, scenarios, budget, RO, params=params, jobs=jobs)
    for pt in (so_point, ro_point):
        if pt.status not in SOLVED:
            raise AnalysisError(f"{pt.variant} solve at budget {budget} ended {pt.status}")
    ws = wait_and_see(grid, scenarios, budget, params=params, jobs=jobs)
    ev_plan = expected_value_plan(grid, scenarios, budget, params=params)
    ev_eval = evaluate_plan(grid, scenarios, ev_plan, jobs=jobs).expected_shed
    base = grid.base_mva
    return BoundsRecord(budget, ws, so_point.report.objective_value * base, ev_eval,
                        ro_point.expected_shed, ro_point.report.objective_value * base)


def min_zero_shed_budget(grid: Grid, scenarios: ScenarioSet, *,
                         params: SolveParams = EXACT) -> tuple[float, HardeningPlan, SolveReport]:
    """Cheapest hardening with zero shed everywhere.

    Raises AnalysisError when no plan achieves it.
    """
    rep = solve(fm.build_min_budget_zero_shed(grid, scenarios), params)
    if rep.status == INFEASIBLE:
        raise AnalysisError("no hardening plan serves all load in every scenario")
    if rep.status not in SOLVED:
        raise AnalysisError(f"minimum-budget solve ended {rep.status}")
    plan = fm.plan_from_assignment(grid, rep.assignment)
    return plan.cost, plan, rep


# ----------------------------------------------------- economics, budgets
def disaster_cost(shed_mw: float, params: StudyParams) -> float:
    """Dollar cost of ``shed_mw`` expected shed: storms x outage hours x VoLL x MW."""
    return params.omega * shed_mw


def approx_optimal_budget(sweep: Sequence[SweepPoint], params: StudyParams) -> tuple[float, float]:
    """Sweep budget minimising disaster cost plus budget; ties go to the smaller budget."""
    if not sweep:
        raise ValueError("sweep is empty")
    best = None
    for pt in sorted(sweep, key=lambda p: p.budget):
        if math.isnan(pt.expected_shed):
            continue
        total = disaster_cost(pt.expected_shed, params) + pt.budget
        if best is None or total < best[1] - 1e-9 * max(1.0, abs(best[1])):
            best = (pt.budget, total)
    if best is None:
        raise AnalysisError("no sweep point has a solution")
    return best


def exact_optimal_budget(grid: Grid, scenarios: ScenarioSet, params: StudyParams,
                         variant: str = SO, *, solve_params: SolveParams = EXACT
                         ) -> tuple[float, float, HardeningPlan, SolveReport]:
    """Budget (hardening spend) and total cost of the cost-weighted model optimum."""
    rep = solve(fm.build_tdm(grid, scenarios, params, variant), solve_params)
    if rep.status not in SOLVED:
        raise AnalysisError(f"cost-weighted solve ended {rep.status}")
    plan = fm.plan_from_assignment(grid, rep.assignment)
    return plan.cost, rep.objective_value, plan, rep


def nice_step(raw: float) -> float:
    """Smallest value of the form {1, 2, 2.5, 5} x 10^n that is >= raw."""
    if raw <= 0:
        raise ValueError("step must be positive")
    exp = math.floor(math.log10(raw))
    for e in (exp - 1, exp, exp + 1):
        for m in (1, 2, 2.5, 5):
            cand = m * 10.0 ** e
            if cand >= raw * (1 - 1e-12):
                return float(round(cand, 9))
    raise AssertionError("unreachable")


def default_budget_grid(b_star: float, intervals: int = 8) -> list[float]:
    """0, step, 2 step, ... up to the first value at or above ``b_star``."""
    if b_star <= 0:
        return [0.0]
    step = nice_step(b_star / intervals)
    out = [0.0]
    while out[-1] < b_star - 1e-9:
        out.append(round(out[-1] + step, 9))
    return out


def grid_step(budgets: Sequence[float]) -> float:
    """Largest gap between consecutive budgets."""
    if len(budgets) < 2:
        return 0.0
    return max(b - a for a, b in zip(budgets, budgets[1:]))


# ------------------------------------------------------------- histogram
@dataclass(frozen=True)
class HistogramBin:
    lo: float
    hi: float
    count: int


def shed_histogram(per_scenario_shed: Mapping[str, float] | Iterable[float],
                   bin_width: float) -> list[HistogramBin]:
    """Counts over ``[m w, (m+1) w)`` from 0 up to the largest occupied bin."""
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    values = list(per_scenario_shed.values()) if isinstance(per_scenario_shed, Mapping) \
        else list(per_scenario_shed)
    if not values:
        return []
    # solver noise sits just below bin edges; nudge it back up
    index = [max(0, math.floor(v / bin_width + 1e-9)) for v in values]
    counts = [0] * (max(index) + 1)
    for m in index:
        counts[m] += 1
    return [HistogramBin(m * bin_width, (m + 1) * bin_width, c) for m, c in enumerate(counts)]


def default_bin_width(per_scenario_shed: Iterable[float]) -> float:
    """A tenth of the largest shed, or 1 MW when nothing is shed."""
    top = max(per_scenario_shed, default=0.0)
    return top / 10 if top > 1e-9 else 1.0


def dominates(lower: Iterable[float], upper: Iterable[float], tol: float = 1e-6) -> bool:
    """True when sorted ``lower`` is elementwise at most sorted ``upper``."""
    a, b = sorted(lower), sorted(upper)
    return len(a) == len(b) and all(x <= y + tol for x, y in zip(a, b))


# ------------------------------------------------------------------- CSV
SWEEP_COLUMNS = ("budget", "expected_shed", "max_shed", "plan_cost", "gap", "wall_time", "status")
BOUNDS_COLUMNS = ("budget", "ws", "so", "ev_eval", "ro_eval", "ro_opt", "vss", "evpi")
HISTOGRAM_COLUMNS = ("variant", "budget", "bin_lo", "bin_hi", "count")
PLAN_COLUMNS = ("substation", "chosen", "height_ft", "cost")
EVALUATION_COLUMNS = ("scenario", "probability", "shed")
OPTIMAL_BUDGET_COLUMNS = ("omega", "exact_budget", "exact_total_cost", "approx_budget",
                          "approx_total_cost", "grid_step")


def fmt(value) -> str:
    """Stable text for CSV cells."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        # reports carry nine decimals; anything finer is solver noise
        text = f"{round(value, 9):.12g}"
        return "0" if text == "-0" else text
    return str(value)


def dollars(value: float) -> int:
    return int(round(value))


def csv_text(rows: Iterable[Sequence], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def sweep_csv(points: Sequence[SweepPoint]) -> str:
    return csv_text(((dollars(p.budget), p.expected_shed, p.max_shed, dollars(p.plan.cost),
                    p.report.gap, round(p.report.wall_time, 6), p.status) for p in points),
                  SWEEP_COLUMNS)


def bounds_csv(records: Sequence[BoundsRecord]) -> str:
    return csv_text(((dollars(r.budget), r.ws, r.so, r.ev_eval, r.ro_eval, r.ro_opt, r.vss, r.evpi)
                   for r in records), BOUNDS_COLUMNS)


def histogram_csv(panels: Sequence[tuple[str, float, Sequence[HistogramBin]]]) -> str:
    return csv_text(((variant, dollars(budget), b.lo, b.hi, b.count)
                   for variant, budget, bins in panels for b in bins), HISTOGRAM_COLUMNS)


def plan_csv(grid: Grid, plan: HardeningPlan) -> str:
    rows = []
    for s in grid.substations:
        chosen, h = plan.chosen_at(s.id), plan.height_at(s.id)
        rows.append((s.id, chosen, h, dollars(s.fixed_cost * chosen + s.variable_cost * h)))
    return csv_text(rows, PLAN_COLUMNS)


def optimal_budget_csv(rows: Sequence[tuple[float, float, float, float, float, float]]) -> str:
    return csv_text(((omega, dollars(eb), et, dollars(ab), at, dollars(step))
                   for omega, eb, et, ab, at, step in rows), OPTIMAL_BUDGET_COLUMNS)


def read_csv(text: str, columns: Sequence[str] | None = None) -> list[dict[str, str]]:
    """Parse a CSV written by this module, optionally checking its header."""
    reader = csv.DictReader(io.StringIO(text))
    if columns is not None and tuple(reader.fieldnames or ()) != tuple(columns):
        raise ValueError(f"unexpected header {reader.fieldnames}, wanted {list(columns)}")
    return list(reader)


def read_plan_csv(text: str, grid: Grid) -> HardeningPlan:
    rows = read_csv(text, PLAN_COLUMNS)
    height, chosen = {}, {}
    for row in rows:
        sid = row["substation"]
        if not grid.has_substation(sid):
            raise ValueError(f"plan names unknown substation {sid!r}")
        height[sid] = int(row["height_ft"])
        chosen[sid] = row["chosen"] in ("1", "true", "True")
    return HardeningPlan.build(grid, height, chosen)
