"""Substation-hardening MILPs with a DC power flow recourse.

Every builder returns a :class:`~floodharden.milp.MilpModel` in per-unit load
shed (or dollars, for the cost-weighted variants). Variable names are stable
and scenario-indexed so that exports diff cleanly and results can be read
back by name:

* first stage: ``y[i]`` (harden substation i), ``x[i]`` (wall height, ft)
* per scenario k: ``z[j,k]`` bus up, ``s[j,k]`` load served, ``g[j,k]``
  generation, ``u[j,k]`` generator committed, ``a[j,k]`` phase angle,
  ``e[r,k]`` branch flow
* ``tau`` for the worst-case epigraph

A substation survives a flood of depth d iff its wall height is at least d.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

from .grid import Grid
from .milp import BINARY, EQ, GE, INTEGER, LE, LinExpr, MilpModel, quicksum
from .scenario import FloodScenario, ScenarioSet, mean_scenario, single

SO, RO = "SO", "RO"
VARIANTS = (SO, RO)


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class StudyParams:
    """Planning-horizon economics: expected storms, outage hours, value of lost load."""

    hurricanes: float = 0.0
    restore_hours: float = 0.0
    voll: float = 0.0
    budget: float = 0.0

    def __post_init__(self):
        for name in ("hurricanes", "restore_hours", "voll", "budget"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be a finite non-negative number, got {value}")

    @property
    def omega(self) -> float:
        """Dollars per MW of expected shed over the horizon."""
        return self.hurricanes * self.restore_hours * self.voll

    @classmethod
    def from_omega(cls, omega: float, budget: float = 0.0) -> "StudyParams":
        return cls(hurricanes=1.0, restore_hours=1.0, voll=omega, budget=budget)


@dataclass(frozen=True)
class HardeningPlan:
    chosen: Mapping[str, bool]
    height: Mapping[str, int]
    cost: float

    def __post_init__(self):
        object.__setattr__(self, "chosen", MappingProxyType(dict(self.chosen)))
        object.__setattr__(self, "height", MappingProxyType({k: int(v) for k, v in self.height.items()}))

    @classmethod
    def build(cls, grid: Grid, height: Mapping[str, int],
              chosen: Mapping[str, bool] | None = None) -> "HardeningPlan":
        """Plan with cost derived from the grid; unspecified substations stay unhardened."""
        h = {s.id: int(height.get(s.id, 0)) for s in grid.substations}
        if chosen is None:
            c = {sid: h[sid] > 0 for sid in h}
        else:
            c = {s.id: bool(chosen.get(s.id, False)) for s in grid.substations}
        return cls(c, h, plan_cost(grid, c, h))

    @classmethod
    def zero(cls, grid: Grid) -> "HardeningPlan":
        return cls.build(grid, {})

    def chosen_at(self, sid: str) -> bool:
        return self.chosen.get(sid, False)

    def height_at(self, sid: str) -> int:
        return self.height.get(sid, 0)


def plan_cost(grid: Grid, chosen: Mapping[str, bool], height: Mapping[str, int]) -> float:
    return math.fsum(
        s.fixed_cost * bool(chosen.get(s.id, False)) + s.variable_cost * height.get(s.id, 0)
        for s in grid.substations)


def plan_violations(grid: Grid, scenarios: ScenarioSet, plan: HardeningPlan) -> list[str]:
    caps = tightened_heights(grid, scenarios)
    out = []
    for sid in set(plan.height) | set(plan.chosen):
        if not grid.has_substation(sid):
            out.append(f"unknown substation {sid!r}")
    for s in grid.substations:
        h = plan.height_at(s.id)
        if h < 0:
            out.append(f"{s.id}: negative height {h}")
        if h > 0 and not plan.chosen_at(s.id):
            out.append(f"{s.id}: height {h} without choosing the substation")
        if h > caps.get(s.id, 0):
            out.append(f"{s.id}: height {h} above min(H, W) = {caps.get(s.id, 0)}")
    expected = plan_cost(grid, plan.chosen, plan.height)
    if abs(expected - plan.cost) > 1e-6 * max(1.0, abs(expected)):
        out.append(f"cost {plan.cost} disagrees with recomputed {expected}")
    return out


@dataclass(frozen=True)
class RecourseSolution:
    scenario_id: str
    bus_on: Mapping[str, bool]
    served: Mapping[str, float]
    generated: Mapping[str, float]
    gen_on: Mapping[str, bool]
    angle: Mapping[str, float]
    flow: Mapping[str, float]
    shed: float

    def __post_init__(self):
        for name in ("bus_on", "served", "generated", "gen_on", "angle", "flow"):
            object.__setattr__(self, name, MappingProxyType(dict(getattr(self, name))))

    @property
    def imbalance(self) -> float:
        """Total generation minus total served load; zero for any feasible dispatch."""
        return math.fsum(self.generated.values()) - math.fsum(self.served.values())


# ---------------------------------------------------------------- big-Ms
def tightened_heights(grid: Grid, scenarios: ScenarioSet) -> dict[str, int]:
    """``min(H_i, W_i)`` for every flooded substation."""
    return {
        sid: min(grid.substation(sid).max_harden, scenarios.max_depth(sid))
        for sid in sorted(scenarios.flooded_substations)
    }


def linking_big_m(grid: Grid, bus: str, scenarios: ScenarioSet) -> tuple[float, float]:
    """Smallest valid big-Ms for the two bus/flood linking rows.

    The first forces the bus down when water exceeds the wall; the second
    forces it up otherwise.
    """
    sid = grid.bus(bus).substation_id
    if sid not in scenarios.flooded_substations:
        raise ValueError(f"bus {bus!r} sits in never-flooded substation {sid!r}")
    w = scenarios.max_depth(sid)
    h = min(grid.substation(sid).max_harden, w)
    return float(w), h + 0.5


def ohm_big_m(branch) -> float:
    return branch.capacity + 2 * math.pi * branch.susceptance


# --------------------------------------------------------------- blocks
_NAME = re.compile(r"^([A-Za-z_]+)\[(.*)\]$")


def split_name(name: str) -> tuple[str, tuple[str, ...]]:
    """``"z[b1,k2]"`` -> ``("z", ("b1", "k2"))``; bare names give an empty tuple."""
    m = _NAME.match(name)
    if not m:
        return name, ()
    return m.group(1), tuple(m.group(2).split(","))


def _first_stage(model: MilpModel, grid: Grid, scenarios: ScenarioSet,
                 budget: float | None) -> tuple[dict[str, LinExpr], LinExpr]:
    caps = tightened_heights(grid, scenarios)
    heights, cost = {}, LinExpr()
    for sid, cap in caps.items():
        sub = grid.substation(sid)
        y = model.add_var(f"y[{sid}]", kind=BINARY)
        x = model.add_var(f"x[{sid}]", 0, cap, kind=INTEGER)
        model.add_constraint(f"harden[{sid}]", x - cap * y, LE, 0)
        heights[sid] = x
        cost = cost + sub.fixed_cost * y + sub.variable_cost * x
    if budget is not None and caps:
        model.add_constraint("budget", cost, LE, budget)
    return heights, cost


def _recourse_block(model: MilpModel, grid: Grid, scenario: FloodScenario,
                    heights: Mapping[str, LinExpr | float], context: ScenarioSet,
                    big_m_scale: float = 1.0, serve_all: bool = False) -> LinExpr:
    """Add one scenario's DC power flow block; return its load-shed expression."""
    k = scenario.id
    flooded = context.flooded_substations
    z: dict[str, LinExpr] = {}
    net: dict[str, LinExpr] = {}
    served = []
    for bus in grid.buses:
        j, sid = bus.id, bus.substation_id
        if sid in flooded:
            zj = model.add_var(f"z[{j},{k}]", kind=BINARY)
            m_down, m_up = linking_big_m(grid, j, context)
            m_down *= big_m_scale
            m_up *= big_m_scale
            excess = scenario.depth(sid) - LinExpr.lift(heights.get(sid, 0.0))
            model.add_constraint(f"link_lo[{j},{k}]", m_down * (1 - zj) - excess, GE, 0)
            model.add_constraint(f"link_up[{j},{k}]", 2 * m_up * zj + 2 * excess, GE, 1)
        else:
            zj = LinExpr(constant=1.0)
        z[j] = zj
        z_var = not zj.is_constant

        if bus.load > 0:
            if serve_all:
                sj = model.add_var(f"s[{j},{k}]", bus.load, bus.load)
            else:
                sj = model.add_var(f"s[{j},{k}]", 0, bus.load)
                if z_var:
                    model.add_constraint(f"serve[{j},{k}]", sj - bus.load * zj, LE, 0)
        else:
            sj = LinExpr()
        served.append(sj)

        if bus.gen_max > 0:
            gj = model.add_var(f"g[{j},{k}]", 0, bus.gen_max)
            if bus.gen_min > 0:
                uj = model.add_var(f"u[{j},{k}]", kind=BINARY)
                if z_var:
                    model.add_constraint(f"gen_on[{j},{k}]", uj - zj, LE, 0)
                model.add_constraint(f"gen_lo[{j},{k}]", gj - bus.gen_min * uj, GE, 0)
                model.add_constraint(f"gen_hi[{j},{k}]", gj - bus.gen_max * uj, LE, 0)
            elif z_var:
                model.add_constraint(f"gen_hi[{j},{k}]", gj - bus.gen_max * zj, LE, 0)
        else:
            gj = LinExpr()
        lo, hi = (0.0, 0.0) if bus.is_reference else (-math.pi, math.pi)
        model.add_var(f"a[{j},{k}]", lo, hi)
        net[j] = gj - sj

    flows_out: dict[str, list[LinExpr]] = {b.id: [] for b in grid.buses}
    flows_in: dict[str, list[LinExpr]] = {b.id: [] for b in grid.buses}
    for br in grid.branches:
        r = br.id
        e = model.add_var(f"e[{r},{k}]", -br.capacity, br.capacity)
        flows_out[br.from_bus].append(e)
        flows_in[br.to_bus].append(e)
        for end, tag in ((br.from_bus, "from"), (br.to_bus, "to")):
            if not z[end].is_constant:
                model.add_constraint(f"cap_{tag}_hi[{r},{k}]", e - br.capacity * z[end], LE, 0)
                model.add_constraint(f"cap_{tag}_lo[{r},{k}]", e + br.capacity * z[end], GE, 0)
        drop = br.susceptance * (LinExpr({f"a[{br.from_bus},{k}]": 1.0})
                                 - LinExpr({f"a[{br.to_bus},{k}]": 1.0}))
        if z[br.from_bus].is_constant and z[br.to_bus].is_constant:
            model.add_constraint(f"ohm[{r},{k}]", drop - e, EQ, 0)
        else:
            big = ohm_big_m(br) * big_m_scale
            both = z[br.from_bus] + z[br.to_bus]
            model.add_constraint(f"ohm_lo[{r},{k}]", drop - big * both - e, GE, -2 * big)
            model.add_constraint(f"ohm_hi[{r},{k}]", drop + big * both - e, LE, 2 * big)

    for bus in grid.buses:
        j = bus.id
        outflow = quicksum(flows_out[j]) - quicksum(flows_in[j])
        model.add_constraint(f"bal[{j},{k}]", outflow - net[j], EQ, 0)

    return grid.total_load - quicksum(served)


def _check_budget(budget):
    if not (math.isfinite(budget) and budget >= 0):
        raise ValueError(f"budget must be a finite non-negative number, got {budget}")


def _plan_context(grid: Grid, scenario: FloodScenario, plan: HardeningPlan) -> ScenarioSet:
    """Single-scenario set whose depth caps also cover the plan's wall heights."""
    depths = dict(scenario.depths)
    extra = {sid: h for sid, h in plan.height.items() if h > depths.get(sid, 0)}
    ctx = single(FloodScenario(scenario.id, 1.0, {**depths, **extra}))
    return ctx


def build_recourse(grid: Grid, plan: HardeningPlan, scenario: FloodScenario,
                   scenarios: ScenarioSet | None = None, *, big_m_scale: float = 1.0) -> MilpModel:
    """Load-shed minimisation for one scenario with the hardening plan fixed.

    ``scenarios`` supplies the flooded set and depth caps used for the linking
    big-Ms; by default they are derived from the scenario and the plan itself.
    """
    context = scenarios if scenarios is not None else _plan_context(grid, scenario, plan)
    problems = plan_violations(grid, context, plan)
    if problems:
        raise PlanError("; ".join(problems))
    model = MilpModel(name=f"rec_{scenario.id}")
    heights = {sid: float(plan.height_at(sid)) for sid in context.flooded_substations}
    shed = _recourse_block(model, grid, scenario, heights, context, big_m_scale)
    model.set_objective(shed)
    return model


def build_so(grid: Grid, scenarios: ScenarioSet, budget: float, *,
             big_m_scale: float = 1.0, objective_scale: float = 1.0) -> MilpModel:
    """Deterministic equivalent minimising expected shed under a budget."""
    _check_budget(budget)
    model = MilpModel(name="so")
    heights, _ = _first_stage(model, grid, scenarios, budget)
    expected = LinExpr()
    for sc in scenarios:
        shed = _recourse_block(model, grid, sc, heights, scenarios, big_m_scale)
        expected = expected + sc.probability * shed
    model.set_objective(objective_scale * expected)
    return model


def build_ro(grid: Grid, scenarios: ScenarioSet, budget: float, *,
             big_m_scale: float = 1.0) -> MilpModel:
    """Deterministic equivalent minimising the worst scenario's shed."""
    _check_budget(budget)
    model = MilpModel(name="ro")
    heights, _ = _first_stage(model, grid, scenarios, budget)
    tau = model.add_var("tau", 0.0, math.inf)
    for sc in scenarios:
        shed = _recourse_block(model, grid, sc, heights, scenarios, big_m_scale)
        model.add_constraint(f"epi[{sc.id}]", tau - shed, GE, 0)
    model.set_objective(tau)
    return model


def build_min_budget_zero_shed(grid: Grid, scenarios: ScenarioSet, *,
                               big_m_scale: float = 1.0) -> MilpModel:
    """Cheapest hardening that serves all load in every scenario."""
    model = MilpModel(name="minbud")
    heights, cost = _first_stage(model, grid, scenarios, None)
    for sc in scenarios:
        _recourse_block(model, grid, sc, heights, scenarios, big_m_scale, serve_all=True)
    model.set_objective(cost)
    return model


def build_ev(grid: Grid, scenarios: ScenarioSet, budget: float, **kw) -> MilpModel:
    """Expected-value problem: plan against the mean flood scenario alone."""
    model = build_so(grid, single(mean_scenario(scenarios)), budget, **kw)
    model.name = "ev"
    return model


def build_ws(grid: Grid, scenario: FloodScenario, budget: float, **kw) -> MilpModel:
    """Wait-and-see problem for one scenario (plan chosen with hindsight)."""
    model = build_so(grid, single(scenario), budget, **kw)
    model.name = f"ws_{scenario.id}"
    return model


def build_tdm(grid: Grid, scenarios: ScenarioSet, params: StudyParams, variant: str = SO, *,
              big_m_scale: float = 1.0) -> MilpModel:
    """Total disaster management cost: weighted shed (in MW) plus hardening spend.

    No budget row; the spend in the optimal solution is the optimal budget.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    weight = params.omega * grid.base_mva
    model = MilpModel(name=f"tdm_{variant.lower()}")
    heights, cost = _first_stage(model, grid, scenarios, None)
    if variant == SO:
        expected = LinExpr()
        for sc in scenarios:
            shed = _recourse_block(model, grid, sc, heights, scenarios, big_m_scale)
            expected = expected + sc.probability * shed
        model.set_objective(weight * expected + cost)
    else:
        tau = model.add_var("tau", 0.0, math.inf)
        for sc in scenarios:
            shed = _recourse_block(model, grid, sc, heights, scenarios, big_m_scale)
            model.add_constraint(f"epi[{sc.id}]", tau - shed, GE, 0)
        model.set_objective(weight * tau + cost)
    return model


# ------------------------------------------------------- reading results
def plan_from_assignment(grid: Grid, assignment: Mapping[str, float]) -> HardeningPlan:
    chosen, height = {}, {}
    for s in grid.substations:
        chosen[s.id] = round(assignment.get(f"y[{s.id}]", 0.0)) == 1
        height[s.id] = int(round(assignment.get(f"x[{s.id}]", 0.0)))
    return HardeningPlan(chosen, height, plan_cost(grid, chosen, height))


def recourse_from_assignment(grid: Grid, scenario_id: str,
                             assignment: Mapping[str, float]) -> RecourseSolution:
    k = scenario_id
    bus_on, served, generated, gen_on, angle = {}, {}, {}, {}, {}
    for bus in grid.buses:
        j = bus.id
        bus_on[j] = round(assignment.get(f"z[{j},{k}]", 1.0)) == 1
        served[j] = assignment.get(f"s[{j},{k}]", 0.0)
        generated[j] = assignment.get(f"g[{j},{k}]", 0.0)
        if f"u[{j},{k}]" in assignment:
            gen_on[j] = round(assignment[f"u[{j},{k}]"]) == 1
        else:
            gen_on[j] = generated[j] > 1e-9
        angle[j] = assignment[f"a[{j},{k}]"]
    flow = {br.id: assignment[f"e[{br.id},{k}]"] for br in grid.branches}
    shed = grid.total_load - math.fsum(served.values())
    return RecourseSolution(k, bus_on, served, generated, gen_on, angle, flow, max(shed, 0.0))


def shutdown_assignment(model: MilpModel, grid: Grid, plan: HardeningPlan,
                        scenarios: ScenarioSet) -> dict[str, float]:
    """The all-dark recourse completion of ``plan`` for every block of ``model``.

    Generators off, nothing served, zero flows and angles, bus status from the
    flood/wall comparison. Feasible for every plan in the feasible set, which
    makes it a valid warm start at any budget the plan fits.
    """
    out: dict[str, float] = {}
    for v in model.variables:
        prefix, args = split_name(v.name)
        if prefix == "y":
            out[v.name] = float(plan.chosen_at(args[0]))
        elif prefix == "x":
            out[v.name] = float(plan.height_at(args[0]))
        elif prefix == "z":
            j, k = args
            sid = grid.bus(j).substation_id
            out[v.name] = float(plan.height_at(sid) >= scenarios.get(k).depth(sid))
        elif prefix == "tau":
            out[v.name] = grid.total_load
        elif prefix == "s":
            out[v.name] = v.lb
        else:
            out[v.name] = 0.0
    return out
