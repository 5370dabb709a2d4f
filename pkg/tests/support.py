"""Independent oracles and shared helpers for the test suite.

The oracles never touch the in-repo solver: recourse values come from a DC
power flow LP assembled directly as scipy arrays, and small MILPs are solved
by enumerating every integer assignment.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog

from floodharden.formulations import HardeningPlan, tightened_heights
from floodharden.grid import Branch, Bus, Grid, Substation
from floodharden.milp import EQ, GE, LE, MilpModel
from floodharden.scenario import FloodScenario, ScenarioSet

TOL = 1e-6


# ------------------------------------------------------------ recourse oracle
def forced_bus_status(grid: Grid, scenarios: ScenarioSet, scenario: FloodScenario,
                      heights: dict[str, int]) -> dict[str, bool]:
    """Bus up iff its substation is never flooded or its wall is at least the water."""
    out = {}
    for bus in grid.buses:
        sid = bus.substation_id
        if sid not in scenarios.flooded_substations:
            out[bus.id] = True
        else:
            out[bus.id] = heights.get(sid, 0) >= scenario.depth(sid)
    return out


def dc_shed(grid: Grid, bus_on: dict[str, bool]) -> float:
    """Minimum per-unit shed with a fixed bus status pattern.

    Units with a positive minimum output are enumerated on/off; each
    combination is an LP over served load, generation, angles and flows.
    """
    buses, branches = grid.buses, grid.branches
    nb, nr = len(buses), len(branches)
    idx = {b.id: n for n, b in enumerate(buses)}
    # column layout: s | g | a | e
    s0, g0, a0, e0 = 0, nb, 2 * nb, 3 * nb
    nvar = 3 * nb + nr
    c = np.zeros(nvar)
    c[s0:s0 + nb] = -1.0

    a_eq, b_eq = [], []
    for j, bus in enumerate(buses):
        row = np.zeros(nvar)
        row[s0 + j] = 1.0
        row[g0 + j] = -1.0
        for r, br in enumerate(branches):
            if br.from_bus == bus.id:
                row[e0 + r] += 1.0
            if br.to_bus == bus.id:
                row[e0 + r] -= 1.0
        a_eq.append(row)
        b_eq.append(0.0)
    for r, br in enumerate(branches):
        if bus_on[br.from_bus] and bus_on[br.to_bus]:
            row = np.zeros(nvar)
            row[e0 + r] = 1.0
            row[a0 + idx[br.from_bus]] = -br.susceptance
            row[a0 + idx[br.to_bus]] = br.susceptance
            a_eq.append(row)
            b_eq.append(0.0)

    committable = [j for j, b in enumerate(buses) if b.gen_min > 0 and bus_on[b.id]]
    best = math.inf
    for pattern in itertools.product((0, 1), repeat=len(committable)):
        on = dict(zip(committable, pattern))
        bounds = []
        for j, b in enumerate(buses):
            bounds.append((0.0, b.load if bus_on[b.id] else 0.0))
        for j, b in enumerate(buses):
            if not bus_on[b.id]:
                bounds.append((0.0, 0.0))
            elif b.gen_min > 0:
                bounds.append((b.gen_min, b.gen_max) if on[j] else (0.0, 0.0))
            else:
                bounds.append((0.0, b.gen_max))
        for b in buses:
            bounds.append((0.0, 0.0) if b.is_reference else (-math.pi, math.pi))
        for br in branches:
            open_ = bus_on[br.from_bus] and bus_on[br.to_bus]
            bounds.append((-br.capacity, br.capacity) if open_ else (0.0, 0.0))
        res = linprog(c, A_eq=np.array(a_eq), b_eq=np.array(b_eq), bounds=bounds, method="highs")
        if res.status == 0:
            best = min(best, grid.total_load + res.fun)
    return max(best, 0.0)


class DeskOracle:
    """Brute force over every hardening plan of a (small) instance."""

    def __init__(self, grid: Grid, scenarios: ScenarioSet):
        self.grid, self.scenarios = grid, scenarios
        self.caps = tightened_heights(grid, scenarios)
        self.ids = sorted(self.caps)
        self._pattern_cache: dict[tuple, float] = {}
        self.plans = []
        for hs in itertools.product(*[range(self.caps[i] + 1) for i in self.ids]):
            plan = HardeningPlan.build(grid, dict(zip(self.ids, hs)))
            self.plans.append(plan)
        self.shed = {}
        for plan in self.plans:
            for sc in scenarios:
                self.shed[self.key(plan), sc.id] = self.scenario_shed(plan, sc)

    def key(self, plan: HardeningPlan) -> tuple[int, ...]:
        return tuple(plan.height_at(i) for i in self.ids)

    def scenario_shed(self, plan: HardeningPlan, scenario: FloodScenario) -> float:
        status = forced_bus_status(self.grid, self.scenarios, scenario, dict(plan.height))
        pattern = tuple(sorted(status.items()))
        if pattern not in self._pattern_cache:
            self._pattern_cache[pattern] = dc_shed(self.grid, status)
        return self._pattern_cache[pattern]

    def expected(self, plan: HardeningPlan) -> float:
        return math.fsum(sc.probability * self.shed[self.key(plan), sc.id] for sc in self.scenarios)

    def worst(self, plan: HardeningPlan) -> float:
        return max(self.shed[self.key(plan), sc.id] for sc in self.scenarios)

    def affordable(self, budget: float):
        return [p for p in self.plans if p.cost <= budget + 1e-9]

    def so(self, budget: float) -> float:
        return min(self.expected(p) for p in self.affordable(budget))

    def ro(self, budget: float) -> float:
        return min(self.worst(p) for p in self.affordable(budget))

    def ws(self, budget: float) -> float:
        plans = self.affordable(budget)
        return math.fsum(sc.probability * min(self.shed[self.key(p), sc.id] for p in plans)
                         for sc in self.scenarios)

    def so_argmin(self, budget: float, weight: float = 1.0) -> set[tuple[int, ...]]:
        plans = self.affordable(budget)
        best = min(weight * self.expected(p) for p in plans)
        return {self.key(p) for p in plans if weight * self.expected(p) <= best + 1e-9 * max(1, abs(best))}

    def min_zero_shed_budget(self) -> float:
        return min(p.cost for p in self.plans if self.worst(p) <= TOL)

    def tdm(self, omega: float) -> tuple[float, float]:
        """(optimal total cost, cheapest optimal spend) of weighted shed plus spend."""
        w = omega * self.grid.base_mva
        totals = [(w * self.expected(p) + p.cost, p.cost) for p in self.plans]
        best = min(t for t, _ in totals)
        spend = min(c for t, c in totals if t <= best + 1e-9 * max(1.0, best))
        return best, spend


# ---------------------------------------------------------- MILP brute force
def brute_force(model: MilpModel) -> float:
    """Exact optimum by enumerating integer values; continuous parts via linprog."""
    names = model.var_names
    ints = [v for v in model.variables if v.is_integer]
    conts = [v for v in model.variables if not v.is_integer]
    ranges = [range(int(math.ceil(v.lb)), int(math.floor(v.ub)) + 1) for v in ints]
    cidx = {v.name: n for n, v in enumerate(conts)}
    best = math.inf
    if not conts:
        grid = np.array(list(itertools.product(*ranges)), dtype=float).reshape(-1, len(ints))
        col = {v.name: n for n, v in enumerate(ints)}
        ok = np.ones(len(grid), dtype=bool)
        for con in model.constraints:
            act = sum(coef * grid[:, col[n]] for n, coef in con.coefs.items()) if con.coefs \
                else np.zeros(len(grid))
            tol = 1e-9 * con.scale()
            if con.relation == LE:
                ok &= act <= con.rhs + tol
            elif con.relation == GE:
                ok &= act >= con.rhs - tol
            else:
                ok &= np.abs(act - con.rhs) <= tol
        if not ok.any():
            return math.inf
        obj = sum(coef * grid[:, col[n]] for n, coef in model.objective.items()) \
            + model.objective_constant
        obj = np.broadcast_to(obj, ok.shape)
        return float(obj[ok].min())

    for combo in itertools.product(*ranges):
        fixed = {v.name: val for v, val in zip(ints, combo)}
        c = np.zeros(len(conts))
        const = model.objective_constant
        for n, coef in model.objective.items():
            if n in cidx:
                c[cidx[n]] += coef
            else:
                const += coef * fixed[n]
        a_ub, b_ub, a_eq, b_eq = [], [], [], []
        infeasible = False
        for con in model.constraints:
            row = np.zeros(len(conts))
            rhs = con.rhs
            for n, coef in con.coefs.items():
                if n in cidx:
                    row[cidx[n]] += coef
                else:
                    rhs -= coef * fixed[n]
            if not row.any():
                tol = 1e-9 * con.scale()
                if (con.relation == LE and 0 > rhs + tol) or (con.relation == GE and 0 < rhs - tol) \
                        or (con.relation == EQ and abs(rhs) > tol):
                    infeasible = True
                    break
                continue
            if con.relation == LE:
                a_ub.append(row); b_ub.append(rhs)
            elif con.relation == GE:
                a_ub.append(-row); b_ub.append(-rhs)
            else:
                a_eq.append(row); b_eq.append(rhs)
        if infeasible:
            continue
        res = linprog(c, A_ub=np.array(a_ub) if a_ub else None, b_ub=b_ub or None,
                      A_eq=np.array(a_eq) if a_eq else None, b_eq=b_eq or None,
                      bounds=[(v.lb, v.ub) for v in conts], method="highs")
        if res.status == 0:
            best = min(best, const + res.fun)
    return best


def random_milp(rng: np.random.Generator, n_int: int, n_cont: int = 0, n_rows: int = 4,
                int_hi: int = 1) -> MilpModel:
    """Bounded random MILP; mixes <=, >= and = rows and some negative costs."""
    m = MilpModel(name="rand")
    xs = [m.add_var(f"i{n}", 0, int_hi, "binary" if int_hi == 1 else "integer") for n in range(n_int)]
    cs = [m.add_var(f"c{n}", 0, float(rng.integers(1, 5))) for n in range(n_cont)]
    allv = xs + cs
    for r in range(n_rows):
        coefs = rng.integers(-3, 7, size=len(allv)).astype(float)
        lhs = sum(float(a) * v for a, v in zip(coefs, allv))
        kind = rng.choice(["le", "le", "ge", "eq"] if r else ["le"])
        scale = max(1.0, float(np.abs(coefs).sum()))
        if kind == "le":
            m.add_constraint(f"r{r}", lhs, LE, float(rng.integers(0, int(scale) + 1)))
        elif kind == "ge":
            m.add_constraint(f"r{r}", lhs, GE, float(rng.integers(-int(scale), 3)))
        else:
            # keep equality rows satisfiable most of the time by building from a point
            point = [float(rng.integers(0, int_hi + 1)) for _ in xs] + [float(rng.uniform(0, v.ub)) for v in
                                                                        m.variables[n_int:]]
            m.add_constraint(f"r{r}", lhs, EQ, float(np.dot(coefs, point)))
    obj = rng.integers(-8, 9, size=len(allv)).astype(float)
    m.set_objective(sum(float(a) * v for a, v in zip(obj, allv)) + float(rng.integers(-3, 4)))
    return m


# --------------------------------------------------------- random instances
def random_instance(rng: np.random.Generator):
    """Small random grid, scenario set and plan in the feasible hardening set."""
    n_sub = int(rng.integers(1, 4))
    subs, buses = [], []
    for i in range(n_sub):
        sid = f"s{i}"
        nb = int(rng.integers(1, 3))
        ids = []
        for q in range(nb):
            bid = f"b{i}{q}"
            ids.append(bid)
            gen = rng.random() < 0.5
            gmax = float(rng.uniform(0.2, 2.0)) if gen else 0.0
            gmin = float(rng.uniform(0, gmax * 0.6)) if gen and rng.random() < 0.4 else 0.0
            load = float(rng.choice([0.0, rng.uniform(0.05, 1.0)], p=[0.2, 0.8]))
            buses.append(Bus(bid, sid, round(load, 3), round(gmin, 3), round(gmax, 3)))
        subs.append(Substation(sid, float(rng.integers(0, 50)) * 1000, float(rng.integers(1, 100)) * 1000,
                               int(rng.integers(0, 7)), tuple(ids)))
    ref = int(rng.integers(len(buses)))
    buses[ref] = Bus(buses[ref].id, buses[ref].substation_id, buses[ref].load, buses[ref].gen_min,
                     buses[ref].gen_max, True)
    order = list(rng.permutation(len(buses)))
    branches = []
    for n in range(1, len(order)):
        a, b = buses[order[n]].id, buses[order[int(rng.integers(n))]].id
        if rng.random() < 0.5:
            a, b = b, a
        branches.append(Branch(f"r{n}", a, b, round(float(rng.uniform(1, 15)), 3),
                               round(float(rng.uniform(0.1, 2.0)), 3)))
    if len(buses) > 2 and rng.random() < 0.5:
        a, b = rng.choice(len(buses), size=2, replace=False)
        branches.append(Branch("rx", buses[a].id, buses[b].id, 5.0, 0.5))
    grid = Grid(tuple(subs), tuple(buses), tuple(branches), 100.0)

    n_sc = int(rng.integers(1, 4))
    scs = []
    for k in range(n_sc):
        depths = {s.id: int(rng.integers(0, 6)) for s in subs if rng.random() < 0.7}
        scs.append(FloodScenario(f"k{k}", 1.0 / n_sc, depths))
    scenarios = ScenarioSet(tuple(scs))
    caps = tightened_heights(grid, scenarios)
    heights = {sid: int(rng.integers(0, cap + 1)) for sid, cap in caps.items()}
    plan = HardeningPlan.build(grid, heights)
    return grid, scenarios, plan


# ------------------------------------------------------ conservation ledger
@dataclass
class ConservationLedger:
    checked: int = 0
    worst: float = 0.0
    pending: list = field(default_factory=list)

    def record(self, solution) -> None:
        value = abs(solution.imbalance)
        self.checked += 1
        self.worst = max(self.worst, value)
        self.pending.append((solution.scenario_id, value))


CONSERVATION = ConservationLedger()


# ------------------------------------------------------- acceptance ledger
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@lru_cache(maxsize=None)
def desk():
    from floodharden.grid import desk_grid
    from floodharden.scenario import desk_scenarios
    g = desk_grid()
    return g, desk_scenarios(g)


@lru_cache(maxsize=None)
def desk_oracle() -> DeskOracle:
    return DeskOracle(*desk())
