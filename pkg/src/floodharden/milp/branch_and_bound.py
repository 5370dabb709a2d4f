"""Best-bound branch-and-bound over the simplex relaxation."""

from __future__ import annotations

import heapq
import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .model import FEAS_TOL, INT_TOL, MilpModel, ModelError, check_feasible
from .simplex import Basis, SimplexEngine

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
GAP_REACHED = "gap_reached"
TIME_LIMIT = "time_limit"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

ABS_GAP = 1e-9


@dataclass(frozen=True)
class SolveParams:
    relative_gap: float = 0.005
    time_limit: float = 21600.0
    warm_start: Mapping[str, float] | None = None

    def __post_init__(self):
        if not self.relative_gap >= 0:
            raise ValueError("relative_gap must be >= 0")
        if not self.time_limit > 0:
            raise ValueError("time_limit must be > 0")


@dataclass(frozen=True)
class SolveReport:
    status: str
    objective_value: float
    best_bound: float
    gap: float
    assignment: Mapping[str, float]
    wall_time: float
    node_count: int
    root_incumbent: float | None = None
    warm_start_accepted: bool = False
    lp_iterations: int = 0

    @property
    def has_solution(self) -> bool:
        return bool(self.assignment)

    def value(self, name: str) -> float:
        return self.assignment[name]

    def replay_key(self) -> tuple:
        """Everything except timing; equal across deterministic re-runs."""
        return (self.status, self.objective_value, self.best_bound, self.gap,
                tuple(sorted(self.assignment.items())), self.node_count,
                self.root_incumbent, self.warm_start_accepted, self.lp_iterations)


def relative_gap(objective: float, bound: float) -> float:
    if not (math.isfinite(objective) and math.isfinite(bound)):
        return math.inf
    return max(0.0, objective - bound) / max(abs(objective), 1e-9)


def warm_start_from(assignment: Mapping[str, float], params: SolveParams | None = None) -> SolveParams:
    """Return ``params`` (or defaults) seeded with ``assignment`` as the initial incumbent."""
    return replace(params or SolveParams(), warm_start=dict(assignment))


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    basis: Basis | None = field(compare=False, default=None)
    depth: int = field(compare=False, default=0)


def _pick_branch(x, integer_idx):
    vals = x[integer_idx]
    frac = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
    frac = np.where(frac > INT_TOL, frac, 0.0)
    if not frac.any():
        return None
    # argmax returns the lowest index among ties
    return int(integer_idx[int(np.argmax(frac))])


def solve(model: MilpModel, params: SolveParams | None = None) -> SolveReport:
    """Solve ``model`` to the requested relative gap.

    Node selection is best-bound first, ties broken by creation order; the
    branching variable is the most fractional integer, ties to the lowest index.
    The search is fully deterministic.
    """
    params = params or SolveParams()
    problems = model.validate()
    if problems:
        raise ModelError("; ".join(problems))
    start = time.perf_counter()
    arr = model.to_arrays()
    names = arr.names
    integer_idx = np.flatnonzero(arr.integer)
    lb0, ub0 = arr.lb.copy(), arr.ub.copy()
    lb0[integer_idx] = np.ceil(lb0[integer_idx] - INT_TOL)
    ub0[integer_idx] = np.floor(ub0[integer_idx] + INT_TOL)
    engine = SimplexEngine(arr.A, arr.relations, arr.b, arr.c)

    incumbent: np.ndarray | None = None
    inc_obj = math.inf
    warm_ok = False
    if params.warm_start is not None:
        try:
            broken = check_feasible(model, params.warm_start)
        except KeyError as exc:
            broken = [str(exc)]
        if broken:
            warnings.warn(f"warm start dropped: {broken[0]}"
                          + (f" (+{len(broken) - 1} more)" if len(broken) > 1 else ""),
                          stacklevel=2)
        else:
            incumbent = np.array([float(params.warm_start[n]) for n in names])
            incumbent[integer_idx] = np.round(incumbent[integer_idx])
            inc_obj = model.objective_value(dict(zip(names, incumbent)))
            warm_ok = True

    def prune_level(obj):
        # nodes whose bound is at least this value cannot improve enough
        return obj - max(ABS_GAP * max(1.0, abs(obj)), params.relative_gap * max(abs(obj), 1e-9))

    heap: list[_Node] = []
    seq = 0
    heapq.heappush(heap, _Node(-math.inf, seq, lb0, ub0))
    nodes = 0
    lp_iters = 0
    pruned_floor = math.inf  # lowest bound among nodes discarded by the gap rule
    root_incumbent = None
    status = None
    unbounded = False

    while heap:
        if time.perf_counter() - start > params.time_limit:
            status = TIME_LIMIT
            break
        node = heapq.heappop(heap)
        if incumbent is not None and node.bound >= prune_level(inc_obj):
            if node.bound < inc_obj - ABS_GAP * max(1.0, abs(inc_obj)):
                pruned_floor = min(pruned_floor, node.bound)
            continue
        nodes += 1
        res = engine.solve(node.lb, node.ub, warm=node.basis)
        lp_iters += res.iterations
        if res.status == "unbounded":
            if nodes == 1:
                unbounded = True
                break
            raise RuntimeError("relaxation became unbounded below the root")
        if res.status in ("iteration_limit", "numerical"):
            raise RuntimeError(f"LP relaxation failed ({res.status}) at node {nodes}")
        if res.status == "infeasible":
            if nodes == 1:
                root_incumbent = inc_obj if incumbent is not None else None
            continue
        obj = res.objective + arr.c0
        x = res.x
        if incumbent is not None and obj >= prune_level(inc_obj):
            if obj < inc_obj - ABS_GAP * max(1.0, abs(inc_obj)):
                pruned_floor = min(pruned_floor, obj)
        else:
            j = _pick_branch(x, integer_idx)
            if j is None:
                cand = x.copy()
                cand[integer_idx] = np.round(cand[integer_idx])
                cand_obj = model.objective_value(dict(zip(names, cand)))
                if cand_obj < inc_obj:
                    incumbent, inc_obj = cand, cand_obj
                    log.debug("node %d: incumbent %.10g", nodes, inc_obj)
            else:
                v = x[j]
                down_ub = node.ub.copy()
                down_ub[j] = math.floor(v)
                up_lb = node.lb.copy()
                up_lb[j] = math.ceil(v)
                for lb, ub in ((node.lb, down_ub), (up_lb, node.ub)):
                    if lb[j] <= ub[j]:
                        seq += 1
                        heapq.heappush(heap, _Node(obj, seq, lb, ub, res.basis, node.depth + 1))
        if nodes == 1:
            root_incumbent = inc_obj if incumbent is not None else None

    elapsed = time.perf_counter() - start
    if unbounded:
        return SolveReport(UNBOUNDED, -math.inf, -math.inf, math.inf, {}, elapsed, nodes,
                           None, warm_ok, lp_iters)
    open_bound = min((n.bound for n in heap), default=math.inf)
    if incumbent is None:
        if status == TIME_LIMIT:
            return SolveReport(TIME_LIMIT, math.inf, min(open_bound, pruned_floor), math.inf, {},
                               elapsed, nodes, root_incumbent, warm_ok, lp_iters)
        return SolveReport(INFEASIBLE, math.inf, math.inf, math.inf, {}, elapsed, nodes,
                           root_incumbent, warm_ok, lp_iters)
    bound = min(inc_obj, open_bound, pruned_floor)
    if status != TIME_LIMIT:
        status = OPTIMAL if bound >= inc_obj - ABS_GAP * max(1.0, abs(inc_obj)) else GAP_REACHED
        if status == OPTIMAL:
            bound = inc_obj
    assignment = {n: float(v) for n, v in zip(names, incumbent)}
    return SolveReport(status, inc_obj, bound, relative_gap(inc_obj, bound), assignment,
                       elapsed, nodes, root_incumbent, warm_ok, lp_iters)
