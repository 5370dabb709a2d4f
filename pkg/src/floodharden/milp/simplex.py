"""Bounded-variable revised simplex.

The engine works on ``A x (rel) b`` with ``lb <= x <= ub``. Every row gets a
logical (slack) column whose bounds encode the relation, and an artificial
column used only by phase I. The basis inverse is kept explicitly and updated
with rank-one pivots, refactorised periodically.

Primal simplex (Dantzig pricing, Bland's rule once degenerate pivots pile up)
solves from scratch. Dual simplex reoptimises from a previous basis after
bounds tighten, which is what branch-and-bound children need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import EQ, GE, LE

BASIC, AT_LB, AT_UB, FREE = 0, 1, 2, 3

PIVOT_TOL = 1e-9
OPT_TOL = 1e-9
PRIMAL_TOL = 1e-9
REFACTOR_EVERY = 64
DEGENERATE_SWITCH = 30


@dataclass(frozen=True)
class Basis:
    basic: tuple[int, ...]
    status: np.ndarray  # per column, one of BASIC/AT_LB/AT_UB/FREE


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded | iteration_limit | numerical
    x: np.ndarray | None
    objective: float
    basis: Basis | None
    iterations: int


class SimplexEngine:
    """LP solver bound to one constraint matrix; bounds and basis vary per call."""

    def __init__(self, A: np.ndarray, relations: list[str], b: np.ndarray, c: np.ndarray):
        m, n = A.shape
        self.m, self.n = m, n
        # row equilibration: each row divided by its largest coefficient
        scale = np.abs(A).max(axis=1) if n else np.ones(m)
        scale = np.where(scale > 0, scale, 1.0)
        self.row_scale = scale
        A = A / scale[:, None]
        b = b / scale
        eye = np.eye(m)
        self.A = np.hstack([A, eye, eye]) if m else np.zeros((0, n))
        self.b = b
        self.N = n + 2 * m
        self.cost = np.concatenate([c, np.zeros(2 * m)])
        slack_lo = np.zeros(m)
        slack_hi = np.zeros(m)
        for i, rel in enumerate(relations):
            if rel == LE:
                slack_lo[i], slack_hi[i] = 0.0, math.inf
            elif rel == GE:
                slack_lo[i], slack_hi[i] = -math.inf, 0.0
            elif rel == EQ:
                slack_lo[i], slack_hi[i] = 0.0, 0.0
            else:
                raise ValueError(rel)
        self.slack_lo, self.slack_hi = slack_lo, slack_hi
        self.iterations = 0

    # ------------------------------------------------------------------ setup
    def _bounds(self, lb, ub):
        m = self.m
        lo = np.concatenate([lb, self.slack_lo, np.zeros(m)])
        hi = np.concatenate([ub, self.slack_hi, np.zeros(m)])
        return lo, hi

    def _nonbasic_value(self, j, status, lo, hi):
        if status == AT_LB:
            return lo[j]
        if status == AT_UB:
            return hi[j]
        return 0.0

    def _compute_xb(self, x, basic, binv):
        x = x.copy()
        x[basic] = 0.0
        x[basic] = binv @ (self.b - self.A @ x)
        return x

    def _refactor(self, basic):
        try:
            binv = np.linalg.inv(self.A[:, basic])
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(binv)):
            return None
        return binv

    # -------------------------------------------------------------- interface
    def solve(self, lb: np.ndarray, ub: np.ndarray, warm: Basis | None = None,
              max_iter: int | None = None) -> LPResult:
        lb = np.asarray(lb, dtype=float)
        ub = np.asarray(ub, dtype=float)
        if np.any(lb > ub + PRIMAL_TOL):
            return LPResult("infeasible", None, math.inf, None, 0)
        max_iter = max_iter or 50 * (self.m + self.n) + 1000
        if warm is not None:
            res = self._solve_warm(lb, ub, warm, max_iter)
            if res is not None:
                return res
        return self._solve_cold(lb, ub, max_iter)

    def _finish(self, state, status):
        x, basic, st = state["x"], state["basic"], state["status"]
        xs = x[: self.n].copy()
        obj = float(self.cost[: self.n] @ xs)
        return LPResult(status, xs, obj, Basis(tuple(int(j) for j in basic), st.copy()),
                        state["iters"])

    def _solve_cold(self, lb, ub, max_iter) -> LPResult:
        m, n = self.m, self.n
        lo, hi = self._bounds(lb, ub)
        status = np.full(self.N, AT_LB, dtype=np.int8)
        x = np.zeros(self.N)
        for j in range(n):
            if math.isfinite(lo[j]):
                status[j], x[j] = AT_LB, lo[j]
            elif math.isfinite(hi[j]):
                status[j], x[j] = AT_UB, hi[j]
            else:
                status[j], x[j] = FREE, 0.0
        resid = self.b - self.A[:, :n] @ x[:n]
        basic = np.empty(m, dtype=int)
        phase1_cost = np.zeros(self.N)
        for i in range(m):
            s, a = n + i, n + m + i
            r = resid[i]
            if lo[s] - PRIMAL_TOL <= r <= hi[s] + PRIMAL_TOL:
                basic[i] = s
                status[s] = BASIC
                x[s] = r
                status[a] = AT_LB
            else:
                # slack parks at its finite bound; artificial absorbs the rest
                bound = lo[s] if math.isfinite(lo[s]) else hi[s]
                status[s] = AT_LB if bound == lo[s] else AT_UB
                x[s] = bound
                rest = r - bound
                basic[i] = a
                status[a] = BASIC
                x[a] = rest
                if rest > 0:
                    lo[a], hi[a] = 0.0, math.inf
                    phase1_cost[a] = 1.0
                else:
                    lo[a], hi[a] = -math.inf, 0.0
                    phase1_cost[a] = -1.0
        state = {"x": x, "basic": basic, "status": status, "lo": lo, "hi": hi,
                 "binv": np.eye(m), "iters": 0}
        if np.any(phase1_cost):
            res = self._primal(state, phase1_cost, max_iter)
            if res in ("iteration_limit", "numerical"):
                return LPResult(res, None, math.nan, None, state["iters"])
            infeas = float(phase1_cost @ state["x"])
            if infeas > PRIMAL_TOL * max(1.0, float(np.abs(self.b).max(initial=0.0))):
                return LPResult("infeasible", None, math.inf, None, state["iters"])
        # artificials are pinned at zero from here on
        art = slice(n + m, self.N)
        state["lo"][art] = 0.0
        state["hi"][art] = 0.0
        nb_art = [j for j in range(n + m, self.N) if state["status"][j] != BASIC]
        state["status"][nb_art] = AT_LB
        state["x"][nb_art] = 0.0
        res = self._primal(state, self.cost, max_iter)
        if res != "optimal":
            return LPResult(res, None, -math.inf if res == "unbounded" else math.nan,
                            None, state["iters"])
        return self._finish(state, "optimal")

    def _solve_warm(self, lb, ub, warm: Basis, max_iter) -> LPResult | None:
        lo, hi = self._bounds(lb, ub)
        basic = np.array(warm.basic, dtype=int)
        status = warm.status.copy()
        binv = self._refactor(basic)
        if binv is None:
            return None
        x = np.zeros(self.N)
        for j in np.flatnonzero(status != BASIC):
            st = status[j]
            if st == AT_LB and not math.isfinite(lo[j]):
                return None
            if st == AT_UB and not math.isfinite(hi[j]):
                return None
            x[j] = self._nonbasic_value(j, st, lo, hi)
        x = self._compute_xb(x, basic, binv)
        state = {"x": x, "basic": basic, "status": status, "lo": lo, "hi": hi,
                 "binv": binv, "iters": 0}
        res = self._dual(state, max_iter)
        if res == "infeasible":
            return LPResult("infeasible", None, math.inf, None, state["iters"])
        if res != "optimal":
            return None
        res = self._primal(state, self.cost, max_iter)
        if res != "optimal":
            return None
        return self._finish(state, "optimal")

    # ----------------------------------------------------------- primal loop
    def _primal(self, state, cost, max_iter) -> str:
        A = self.A
        x, basic, status = state["x"], state["basic"], state["status"]
        lo, hi = state["lo"], state["hi"]
        binv = state["binv"]
        degenerate = 0
        bland = False
        since_refactor = 0
        while True:
            if state["iters"] >= max_iter:
                return "iteration_limit"
            if since_refactor >= REFACTOR_EVERY:
                fresh = self._refactor(basic)
                if fresh is None:
                    return "numerical"
                binv = state["binv"] = fresh
                x[:] = self._compute_xb(x, basic, binv)
                since_refactor = 0
            y = cost[basic] @ binv
            d = cost - y @ A
            movable = hi > lo
            cand = ((status == AT_LB) & (d < -OPT_TOL) & movable) | \
                   ((status == AT_UB) & (d > OPT_TOL) & movable) | \
                   ((status == FREE) & (np.abs(d) > OPT_TOL))
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "optimal"
            if bland:
                q = int(idx[0])
            else:
                q = int(idx[np.argmax(np.abs(d[idx]))])
            sigma = 1.0 if d[q] < 0 else -1.0
            w = binv @ A[:, q]
            rate = -sigma * w
            t_best = hi[q] - lo[q]
            r_best = -1
            xb = x[basic]
            lob, hib = lo[basic], hi[basic]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_dec = np.where((rate < -PIVOT_TOL) & np.isfinite(lob), (xb - lob) / -rate, math.inf)
                t_inc = np.where((rate > PIVOT_TOL) & np.isfinite(hib), (hib - xb) / rate, math.inf)
            t_all = np.maximum(np.minimum(t_dec, t_inc), 0.0)
            t_min = float(t_all.min()) if t_all.size else math.inf
            if t_min < t_best:
                ties = np.flatnonzero(t_all <= t_min + 1e-12)
                if bland:
                    r_best = int(ties[np.argmin(basic[ties])])
                else:
                    r_best = int(ties[np.argmax(np.abs(w[ties]))])
                t_best = float(t_all[r_best])
            if not math.isfinite(t_best):
                return "unbounded"
            state["iters"] += 1
            since_refactor += 1
            if t_best <= 1e-12:
                degenerate += 1
                if degenerate > DEGENERATE_SWITCH:
                    bland = True
            else:
                degenerate = 0
                bland = False
            x[q] += sigma * t_best
            x[basic] -= sigma * t_best * w
            if r_best < 0:
                # bound flip, basis unchanged
                if sigma > 0:
                    status[q], x[q] = AT_UB, hi[q]
                else:
                    status[q], x[q] = AT_LB, lo[q]
                continue
            leave = basic[r_best]
            if rate[r_best] < 0:
                status[leave], x[leave] = AT_LB, lo[leave]
            else:
                status[leave], x[leave] = AT_UB, hi[leave]
            basic[r_best] = q
            status[q] = BASIC
            binv = state["binv"] = self._pivot(binv, w, r_best)

    @staticmethod
    def _pivot(binv, w, r):
        piv = w[r]
        row = binv[r] / piv
        binv = binv - np.outer(w, row)
        binv[r] = row
        return binv

    # ------------------------------------------------------------- dual loop
    def _dual(self, state, max_iter) -> str:
        A = self.A
        x, basic, status = state["x"], state["basic"], state["status"]
        lo, hi = state["lo"], state["hi"]
        binv = state["binv"]
        cost = self.cost
        since_refactor = 0
        y = cost[basic] @ binv
        d = cost - y @ A
        movable = hi > lo
        bad = ((status == AT_LB) & (d < -1e-7) & movable) | \
              ((status == AT_UB) & (d > 1e-7) & movable) | \
              ((status == FREE) & (np.abs(d) > 1e-7))
        if bad.any():
            return "not_dual_feasible"
        while True:
            if state["iters"] >= max_iter:
                return "iteration_limit"
            if since_refactor >= REFACTOR_EVERY:
                fresh = self._refactor(basic)
                if fresh is None:
                    return "numerical"
                binv = state["binv"] = fresh
                x[:] = self._compute_xb(x, basic, binv)
                since_refactor = 0
            xb = x[basic]
            lob, hib = lo[basic], hi[basic]
            below = lob - xb
            above = xb - hib
            infeas = np.maximum(below, above)
            if infeas.size == 0:
                return "optimal"
            r = int(np.argmax(infeas))
            if infeas[r] <= PRIMAL_TOL * max(1.0, abs(xb[r])):
                return "optimal"
            to_lower = below[r] > above[r]
            rho = binv[r]
            alpha = rho @ A
            y = cost[basic] @ binv
            d = cost - y @ A
            nonbasic = (status != BASIC) & (hi > lo)
            if to_lower:
                cand = nonbasic & (((status == AT_LB) & (alpha < -PIVOT_TOL)) |
                                   ((status == AT_UB) & (alpha > PIVOT_TOL)) |
                                   ((status == FREE) & (np.abs(alpha) > PIVOT_TOL)))
            else:
                cand = nonbasic & (((status == AT_LB) & (alpha > PIVOT_TOL)) |
                                   ((status == AT_UB) & (alpha < -PIVOT_TOL)) |
                                   ((status == FREE) & (np.abs(alpha) > PIVOT_TOL)))
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "infeasible"
            ratios = np.abs(d[idx]) / np.abs(alpha[idx])
            best = ratios.min()
            ties = idx[ratios <= best + 1e-12]
            q = int(ties[np.argmax(np.abs(alpha[ties]))])
            w = binv @ A[:, q]
            leave = basic[r]
            target = lo[leave] if to_lower else hi[leave]
            delta = (x[leave] - target) / w[r]
            x[q] += delta
            x[basic] -= delta * w
            x[leave] = target
            status[leave] = AT_LB if to_lower else AT_UB
            basic[r] = q
            status[q] = BASIC
            binv = state["binv"] = self._pivot(binv, w, r)
            state["iters"] += 1
            since_refactor += 1
