"""Sparse MILP container and a small linear-expression helper for building it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Real
from typing import Iterable, Mapping

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"
INTEGER = "integer"
KINDS = (CONTINUOUS, BINARY, INTEGER)

LE, EQ, GE = "<=", "==", ">="
RELATIONS = (LE, EQ, GE)

FEAS_TOL = 1e-6
INT_TOL = 1e-6


class ModelError(ValueError):
    pass


class LinExpr:
    """Affine expression ``sum(coef * var) + constant`` over variable names."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms: Mapping[str, float] | None = None, constant: float = 0.0):
        self.terms: dict[str, float] = dict(terms or {})
        self.constant = float(constant)

    @classmethod
    def lift(cls, value) -> "LinExpr":
        if isinstance(value, LinExpr):
            return value
        if isinstance(value, Real):
            return cls(constant=float(value))
        raise TypeError(f"cannot use {type(value).__name__} in a linear expression")

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.constant)

    @property
    def is_constant(self) -> bool:
        return not any(self.terms.values())

    def __add__(self, other):
        other = LinExpr.lift(other)
        out = self.copy()
        for name, coef in other.terms.items():
            out.terms[name] = out.terms.get(name, 0.0) + coef
        out.constant += other.constant
        return out

    __radd__ = __add__

    def __neg__(self):
        return LinExpr({k: -v for k, v in self.terms.items()}, -self.constant)

    def __sub__(self, other):
        return self + (-LinExpr.lift(other))

    def __rsub__(self, other):
        return LinExpr.lift(other) - self

    def __mul__(self, scalar):
        if not isinstance(scalar, Real):
            raise TypeError("expressions may only be scaled by numbers")
        return LinExpr({k: v * scalar for k, v in self.terms.items()}, self.constant * scalar)

    __rmul__ = __mul__

    def value(self, assignment: Mapping[str, float]) -> float:
        return self.constant + math.fsum(c * assignment[n] for n, c in self.terms.items())

    def __repr__(self):
        parts = [f"{c:+g}*{n}" for n, c in self.terms.items()]
        if self.constant or not parts:
            parts.append(f"{self.constant:+g}")
        return " ".join(parts)


def quicksum(items: Iterable) -> LinExpr:
    out = LinExpr()
    for item in items:
        item = LinExpr.lift(item)
        for name, coef in item.terms.items():
            out.terms[name] = out.terms.get(name, 0.0) + coef
        out.constant += item.constant
    return out


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    kind: str = CONTINUOUS

    @property
    def is_integer(self) -> bool:
        return self.kind != CONTINUOUS


@dataclass(frozen=True)
class Constraint:
    name: str
    coefs: Mapping[str, float]
    relation: str
    rhs: float

    def activity(self, assignment: Mapping[str, float]) -> float:
        return math.fsum(c * assignment[n] for n, c in self.coefs.items())

    def violation(self, assignment: Mapping[str, float]) -> float:
        lhs = self.activity(assignment)
        if self.relation == LE:
            return max(0.0, lhs - self.rhs)
        if self.relation == GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)

    def scale(self) -> float:
        """Magnitude used to make the feasibility tolerance relative."""
        biggest = max((abs(c) for c in self.coefs.values()), default=0.0)
        return max(1.0, biggest, abs(self.rhs))


@dataclass(frozen=True)
class StandardArrays:
    """Dense array view of a model: ``A x (rel) b``, ``lb <= x <= ub``, min ``c x + c0``."""

    names: list[str]
    A: np.ndarray
    relations: list[str]
    b: np.ndarray
    c: np.ndarray
    c0: float
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray


@dataclass
class MilpModel:
    """A minimisation MILP.

    Built incrementally through :meth:`add_var`, :meth:`add_constraint` and
    :meth:`set_objective`; treated as read-only by everything that consumes it.
    """

    name: str = "model"
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf,
                kind: str = CONTINUOUS) -> LinExpr:
        if name in self._index:
            raise ModelError(f"duplicate variable {name!r}")
        if kind not in KINDS:
            raise ModelError(f"unknown variable kind {kind!r}")
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        self._index[name] = len(self.variables)
        self.variables.append(Variable(name, float(lb), float(ub), kind))
        return LinExpr({name: 1.0})

    def add_constraint(self, name: str, lhs, relation: str, rhs=0.0) -> Constraint:
        if relation not in RELATIONS:
            raise ModelError(f"unknown relation {relation!r}")
        expr = LinExpr.lift(lhs) - LinExpr.lift(rhs)
        coefs = {n: c for n, c in expr.terms.items() if c != 0.0}
        con = Constraint(name, coefs, relation, -expr.constant)
        self.constraints.append(con)
        return con

    def set_objective(self, expr) -> None:
        expr = LinExpr.lift(expr)
        self.objective = {n: c for n, c in expr.terms.items() if c != 0.0}
        self.objective_constant = expr.constant

    def has_var(self, name: str) -> bool:
        return name in self._index

    def var(self, name: str) -> Variable:
        return self.variables[self._index[name]]

    def index(self, name: str) -> int:
        return self._index[name]

    @property
    def var_names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def integer_count(self) -> int:
        return sum(v.is_integer for v in self.variables)

    def objective_value(self, assignment: Mapping[str, float]) -> float:
        return self.objective_constant + math.fsum(
            c * assignment[n] for n, c in self.objective.items())

    def validate(self) -> list[str]:
        problems = []
        seen = set()
        for v in self.variables:
            if v.name in seen:
                problems.append(f"duplicate variable {v.name!r}")
            seen.add(v.name)
            if math.isnan(v.lb) or math.isnan(v.ub):
                problems.append(f"variable {v.name!r} has NaN bound")
            if v.lb == math.inf or v.ub == -math.inf:
                problems.append(f"variable {v.name!r} has an unusable infinite bound")
            if v.kind == BINARY and not (0.0 <= v.lb and v.ub <= 1.0):
                problems.append(f"binary variable {v.name!r} has bounds outside [0, 1]")
        for con in self.constraints:
            if not math.isfinite(con.rhs):
                problems.append(f"constraint {con.name!r} has non-finite right-hand side")
            for n, c in con.coefs.items():
                if n not in self._index:
                    problems.append(f"constraint {con.name!r} references unknown variable {n!r}")
                if not math.isfinite(c):
                    problems.append(f"constraint {con.name!r} has non-finite coefficient on {n!r}")
        for n, c in self.objective.items():
            if n not in self._index:
                problems.append(f"objective references unknown variable {n!r}")
            if not math.isfinite(c):
                problems.append(f"objective has non-finite coefficient on {n!r}")
        if not math.isfinite(self.objective_constant):
            problems.append("objective constant is not finite")
        return problems

    def to_arrays(self) -> StandardArrays:
        n, m = len(self.variables), len(self.constraints)
        A = np.zeros((m, n))
        b = np.zeros(m)
        for i, con in enumerate(self.constraints):
            for name, coef in con.coefs.items():
                A[i, self._index[name]] += coef
            b[i] = con.rhs
        c = np.zeros(n)
        for name, coef in self.objective.items():
            c[self._index[name]] += coef
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        integer = np.array([v.is_integer for v in self.variables], dtype=bool)
        return StandardArrays(self.var_names, A, [con.relation for con in self.constraints],
                              b, c, self.objective_constant, lb, ub, integer)


def check_feasible(model: MilpModel, assignment: Mapping[str, float],
                   tol: float = FEAS_TOL, int_tol: float = INT_TOL) -> list[str]:
    """Describe every bound, row or integrality requirement ``assignment`` breaks.

    Row tolerances are relative to the row's largest coefficient or right-hand
    side (never smaller than ``tol`` absolute).
    """
    missing = [v.name for v in model.variables if v.name not in assignment]
    if missing:
        raise KeyError(f"assignment is missing {len(missing)} variable(s), e.g. {missing[0]!r}")
    out = []
    for v in model.variables:
        val = assignment[v.name]
        if not math.isfinite(val):
            out.append(f"variable {v.name}: non-finite value {val}")
            continue
        if val < v.lb - tol * max(1.0, abs(v.lb)) or val > v.ub + tol * max(1.0, abs(v.ub)):
            out.append(f"variable {v.name}: value {val:g} outside [{v.lb:g}, {v.ub:g}]")
        if v.is_integer and abs(val - round(val)) > int_tol:
            out.append(f"variable {v.name}: value {val:g} is not integral")
    for con in model.constraints:
        viol = con.violation(assignment)
        if viol > tol * con.scale():
            out.append(f"constraint {con.name}: violated by {viol:.3g} "
                       f"({con.activity(assignment):.9g} {con.relation} {con.rhs:.9g})")
    return out
