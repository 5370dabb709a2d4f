"""Mixed-integer linear programming: model container, simplex, branch-and-bound, MPS."""

from .branch_and_bound import (
    GAP_REACHED,
    INFEASIBLE,
    OPTIMAL,
    TIME_LIMIT,
    UNBOUNDED,
    SolveParams,
    SolveReport,
    relative_gap,
    solve,
    warm_start_from,
)
from .model import (
    BINARY,
    CONTINUOUS,
    EQ,
    GE,
    INTEGER,
    LE,
    Constraint,
    LinExpr,
    MilpModel,
    ModelError,
    Variable,
    check_feasible,
    quicksum,
)
from .mps import export_mps, read_mps, short_names

__all__ = [
    "BINARY", "CONTINUOUS", "INTEGER", "LE", "EQ", "GE",
    "OPTIMAL", "GAP_REACHED", "TIME_LIMIT", "INFEASIBLE", "UNBOUNDED",
    "Constraint", "LinExpr", "MilpModel", "ModelError", "Variable",
    "SolveParams", "SolveReport",
    "check_feasible", "export_mps", "quicksum", "read_mps", "relative_gap",
    "short_names", "solve", "warm_start_from",
]
