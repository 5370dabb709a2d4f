"""Scenario-based substation hardening against flooding.

Stochastic (expected shed) and robust (worst-case shed) two-stage models with
a DC power flow recourse, an in-repo branch-and-bound MILP solver, and the
budget/value-of-information analyses built on top of them.
"""

from .grid import Branch, Bus, Grid, GridError, Substation, incidence, parse_grid, validate_grid
from .scenario import FloodScenario, ScenarioError, ScenarioSet, mean_scenario, parse_scenarios

__version__ = "0.1.0"

__all__ = [
    "Branch", "Bus", "FloodScenario", "Grid", "GridError", "ScenarioError", "ScenarioSet",
    "Substation", "incidence", "mean_scenario", "parse_grid", "parse_scenarios", "validate_grid",
]
