"""Flood scenarios: per-substation integer water depths with probabilities."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from types import MappingProxyType
from typing import Mapping

import jsonschema

from .grid import Grid, Source, load_schema, read_document, schema_error

PROBABILITY_TOL = 1e-9


class ScenarioError(ValueError):
    def __init__(self, message: str, record_id: str | None = None):
        super().__init__(message)
        self.record_id = record_id


@dataclass(frozen=True)
class FloodScenario:
    id: str
    probability: float
    depths: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {sid: int(d) for sid, d in self.depths.items() if d != 0}
        object.__setattr__(self, "depths", MappingProxyType(clean))

    def depth(self, substation: str) -> int:
        return self.depths.get(substation, 0)


@dataclass(frozen=True)
class ScenarioSet:
    """Scenario list plus the derived flooded set and per-substation maximum depth."""

    scenarios: tuple[FloodScenario, ...]
    flooded_substations: frozenset[str] = field(init=False)
    max_depths: Mapping[str, int] = field(init=False)

    def __post_init__(self):
        scenarios = tuple(self.scenarios)
        if not scenarios:
            raise ScenarioError("scenario set is empty")
        object.__setattr__(self, "scenarios", scenarios)
        max_depths: dict[str, int] = {}
        for sc in scenarios:
            for sid, d in sc.depths.items():
                if d > 0:
                    max_depths[sid] = max(max_depths.get(sid, 0), d)
        object.__setattr__(self, "flooded_substations", frozenset(max_depths))
        object.__setattr__(self, "max_depths", MappingProxyType(max_depths))

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    @property
    def ids(self) -> list[str]:
        return [sc.id for sc in self.scenarios]

    def get(self, scenario_id: str) -> FloodScenario:
        for sc in self.scenarios:
            if sc.id == scenario_id:
                return sc
        raise KeyError(scenario_id)

    def max_depth(self, substation: str) -> int:
        return self.max_depths.get(substation, 0)


def _depth_value(raw, scenario_id: str, sid: str, ceil_fractional: bool) -> int:
    if not math.isfinite(raw) or raw < 0:
        raise ScenarioError(f"scenario {scenario_id!r}: depth at {sid!r} must be >= 0, got {raw}", scenario_id)
    if raw != int(raw):
        if not ceil_fractional:
            raise ScenarioError(
                f"scenario {scenario_id!r}: depth at {sid!r} must be a whole number of feet, got {raw}",
                scenario_id)
        return math.ceil(raw)
    return int(raw)


def scenarios_from_dict(doc: dict, grid: Grid, *, ceil_fractional: bool = False) -> ScenarioSet:
    try:
        jsonschema.validate(doc, load_schema("scenarios.schema.json"))
    except jsonschema.ValidationError as err:
        raise schema_error(err, doc, ScenarioError) from None

    records = doc["scenarios"]
    seen = set()
    for rec in records:
        if rec["id"] in seen:
            raise ScenarioError(f"duplicate scenario identifier {rec['id']!r}", rec["id"])
        seen.add(rec["id"])

    has_prob = ["probability" in rec for rec in records]
    if any(has_prob) and not all(has_prob):
        missing = next(rec["id"] for rec in records if "probability" not in rec)
        raise ScenarioError("probabilities must be given for every scenario or for none", missing)
    if all(has_prob):
        probs = [float(rec["probability"]) for rec in records]
        for rec, p in zip(records, probs):
            if not 0 <= p <= 1:
                raise ScenarioError(f"scenario {rec['id']!r}: probability {p} outside [0, 1]", rec["id"])
        if abs(math.fsum(probs) - 1.0) > PROBABILITY_TOL:
            raise ScenarioError(f"probabilities sum to {math.fsum(probs)!r}, not 1")
    else:
        probs = [1.0 / len(records)] * len(records)

    scenarios = []
    for rec, p in zip(records, probs):
        depths = {}
        for sid, raw in rec["depths"].items():
            if not grid.has_substation(sid):
                raise ScenarioError(f"scenario {rec['id']!r}: unknown substation {sid!r}", rec["id"])
            depths[sid] = _depth_value(raw, rec["id"], sid, ceil_fractional)
        scenarios.append(FloodScenario(rec["id"], p, depths))
    return ScenarioSet(tuple(scenarios))


def parse_scenarios(source: Source, grid: Grid, *, ceil_fractional: bool = False) -> ScenarioSet:
    """Parse a scenario JSON document against ``grid``.

    Missing probabilities default to a uniform distribution. Fractional depths are
    rejected unless ``ceil_fractional`` is set, in which case they round up.
    """
    try:
        doc = read_document(source)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ScenarioError(f"scenario document is not valid JSON: {exc}") from None
    return scenarios_from_dict(doc, grid, ceil_fractional=ceil_fractional)


def load_scenarios(path, grid: Grid, **kwargs) -> ScenarioSet:
    with open(path, "rb") as fh:
        return parse_scenarios(fh, grid, **kwargs)


def scenarios_to_dict(scenarios: ScenarioSet) -> dict:
    return {
        "scenarios": [
            {"id": sc.id, "probability": sc.probability, "depths": dict(sorted(sc.depths.items()))}
            for sc in scenarios
        ]
    }


def dump_scenarios(scenarios: ScenarioSet) -> str:
    return json.dumps(scenarios_to_dict(scenarios), indent=2)


def mean_scenario(scenarios: ScenarioSet) -> FloodScenario:
    """Probability-weighted mean depth per substation, rounded half up."""
    depths = {}
    for sid in sorted(scenarios.flooded_substations):
        mean = math.fsum(sc.probability * sc.depth(sid) for sc in scenarios)
        # tolerance absorbs float noise from probabilities such as 1/3
        depths[sid] = math.floor(mean + 0.5 + 1e-9)
    return FloodScenario("mean", 1.0, depths)


def scenario_support(scenarios: ScenarioSet, substation: str) -> list[tuple[str, int]]:
    if substation not in scenarios.flooded_substations:
        raise ScenarioError(f"substation {substation!r} is not flooded in any scenario", substation)
    hits = [(sc.id, sc.depth(substation)) for sc in scenarios if sc.depth(substation) > 0]
    return sorted(hits, key=lambda item: -item[1])


def single(scenario: FloodScenario) -> ScenarioSet:
    """Wrap one scenario as a set with probability 1."""
    return ScenarioSet((FloodScenario(scenario.id, 1.0, scenario.depths),))


def desk_scenarios(grid: Grid) -> ScenarioSet:
    data = resources.files("floodharden").joinpath("data").joinpath("desk_scenarios.json").read_bytes()
    return parse_scenarios(data, grid)
