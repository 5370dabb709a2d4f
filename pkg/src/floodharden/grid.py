"""Power network types, JSON ingestion and structural validation.

All power quantities are per-unit on ``Grid.base_mva``. Flood exposure is not
part of the grid; it lives in :mod:`floodharden.scenario`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cache
from importlib import resources
from typing import IO, Any, Union

import jsonschema

Source = Union[str, bytes, IO[str], IO[bytes]]


class GridError(ValueError):
    """Raised when a grid document cannot be turned into a valid Grid."""

    def __init__(self, message: str, record_id: str | None = None):
        super().__init__(message)
        self.record_id = record_id


@dataclass(frozen=True)
class Substation:
    id: str
    fixed_cost: float
    variable_cost: float
    max_harden: int
    bus_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class Bus:
    id: str
    substation_id: str
    load: float = 0.0
    gen_min: float = 0.0
    gen_max: float = 0.0
    is_reference: bool = False


@dataclass(frozen=True)
class Branch:
    id: str
    from_bus: str
    to_bus: str
    susceptance: float
    capacity: float


@dataclass(frozen=True)
class Violation:
    """One broken invariant, attached to the record that breaks it."""

    kind: str
    record_id: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind} [{self.record_id}]: {self.message}"


@dataclass(frozen=True)
class Grid:
    substations: tuple[Substation, ...]
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    base_mva: float = 100.0

    _substation_index: dict = field(init=False, repr=False, compare=False)
    _bus_index: dict = field(init=False, repr=False, compare=False)
    _branch_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "substations", tuple(self.substations))
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "_substation_index", {s.id: s for s in self.substations})
        object.__setattr__(self, "_bus_index", {b.id: b for b in self.buses})
        object.__setattr__(self, "_branch_index", {r.id: r for r in self.branches})

    def substation(self, sid: str) -> Substation:
        return self._substation_index[sid]

    def bus(self, bid: str) -> Bus:
        return self._bus_index[bid]

    def branch(self, rid: str) -> Branch:
        return self._branch_index[rid]

    def has_bus(self, bid: str) -> bool:
        return bid in self._bus_index

    def has_substation(self, sid: str) -> bool:
        return sid in self._substation_index

    def buses_of(self, sid: str) -> list[Bus]:
        """Buses located at substation ``sid`` (the set B_i), in file order."""
        return [b for b in self.buses if b.substation_id == sid]

    @property
    def reference_bus(self) -> Bus:
        refs = [b for b in self.buses if b.is_reference]
        if len(refs) != 1:
            raise GridError(f"expected exactly one reference bus, found {len(refs)}")
        return refs[0]

    @property
    def total_load(self) -> float:
        return sum(b.load for b in self.buses)


def incidence(grid: Grid, bus: str) -> tuple[frozenset[str], frozenset[str]]:
    """Return ``(in_branches, out_branches)`` for ``bus``.

    A branch flows out of its ``from_bus`` and into its ``to_bus``.
    """
    if not grid.has_bus(bus):
        raise KeyError(f"unknown bus {bus!r}")
    in_branches = frozenset(r.id for r in grid.branches if r.to_bus == bus)
    out_branches = frozenset(r.id for r in grid.branches if r.from_bus == bus)
    return in_branches, out_branches


def validate_grid(grid: Grid) -> list[Violation]:
    out: list[Violation] = []

    def dupes(kind, records):
        seen = set()
        for rec in records:
            if rec.id in seen:
                out.append(Violation("duplicate-id", rec.id, f"duplicate {kind} identifier"))
            seen.add(rec.id)

    dupes("substation", grid.substations)
    dupes("bus", grid.buses)
    dupes("branch", grid.branches)

    if not (math.isfinite(grid.base_mva) and grid.base_mva > 0):
        out.append(Violation("value", "base_mva", f"base_mva must be positive, got {grid.base_mva}"))

    for s in grid.substations:
        if not s.fixed_cost >= 0:
            out.append(Violation("value", s.id, f"fixed_cost must be >= 0, got {s.fixed_cost}"))
        if not s.variable_cost >= 0:
            out.append(Violation("value", s.id, f"variable_cost must be >= 0, got {s.variable_cost}"))
        if int(s.max_harden) != s.max_harden or s.max_harden < 0:
            out.append(Violation("value", s.id, f"max_harden must be a non-negative integer, got {s.max_harden}"))
        actual = [b.id for b in grid.buses if b.substation_id == s.id]
        if not actual:
            out.append(Violation("empty-substation", s.id, "substation has no buses"))
        if s.bus_ids and sorted(s.bus_ids) != sorted(actual):
            out.append(Violation("reference", s.id,
                                 f"bus_ids {list(s.bus_ids)} disagree with buses pointing here {actual}"))

    refs = 0
    for b in grid.buses:
        if not grid.has_substation(b.substation_id):
            out.append(Violation("dangling-reference", b.id, f"unknown substation {b.substation_id!r}"))
        if not b.load >= 0:
            out.append(Violation("value", b.id, f"load must be >= 0, got {b.load}"))
        if not (0 <= b.gen_min <= b.gen_max):
            out.append(Violation("value", b.id,
                                 f"need 0 <= gen_min <= gen_max, got {b.gen_min}, {b.gen_max}"))
        refs += bool(b.is_reference)
    if refs == 0:
        out.append(Violation("reference-bus", "buses", "no reference bus declared"))
    elif refs > 1:
        ids = [b.id for b in grid.buses if b.is_reference]
        out.append(Violation("reference-bus", ",".join(ids), f"{refs} reference buses declared"))

    for r in grid.branches:
        for end in (r.from_bus, r.to_bus):
            if not grid.has_bus(end):
                out.append(Violation("dangling-reference", r.id, f"unknown bus {end!r}"))
        if r.from_bus == r.to_bus:
            out.append(Violation("value", r.id, "branch is a self-loop"))
        if not r.capacity > 0:
            out.append(Violation("value", r.id, f"capacity must be > 0, got {r.capacity}"))
        if not r.susceptance > 0:
            out.append(Violation("value", r.id, f"susceptance must be > 0, got {r.susceptance}"))
    return out


@cache
def load_schema(name: str) -> dict:
    return json.loads(resources.files("floodharden").joinpath("data").joinpath(name).read_text())


def read_document(source: Source) -> Any:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    return json.loads(source)


def schema_error(err: jsonschema.ValidationError, doc: Any, cls=GridError):
    """Translate a jsonschema error into ``cls`` naming the offending record."""
    path = list(err.absolute_path)
    record_id = None
    if len(path) >= 2 and isinstance(path[1], int):
        try:
            record_id = doc[path[0]][path[1]].get("id")
        except (AttributeError, KeyError, IndexError, TypeError):
            pass
    where = "/".join(str(p) for p in path) or "<root>"
    label = f" (record {record_id!r})" if record_id else ""
    return cls(f"schema violation at {where}{label}: {err.message}", record_id)


def _bus_from_record(rec: dict) -> Bus:
    gen_min = float(rec.get("gen_min", 0.0))
    gen_max = float(rec.get("gen_max", 0.0))
    for unit in rec.get("generators", ()):
        gen_min += float(unit.get("gen_min", 0.0))
        gen_max += float(unit["gen_max"])
    return Bus(
        id=rec["id"],
        substation_id=rec["substation_id"],
        load=float(rec.get("load", 0.0)),
        gen_min=gen_min,
        gen_max=gen_max,
        is_reference=bool(rec.get("is_reference", False)),
    )


def grid_from_dict(doc: dict) -> Grid:
    try:
        jsonschema.validate(doc, load_schema("grid.schema.json"))
    except jsonschema.ValidationError as err:
        raise schema_error(err, doc) from None

    buses = [_bus_from_record(rec) for rec in doc["buses"]]
    substations = []
    for rec in doc["substations"]:
        declared = rec.get("bus_ids")
        derived = tuple(b.id for b in buses if b.substation_id == rec["id"])
        substations.append(Substation(
            id=rec["id"],
            fixed_cost=float(rec["fixed_cost"]),
            variable_cost=float(rec["variable_cost"]),
            max_harden=int(rec["max_harden"]),
            bus_ids=tuple(declared) if declared is not None else derived,
        ))
    branches = [
        Branch(id=rec["id"], from_bus=rec["from_bus"], to_bus=rec["to_bus"],
               susceptance=float(rec["susceptance"]), capacity=float(rec["capacity"]))
        for rec in doc["branches"]
    ]
    grid = Grid(tuple(substations), tuple(buses), tuple(branches), float(doc["base_mva"]))
    problems = validate_grid(grid)
    if problems:
        first = problems[0]
        detail = "; ".join(str(p) for p in problems)
        raise GridError(f"invalid grid: {detail}", first.record_id)
    return grid


def parse_grid(source: Source) -> Grid:
    """Parse and validate a grid JSON document (text, bytes or file object)."""
    try:
        doc = read_document(source)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise GridError(f"grid document is not valid JSON: {exc}") from None
    return grid_from_dict(doc)


def load_grid(path) -> Grid:
    with open(path, "rb") as fh:
        return parse_grid(fh)


def grid_to_dict(grid: Grid) -> dict:
    return {
        "base_mva": grid.base_mva,
        "substations": [
            {"id": s.id, "fixed_cost": s.fixed_cost, "variable_cost": s.variable_cost,
             "max_harden": s.max_harden, "bus_ids": list(s.bus_ids)}
            for s in grid.substations
        ],
        "buses": [
            {"id": b.id, "substation_id": b.substation_id, "load": b.load,
             "gen_min": b.gen_min, "gen_max": b.gen_max, "is_reference": b.is_reference}
            for b in grid.buses
        ],
        "branches": [
            {"id": r.id, "from_bus": r.from_bus, "to_bus": r.to_bus,
             "susceptance": r.susceptance, "capacity": r.capacity}
            for r in grid.branches
        ],
    }


def dump_grid(grid: Grid) -> str:
    return json.dumps(grid_to_dict(grid), indent=2)


def desk_grid() -> Grid:
    """The bundled 3-substation, 4-bus example network."""
    return parse_grid(resources.files("floodharden").joinpath("data").joinpath("desk_grid.json").read_bytes())
