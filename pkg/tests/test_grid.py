import json

import pytest
from hypothesis import given, strategies as st

from floodharden.grid import (Branch, Bus, Grid, GridError, Substation, dump_grid, grid_to_dict, incidence,
                              parse_grid, validate_grid)


def doc(**changes):
    base = {
        "base_mva": 100,
        "substations": [
            {"id": "a", "fixed_cost": 1, "variable_cost": 2, "max_harden": 3},
            {"id": "b", "fixed_cost": 1, "variable_cost": 2, "max_harden": 3},
        ],
        "buses": [
            {"id": "b1", "substation_id": "a", "load": 0.1, "gen_max": 1.0, "is_reference": True},
            {"id": "b2", "substation_id": "b", "load": 0.2},
        ],
        "branches": [{"id": "r1", "from_bus": "b1", "to_bus": "b2", "susceptance": 5, "capacity": 1}],
    }
    base.update(changes)
    return json.dumps(base)


def test_desk_grid_parses_with_expected_sizes(desk_grid):
    assert (len(desk_grid.substations), len(desk_grid.buses), len(desk_grid.branches)) == (3, 4, 3)
    assert validate_grid(desk_grid) == []
    assert desk_grid.reference_bus.id == "b1"


def test_desk_incidence_example(desk_grid):
    assert incidence(desk_grid, "b2") == ({"r2"}, {"r1"})


def test_isolated_bus_has_no_incidence():
    g = parse_grid(doc(buses=[
        {"id": "b1", "substation_id": "a", "is_reference": True},
        {"id": "b2", "substation_id": "b"},
        {"id": "b3", "substation_id": "b"},
    ]))
    assert incidence(g, "b3") == (frozenset(), frozenset())


def test_bus_heading_every_branch():
    g = parse_grid(doc(
        buses=[{"id": "h", "substation_id": "a", "is_reference": True}, {"id": "t1", "substation_id": "b"},
               {"id": "t2", "substation_id": "b"}],
        branches=[{"id": "r1", "from_bus": "h", "to_bus": "t1", "susceptance": 1, "capacity": 1},
                  {"id": "r2", "from_bus": "h", "to_bus": "t2", "susceptance": 1, "capacity": 1}]))
    assert incidence(g, "h") == (frozenset(), {"r1", "r2"})


def test_incidence_unknown_bus(desk_grid):
    with pytest.raises(KeyError):
        incidence(desk_grid, "nope")


def test_dangling_branch_endpoint_names_the_branch():
    bad = doc(branches=[{"id": "rz", "from_bus": "b1", "to_bus": "ghost", "susceptance": 1, "capacity": 1}])
    with pytest.raises(GridError) as err:
        parse_grid(bad)
    assert err.value.record_id == "rz" and "dangling" in str(err.value)


def test_two_reference_buses_rejected():
    bad = doc(buses=[{"id": "b1", "substation_id": "a", "is_reference": True},
                     {"id": "b2", "substation_id": "b", "is_reference": True}])
    with pytest.raises(GridError, match="reference"):
        parse_grid(bad)


def test_missing_reference_bus_rejected():
    bad = doc(buses=[{"id": "b1", "substation_id": "a"}, {"id": "b2", "substation_id": "b"}])
    with pytest.raises(GridError, match="reference"):
        parse_grid(bad)


def test_duplicate_identifier_named():
    bad = doc(buses=[{"id": "b1", "substation_id": "a", "is_reference": True},
                     {"id": "b1", "substation_id": "b"}])
    with pytest.raises(GridError) as err:
        parse_grid(bad)
    assert err.value.record_id == "b1"


def test_schema_violation_names_record():
    bad = doc(branches=[{"id": "r9", "from_bus": "b1", "to_bus": "b2", "susceptance": "x", "capacity": 1}])
    with pytest.raises(GridError) as err:
        parse_grid(bad)
    assert err.value.record_id == "r9"


def test_not_json():
    with pytest.raises(GridError, match="JSON"):
        parse_grid(b"{not json")


def test_generators_are_aggregated_per_bus():
    g = parse_grid(doc(buses=[
        {"id": "b1", "substation_id": "a", "is_reference": True,
         "generators": [{"gen_min": 0.1, "gen_max": 0.5}, {"gen_max": 0.7}]},
        {"id": "b2", "substation_id": "b"}]))
    assert g.bus("b1").gen_min == pytest.approx(0.1)
    assert g.bus("b1").gen_max == pytest.approx(1.2)


def test_validate_reports_gen_bounds_and_capacity(desk_grid):
    buses = list(desk_grid.buses)
    buses[1] = Bus("b2", "s2", 0.5, 0.9, 0.3)
    g = Grid(desk_grid.substations, tuple(buses), desk_grid.branches)
    problems = validate_grid(g)
    assert [p.record_id for p in problems] == ["b2"]

    branches = list(desk_grid.branches)
    branches[0] = Branch("r1", "b2", "b4", 8, 0.0)
    g = Grid(desk_grid.substations, desk_grid.buses, tuple(branches))
    assert [p.record_id for p in validate_grid(g)] == ["r1"]


def test_validate_empty_substation_and_self_loop():
    g = Grid((Substation("a", 0, 0, 1), Substation("e", 0, 0, 1)),
             (Bus("b", "a", is_reference=True),), (Branch("r", "b", "b", 1, 1),))
    kinds = {(p.kind, p.record_id) for p in validate_grid(g)}
    assert ("empty-substation", "e") in kinds
    assert ("value", "r") in kinds


@st.composite
def grids(draw):
    n_sub = draw(st.integers(1, 4))
    subs = [Substation(f"s{i}", draw(st.integers(0, 100)), draw(st.integers(0, 100)), draw(st.integers(0, 9)))
            for i in range(n_sub)]
    buses = []
    for i in range(n_sub):
        for q in range(draw(st.integers(1, 3))):
            gmax = draw(st.floats(0, 5, allow_nan=False))
            gmin = draw(st.floats(0, 1, allow_nan=False)) * gmax
            buses.append(Bus(f"b{i}_{q}", f"s{i}", draw(st.floats(0, 3, allow_nan=False)), gmin, gmax))
    ref = draw(st.integers(0, len(buses) - 1))
    b = buses[ref]
    buses[ref] = Bus(b.id, b.substation_id, b.load, b.gen_min, b.gen_max, True)
    ids = [b.id for b in buses]
    branches = []
    if len(ids) > 1:
        for r in range(draw(st.integers(0, 6))):
            a, c = draw(st.lists(st.sampled_from(ids), min_size=2, max_size=2, unique=True))
            branches.append(Branch(f"r{r}", a, c, draw(st.floats(0.1, 50)), draw(st.floats(0.1, 5))))
    subs = [Substation(s.id, s.fixed_cost, s.variable_cost, s.max_harden,
                       tuple(b.id for b in buses if b.substation_id == s.id)) for s in subs]
    return Grid(tuple(subs), tuple(buses), tuple(branches), draw(st.sampled_from([1.0, 100.0, 250.0])))


@given(grids())
def test_incidence_counts_each_branch_once_per_side(g):
    ins = sum(len(incidence(g, b.id)[0]) for b in g.buses)
    outs = sum(len(incidence(g, b.id)[1]) for b in g.buses)
    assert ins == outs == len(g.branches)
    for b in g.buses:
        i, o = incidence(g, b.id)
        assert not (i & o)


@given(grids())
def test_round_trip_and_accepted_documents_validate(g):
    assert validate_grid(g) == []
    again = parse_grid(dump_grid(g))
    assert again == g
    assert validate_grid(again) == []
    assert grid_to_dict(again) == grid_to_dict(g)
