import io

import pytest
from hypothesis import given, settings, strategies as st

from edgeav.config import data_path
from edgeav.routing import (
    MissingSpeedError,
    Route,
    Scenario,
    compare_routes,
    load_scenario,
    travel_time,
    write_report,
)


def test_single_segment():
    assert travel_time(Route("r", (("A1", 1000.0),)), 0, {("A1", 0): 10.0}) == 100.0


def test_two_segments():
    r = Route("r", (("A1", 1000.0), ("A2", 2000.0)))
    assert travel_time(r, 3, {("A1", 3): 10.0, ("A2", 3): 20.0}) == 200.0


def test_missing_speed_names_the_gap():
    r = Route("r", (("A1", 1000.0), ("A9", 5.0)))
    with pytest.raises(MissingSpeedError, match="A9, hour 4"):
        travel_time(r, 4, {("A1", 4): 10.0})
    with pytest.raises(MissingSpeedError):
        travel_time(r, 4, {("A1", 4): 10.0, ("A9", 4): 0.0})


def test_route_validation():
    with pytest.raises(ValueError):
        Route("r", ())
    with pytest.raises(ValueError):
        Route("r", (("A1", 0.0),))
    with pytest.raises(ValueError):
        Scenario("s", 0, (Route("r", (("A1", 1.0),)),))


def test_identical_routes_no_inversion():
    r = Route("one", (("A1", 1000.0),))
    sc = Scenario("same", 8, (r, Route("two", r.segments)))
    rep = compare_routes(sc, {("A1", 8): 10.0}, {("A1", 8, 8.0): 6.0}, [8.0])
    assert rep.regular_time["one"] == rep.regular_time["two"]
    assert rep.av_time[8.0]["one"] == rep.av_time[8.0]["two"]
    assert not rep.inversion


def inversion_scenario():
    # A: 5000 m through a congested area, B: 6000 m through a light one
    sc = Scenario("constructed", 16, (
        Route("A", (("busy", 5000.0),)),
        Route("B", (("light", 6000.0),)),
    ))
    regular = {("busy", 16): 10.0, ("light", 16): 10.0}
    safe = {("busy", 16, 8.0): 5.0, ("light", 16, 8.0): 10.0}
    return sc, regular, safe


def test_constructed_inversion():
    sc, regular, safe = inversion_scenario()
    rep = compare_routes(sc, regular, safe, [8.0])
    assert rep.regular_time == {"A": 500.0, "B": 600.0}
    assert rep.av_time[8.0] == {"A": 1000.0, "B": 600.0}
    assert rep.fastest_regular == "A" and rep.fastest_av[8.0] == "B"
    assert rep.inversion and rep.summary()["inversion_by_blind"] == {"8": True}


def test_missing_safe_speed_names_blind():
    sc, regular, safe = inversion_scenario()
    del safe[("light", 16, 8.0)]
    with pytest.raises(MissingSpeedError, match="L=8 m"):
        compare_routes(sc, regular, safe, [8.0])


def test_ties_go_to_first_declared_route():
    sc = Scenario("tie", 0, (Route("x", (("A", 100.0),)), Route("y", (("A", 100.0),))))
    rep = compare_routes(sc, {("A", 0): 5.0}, {("A", 0, 2.0): 5.0}, [2.0])
    assert rep.fastest_regular == "x" and rep.fastest_av[2.0] == "x"


segments = st.lists(
    st.tuples(st.sampled_from(["A1", "A2", "A3"]), st.floats(1.0, 5000.0)), min_size=1, max_size=6
)
speeds = st.fixed_dictionaries({a: st.floats(0.5, 40.0) for a in ("A1", "A2", "A3")})


@settings(max_examples=200, deadline=None)
@given(segments, segments, speeds)
def test_additive_over_concatenation(s1, s2, sp):
    lookup = {(a, 0): v for a, v in sp.items()}
    r1, r2 = Route("a", tuple(s1)), Route("b", tuple(s2))
    whole = travel_time(r1 + r2, 0, lookup)
    assert whole == pytest.approx(travel_time(r1, 0, lookup) + travel_time(r2, 0, lookup), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(segments, speeds)
def test_doubling_distance_doubles_time(s, sp):
    lookup = {(a, 0): v for a, v in sp.items()}
    r = Route("a", tuple(s))
    doubled = Route("a2", tuple((a, 2 * d) for a, d in s))
    assert travel_time(doubled, 0, lookup) == 2 * travel_time(r, 0, lookup)


@settings(max_examples=200, deadline=None)
@given(segments, speeds, st.fixed_dictionaries({a: st.floats(0.05, 1.0) for a in ("A1", "A2", "A3")}))
def test_av_never_faster_than_regular(s, sp, frac):
    regular = {(a, 0): v for a, v in sp.items()}
    safe = {(a, 0, 4.0): min(v, v * frac[a]) for a, v in sp.items()}
    sc = Scenario("p", 0, (Route("a", tuple(s)), Route("b", tuple(reversed(s)))))
    rep = compare_routes(sc, regular, safe, [4.0])
    for name, t in rep.regular_time.items():
        assert rep.av_time[4.0][name] >= t * (1 - 1e-12)


def test_packaged_scenarios_load():
    paths = sorted(p for p in data_path("scenarios").iterdir() if p.name.endswith(".json"))
    scenarios = [load_scenario(p) for p in paths]
    assert [s.name for s in scenarios] == ["scenario_1", "scenario_2", "scenario_3"]
    s1 = scenarios[0]
    assert s1.hour == 16
    assert [r.length for r in s1.routes] == [6600.0, 7600.0]
    assert [a for a, _ in s1.routes[0].segments] == ["A9", "A6", "A5", "A2"]
    s2 = scenarios[1]
    assert [a for a, _ in s2.routes[0].segments] == ["A5", "A2"]
    assert [a for a, _ in s2.routes[1].segments] == ["A5", "A6", "A3", "A2"]


def test_report_csv():
    sc, regular, safe = inversion_scenario()
    rep = compare_routes(sc, regular, safe, [8.0])
    buf = io.StringIO()
    write_report(rep, sc, buf)
    assert buf.getvalue().splitlines() == [
        "scenario,route,length_m,blind_m,regular_s,av_s",
        "constructed,A,5000.0,8,500.000,1000.000",
        "constructed,B,6000.0,8,600.000,600.000",
    ]
