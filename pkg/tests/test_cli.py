import csv
import json

import pytest

from edgeav.cli import main
from edgeav.ingest import Area, AreaGrid, SynthProfile, Target
from edgeav.search import initial_capacity


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def small(tmp_path):
    grid = AreaGrid([Area("X", 0, 0), Area("Y", 2000, 0)])
    (tmp_path / "grid.json").write_text(json.dumps(grid.to_json()))
    prof = SynthProfile({
        "X": {7: Target(30.0, 6.0), 8: Target(12.0, 9.0), 9: Target(4.0, 12.0), 10: Target(1.0, 13.0)},
        "Y": {7: Target(8.0, 11.0), 8: Target(6.0, 12.0), 9: Target(3.0, 13.0), 10: Target(1.0, 14.0)},
    }, seed=5)
    (tmp_path / "profile.json").write_text(json.dumps(prof.to_json()))
    scen = {"name": "xy", "hour": 7, "routes": [
        {"name": "short", "segments": [{"area_id": "X", "distance_m": 1500}]},
        {"name": "long", "segments": [{"area_id": "Y", "distance_m": 2600}]},
    ]}
    (tmp_path / "xy.json").write_text(json.dumps(scen))
    return tmp_path


def run_all(small, out, *extra):
    return main(["all", "-o", str(out), "--grid", str(small / "grid.json"),
                 "--profile", str(small / "profile.json"),
                 "--scenario", str(small / "xy.json"), "--blind=4,8", *extra])


def test_all_writes_every_artifact(small):
    out = small / "out"
    assert run_all(small, out) == 0
    names = {p.name for p in out.iterdir()}
    assert names >= {"trace.csv", "demand.csv", "hourly_configs.csv", "deployed_configs.csv",
                     "configure_meta.json", "safe_speeds.csv", "hour_clusters.csv",
                     "route_xy.csv", "routes_summary.json", "manifest.json"}
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 5
    assert man["overrides"] == {"blind": "4,8"}
    assert man["parameters"]["blind_distances_m"] == [4.0, 8.0]
    assert set(man["outputs"]) == names - {"manifest.json"}
    hourly = rows(out / "hourly_configs.csv")
    assert len(hourly) == 2 * 24 * 2
    assert {r["blind_m"] for r in hourly} == {"4", "8"}


def test_all_is_byte_reproducible(small):
    assert run_all(small, small / "a") == 0
    assert run_all(small, small / "b", "--jobs", "2") == 0
    for name in ("trace.csv", "demand.csv", "hourly_configs.csv", "deployed_configs.csv",
                 "safe_speeds.csv", "hour_clusters.csv", "route_xy.csv", "manifest.json"):
        assert (small / "a" / name).read_bytes() == (small / "b" / name).read_bytes(), name


def test_stage_rerun_regenerates_identical_files(small):
    out = small / "out"
    assert run_all(small, out) == 0
    before = {n: (out / n).read_bytes() for n in ("hourly_configs.csv", "safe_speeds.csv")}
    (out / "safe_speeds.csv").unlink()
    (out / "hourly_configs.csv").unlink()
    common = ["-o", str(out), "--blind=4,8"]
    assert main(["configure", *common]) == 0
    assert main(["safespeed", *common]) == 0
    assert {n: (out / n).read_bytes() for n in before} == before


def test_single_vehicle_hour_gives_initial_config(tmp_path):
    (tmp_path / "demand.csv").write_text("area_id,hour,avg_vehicles,avg_speed_mps\nX,3,1.000000,8.000000\n")
    assert main(["configure", "-o", str(tmp_path), "--blind=6"]) == 0
    (row,) = rows(tmp_path / "hourly_configs.csv")
    assert float(row["capacity_bps"]) == pytest.approx(initial_capacity(1.8e6, 1, 6, 8.0, 2, 0.016), abs=1e-3)
    assert (row["cores"], row["search_calls"]) == ("1", "1")
    dep = rows(tmp_path / "deployed_configs.csv")
    assert [d["kind"] for d in dep] == ["peak", "average"]


def test_infeasible_rows_are_marked(tmp_path):
    (tmp_path / "demand.csv").write_text(
        "area_id,hour,avg_vehicles,avg_speed_mps\nX,3,2.000000,8.000000\nX,4,2.000000,90.000000\n")
    assert main(["configure", "-o", str(tmp_path), "--blind=2"]) == 0
    got = {r["hour"]: r["capacity_bps"] for r in rows(tmp_path / "hourly_configs.csv")}
    assert got["4"] == "infeasible" and got["3"] != "infeasible"


def test_all_rows_infeasible_exits_nonzero(tmp_path, capsys):
    (tmp_path / "demand.csv").write_text("area_id,hour,avg_vehicles,avg_speed_mps\nX,4,2.000000,90.000000\n")
    assert main(["configure", "-o", str(tmp_path), "--blind=2"]) == 2
    assert "infeasible" in capsys.readouterr().err
    assert rows(tmp_path / "hourly_configs.csv")[0]["capacity_bps"] == "infeasible"


def test_budget_exceeded_exits_4(tmp_path):
    (tmp_path / "demand.csv").write_text("area_id,hour,avg_vehicles,avg_speed_mps\nX,4,300.000000,7.000000\n")
    assert main(["configure", "-o", str(tmp_path), "--blind=2", "--max-calls=2"]) == 4
    assert rows(tmp_path / "hourly_configs.csv")[0]["capacity_bps"] == "budget_exceeded"


def test_missing_trace_exits_2(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert main(["ingest", "-o", str(tmp_path), "--trace", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_missing_profile_exits_2(tmp_path):
    assert main(["generate", "-o", str(tmp_path), "--profile", str(tmp_path / "p.json")]) == 2


def test_corrupt_trace_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,vehicle_id,x,y,speed\n1,a,1,1,1\nxx\nyy\nzz\n")
    assert main(["ingest", "-o", str(tmp_path), "--trace", str(bad)]) == 3
    assert "bad.csv" in capsys.readouterr().err


def test_safespeed_without_deployments_exits_2(tmp_path):
    (tmp_path / "demand.csv").write_text("area_id,hour,avg_vehicles,avg_speed_mps\n")
    (tmp_path / "deployed_configs.csv").write_text("area_id,blind_m,kind,capacity_bps,cores\n")
    assert main(["safespeed", "-o", str(tmp_path)]) == 2


def test_route_missing_area_exits_2(small, capsys):
    out = small / "out"
    assert run_all(small, out) == 0
    scen = {"name": "gap", "hour": 7, "routes": [
        {"name": "a", "segments": [{"area_id": "X", "distance_m": 10}]},
        {"name": "b", "segments": [{"area_id": "Q", "distance_m": 10}]},
    ]}
    (small / "gap.json").write_text(json.dumps(scen))
    assert main(["route", "-o", str(out), "--scenario", str(small / "gap.json")]) == 2
    assert "area Q, hour 7" in capsys.readouterr().err


def test_rush_hour_slows_avs_under_average(small):
    out = small / "out"
    assert run_all(small, out) == 0
    safe = [r for r in rows(out / "safe_speeds.csv") if r["area_id"] == "X" and r["hour"] == "7"]
    assert safe and all(float(r["safe_mps"]) < float(r["regular_mps"]) for r in safe)
    calm = [r for r in rows(out / "safe_speeds.csv") if r["area_id"] == "X" and r["hour"] == "10"]
    assert all(r["safe_mps"] == r["regular_mps"] for r in calm)


def test_generate_same_seed_same_bytes(small):
    args = ["generate", "--grid", str(small / "grid.json"), "--profile", str(small / "profile.json")]
    assert main([*args, "-o", str(small / "g1")]) == 0
    assert main([*args, "-o", str(small / "g2")]) == 0
    assert main([*args, "-o", str(small / "g3"), "--seed", "6"]) == 0
    one, two = (small / "g1" / "trace.csv").read_bytes(), (small / "g2" / "trace.csv").read_bytes()
    assert one == two
    assert (small / "g3" / "trace.csv").read_bytes() != one


def test_bad_override_exits_2(tmp_path):
    assert main(["configure", "-o", str(tmp_path), "--eta=abc"]) == 2


def test_sched_debug_dump(tmp_path):
    out = tmp_path / "jobs.csv"
    assert main(["sched-debug", "--transfer-ms", "5", "--vehicles", "2", "--deadline-ms", "60",
                 "--period-ms", "200", "--out", str(out)]) == 0
    jobs = rows(out)
    assert list(jobs[0]) == ["vehicle", "offload_ms", "arrive_ms", "start_ms", "finish_ms",
                             "deadline_ms", "missed"]
    assert len(jobs) == 12
    assert jobs[1] == {"vehicle": "1", "offload_ms": "0", "arrive_ms": "5", "start_ms": "21",
                       "finish_ms": "37", "deadline_ms": "60", "missed": "0"}
