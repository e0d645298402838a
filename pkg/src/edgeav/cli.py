"""Command-line pipeline: generate/ingest -> configure -> safespeed -> route.

Every stage reads only files written by earlier stages and writes CSV/JSON
into the output directory. Exit codes: 0 ok, 2 input/IO error, 3 format
error, 4 search budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from edgeav import __version__
from edgeav.config import FLAG_FIELDS, ModelParams, data_path, load_defaults, parse_override
from edgeav.ingest import (
    ParseStats,
    TraceFormatError,
    aggregate_hourly,
    load_grid,
    load_profile,
    parse_trace,
    read_demand,
    synthesize_trace,
    write_demand,
    write_trace,
)
from edgeav.provisioning import (
    AVERAGE,
    BUDGET,
    CLUSTER_HEADER,
    HOURLY_HEADER,
    INFEASIBLE,
    PEAK,
    SAFE_HEADER,
    DegenerateInputError,
    average_config,
    cluster_hours,
    fmt_blind,
    peak_config,
    read_deployed,
    read_hourly,
    read_safe_speeds,
    safe_speed,
    write_deployed,
)
from edgeav.routing import MissingSpeedError, compare_routes, load_scenario, write_report
from edgeav.scheduler import SchedParams, default_kernel, sched_events
from edgeav.search import InfeasibleError, SearchBudgetError, configuration_search

log = logging.getLogger("edgeav")

EXIT_OK, EXIT_INPUT, EXIT_FORMAT, EXIT_BUDGET = 0, 2, 3, 4

TRACE = "trace.csv"
DEMAND = "demand.csv"
HOURLY = "hourly_configs.csv"
DEPLOYED = "deployed_configs.csv"
CONFIGURE_META = "configure_meta.json"
SAFE = "safe_speeds.csv"
CLUSTERS = "hour_clusters.csv"
ROUTES_SUMMARY = "routes_summary.json"
MANIFEST = "manifest.json"


class StageError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    out_dir: Path
    params: ModelParams
    trace: Optional[Path] = None
    profile: Optional[Path] = None
    grid: Optional[Path] = None
    scenarios: list[Path] = field(default_factory=list)
    geo: bool = False
    seed: Optional[int] = None
    jobs: int = 1
    kind: str = AVERAGE
    overrides: dict[str, str] = field(default_factory=dict)

    def grid_path(self):
        return self.grid or data_path("cologne_grid.json")

    def profile_path(self):
        return self.profile or data_path("cologne_profile.json")

    def scenario_paths(self):
        if self.scenarios:
            out = []
            for p in self.scenarios:
                p = Path(p)
                out.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
            return out
        return sorted((p for p in data_path("scenarios").iterdir() if p.name.endswith(".json")),
                      key=lambda p: p.name)


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_text(path, reader, name=None):
    try:
        with open(path, encoding="utf-8") as fh:
            return reader(fh, str(name or path))
    except FileNotFoundError:
        raise StageError(f"missing input file: {path}", EXIT_INPUT) from None


# --- stages ----------------------------------------------------------------


def cmd_generate(cfg: RunConfig) -> Path:
    profile = load_profile(cfg.profile_path())
    if cfg.seed is not None:
        profile.seed = cfg.seed
    grid = load_grid(cfg.grid_path())
    records = synthesize_trace(profile, grid)
    out = cfg.out_dir / TRACE
    with open(out, "w", encoding="utf-8", newline="") as fh:
        write_trace(records, fh)
    log.info("wrote %d records to %s", len(records), out)
    return out


def cmd_ingest(cfg: RunConfig) -> Path:
    trace = cfg.trace or cfg.out_dir / TRACE
    grid = load_grid(cfg.grid_path())
    stats = ParseStats()
    try:
        with open(trace, encoding="utf-8") as fh:
            demand = aggregate_hourly(parse_trace(fh, grid, cfg.geo, stats, str(trace)), grid)
    except FileNotFoundError:
        raise StageError(f"missing trace file: {trace}", EXIT_INPUT) from None
    if stats.malformed:
        log.warning("%s: skipped %d malformed lines (first at line %s)",
                    trace, stats.malformed, stats.first_bad)
    out = cfg.out_dir / DEMAND
    with open(out, "w", encoding="utf-8", newline="") as fh:
        write_demand(demand, fh)
    return out


def _search_task(args):
    area, hour, blind, vehicles, speed, params = args
    try:
        cfg = configuration_search(params.search_params(blind, vehicles, speed))
        return (area, hour, blind, f"{cfg.capacity:.3f}", cfg.cores, cfg.search_calls)
    except InfeasibleError:
        return (area, hour, blind, INFEASIBLE, "", 0)
    except SearchBudgetError as exc:
        return (area, hour, blind, BUDGET, "", exc.calls)


def cmd_configure(cfg: RunConfig) -> Path:
    demand = _read_text(cfg.out_dir / DEMAND, read_demand)
    blinds = cfg.params.blind_distances_m
    tasks, rows = [], []
    for d in demand:
        for b in blinds:
            if d.moving:
                tasks.append((d.area_id, d.hour, b, d.avg_vehicles, d.avg_speed, cfg.params))
            else:
                rows.append((d.area_id, d.hour, b, "0.000", 0, 0))
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            rows.extend(pool.map(_search_task, tasks, chunksize=4))
    else:
        rows.extend(map(_search_task, tasks))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    _write_rows(cfg.out_dir / HOURLY, HOURLY_HEADER,
                [(a, h, fmt_blind(b), cap, c, n) for a, h, b, cap, c, n in rows])

    table = _read_text(cfg.out_dir / HOURLY, read_hourly)
    deployed = []
    for area in sorted({d.area_id for d in demand}):
        for b in blinds:
            try:
                deployed.append(peak_config(table, area, b))
                deployed.append(average_config(table, area, b))
            except ValueError:
                log.warning("no feasible hours for %s at L=%g m; no deployment", area, b)
    with open(cfg.out_dir / DEPLOYED, "w", encoding="utf-8", newline="") as fh:
        write_deployed(deployed, fh)

    infeasible = sum(r[3] == INFEASIBLE for r in rows)
    over_budget = sum(r[3] == BUDGET for r in rows)
    meta = {
        "average_over": "hours with vehicles",
        "average_cores": "ceil(mean)",
        "searches": len(tasks),
        "infeasible_rows": infeasible,
        "budget_exceeded_rows": over_budget,
    }
    (cfg.out_dir / CONFIGURE_META).write_text(json.dumps(meta, indent=2) + "\n")
    if tasks and infeasible == len(tasks):
        raise StageError("every (area, hour, L) is infeasible", EXIT_INPUT)
    if over_budget:
        raise StageError(f"{over_budget} searches exceeded the budget", EXIT_BUDGET)
    return cfg.out_dir / HOURLY


def cmd_safespeed(cfg: RunConfig) -> Path:
    demand = _read_text(cfg.out_dir / DEMAND, read_demand)
    deployed = _read_text(cfg.out_dir / DEPLOYED, read_deployed)
    chosen = {(d.area_id, d.blind_m): d for d in deployed if d.kind == cfg.kind}
    if not chosen:
        raise StageError(f"no {cfg.kind} deployments in {cfg.out_dir / DEPLOYED}", EXIT_INPUT)
    rows = []
    for d in demand:
        if not d.moving:
            continue
        for (area, b), dep in sorted(chosen.items()):
            if area != d.area_id:
                continue
            s = safe_speed(d, dep, b, cfg.params.sim)
            rows.append((d.area_id, d.hour, fmt_blind(b), f"{s.regular:.6f}",
                         f"{s.safe:.6f}", s.rmax_ms, s.misses))
    _write_rows(cfg.out_dir / SAFE, SAFE_HEADER, rows)

    cluster_rows = []
    for area in sorted({d.area_id for d in demand}):
        counts = {d.hour: d.avg_vehicles for d in demand if d.area_id == area}
        try:
            labels = cluster_hours(counts)
        except DegenerateInputError as exc:
            log.warning("%s: hours not clustered (%s)", area, exc)
            continue
        cluster_rows.extend((area, h, f"{counts[h]:.6f}", labels[h]) for h in sorted(labels))
    _write_rows(cfg.out_dir / CLUSTERS, CLUSTER_HEADER, cluster_rows)
    return cfg.out_dir / SAFE


def cmd_route(cfg: RunConfig) -> Path:
    demand = _read_text(cfg.out_dir / DEMAND, read_demand)
    regular = {(d.area_id, d.hour): d.avg_speed for d in demand if d.avg_speed}
    safe = _read_text(cfg.out_dir / SAFE, read_safe_speeds)
    blinds = sorted({b for _, _, b in safe})
    summary = []
    for path in cfg.scenario_paths():
        try:
            scenario = load_scenario(path)
        except FileNotFoundError:
            raise StageError(f"missing scenario file: {path}", EXIT_INPUT) from None
        try:
            report = compare_routes(scenario, regular, safe, blinds)
        except MissingSpeedError as exc:
            raise StageError(f"scenario {scenario.name}: {exc}", EXIT_INPUT) from None
        with open(cfg.out_dir / f"route_{scenario.name}.csv", "w", encoding="utf-8", newline="") as fh:
            write_report(report, scenario, fh)
        summary.append(report.summary())
    out = cfg.out_dir / ROUTES_SUMMARY
    out.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_all(cfg: RunConfig) -> Path:
    if cfg.trace is None:
        cmd_generate(cfg)
    cmd_ingest(cfg)
    cmd_configure(cfg)
    cmd_safespeed(cfg)
    cmd_route(cfg)
    outputs = sorted(p for p in cfg.out_dir.iterdir() if p.is_file() and p.name != MANIFEST)
    profile_seed = None
    if cfg.trace is None:
        profile_seed = cfg.seed if cfg.seed is not None else load_profile(cfg.profile_path()).seed
    manifest = {
        "version": __version__,
        "input": str(cfg.trace) if cfg.trace else "synthetic",
        "seed": profile_seed,
        "parameters": cfg.params.to_dict(),
        "overrides": cfg.overrides,
        "safe_speed_deployment": cfg.kind,
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    out = cfg.out_dir / MANIFEST
    out.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def cmd_sched_debug(args) -> int:
    params = SchedParams(args.cores, args.transfer_ms, args.exec_ms, args.vehicles,
                         args.deadline_ms, args.period_ms)
    fh = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vehicle", "offload_ms", "arrive_ms", "start_ms", "finish_ms",
                    "deadline_ms", "missed"])
        misses = rmax = 0
        for j in sched_events(params):
            w.writerow([j.vehicle, j.offload_ms, j.arrive_ms, j.start_ms, j.finish_ms,
                        j.deadline_ms, int(j.missed)])
            misses += j.missed
            rmax = max(rmax, j.finish_ms - j.offload_ms)
    finally:
        if args.out:
            fh.close()
    log.info("misses=%d rmax=%d ms", misses, rmax)
    return EXIT_OK


# --- argument parsing -----------------------------------------------------------


def _param_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("model parameters (defaults from the packaged table)")
    for flag in FLAG_FIELDS:
        g.add_argument(f"--{flag}", dest=f"ov_{flag}", metavar="VALUE")
    g.add_argument("--jobs", type=int, default=1, help="parallel searches (configure)")
    return p


def _io_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out", "-o", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--grid", type=Path, help="grid JSON (default: packaged Cologne grid)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgeav", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    io_p, par_p = _io_parent(), _param_parent()

    g = sub.add_parser("generate", parents=[io_p], help="synthesize a trace from a profile")
    g.add_argument("--profile", type=Path)
    g.add_argument("--seed", type=int)

    i = sub.add_parser("ingest", parents=[io_p], help="aggregate a trace into hourly demand")
    i.add_argument("--trace", type=Path)
    i.add_argument("--geo", action="store_true", help="trace has lat,lon columns")

    sub.add_parser("configure", parents=[io_p, par_p], help="per-hour, peak and average configs")

    s = sub.add_parser("safespeed", parents=[io_p, par_p], help="AV safe speed per hour")
    s.add_argument("--kind", choices=[AVERAGE, PEAK], default=AVERAGE)

    r = sub.add_parser("route", parents=[io_p, par_p], help="route travel-time comparison")
    r.add_argument("--scenario", type=Path, action="append", default=[])

    a = sub.add_parser("all", parents=[io_p, par_p], help="run the whole pipeline")
    a.add_argument("--trace", type=Path)
    a.add_argument("--geo", action="store_true")
    a.add_argument("--profile", type=Path)
    a.add_argument("--seed", type=int)
    a.add_argument("--scenario", type=Path, action="append", default=[])
    a.add_argument("--kind", choices=[AVERAGE, PEAK], default=AVERAGE)

    d = sub.add_parser("sched-debug", help="dump the per-job schedule as CSV")
    d.add_argument("--cores", type=int, default=1)
    d.add_argument("--transfer-ms", type=int, required=True)
    d.add_argument("--exec-ms", type=int, default=16)
    d.add_argument("--vehicles", type=int, required=True)
    d.add_argument("--deadline-ms", type=int, required=True)
    d.add_argument("--period-ms", type=int, default=60000)
    d.add_argument("--out", type=Path)
    return parser


def config_from_args(args) -> RunConfig:
    params = load_defaults()
    overrides, changes = {}, {}
    for flag in FLAG_FIELDS:
        raw = getattr(args, f"ov_{flag}", None)
        if raw is None:
            continue
        overrides[flag] = raw
        name, value = parse_override(flag, raw)
        changes[name] = value
    if changes:
        params = params.override(**changes)
    return RunConfig(
        out_dir=args.out,
        params=params,
        trace=getattr(args, "trace", None),
        profile=getattr(args, "profile", None),
        grid=args.grid,
        scenarios=getattr(args, "scenario", []) or [],
        geo=getattr(args, "geo", False),
        seed=getattr(args, "seed", None),
        jobs=getattr(args, "jobs", 1),
        kind=getattr(args, "kind", AVERAGE),
        overrides=overrides,
    )


COMMANDS = {
    "generate": cmd_generate,
    "ingest": cmd_ingest,
    "configure": cmd_configure,
    "safespeed": cmd_safespeed,
    "route": cmd_route,
    "all": cmd_all,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.command == "sched-debug":
            return cmd_sched_debug(args)
        try:
            cfg = config_from_args(args)
        except (ValueError, KeyError) as exc:
            raise StageError(f"bad parameter override: {exc}", EXIT_INPUT) from None
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        log.info("kernel: %s", default_kernel())
        COMMANDS[args.command](cfg)
    except StageError as exc:
        print(f"edgeav: {exc}", file=sys.stderr)
        return exc.code
    except TraceFormatError as exc:
        print(f"edgeav: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except SearchBudgetError as exc:
        print(f"edgeav: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as exc:
        print(f"edgeav: {exc.strerror or exc}: {exc.filename or ''}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"edgeav: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
