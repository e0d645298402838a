"""Peak/average deployments, AV safe speeds, and traffic-level clustering."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, NamedTuple, Optional

from edgeav.ingest import HourlyDemand, TraceFormatError
from edgeav.scheduler import SchedParams, sched
from edgeav.search import EdgeConfig, relative_deadline, to_ms_ceil, to_ms_floor

# (area_id, hour, blind_m) -> required config; (0, 0) for hours without traffic
HourlyConfigTable = dict[tuple[str, int, float], EdgeConfig]

PEAK = "peak"
AVERAGE = "average"


@dataclass(frozen=True)
class DeployedConfig:
    area_id: str
    blind_m: float
    kind: str
    capacity: float
    cores: int


def _hourly(table: HourlyConfigTable, area: str, blind: float) -> list[EdgeConfig]:
    rows = [cfg for (a, _, b), cfg in sorted(table.items()) if a == area and b == blind]
    # zero configs mark hours without vehicles; they do not shape a deployment
    rows = [cfg for cfg in rows if cfg.cores > 0]
    if not rows:
        raise ValueError(f"no hourly configs with traffic for area {area}, L={blind}")
    return rows


def peak_config(table: HourlyConfigTable, area: str, blind: float) -> DeployedConfig:
    rows = _hourly(table, area, blind)
    return DeployedConfig(area, blind, PEAK,
                          max(r.capacity for r in rows), max(r.cores for r in rows))


def average_config(table: HourlyConfigTable, area: str, blind: float) -> DeployedConfig:
    """Mean capacity and ceil(mean cores) over hours with traffic."""
    rows = _hourly(table, area, blind)
    n = len(rows)
    capacity = math.fsum(r.capacity for r in rows) / n
    cores = -(-sum(r.cores for r in rows) // n)
    return DeployedConfig(area, blind, AVERAGE, capacity, cores)


@dataclass(frozen=True)
class SimSettings:
    """Scheduler constants shared by every (area, hour) simulation."""

    data_size: float = 1.8e6  # bits
    exec_time: float = 0.016  # s
    working_period: float = 60.0  # s


class SafeSpeed(NamedTuple):
    safe: float  # m/s
    regular: float  # m/s
    rmax_ms: int
    misses: int


def safe_speed(demand: HourlyDemand, deployed: DeployedConfig, blind: float,
               sim: SimSettings = SimSettings()) -> SafeSpeed:
    """Fastest AV speed that keeps the worst observed blind distance within L.

    The hour is simulated under ``deployed``; with zero misses the regular
    speed is kept, otherwise the AV slows to ``L / r_max``.
    """
    if demand.avg_vehicles <= 0:
        raise ValueError(f"{demand.area_id}@{demand.hour}: no vehicles to simulate")
    if deployed.cores < 1:
        raise ValueError("deployment needs at least one core")
    if deployed.capacity <= 0:
        raise ValueError("deployment has zero channel capacity")
    regular = demand.avg_speed
    t_ms = to_ms_ceil(sim.data_size * demand.avg_vehicles / deployed.capacity)
    params = SchedParams(
        cores=deployed.cores,
        transfer_ms=t_ms,
        exec_ms=to_ms_ceil(sim.exec_time),
        vehicles=math.ceil(demand.avg_vehicles - 1e-9),
        deadline_ms=to_ms_floor(relative_deadline(blind, regular)),
        period_ms=to_ms_floor(sim.working_period),
    )
    out = sched(params)
    if out.deadline_misses == 0 or out.max_response == 0:
        safe = regular
    else:
        safe = min(regular, blind / (out.max_response / 1000))
    return SafeSpeed(safe, regular, out.max_response, out.deadline_misses)


# --- clustering -----------------------------------------------------------

LEVELS = ("low", "medium", "high")


class DegenerateInputError(ValueError):
    pass


def _quantile(sorted_values: list[float], q: float) -> float:
    pos = q * (len(sorted_values) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(sorted_values) - 1)
    return sorted_values[lo] + (sorted_values[hi] - sorted_values[lo]) * (pos - lo)


def kmeans_1d(values: list[float], k: int = 3, max_iter: int = 100) -> tuple[list[int], list[float]]:
    """Lloyd's algorithm in one dimension with quantile seeding.

    Seeds sit at the (2i+1)/2k quantiles of the sorted values; if those
    coincide, the same quantiles of the distinct values are used instead.
    Returns per-value cluster indices (ascending centroid order) and centroids.
    """
    distinct = sorted(set(values))
    if len(distinct) < k:
        raise DegenerateInputError(f"need at least {k} distinct values, got {len(distinct)}")
    qs = [(2 * i + 1) / (2 * k) for i in range(k)]
    ordered = sorted(values)
    centroids = [_quantile(ordered, q) for q in qs]
    if len(set(centroids)) < k:
        centroids = [_quantile(distinct, q) for q in qs]

    assign: Optional[list[int]] = None
    for _ in range(max_iter):
        new = [min(range(k), key=lambda c: (abs(v - centroids[c]), c)) for v in values]
        if new == assign:
            break
        assign = new
        for c in range(k):
            members = [v for v, a in zip(values, assign) if a == c]
            if members:
                centroids[c] = math.fsum(members) / len(members)
    order = sorted(range(k), key=lambda c: centroids[c])
    rank = {c: i for i, c in enumerate(order)}
    return [rank[a] for a in assign], [centroids[c] for c in order]


def cluster_hours(counts: Mapping[int, float], k: int = 3) -> dict[int, str]:
    """Label each hour low/medium/high by its vehicle count."""
    if k != len(LEVELS):
        raise ValueError("traffic levels are defined for k=3")
    hours = sorted(counts)
    labels, _ = kmeans_1d([counts[h] for h in hours], k)
    return {h: LEVELS[i] for h, i in zip(hours, labels)}


# --- file formats -----------------------------------------------------------

HOURLY_HEADER = ["area_id", "hour", "blind_m", "capacity_bps", "cores", "search_calls"]
DEPLOYED_HEADER = ["area_id", "blind_m", "kind", "capacity_bps", "cores"]
SAFE_HEADER = ["area_id", "hour", "blind_m", "regular_mps", "safe_mps", "rmax_ms", "misses"]
CLUSTER_HEADER = ["area_id", "hour", "avg_vehicles", "cluster"]

INFEASIBLE = "infeasible"
BUDGET = "budget_exceeded"


def fmt_blind(blind: float) -> str:
    return f"{blind:g}"


def write_deployed(rows: Iterable[DeployedConfig], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(DEPLOYED_HEADER)
    for d in rows:
        w.writerow([d.area_id, fmt_blind(d.blind_m), d.kind, f"{d.capacity:.3f}", d.cores])


def read_deployed(fh: IO[str], name: str = "<deployed>") -> list[DeployedConfig]:
    reader = csv.DictReader(fh)
    if reader.fieldnames != DEPLOYED_HEADER:
        raise TraceFormatError(f"{name}: expected header {','.join(DEPLOYED_HEADER)}")
    try:
        return [DeployedConfig(r["area_id"], float(r["blind_m"]), r["kind"],
                               float(r["capacity_bps"]), int(r["cores"])) for r in reader]
    except (TypeError, ValueError) as exc:
        raise TraceFormatError(f"{name}, line {reader.line_num}: {exc}") from exc


def read_hourly(fh: IO[str], name: str = "<hourly>") -> HourlyConfigTable:
    """Hourly configs; infeasible or over-budget rows are left out."""
    reader = csv.DictReader(fh)
    if reader.fieldnames != HOURLY_HEADER:
        raise TraceFormatError(f"{name}: expected header {','.join(HOURLY_HEADER)}")
    table: HourlyConfigTable = {}
    for r in reader:
        if r["capacity_bps"] in (INFEASIBLE, BUDGET):
            continue
        try:
            key = (r["area_id"], int(r["hour"]), float(r["blind_m"]))
            table[key] = EdgeConfig(float(r["capacity_bps"]), int(r["cores"]),
                                    int(r["search_calls"]))
        except (TypeError, ValueError) as exc:
            raise TraceFormatError(f"{name}, line {reader.line_num}: {exc}") from exc
    return table


def read_safe_speeds(fh: IO[str], name: str = "<safe>") -> dict[tuple[str, int, float], float]:
    reader = csv.DictReader(fh)
    if reader.fieldnames != SAFE_HEADER:
        raise TraceFormatError(f"{name}: expected header {','.join(SAFE_HEADER)}")
    try:
        return {(r["area_id"], int(r["hour"]), float(r["blind_m"])): float(r["safe_mps"])
                for r in reader}
    except (TypeError, ValueError) as exc:
        raise TraceFormatError(f"{name}, line {reader.line_num}: {exc}") from exc
