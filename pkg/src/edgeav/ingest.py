"""Trace parsing, per-area hourly demand, and synthetic trace generation.

Demand for an (area, hour) is sampled over the first 15 minutes of the hour,
split into five 3-minute windows. Per window we count unique vehicles seen in
the area and average their speed samples; the hour's demand is the mean over
the five windows (empty windows count as zero vehicles and are left out of
the speed mean).
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Optional

MPH = 0.44704  # m/s per mph, exact
EARTH_RADIUS_M = 6371008.8

WINDOW_S = 180
WINDOWS_PER_HOUR = 5
HOURS = range(24)


class TraceFormatError(ValueError):
    """Input does not look like a trace/grid/profile file."""


@dataclass(frozen=True)
class TraceRecord:
    timestamp: int
    vehicle_id: str
    x: float
    y: float
    speed: float

    def __post_init__(self):
        if not 0 <= self.timestamp < 86400:
            raise ValueError(f"timestamp {self.timestamp} outside one day")
        if not self.speed >= 0:
            raise ValueError(f"negative speed {self.speed}")


@dataclass(frozen=True)
class Area:
    area_id: str
    x_min: float
    y_min: float


@dataclass(frozen=True)
class GeoAnchor:
    """Geographic position of the grid centroid, for lat/lon traces."""

    lat: float
    lon: float


class AreaGrid:
    """Square, pairwise-disjoint areas of a common side length (meters)."""

    def __init__(self, areas: Iterable[Area], side: float = 2000.0,
                 geo: Optional[GeoAnchor] = None):
        if side <= 0:
            raise ValueError("area side length must be positive")
        self.areas = list(areas)
        self.side = float(side)
        self.geo = geo
        seen = set()
        for a in self.areas:
            if a.area_id in seen:
                raise ValueError(f"duplicate area id {a.area_id}")
            seen.add(a.area_id)
        for i, a in enumerate(self.areas):
            for b in self.areas[i + 1:]:
                if abs(a.x_min - b.x_min) < side and abs(a.y_min - b.y_min) < side:
                    raise ValueError(f"areas {a.area_id} and {b.area_id} overlap")

    @property
    def ids(self) -> list[str]:
        return [a.area_id for a in self.areas]

    def locate(self, x: float, y: float) -> Optional[str]:
        s = self.side
        for a in self.areas:
            if a.x_min <= x < a.x_min + s and a.y_min <= y < a.y_min + s:
                return a.area_id
        return None

    def bounds(self, area_id: str) -> tuple[float, float]:
        for a in self.areas:
            if a.area_id == area_id:
                return a.x_min, a.y_min
        raise KeyError(area_id)

    def centroid(self) -> tuple[float, float]:
        xs = [a.x_min for a in self.areas]
        ys = [a.y_min for a in self.areas]
        return (min(xs) + max(xs) + self.side) / 2, (min(ys) + max(ys) + self.side) / 2

    def project(self, lat: float, lon: float) -> tuple[float, float]:
        """Equirectangular lat/lon -> grid meters about the grid centroid."""
        if self.geo is None:
            raise TraceFormatError("grid has no geo anchor; cannot place lat/lon records")
        cx, cy = self.centroid()
        k = math.pi / 180 * EARTH_RADIUS_M
        x = cx + (lon - self.geo.lon) * k * math.cos(math.radians(self.geo.lat))
        y = cy + (lat - self.geo.lat) * k
        return x, y

    @classmethod
    def from_json(cls, data: dict) -> "AreaGrid":
        try:
            areas = [Area(str(a["area_id"]), float(a["x_min"]), float(a["y_min"]))
                     for a in data["areas"]]
            geo = data.get("geo")
            anchor = GeoAnchor(float(geo["lat"]), float(geo["lon"])) if geo else None
            return cls(areas, float(data.get("side_m", 2000.0)), anchor)
        except (KeyError, TypeError) as exc:
            raise TraceFormatError(f"bad grid file: {exc}") from exc

    def to_json(self) -> dict:
        out = {
            "side_m": self.side,
            "areas": [{"area_id": a.area_id, "x_min": a.x_min, "y_min": a.y_min}
                      for a in self.areas],
        }
        if self.geo is not None:
            out["geo"] = {"lat": self.geo.lat, "lon": self.geo.lon}
        return out


def load_grid(path) -> AreaGrid:
    with open(path, encoding="utf-8") as fh:
        try:
            return AreaGrid.from_json(json.load(fh))
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"{path}: not JSON ({exc})") from exc


@dataclass(frozen=True)
class HourlyDemand:
    area_id: str
    hour: int
    avg_vehicles: float
    avg_speed: Optional[float]  # m/s; None when no vehicle was seen

    def __post_init__(self):
        if self.avg_vehicles < 0:
            raise ValueError("negative vehicle count")
        # 0 is allowed: every sample of the hour was a stationary vehicle
        if self.avg_vehicles > 0 and (self.avg_speed is None or self.avg_speed < 0):
            raise ValueError(f"{self.area_id}@{self.hour}: vehicles present but no speed")

    @property
    def moving(self) -> bool:
        return self.avg_vehicles > 0 and bool(self.avg_speed)


class ParseStats:
    def __init__(self):
        self.lines = 0
        self.malformed = 0
        self.first_bad: Optional[int] = None


XY_HEADER = ["timestamp", "vehicle_id", "x", "y", "speed"]
GEO_HEADER = ["timestamp", "vehicle_id", "lat", "lon", "speed"]


def parse_trace(
    source: IO[str],
    grid: AreaGrid,
    geo: bool = False,
    stats: Optional[ParseStats] = None,
    name: str = "<trace>",
) -> Iterator[tuple[TraceRecord, Optional[str]]]:
    """Yield ``(record, area_id or None)`` for every well-formed line.

    Malformed lines are skipped and counted in ``stats``; if more than half
    of the data lines are malformed a :class:`TraceFormatError` is raised
    once the source is exhausted.
    """
    stats = stats if stats is not None else ParseStats()
    if geo and grid.geo is None:
        raise TraceFormatError("grid has no geo anchor; cannot place lat/lon records")
    reader = csv.reader(source)
    header = next(reader, None)
    expected = GEO_HEADER if geo else XY_HEADER
    if header is None or [h.strip() for h in header] != expected:
        raise TraceFormatError(f"{name}: expected header {','.join(expected)}, got {header}")
    for row in reader:
        stats.lines += 1
        try:
            if len(row) != 5:
                raise ValueError("field count")
            ts = int(row[0])
            a, b = float(row[2]), float(row[3])
            rec_xy = grid.project(a, b) if geo else (a, b)
            rec = TraceRecord(ts, row[1], rec_xy[0], rec_xy[1], float(row[4]))
            if not row[1] or not all(map(math.isfinite, (rec.x, rec.y, rec.speed))):
                raise ValueError("empty id or non-finite value")
        except ValueError:
            stats.malformed += 1
            if stats.first_bad is None:
                stats.first_bad = reader.line_num
            continue
        yield rec, grid.locate(rec.x, rec.y)
    if stats.lines and stats.malformed * 2 > stats.lines:
        raise TraceFormatError(
            f"{name}: {stats.malformed} of {stats.lines} lines malformed "
            f"(first at line {stats.first_bad}); wrong file?"
        )


def window_of(timestamp: int) -> Optional[tuple[int, int]]:
    """(hour, window index) for samples in the first 15 minutes of an hour."""
    hour, offset = divmod(timestamp, 3600)
    w = offset // WINDOW_S
    return (hour, w) if w < WINDOWS_PER_HOUR else None


def aggregate_hourly(
    tagged: Iterable[tuple[TraceRecord, Optional[str]]], grid: AreaGrid
) -> list[HourlyDemand]:
    """One :class:`HourlyDemand` per (area, hour), ordered by area then hour."""
    vehicles: dict[tuple, set] = defaultdict(set)
    speed_sum: dict[tuple, float] = defaultdict(float)
    samples: dict[tuple, int] = defaultdict(int)
    for rec, area in tagged:
        if area is None:
            continue
        win = window_of(rec.timestamp)
        if win is None:
            continue
        key = (area, *win)
        vehicles[key].add(rec.vehicle_id)
        speed_sum[key] += rec.speed
        samples[key] += 1

    out = []
    for area in grid.ids:
        for hour in HOURS:
            counts, means = [], []
            for w in range(WINDOWS_PER_HOUR):
                key = (area, hour, w)
                counts.append(len(vehicles.get(key, ())))
                if samples.get(key):
                    means.append(speed_sum[key] / samples[key])
            v = sum(counts) / WINDOWS_PER_HOUR
            s = math.fsum(means) / len(means) if means else None
            out.append(HourlyDemand(area, hour, v, s))
    return out


DEMAND_HEADER = ["area_id", "hour", "avg_vehicles", "avg_speed_mps"]


def write_demand(rows: Iterable[HourlyDemand], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(DEMAND_HEADER)
    for d in rows:
        speed = "" if d.avg_speed is None else f"{d.avg_speed:.6f}"
        w.writerow([d.area_id, d.hour, f"{d.avg_vehicles:.6f}", speed])


def read_demand(fh: IO[str], name: str = "<demand>") -> list[HourlyDemand]:
    reader = csv.DictReader(fh)
    if reader.fieldnames != DEMAND_HEADER:
        raise TraceFormatError(f"{name}: expected header {','.join(DEMAND_HEADER)}")
    out = []
    for row in reader:
        try:
            speed = float(row["avg_speed_mps"]) if row["avg_speed_mps"] else None
            out.append(HourlyDemand(row["area_id"], int(row["hour"]),
                                    float(row["avg_vehicles"]), speed))
        except (TypeError, ValueError) as exc:
            raise TraceFormatError(f"{name}, line {reader.line_num}: {exc}") from exc
    return out


# --- synthetic traces ---------------------------------------------------


@dataclass(frozen=True)
class Target:
    vehicles: float
    speed: float  # m/s


@dataclass
class SynthProfile:
    targets: dict[str, dict[int, Target]]
    seed: int = 0

    def validate(self) -> None:
        for area, hours in self.targets.items():
            for hour, t in hours.items():
                if not 0 <= hour < 24:
                    raise ValueError(f"{area}: hour {hour} out of range")
                if t.vehicles < 0 or t.speed < 0:
                    raise ValueError(f"{area}@{hour}: negative target")
                if t.vehicles > 0 and t.speed == 0:
                    raise ValueError(f"{area}@{hour}: vehicles without speed")

    @classmethod
    def from_json(cls, data: dict) -> "SynthProfile":
        try:
            seed = int(data.get("seed", 0))
            targets = {
                str(area): {int(h): Target(float(t["vehicles"]), float(t["speed_mps"]))
                            for h, t in hours.items()}
                for area, hours in data.items() if area != "seed"
            }
        except (AttributeError, KeyError, TypeError, ValueError) as exc:
            raise TraceFormatError(f"bad synth profile: {exc}") from exc
        prof = cls(targets, seed)
        prof.validate()
        return prof

    def to_json(self) -> dict:
        out: dict = {"seed": self.seed}
        for area, hours in self.targets.items():
            out[area] = {str(h): {"vehicles": t.vehicles, "speed_mps": t.speed}
                         for h, t in sorted(hours.items())}
        return out


def load_profile(path) -> SynthProfile:
    with open(path, encoding="utf-8") as fh:
        try:
            return SynthProfile.from_json(json.load(fh))
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"{path}: not JSON ({exc})") from exc


def _window_counts(vehicles: float) -> list[int]:
    # integer per-window counts whose mean is the closest reachable to target
    total = round(vehicles * WINDOWS_PER_HOUR)
    base, extra = divmod(total, WINDOWS_PER_HOUR)
    return [base + (w < extra) for w in range(WINDOWS_PER_HOUR)]


def synthesize_trace(profile: SynthProfile, grid: AreaGrid) -> list[TraceRecord]:
    """Generate a trace whose hourly aggregation reproduces the profile.

    Each vehicle drives a straight segment inside one area for a few
    10-second-spaced samples within a single window. Speeds carry a
    zero-mean jitter that is re-centred per window so the window mean equals
    the target exactly. Records are sorted by (timestamp, vehicle_id).
    """
    profile.validate()
    rng = random.Random(profile.seed)
    side = grid.side
    records = []
    serial = 0
    for area in sorted(profile.targets):
        x0, y0 = grid.bounds(area)
        for hour in sorted(profile.targets[area]):
            target = profile.targets[area][hour]
            if target.vehicles <= 0:
                continue
            for w, count in enumerate(_window_counts(target.vehicles)):
                start = hour * 3600 + w * WINDOW_S
                drafts = []
                for _ in range(count):
                    serial += 1
                    vid = f"v{serial:07d}"
                    n = rng.randint(2, 4)
                    t0 = start + rng.randrange(WINDOW_S - 10 * (n - 1))
                    heading = rng.uniform(0, 2 * math.pi)
                    # midpoint in the inner half keeps the whole path in the area
                    mx = x0 + side * rng.uniform(0.25, 0.75)
                    my = y0 + side * rng.uniform(0.25, 0.75)
                    jitter = [rng.uniform(-0.2, 0.2) for _ in range(n)]
                    drafts.append((vid, n, t0, heading, mx, my, jitter))
                all_jit = [j for d in drafts for j in d[6]]
                shift = math.fsum(all_jit) / len(all_jit) if all_jit else 0.0
                for vid, n, t0, heading, mx, my, jitter in drafts:
                    speeds = [target.speed * (1 + j - shift) for j in jitter]
                    # positions follow the mean speed along the heading
                    v = math.fsum(speeds) / n
                    span = min(v * 10 * (n - 1), side * 0.45)
                    for i in range(n):
                        frac = (i / (n - 1) - 0.5) if n > 1 else 0.0
                        x = mx + math.cos(heading) * span * frac
                        y = my + math.sin(heading) * span * frac
                        records.append(TraceRecord(t0 + 10 * i, vid, round(x, 1),
                                                   round(y, 1), round(speeds[i], 4)))
    records.sort(key=lambda r: (r.timestamp, r.vehicle_id))
    return records


def write_trace(records: Iterable[TraceRecord], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(XY_HEADER)
    for r in records:
        w.writerow([r.timestamp, r.vehicle_id, f"{r.x:.1f}", f"{r.y:.1f}", f"{r.speed:.4f}"])


def trace_text(records: Iterable[TraceRecord]) -> str:
    buf = io.StringIO()
    write_trace(records, buf)
    return buf.getvalue()


# --- Cologne-shaped reference data ---------------------------------------

# Relative hourly volume; rush hours are 7, 8, 12, 15, 16, 17, 18.
DIURNAL_SHAPE = (
    0.04, 0.03, 0.02, 0.02, 0.03, 0.08, 0.30, 0.95, 0.80, 0.45, 0.35, 0.38,
    0.70, 0.42, 0.45, 0.78, 1.00, 0.90, 0.72, 0.40, 0.30, 0.20, 0.12, 0.07,
)

# area -> (vehicles at 16h, free-flow mph, rush-hour mph, off-peak baseline)
# The baseline lifts quiet hours toward the peak: lighter areas carry a
# flatter daily curve than the congested centre.
COLOGNE_AREAS = {
    "A1": (550, 32.0, 20.0, 0.25),
    "A2": (1800, 30.0, 12.5, 0.0),
    "A3": (750, 32.0, 21.0, 0.35),
    "A4": (1100, 31.0, 16.0, 0.1),
    "A5": (1800, 30.0, 12.0, 0.0),
    "A6": (750, 32.0, 21.5, 0.35),
    "A7": (400, 33.0, 22.5, 0.45),
    "A8": (400, 33.0, 22.5, 0.45),
    "A9": (400, 33.0, 22.0, 0.45),
}

# 3 x 3 layout, north row first
COLOGNE_LAYOUT = (("A1", "A2", "A3"), ("A4", "A5", "A6"), ("A7", "A8", "A9"))
COLOGNE_CENTROID = GeoAnchor(lat=50.963281, lon=7.022274)


def cologne_grid(side: float = 2000.0) -> AreaGrid:
    areas = []
    for r, row in enumerate(COLOGNE_LAYOUT):
        for c, area_id in enumerate(row):
            areas.append(Area(area_id, c * side, (len(COLOGNE_LAYOUT) - 1 - r) * side))
    return AreaGrid(areas, side, COLOGNE_CENTROID)


def cologne_profile(seed: int = 2013) -> SynthProfile:
    """Hourly targets shaped after the Cologne heatmaps.

    Relative volume is ``base + (1 - base) * shape``; speed falls from free
    flow toward the rush-hour speed with its square root.
    """
    targets: dict[str, dict[int, Target]] = {}
    for area, (peak, free, rush, base) in COLOGNE_AREAS.items():
        hours = {}
        for h, shape in enumerate(DIURNAL_SHAPE):
            s = base + (1 - base) * shape
            mph = free - (free - rush) * math.sqrt(s)
            hours[h] = Target(round(peak * s, 1), round(mph * MPH, 3))
        targets[area] = hours
    return SynthProfile(targets, seed)
