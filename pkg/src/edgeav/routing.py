"""Route travel times for regular vehicles and edge-assisted AVs.

A route is a static sequence of (area, distance) segments. Travel time uses
the departure hour's speed in every segment; trips crossing an hour boundary
are not re-timed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import IO, Callable, Mapping, Optional, Sequence, Union

from edgeav.ingest import TraceFormatError


class MissingSpeedError(KeyError):
    def __init__(self, area, hour, blind=None):
        self.area, self.hour, self.blind = area, hour, blind
        where = f"area {area}, hour {hour}" + (f", L={blind:g} m" if blind is not None else "")
        super().__init__(f"no speed for {where}")

    def __str__(self):
        return self.args[0]


@dataclass(frozen=True)
class Route:
    name: str
    segments: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError(f"route {self.name} has no segments")
        for area, dist in self.segments:
            if not dist > 0:
                raise ValueError(f"route {self.name}: segment in {area} has length {dist}")

    @property
    def length(self) -> float:
        return math.fsum(d for _, d in self.segments)

    def __add__(self, other: "Route") -> "Route":
        return Route(f"{self.name}+{other.name}", self.segments + other.segments)


@dataclass(frozen=True)
class Scenario:
    name: str
    hour: int
    routes: tuple[Route, ...]
    source: Optional[str] = None
    destination: Optional[str] = None
    coordinates: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.routes) < 2:
            raise ValueError(f"scenario {self.name} needs at least two routes")

    @classmethod
    def from_json(cls, data: dict) -> "Scenario":
        try:
            routes = tuple(
                Route(r["name"], tuple((s["area_id"], float(s["distance_m"])) for s in r["segments"]))
                for r in data["routes"]
            )
            return cls(data["name"], int(data["hour"]), routes,
                       data.get("source"), data.get("destination"),
                       data.get("coordinates", {}))
        except (KeyError, TypeError) as exc:
            raise TraceFormatError(f"bad scenario file: {exc}") from exc


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            return Scenario.from_json(json.load(fh))
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"{path}: not JSON ({exc})") from exc


SpeedLookup = Union[Mapping[tuple[str, int], float], Callable[[str, int], float]]


def _speed(lookup: SpeedLookup, area: str, hour: int) -> float:
    try:
        s = lookup(area, hour) if callable(lookup) else lookup[(area, hour)]
    except MissingSpeedError:
        raise
    except KeyError:
        raise MissingSpeedError(area, hour) from None
    if s is None or not s > 0:
        raise MissingSpeedError(area, hour)
    return s


def travel_time(route: Route, hour: int, speeds: SpeedLookup) -> float:
    """Seconds to drive ``route`` at the hour's per-area speeds."""
    return math.fsum(dist / _speed(speeds, area, hour) for area, dist in route.segments)


@dataclass
class TravelReport:
    scenario: str
    hour: int
    regular_time: dict[str, float]
    av_time: dict[float, dict[str, float]]
    fastest_regular: str
    fastest_av: dict[float, str]

    @property
    def inversions(self) -> dict[float, bool]:
        return {b: name != self.fastest_regular for b, name in self.fastest_av.items()}

    @property
    def inversion(self) -> bool:
        return any(self.inversions.values())

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "hour": self.hour,
            "fastest_regular": self.fastest_regular,
            "fastest_av": {f"{b:g}": n for b, n in self.fastest_av.items()},
            "inversion_by_blind": {f"{b:g}": v for b, v in self.inversions.items()},
            "inversion": self.inversion,
            "approximation": "departure-hour speeds used for the whole trip",
        }


def _fastest(times: dict[str, float]) -> str:
    # declaration order breaks ties
    best = None
    for name, t in times.items():
        if best is None or t < times[best]:
            best = name
    return best


def compare_routes(
    scenario: Scenario,
    regular: SpeedLookup,
    safe: Mapping[tuple[str, int, float], float],
    blinds: Sequence[float],
) -> TravelReport:
    """Regular vs AV travel times per route; AVs drive at the safe speed."""
    h = scenario.hour
    reg = {r.name: travel_time(r, h, regular) for r in scenario.routes}
    av: dict[float, dict[str, float]] = {}
    for b in blinds:
        def lookup(area, hour, b=b):
            try:
                return safe[(area, hour, b)]
            except KeyError:
                raise MissingSpeedError(area, hour, b) from None
        av[b] = {r.name: travel_time(r, h, lookup) for r in scenario.routes}
    return TravelReport(
        scenario=scenario.name,
        hour=h,
        regular_time=reg,
        av_time=av,
        fastest_regular=_fastest(reg),
        fastest_av={b: _fastest(t) for b, t in av.items()},
    )


REPORT_HEADER = ["scenario", "route", "length_m", "blind_m", "regular_s", "av_s"]


def write_report(report: TravelReport, scenario: Scenario, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for r in scenario.routes:
        for b, times in report.av_time.items():
            w.writerow([report.scenario, r.name, f"{r.length:.1f}", f"{b:g}",
                        f"{report.regular_time[r.name]:.3f}", f"{times[r.name]:.3f}"])
