"""Model parameters and their packaged defaults."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from importlib import resources

from edgeav.provisioning import SimSettings
from edgeav.search import SearchParams

# CLI flag -> field; flags mirror the parameter table names
FLAG_FIELDS = {
    "blind": "blind_distances_m",
    "data-size": "data_size_bits",
    "exec-time": "exec_time_s",
    "delta-b": "delta_b_bps",
    "delta-c": "delta_c",
    "working-period": "working_period_s",
    "eta": "eta",
    "epsilon": "epsilon",
    "sentinel": "sentinel",
    "max-calls": "max_calls",
}


@dataclass(frozen=True)
class ModelParams:
    blind_distances_m: tuple[float, ...]
    data_size_bits: float
    exec_time_s: float
    delta_b_bps: float
    delta_c: int
    working_period_s: float
    eta: float
    epsilon: float
    sentinel: int
    max_calls: int

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown parameters: {sorted(unknown)}")
        data = dict(data)
        data["blind_distances_m"] = tuple(float(b) for b in data["blind_distances_m"])
        for name in ("delta_c", "sentinel", "max_calls"):
            data[name] = int(data[name])
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["blind_distances_m"] = list(self.blind_distances_m)
        return out

    def override(self, **changes) -> "ModelParams":
        merged = self.to_dict()
        merged.update(changes)
        return ModelParams.from_dict(merged)

    def search_params(self, blind: float, vehicles: float, speed: float) -> SearchParams:
        return SearchParams(
            blind_distance=blind,
            vehicles=vehicles,
            speed=speed,
            data_size=self.data_size_bits,
            exec_time=self.exec_time_s,
            working_period=self.working_period_s,
            eta=self.eta,
            delta_b=self.delta_b_bps,
            delta_c=self.delta_c,
            epsilon=self.epsilon,
            miss_sentinel=self.sentinel,
            variation_sentinel=float(self.sentinel),
            max_calls=self.max_calls,
        )

    @property
    def sim(self) -> SimSettings:
        return SimSettings(self.data_size_bits, self.exec_time_s, self.working_period_s)


def data_path(name: str):
    return resources.files("edgeav") / "data" / name


def load_defaults() -> ModelParams:
    return ModelParams.from_dict(json.loads(data_path("defaults.json").read_text()))


def parse_override(flag: str, value: str):
    """Turn a ``--flag=value`` pair into ``(field, typed value)``."""
    name = FLAG_FIELDS[flag]
    if name == "blind_distances_m":
        return name, [float(v) for v in value.split(",") if v.strip()]
    if name in ("delta_c", "sentinel", "max_calls"):
        return name, int(value)
    return name, float(value)

