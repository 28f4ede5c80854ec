"""Per-vehicle and aggregate performance figures."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

__all__ = ["Comparison", "MetricsSummary", "VehicleMetrics", "compare", "summarize"]


@dataclass(frozen=True)
class VehicleMetrics:
    vehicle_id: int
    lane: str
    t_arrival: float
    t_exit: float
    travel_time: float
    energy: float
    fuel: float


@dataclass(frozen=True)
class MetricsSummary:
    mode: str
    n_vehicles: int
    n_rejections: int
    mean_travel_time: float
    mean_fuel: float
    mean_energy: float
    total_fuel: float
    total_energy: float
    vehicles: list[VehicleMetrics] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(mode: str, vehicles: Sequence[VehicleMetrics], n_rejections: int = 0) -> MetricsSummary:
    vehicles = sorted(vehicles, key=lambda m: m.vehicle_id)
    if not vehicles:
        return MetricsSummary(mode, 0, n_rejections, 0.0, 0.0, 0.0, 0.0, 0.0, [])
    tt = np.array([m.travel_time for m in vehicles])
    fuel = np.array([m.fuel for m in vehicles])
    energy = np.array([m.energy for m in vehicles])
    return MetricsSummary(
        mode,
        len(vehicles),
        n_rejections,
        float(tt.mean()),
        float(fuel.mean()),
        float(energy.mean()),
        float(fuel.sum()),
        float(energy.sum()),
        list(vehicles),
    )


@dataclass(frozen=True)
class Comparison:
    """Relative improvement ``(baseline - coordinated) / baseline``."""

    fuel_improvement: float
    travel_time_improvement: float
    coordinated: MetricsSummary
    baseline: MetricsSummary

    def to_dict(self) -> dict:
        return {
            "fuel_improvement": self.fuel_improvement,
            "travel_time_improvement": self.travel_time_improvement,
            "coordinated": self.coordinated.to_dict(),
            "baseline": self.baseline.to_dict(),
        }


def _ratio(base: float, coord: float) -> float:
    return (base - coord) / base if base > 0 else 0.0


def compare(coordinated: MetricsSummary, baseline: MetricsSummary) -> Comparison:
    return Comparison(
        _ratio(baseline.mean_fuel, coordinated.mean_fuel),
        _ratio(baseline.mean_travel_time, coordinated.mean_travel_time),
        coordinated,
        baseline,
    )
