"""Fixed-cycle traffic-light baseline with IDM car following.

The same arrival stream crosses a two-phase signal (east-west, then
north-south, each followed by an all-red interval).  Vehicles follow the
Intelligent Driver Model; a red light acts as a stopped obstacle at the stop
line for every vehicle that can still stop in front of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .config import ScenarioConfig
from .fuel import PROFILES, FuelCoefficients, fuel_rate
from .metrics import MetricsSummary, VehicleMetrics, summarize
from .model import ConfigurationError, IntersectionGeometry
from .scheduler import Arrival
from .sim import generate_arrivals

__all__ = ["IDMParams", "SignalBaseline", "idm_acceleration", "run_baseline", "simulate_baseline"]


@dataclass(frozen=True)
class SignalBaseline:
    """Cycle: EW green, all red, NS green, all red, shifted by ``offset``."""

    green_ew: float
    green_ns: float
    all_red: float = 3.0
    offset: float = 0.0

    def __post_init__(self) -> None:
        if self.green_ew <= 0 or self.green_ns <= 0 or self.all_red < 0:
            raise ConfigurationError("green times must be positive and the all-red time nonnegative")

    @property
    def cycle(self) -> float:
        return self.green_ew + self.green_ns + 2.0 * self.all_red

    def is_green(self, axis: str, t: float) -> bool:
        phase = (t - self.offset) % self.cycle
        if axis == "EW":
            return phase < self.green_ew
        start = self.green_ew + self.all_red
        return start <= phase < start + self.green_ns


@dataclass(frozen=True)
class IDMParams:
    desired_speed: float
    accel: float = 1.0
    decel: float = 2.0
    headway: float = 1.5
    jam_gap: float = 7.0
    exponent: float = 4.0
    max_brake: float = 6.0


def idm_acceleration(v: float, gap: float, dv: float, prm: IDMParams) -> float:
    """IDM acceleration; ``gap`` to the leader (inf if none), ``dv = v - v_leader``."""
    free = 1.0 - (v / prm.desired_speed) ** prm.exponent
    if math.isinf(gap):
        return prm.accel * free
    s_star = prm.jam_gap + max(0.0, v * prm.headway + v * dv / (2.0 * math.sqrt(prm.accel * prm.decel)))
    gap = max(gap, 1e-3)
    return prm.accel * (free - (s_star / gap) ** 2)


@dataclass
class _Car:
    arrival: Arrival
    p: float
    v: float
    fuel: float
    energy: float
    committed: bool = False


def simulate_baseline(
    arrivals: Sequence[Arrival],
    geom: IntersectionGeometry,
    signal: SignalBaseline,
    idm: IDMParams,
    fuel: FuelCoefficients | None = None,
    dt: float = 0.1,
    max_time: float | None = None,
) -> MetricsSummary:
    """Time-stepped run; travel time is measured from control-zone arrival to merging-zone exit.

    A vehicle enters once its lane leader is at least the jam gap downstream
    (time spent waiting idles).  At entry it keeps its speed unless the
    leader is closer than the IDM desired gap, in which case it matches the
    leader's speed.
    """
    coeffs = fuel or PROFILES["kamal_illustrative"]
    L, S = geom.cz_length, geom.mz_side
    end = L + S
    axis = {lane.id: lane.heading.axis for lane in geom.lanes}
    pending = {lane: [a for a in arrivals if a.lane == lane] for lane in geom.lane_ids}
    for lane_arrivals in pending.values():
        lane_arrivals.sort(key=lambda a: a.t0)
    cars: dict[str, list[_Car]] = {lane: [] for lane in geom.lane_ids}
    done: list[VehicleMetrics] = []
    remaining = len(arrivals)
    if max_time is None:
        max_time = (max((a.t0 for a in arrivals), default=0.0)) + 7200.0
    idle = fuel_rate(0.0, 0.0, coeffs)

    n = 0
    while remaining:
        t = n * dt
        if t > max_time:
            raise RuntimeError(f"baseline did not clear within {max_time} s")
        for lane, queue in pending.items():
            lane_cars = cars[lane]
            while queue and queue[0].t0 <= t:
                a = queue[0]
                leader = lane_cars[-1] if lane_cars else None
                if leader is not None and leader.p < idm.jam_gap:
                    break
                queue.pop(0)
                v = a.v0
                if leader is not None and leader.p < idm.jam_gap + v * idm.headway:
                    v = min(v, leader.v)
                wait = t - a.t0
                lane_cars.append(_Car(a, 0.0, v, idle * wait, 0.0))

        for lane, lane_cars in cars.items():
            green = signal.is_green(axis[lane], t)
            accels = []
            for idx, car in enumerate(lane_cars):
                gap, dv = math.inf, 0.0
                if idx > 0:
                    lead = lane_cars[idx - 1]
                    gap, dv = lead.p - car.p, car.v - lead.v
                if not green and not car.committed and car.p < L:
                    to_line = L - car.p
                    if car.v * car.v / (2.0 * idm.max_brake) > to_line:
                        # Too close to stop: the vehicle goes and never re-decides.
                        car.committed = True
                    elif to_line < gap:
                        gap, dv = to_line, car.v
                acc = max(idm_acceleration(car.v, gap, dv, idm), -idm.max_brake)
                accels.append(acc)
            survivors = []
            for car, acc in zip(lane_cars, accels):
                v_new = car.v + acc * dt
                if v_new < 0.0:
                    h = car.v / -acc if acc < 0 else 0.0
                    p_new = car.p + car.v * h + 0.5 * acc * h * h
                    v_new = 0.0
                else:
                    p_new = car.p + 0.5 * (car.v + v_new) * dt
                car.fuel += fuel_rate(car.v, acc, coeffs) * dt
                car.energy += 0.5 * acc * acc * dt
                if p_new >= end:
                    frac = (end - car.p) / (p_new - car.p) if p_new > car.p else 1.0
                    t_exit = t + frac * dt
                    a = car.arrival
                    done.append(VehicleMetrics(a.vehicle_id, a.lane, a.t0, t_exit, t_exit - a.t0, car.energy, car.fuel))
                    remaining -= 1
                else:
                    car.p, car.v = p_new, v_new
                    survivors.append(car)
            cars[lane] = survivors
        n += 1
    return summarize("baseline", done)


def run_baseline(cfg: ScenarioConfig, signal: SignalBaseline | None = None) -> MetricsSummary:
    """Baseline run on the scenario's arrival stream (same seed as the coordinated run)."""
    b = cfg.baseline
    signal = signal or SignalBaseline(b.green_ew, b.green_ns, b.all_red, b.offset)
    idm = IDMParams(
        b.desired_speed or cfg.limits.v_max,
        b.idm_accel,
        b.idm_decel,
        b.idm_headway,
        b.idm_jam_gap,
        b.idm_exponent,
        b.max_brake,
    )
    return simulate_baseline(generate_arrivals(cfg), cfg.to_geometry(), signal, idm, cfg.to_fuel(), b.dt)
