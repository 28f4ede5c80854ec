"""Event-driven simulation of a coordinated signal-free intersection.

Vehicles arrive at the control-zone entry, are scheduled and given an
energy-optimal trajectory once, cross the merging zone at constant speed and
leave.  Controls change only at events; trajectories are sampled on a fixed
grid for output and for the safety monitors.
"""

from __future__ import annotations

import heapq
import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Any, Sequence

import numpy as np

from .config import ScenarioConfig
from .feasibility import PredecessorContext, is_feasible
from .fuel import PROFILES, FuelCoefficients, fuel_rate, fuel_used
from .io import TRAJECTORY_HEADER
from .metrics import MetricsSummary, VehicleMetrics, summarize
from .model import (
    ConfigurationError,
    InfeasibleError,
    IntersectionGeometry,
    Relation,
    SignalFreeError,
    VehicleLimits,
    VehicleRecord,
    classify_relation,
)
from .monitors import (
    LateralViolation,
    MonitorViolation,
    RearEndReport,
    monitor_lateral,
    monitor_rear_end,
    sample_grid,
)
from .ocp import BoundaryConditions, solve_with_constraints
from .scheduler import Arrival, FirstVehiclePolicy, ScheduleEntry, schedule_next

__all__ = [
    "AdmissionRejected",
    "ArrivalProcess",
    "CoordinatorState",
    "Event",
    "EventLog",
    "InformationSet",
    "RunResult",
    "Settings",
    "TRAJECTORY_HEADER",
    "admit_vehicle",
    "generate_arrivals",
    "run",
    "simulate",
]


class AdmissionRejected(SignalFreeError):
    """The coordinator could not admit an arrival at this time."""

    def __init__(self, reason: str, **details: Any) -> None:
        super().__init__(reason)
        self.reason = reason
        self.details = details


class EventKind(IntEnum):
    """Event types; the value is the processing priority at equal times."""

    MZ_EXIT = 0
    MZ_ENTRY = 1
    ARRIVAL = 2


@dataclass(frozen=True)
class Event:
    t: float
    kind: str
    vehicle_id: int
    data: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "kind": self.kind, "vehicle_id": self.vehicle_id, **self.data}, sort_keys=True)


@dataclass
class EventLog:
    events: list[Event] = field(default_factory=list)

    def add(self, t: float, kind: str, vehicle_id: int, **data: Any) -> None:
        self.events.append(Event(float(t), kind, vehicle_id, data))

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)


class ArrivalProcess:
    """Arrival streams; ``vehicle_id`` follows ``(t0, lane order)``."""

    @staticmethod
    def poisson(
        lane_ids: Sequence[str],
        rate_veh_per_h: float,
        horizon: float,
        v_lo: float,
        v_hi: float,
        rng: np.random.Generator,
    ) -> list[Arrival]:
        mean_gap = 3600.0 / rate_veh_per_h
        raw = []
        for order, lane in enumerate(lane_ids):
            t = 0.0
            while True:
                t += rng.exponential(mean_gap)
                if t >= horizon:
                    break
                raw.append((t, order, lane, float(rng.uniform(v_lo, v_hi))))
        raw.sort()
        return [Arrival(n + 1, lane, t, v0) for n, (t, _, lane, v0) in enumerate(raw)]

    @staticmethod
    def deterministic(vehicles: Sequence[tuple[float, float, str]], lane_ids: Sequence[str]) -> list[Arrival]:
        order = {lane: n for n, lane in enumerate(lane_ids)}
        last: dict[str, float] = {}
        for t0, _, lane in vehicles:
            if lane not in order:
                raise ConfigurationError(f"unknown lane {lane!r}")
            if lane in last and not t0 > last[lane]:
                raise ConfigurationError(f"arrival times on lane {lane!r} must be strictly increasing")
            last[lane] = t0
        raw = sorted((t0, order[lane], lane, v0) for t0, v0, lane in vehicles)
        return [Arrival(n + 1, lane, t, v0) for n, (t, _, lane, v0) in enumerate(raw)]


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    arrivals, ties = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(arrivals), np.random.default_rng(ties)


def generate_arrivals(cfg: ScenarioConfig) -> list[Arrival]:
    arr = cfg.arrivals
    lane_ids = cfg.to_geometry().lane_ids
    if arr.kind == "poisson":
        rng, _ = _streams(arr.seed)
        return ArrivalProcess.poisson(lane_ids, arr.rate_veh_per_h, arr.horizon, arr.v_lo, arr.v_hi, rng)
    return ArrivalProcess.deterministic([(v.t0, v.v0, v.lane) for v in arr.vehicles], lane_ids)


@dataclass(frozen=True)
class Settings:
    sample_step: float = 0.1
    retry_delay: float = 0.5
    max_retries: int = 2000
    min_mz_speed: float = 1.0
    feasibility_tolerance: float = 1e-9
    reset_counter_when_empty: bool = False

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> Settings:
        return cls(**cfg.simulation.model_dump())


@dataclass(frozen=True)
class InformationSet:
    """What the coordinator hands vehicle ``i`` when it is admitted."""

    vehicle_id: int
    w: int
    relation: Relation | None
    p: float
    v: float
    gap: float | None
    tm_star: float


@dataclass
class CoordinatorState:
    rng_seed: int = 0
    cumulative_count_M: int = 0
    queue: list[VehicleRecord] = field(default_factory=list)
    entries: list[ScheduleEntry] = field(default_factory=list)
    last_in_lane: dict[str, VehicleRecord] = field(default_factory=dict)

    def lane_predecessor(self, lane: str) -> VehicleRecord | None:
        k = self.last_in_lane.get(lane)
        return k if k is not None and any(rec is k for rec in self.queue) else None

    def remove(self, vehicle_id: int, allow_reset: bool = False) -> None:
        keep = [n for n, rec in enumerate(self.queue) if rec.vehicle_id != vehicle_id]
        if len(keep) == len(self.queue):
            raise SignalFreeError(f"vehicle {vehicle_id} is not in the queue")
        self.queue = [self.queue[n] for n in keep]
        self.entries = [self.entries[n] for n in keep]
        if allow_reset and not self.queue:
            self.cumulative_count_M = 0


def admit_vehicle(
    coord: CoordinatorState,
    arrival: Arrival,
    geom: IntersectionGeometry,
    limits: VehicleLimits,
    policy: FirstVehiclePolicy = FirstVehiclePolicy(),
    settings: Settings = Settings(),
    t_arrival: float | None = None,
) -> tuple[VehicleRecord, InformationSet]:
    """Schedule, solve and check one arrival; on success it joins the queue.

    Raises :class:`AdmissionRejected` (queue untouched) when the arrival has
    no admissible trajectory, would enter the merging zone too slowly, or
    would violate the rear-end constraint behind its lane predecessor.
    """
    L = geom.cz_length
    try:
        entry = schedule_next(coord.entries, arrival, geom, limits, policy)
        traj = solve_with_constraints(BoundaryConditions(arrival.t0, arrival.v0, entry.tm_star, L), limits)
    except InfeasibleError as err:
        raise AdmissionRejected("no_trajectory", message=str(err)) from None
    vm = traj.terminal_speed
    if vm < settings.min_mz_speed:
        raise AdmissionRejected("slow_merge", vm=vm)

    k = coord.lane_predecessor(arrival.lane)
    gap = None
    if k is not None:
        ctx = PredecessorContext.from_trajectory(k.trajectory, L, geom.mz_side, geom.min_gap, limits)
        check = is_feasible(ctx, arrival.t0, arrival.v0, entry.tm_star, tolerance=settings.feasibility_tolerance)
        if not check.feasible:
            raise AdmissionRejected("rear_end", s_star=check.s_star, t_star=check.t_star, case=check.case_tag)
        gap = k.position(arrival.t0, L)

    w = coord.cumulative_count_M + 1
    i = len(coord.queue) + 1
    relation = classify_relation(geom, coord.entries[-1].lane, arrival.lane) if coord.entries else None
    record = VehicleRecord.build(
        arrival.vehicle_id, w, i, relation, arrival.lane, traj, geom.mz_side, t_arrival,
    )
    coord.cumulative_count_M = w
    coord.queue.append(record)
    coord.entries.append(replace(entry, vm=vm))
    coord.last_in_lane[arrival.lane] = record
    info = InformationSet(arrival.vehicle_id, w, relation, 0.0, arrival.v0, gap, entry.tm_star)
    return record, info


@dataclass
class RunResult:
    name: str
    records: list[VehicleRecord]
    entries: list[ScheduleEntry]
    infos: list[InformationSet]
    log: EventLog
    summary: MetricsSummary
    rear_end: dict[int, RearEndReport]
    lateral: list[LateralViolation]
    abandoned: list[int]
    sample_step: float
    mz_side: float
    cz_length: float

    @property
    def violated(self) -> bool:
        return bool(self.lateral) or any(rep.violated for rep in self.rear_end.values())

    def trajectory_rows(self) -> list[tuple]:
        return trajectory_rows(self.records, self.sample_step, self.cz_length)


def trajectory_rows(records: Sequence[VehicleRecord], step: float, L: float) -> list[tuple]:
    """Rows ``(t, vehicle_id, lane, zone, p, v, u, arc_kind)`` on the global grid ``n * step``."""
    rows = []
    for rec in sorted(records, key=lambda r: r.vehicle_id):
        n_lo = math.ceil(rec.t0 / step - 1e-9)
        n_hi = math.floor(rec.tf / step + 1e-9)
        ts = np.arange(n_lo, n_hi + 1) * step
        ts = ts[(ts >= rec.t0) & (ts <= rec.tf)]
        cz = ts <= rec.tm
        p, v, u, kinds = rec.trajectory.sample(ts[cz])
        for t, pp, vv, uu, kind in zip(ts[cz], p, v, u, kinds):
            rows.append((float(t), rec.vehicle_id, rec.lane, "CZ", float(pp), float(vv), float(uu), kind.value))
        for t in ts[~cz]:
            rows.append((float(t), rec.vehicle_id, rec.lane, "MZ", L + rec.vm * (t - rec.tm), rec.vm, 0.0, "mz_cruise"))
    return rows


def vehicle_metrics(rec: VehicleRecord, step: float, coeffs: FuelCoefficients) -> VehicleMetrics:
    """Travel time from first arrival, control energy and fuel of one vehicle.

    Time spent waiting for admission is charged at the idle fuel rate.
    """
    ts = sample_grid(rec.t0, rec.tm, step)
    _, v, u, _ = rec.trajectory.sample(ts)
    fuel = fuel_used(ts, v, u, coeffs)
    fuel += fuel_rate(rec.vm, 0.0, coeffs) * (rec.tf - rec.tm)
    fuel += fuel_rate(0.0, 0.0, coeffs) * (rec.t0 - rec.t_arrival)
    energy = sum(arc.cost() for arc in rec.trajectory.arcs)
    return VehicleMetrics(rec.vehicle_id, rec.lane, rec.t_arrival, rec.tf, rec.tf - rec.t_arrival, energy, fuel)


def simulate(
    arrivals: Sequence[Arrival],
    geom: IntersectionGeometry,
    limits: VehicleLimits,
    policy: FirstVehiclePolicy = FirstVehiclePolicy(),
    settings: Settings = Settings(),
    fuel: FuelCoefficients | None = None,
    seed: int = 0,
    name: str = "scenario",
    strict: bool = True,
) -> RunResult:
    """Run the coordinated intersection over a fixed arrival stream.

    Equal-time events are ordered exits first, then merging-zone entries, then
    arrivals.  Simultaneous arrivals are ordered by a seeded random draw,
    simultaneous zone events by admission order.  A rejected
    arrival retries after ``retry_delay`` with its original entry speed, and
    later arrivals on its lane wait behind it.  With ``strict`` a monitor
    violation raises :class:`MonitorViolation`.
    """
    coeffs = fuel or PROFILES["kamal_illustrative"]
    _, ties = _streams(seed)
    coord = CoordinatorState(rng_seed=seed)
    log = EventLog()
    heap: list = []
    seq = 0

    def push(t: float, kind: EventKind, payload: Any, order: float | None = None) -> None:
        nonlocal seq
        tie = float(ties.random()) if order is None else order
        heapq.heappush(heap, (t, int(kind), tie, seq, payload))
        seq += 1

    first_seen: dict[int, float] = {}
    tries: dict[int, int] = {}
    waiting: dict[str, deque[int]] = {lane: deque() for lane in geom.lane_ids}
    by_id = {a.vehicle_id: a for a in arrivals}
    for a in arrivals:
        push(a.t0, EventKind.ARRIVAL, (a.vehicle_id, False))

    records: list[VehicleRecord] = []
    entries: list[ScheduleEntry] = []
    infos: list[InformationSet] = []
    predecessor: dict[int, VehicleRecord] = {}
    abandoned: list[int] = []
    counts = {"arrived": 0, "admitted": 0, "exited": 0, "abandoned": 0, "rejections": 0}

    def check_conservation() -> None:
        in_wait = sum(len(q) for q in waiting.values())
        if counts["arrived"] != counts["admitted"] + in_wait + counts["abandoned"]:
            raise SignalFreeError(f"vehicle conservation broken: {counts}, waiting={in_wait}")
        if counts["admitted"] != counts["exited"] + len(coord.queue):
            raise SignalFreeError(f"vehicle conservation broken: {counts}, in system={len(coord.queue)}")

    while heap:
        t, kind, _, _, payload = heapq.heappop(heap)
        if kind == EventKind.MZ_EXIT:
            coord.remove(payload, settings.reset_counter_when_empty)
            counts["exited"] += 1
            log.add(t, "mz_exit", payload)
        elif kind == EventKind.MZ_ENTRY:
            log.add(t, "mz_entry", payload)
        else:
            vid, is_retry = payload
            base = by_id[vid]
            lane_wait = waiting[base.lane]
            if not is_retry:
                counts["arrived"] += 1
                first_seen[vid] = t
                log.add(t, "arrival", vid, lane=base.lane, v0=base.v0)
                if lane_wait:
                    lane_wait.append(vid)
                    check_conservation()
                    continue
                lane_wait.append(vid)
            attempt = replace(base, t0=t)
            k = coord.lane_predecessor(base.lane)
            try:
                rec, info = admit_vehicle(coord, attempt, geom, limits, policy, settings, first_seen[vid])
            except AdmissionRejected as rej:
                counts["rejections"] += 1
                tries[vid] = tries.get(vid, 0) + 1
                if tries[vid] > settings.max_retries:
                    lane_wait.popleft()
                    counts["abandoned"] += 1
                    abandoned.append(vid)
                    log.add(t, "abandon", vid, reason=rej.reason)
                    if lane_wait:
                        push(t + settings.retry_delay, EventKind.ARRIVAL, (lane_wait[0], True))
                else:
                    log.add(t, "reject", vid, reason=rej.reason, retry_at=t + settings.retry_delay)
                    push(t + settings.retry_delay, EventKind.ARRIVAL, (vid, True))
            else:
                lane_wait.popleft()
                counts["admitted"] += 1
                records.append(rec)
                entries.append(coord.entries[-1])
                infos.append(info)
                if k is not None:
                    predecessor[vid] = k
                log.add(
                    t, "admit", vid,
                    w=rec.unique_index_w, i=rec.queue_position_i,
                    relation=None if rec.relation_to_predecessor is None else rec.relation_to_predecessor.value,
                    tm=rec.tm, vm=rec.vm, tf=rec.tf,
                    binding=coord.entries[-1].binding_case.value,
                    arcs=[arc.kind.value for arc in rec.trajectory.arcs],
                )
                push(rec.tm, EventKind.MZ_ENTRY, vid, rec.unique_index_w)
                push(rec.tf, EventKind.MZ_EXIT, vid, rec.unique_index_w)
                if lane_wait:
                    push(t + settings.retry_delay, EventKind.ARRIVAL, (lane_wait[0], True))
        check_conservation()

    L = geom.cz_length
    rear_end = {
        vid: monitor_rear_end(k.trajectory, rec.trajectory, geom.min_gap, settings.sample_step, L)
        for rec in records
        for vid, k in [(rec.vehicle_id, predecessor.get(rec.vehicle_id))]
        if k is not None
    }
    lateral = monitor_lateral(records, geom)
    summary = summarize(
        "coordinated", [vehicle_metrics(rec, settings.sample_step, coeffs) for rec in records], counts["rejections"]
    )
    result = RunResult(
        name, records, entries, infos, log, summary, rear_end, lateral, abandoned,
        settings.sample_step, geom.mz_side, L,
    )
    if strict and result.violated:
        bad = [f"rear-end {vid}: min gap {rep.min_gap:.6g} at t={rep.t_min:.6g}" for vid, rep in rear_end.items() if rep.violated]
        bad += [f"lateral {v.first_id}/{v.second_id}: overlap {v.overlap:.6g} s" for v in lateral]
        raise MonitorViolation("safety monitor fired: " + "; ".join(bad))
    return result


def run(cfg: ScenarioConfig, strict: bool = True) -> RunResult:
    """Coordinated run of a validated scenario."""
    return simulate(
        generate_arrivals(cfg),
        cfg.to_geometry(),
        cfg.to_limits(),
        cfg.to_policy(),
        Settings.from_config(cfg),
        cfg.to_fuel(),
        cfg.arrivals.seed,
        cfg.name,
        strict,
    )
