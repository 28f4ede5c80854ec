"""Merging-zone entry scheduling.

Each arriving vehicle gets the earliest merging-zone entry time compatible with
FIFO order, the rear-end gap to its lane predecessor, the lateral constraint
against conflicting vehicles and its own full-throttle lower bound.  Earlier
entries are never revised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

from .model import (
    ConfigurationError,
    InfeasibleError,
    IntersectionGeometry,
    Relation,
    SignalFreeError,
    VehicleLimits,
    classify_relation,
)
from .ocp import dynamics_lower_bound

__all__ = [
    "Arrival",
    "BindingCase",
    "FirstVehiclePolicy",
    "ScheduleEntry",
    "dynamics_lower_bound",
    "first_vehicle_policy",
    "schedule_next",
    "schedule_sequence",
]


class BindingCase(Enum):
    FIRST_VEHICLE = "FirstVehicle"
    PREDECESSOR_ORDER = "PredecessorOrder"
    SAME_LANE_HEADWAY = "SameLaneHeadway"
    CONFLICT_SEPARATION = "ConflictSeparation"
    DYNAMICS_LOWER_BOUND = "DynamicsLowerBound"


@dataclass(frozen=True)
class Arrival:
    vehicle_id: int
    lane: str
    t0: float
    v0: float


@dataclass(frozen=True)
class ScheduleEntry:
    vehicle_id: int
    lane: str
    t0: float
    v0: float
    tm_star: float
    vm: float
    binding_case: BindingCase
    relation: Relation | None
    t_c: float
    t1_bound: float
    t2_bound: float


@dataclass(frozen=True)
class FirstVehiclePolicy:
    """How to pick the entry time of a vehicle facing an empty queue."""

    kind: str = "energy_optimal"
    tm: float | None = None

    KINDS = ("energy_optimal", "throughput_optimal", "explicit")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ConfigurationError(f"unknown first-vehicle policy {self.kind!r}")
        if (self.kind == "explicit") != (self.tm is not None):
            raise ConfigurationError("an explicit policy needs tm, and only it")

    @classmethod
    def energy_optimal(cls) -> FirstVehiclePolicy:
        return cls("energy_optimal")

    @classmethod
    def throughput_optimal(cls) -> FirstVehiclePolicy:
        return cls("throughput_optimal")

    @classmethod
    def explicit(cls, tm: float) -> FirstVehiclePolicy:
        return cls("explicit", float(tm))


def first_vehicle_policy(
    policy: FirstVehiclePolicy, t0: float, v0: float, L: float, limits: VehicleLimits
) -> float:
    """Entry time of the head of an empty queue.

    ``energy_optimal`` cruises at ``v0`` (zero control), ``throughput_optimal``
    uses the full-throttle bound; ``explicit`` must not beat that bound.
    """
    t_c = dynamics_lower_bound(t0, v0, L, limits)[0]
    if policy.kind == "energy_optimal":
        if not v0 > 0:
            raise InfeasibleError("a stopped vehicle has no cruise solution")
        return max(t0 + L / v0, t_c)
    if policy.kind == "throughput_optimal":
        return t_c
    if policy.tm < t_c * (1 - 1e-12):
        raise InfeasibleError(f"explicit tm={policy.tm} is earlier than the lower bound {t_c}")
    return policy.tm


def _lane_predecessor(queue: Sequence[ScheduleEntry], lane: str) -> ScheduleEntry | None:
    for entry in reversed(queue):
        if entry.lane == lane:
            return entry
    return None


def schedule_next(
    queue: Sequence[ScheduleEntry],
    arrival: Arrival,
    geom: IntersectionGeometry,
    limits: VehicleLimits,
    policy: FirstVehiclePolicy = FirstVehiclePolicy(),
) -> ScheduleEntry:
    """Entry time of ``arrival`` given the published schedule of ``queue``.

    The candidate terms are FIFO order, the lane predecessor's headway
    ``t_k + delta / v_k``, the conflict separation ``t_j + r / v_j`` and the
    full-throttle bound.  The conflict term ranges over every conflicting
    vehicle still in the queue, not only ``i-1``: with a run of compatible
    vehicles ahead, a conflicting vehicle further up the queue can still be
    inside the merging zone.

    The returned ``vm`` is provisional (``v0``, or the full-throttle speed when
    the lower bound binds); callers replace it with the terminal speed of the
    solved trajectory before publishing the entry.
    """
    L = geom.cz_length
    t_c, vm_bound, t1, t2 = dynamics_lower_bound(arrival.t0, arrival.v0, L, limits)

    if not queue:
        tm = first_vehicle_policy(policy, arrival.t0, arrival.v0, L, limits)
        vm = vm_bound if tm == t_c else arrival.v0
        return ScheduleEntry(
            arrival.vehicle_id, arrival.lane, arrival.t0, arrival.v0, tm, vm,
            BindingCase.FIRST_VEHICLE, None, t_c, t1, t2,
        )

    prev = queue[-1]
    relation = classify_relation(geom, prev.lane, arrival.lane)
    candidates: list[tuple[float, BindingCase]] = [(prev.tm_star, BindingCase.PREDECESSOR_ORDER)]

    k = _lane_predecessor(queue, arrival.lane)
    if relation is Relation.SAME_LANE and k is not prev:
        raise SignalFreeError("same-lane predecessor lookup disagrees with queue order")
    if k is not None:
        candidates.append((k.tm_star + geom.min_gap / k.vm, BindingCase.SAME_LANE_HEADWAY))

    clearance = -math.inf
    for entry in queue:
        if classify_relation(geom, entry.lane, arrival.lane) is Relation.CONFLICTING:
            clearance = max(clearance, entry.tm_star + geom.mz_spacing / entry.vm)
    if clearance > -math.inf:
        candidates.append((clearance, BindingCase.CONFLICT_SEPARATION))

    candidates.append((t_c, BindingCase.DYNAMICS_LOWER_BOUND))
    tm, case = max(candidates, key=lambda c: c[0])
    vm = vm_bound if case is BindingCase.DYNAMICS_LOWER_BOUND else arrival.v0
    return ScheduleEntry(
        arrival.vehicle_id, arrival.lane, arrival.t0, arrival.v0, tm, vm, case, relation, t_c, t1, t2,
    )


def schedule_sequence(
    arrivals: Sequence[Arrival],
    geom: IntersectionGeometry,
    limits: VehicleLimits,
    policy: FirstVehiclePolicy = FirstVehiclePolicy(),
    mz_speeds: Sequence[float] | None = None,
) -> list[ScheduleEntry]:
    """Schedule a FIFO sequence of arrivals that all share one queue.

    ``mz_speeds`` fixes each vehicle's merging-zone speed; without it the
    provisional speed from :func:`schedule_next` is kept.
    """
    queue: list[ScheduleEntry] = []
    for n, arrival in enumerate(arrivals):
        entry = schedule_next(queue, arrival, geom, limits, policy)
        if mz_speeds is not None:
            entry = replace(entry, vm=float(mz_speeds[n]))
        queue.append(entry)
    return queue

