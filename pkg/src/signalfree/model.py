"""Domain types shared by the scheduler, the trajectory solver and the simulator.

Positions are distances along a lane measured from the control-zone entry, so a
vehicle sits at ``p = 0`` when it enters the control zone and at ``p = L`` when
it reaches the merging zone.  Every trajectory polynomial has the absolute-time
form

    p(t) = a t^3 / 6 + b t^2 / 2 + c t + d
    v(t) = a t^2 / 2 + b t + c
    u(t) = a t + b
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np


class SignalFreeError(Exception):
    """Base class for all package errors."""


class DomainError(SignalFreeError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(SignalFreeError, ValueError):
    """Inconsistent geometry, limits or scenario data."""


class InfeasibleError(SignalFreeError):
    """No admissible control meets the requested boundary conditions."""


class NumericalError(SignalFreeError):
    """A numerical routine failed to produce a trustworthy answer."""


class Direction(Enum):
    """Heading of a lane (the direction vehicles travel in)."""

    NORTH = "N"
    EAST = "E"
    SOUTH = "S"
    WEST = "W"

    @property
    def axis(self) -> str:
        return "NS" if self in (Direction.NORTH, Direction.SOUTH) else "EW"


class Relation(Enum):
    """Position of queue predecessor ``i-1`` relative to vehicle ``i``."""

    SAME_DIRECTION_DIFFERENT_LANE = "R"
    SAME_LANE = "L"
    CONFLICTING = "C"
    OPPOSITE_NO_CONFLICT = "O"

    @property
    def code(self) -> int:
        """Integer label j in {1,..,4} handed out by the coordinator."""
        return _RELATION_CODES[self]


_RELATION_CODES = {
    Relation.SAME_DIRECTION_DIFFERENT_LANE: 1,
    Relation.SAME_LANE: 2,
    Relation.CONFLICTING: 3,
    Relation.OPPOSITE_NO_CONFLICT: 4,
}


@dataclass(frozen=True)
class Lane:
    id: str
    heading: Direction


def derive_relation(a: Lane, b: Lane) -> Relation:
    """Relation label of two straight-through lanes."""
    if a.id == b.id:
        return Relation.SAME_LANE
    if a.heading == b.heading:
        return Relation.SAME_DIRECTION_DIFFERENT_LANE
    if a.heading.axis == b.heading.axis:
        return Relation.OPPOSITE_NO_CONFLICT
    return Relation.CONFLICTING


@dataclass(frozen=True)
class IntersectionGeometry:
    """Control-zone length, merging-zone side, safe gap and lane layout.

    ``relation_table`` maps ordered lane-id pairs to a :class:`Relation`; when
    omitted it is derived from lane headings (no turns, no lane changes).
    ``mz_spacing`` is the spacing ``r`` between conflicting vehicles inside
    the merging zone and defaults to ``mz_side``.
    """

    cz_length: float
    mz_side: float
    lanes: tuple[Lane, ...]
    min_gap: float = 10.0
    mz_spacing: float | None = None
    relation_table: Mapping[tuple[str, str], Relation] | None = None

    def __post_init__(self) -> None:
        if not self.cz_length > 0:
            raise ConfigurationError(f"cz_length must be positive, got {self.cz_length}")
        if not self.mz_side > 0:
            raise ConfigurationError(f"mz_side must be positive, got {self.mz_side}")
        if not 0 < self.min_gap < self.mz_side:
            raise ConfigurationError(
                f"min_gap must satisfy 0 < min_gap < mz_side, got {self.min_gap}"
            )
        if self.mz_spacing is None:
            object.__setattr__(self, "mz_spacing", float(self.mz_side))
        if not 0 < self.mz_spacing <= self.mz_side:
            raise ConfigurationError(
                f"mz_spacing must satisfy 0 < r <= mz_side, got {self.mz_spacing}"
            )
        ids = [lane.id for lane in self.lanes]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"duplicate lane ids in {ids}")
        table = dict(self.relation_table or {})
        for a in self.lanes:
            for b in self.lanes:
                table.setdefault((a.id, b.id), derive_relation(a, b))
        for (x, y), rel in table.items():
            if x not in ids or y not in ids:
                raise ConfigurationError(f"relation_table refers to unknown lane pair {(x, y)}")
            if (x == y) != (rel is Relation.SAME_LANE):
                raise ConfigurationError(f"pair {(x, y)} labelled {rel.name}")
            if (rel is Relation.CONFLICTING) != (table[(y, x)] is Relation.CONFLICTING):
                raise ConfigurationError(f"conflict relation of {(x, y)} is not symmetric")
        object.__setattr__(self, "relation_table", table)

    @property
    def lane_ids(self) -> tuple[str, ...]:
        return tuple(lane.id for lane in self.lanes)

    def lane(self, lane_id: str) -> Lane:
        for lane in self.lanes:
            if lane.id == lane_id:
                return lane
        raise ConfigurationError(f"unknown lane {lane_id!r}")


def classify_relation(geom: IntersectionGeometry, lane_prev: str, lane_cur: str) -> Relation:
    """Relation of the vehicle on ``lane_prev`` with respect to one on ``lane_cur``."""
    try:
        return geom.relation_table[(lane_cur, lane_prev)]
    except KeyError:
        raise ConfigurationError(f"unknown lane pair ({lane_prev!r}, {lane_cur!r})") from None


def four_approach_geometry(
    cz_length: float = 400.0,
    mz_side: float = 30.0,
    min_gap: float = 10.0,
    mz_spacing: float | None = None,
) -> IntersectionGeometry:
    """Single-lane, four-approach intersection (one lane per heading)."""
    lanes = tuple(Lane(d.value, d) for d in Direction)
    return IntersectionGeometry(cz_length, mz_side, lanes, min_gap, mz_spacing)


@dataclass(frozen=True)
class VehicleLimits:
    u_min: float
    u_max: float
    v_min: float
    v_max: float

    def __post_init__(self) -> None:
        if not self.u_min < 0 < self.u_max:
            raise ConfigurationError(f"need u_min < 0 < u_max, got {self.u_min}, {self.u_max}")
        if not 0 <= self.v_min < self.v_max:
            raise ConfigurationError(f"need 0 <= v_min < v_max, got {self.v_min}, {self.v_max}")


class ArcKind(Enum):
    UNCONSTRAINED = "unconstrained"
    CONTROL_SATURATED = "control_saturated"
    SPEED_SATURATED = "speed_saturated"


@dataclass(frozen=True)
class Arc:
    """One polynomial piece of a trajectory on ``[t_start, t_end]``.

    The arc is stored by its state at ``t_start`` (position, speed, control)
    and its constant jerk, and evaluated in local time ``t - t_start`` so
    that late absolute times do not cost precision.  The absolute-time
    coefficients (a, b, c, d) are derived on demand.  On a control-saturated
    arc ``a = 0`` and ``(b, c, d)`` are ``(u_sat, f, e)``; on a
    speed-saturated arc ``a = b = 0`` and ``(c, d)`` are ``(v_sat, r)``.
    """

    kind: ArcKind
    t_start: float
    t_end: float
    p0: float
    v0: float
    u0: float
    jerk: float

    @classmethod
    def from_state(
        cls, kind: ArcKind, t_start: float, t_end: float, p: float, v: float, u: float, jerk: float
    ) -> Arc:
        """Build an arc from position, speed, control and jerk at ``t_start``."""
        return cls(kind, t_start, t_end, float(p), float(v), float(u), float(jerk))

    @classmethod
    def from_coefficients(
        cls, kind: ArcKind, t_start: float, t_end: float, a: float, b: float, c: float, d: float
    ) -> Arc:
        """Build an arc from absolute-time coefficients of ``p = a t^3/6 + b t^2/2 + c t + d``."""
        t = t_start
        p = ((a / 6.0 * t + 0.5 * b) * t + c) * t + d
        v = (0.5 * a * t + b) * t + c
        return cls(kind, t_start, t_end, float(p), float(v), float(a * t + b), float(a))

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def a(self) -> float:
        return self.jerk

    @property
    def b(self) -> float:
        return self.u0 - self.jerk * self.t_start

    @property
    def c(self) -> float:
        t = self.t_start
        return self.v0 - self.u0 * t + 0.5 * self.jerk * t * t

    @property
    def d(self) -> float:
        t = self.t_start
        return self.p0 - self.v0 * t + 0.5 * self.u0 * t * t - self.jerk * t**3 / 6.0

    @property
    def u_sat(self) -> float:
        return self.b

    @property
    def f(self) -> float:
        return self.c

    @property
    def e(self) -> float:
        return self.d

    @property
    def v_sat(self) -> float:
        return self.c

    @property
    def r(self) -> float:
        return self.d

    def position(self, t):
        s = t - self.t_start
        return self.p0 + s * (self.v0 + s * (0.5 * self.u0 + s * self.jerk / 6.0))

    def speed(self, t):
        s = t - self.t_start
        return self.v0 + s * (self.u0 + 0.5 * self.jerk * s)

    def control(self, t):
        return self.u0 + self.jerk * (t - self.t_start)

    def state(self, t: float) -> tuple[float, float, float]:
        return float(self.position(t)), float(self.speed(t)), float(self.control(t))

    def local_coefficients(self) -> np.ndarray:
        """``[A, B, C, D]`` of ``p = A s^3 + B s^2 + C s + D`` with ``s = t - t_start``."""
        return np.array([self.jerk / 6.0, 0.5 * self.u0, self.v0, self.p0])

    def position_coefficients(self) -> np.ndarray:
        """Coefficients ``[A, B, C, D]`` of ``p(t) = A t^3 + B t^2 + C t + D`` in absolute time."""
        return np.array([self.a / 6.0, self.b / 2.0, self.c, self.d])

    def cost(self) -> float:
        """Closed-form 0.5 * integral of u^2 over the arc."""
        h = self.duration
        u0, j = self.u0, self.jerk
        return 0.5 * (u0 * u0 * h + u0 * j * h * h + j * j * h**3 / 3.0)


@dataclass(frozen=True)
class PiecewiseTrajectory:
    """Ordered arcs tiling ``[t0, tm]``."""

    arcs: tuple[Arc, ...]
    _starts: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        arcs = tuple(self.arcs)
        if not arcs:
            raise DomainError("a trajectory needs at least one arc")
        for prev, nxt in zip(arcs, arcs[1:]):
            if prev.t_end != nxt.t_start:
                raise DomainError(f"arcs do not tile: {prev.t_end} != {nxt.t_start}")
        for arc in arcs:
            if not arc.t_end >= arc.t_start:
                raise DomainError(f"arc has negative duration: {arc}")
        object.__setattr__(self, "arcs", arcs)
        object.__setattr__(self, "_starts", tuple(arc.t_start for arc in arcs))

    @property
    def t0(self) -> float:
        return self.arcs[0].t_start

    @property
    def tm(self) -> float:
        return self.arcs[-1].t_end

    @property
    def junctions(self) -> tuple[float, ...]:
        return tuple(arc.t_end for arc in self.arcs[:-1])

    @property
    def is_constrained(self) -> bool:
        return any(arc.kind is not ArcKind.UNCONSTRAINED for arc in self.arcs)

    @property
    def initial_speed(self) -> float:
        return float(self.arcs[0].speed(self.t0))

    @property
    def terminal_speed(self) -> float:
        return float(self.arcs[-1].speed(self.tm))

    @property
    def terminal_position(self) -> float:
        return float(self.arcs[-1].position(self.tm))

    def arc_at(self, t: float) -> Arc:
        idx = bisect.bisect_right(self._starts, t) - 1
        return self.arcs[min(max(idx, 0), len(self.arcs) - 1)]

    def _check_domain(self, t: float) -> None:
        slack = 1e-12 * max(1.0, abs(self.t0), abs(self.tm))
        if not (self.t0 - slack <= t <= self.tm + slack):
            raise DomainError(f"t={t} outside trajectory domain [{self.t0}, {self.tm}]")

    def state(self, t: float) -> tuple[float, float, float]:
        self._check_domain(t)
        return self.arc_at(t).state(t)

    def sample(self, ts: Sequence[float] | np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[ArcKind]]:
        """Vectorised evaluation at sorted times inside the domain."""
        ts = np.asarray(ts, dtype=float)
        p = np.empty_like(ts)
        v = np.empty_like(ts)
        u = np.empty_like(ts)
        kinds: list[ArcKind] = []
        idx = np.searchsorted(np.asarray(self._starts), ts, side="right") - 1
        idx = np.clip(idx, 0, len(self.arcs) - 1)
        for n, arc in enumerate(self.arcs):
            mask = idx == n
            if mask.any():
                t = ts[mask]
                p[mask] = arc.position(t)
                v[mask] = arc.speed(t)
                u[mask] = arc.control(t)
        kinds = [self.arcs[n].kind for n in idx]
        return p, v, u, kinds


def eval_state(traj: PiecewiseTrajectory, t: float) -> tuple[float, float, float]:
    """Position, speed and control of ``traj`` at time ``t``."""
    return traj.state(t)


def trajectory_cost(traj: PiecewiseTrajectory) -> float:
    """0.5 * integral of u^2 over the whole trajectory (closed form)."""
    return float(sum(arc.cost() for arc in traj.arcs))


def cruise_trajectory(t0: float, v: float, tm: float) -> PiecewiseTrajectory:
    """Constant-speed trajectory from p=0 at ``t0``; u* = 0."""
    return PiecewiseTrajectory((Arc(ArcKind.UNCONSTRAINED, t0, tm, 0.0, v, 0.0, 0.0),))


@dataclass(frozen=True)
class VehicleRecord:
    """A vehicle admitted by the coordinator, with its scheduled trajectory."""

    vehicle_id: int
    unique_index_w: int
    queue_position_i: int
    relation_to_predecessor: Relation | None
    lane: str
    t0: float
    v0: float
    tm: float
    vm: float
    tf: float
    trajectory: PiecewiseTrajectory
    t_arrival: float | None = None

    def __post_init__(self) -> None:
        if not self.t0 < self.tm < self.tf:
            raise DomainError(f"need t0 < tm < tf, got {self.t0}, {self.tm}, {self.tf}")
        if self.t_arrival is None:
            object.__setattr__(self, "t_arrival", self.t0)

    @classmethod
    def build(
        cls,
        vehicle_id: int,
        w: int,
        i: int,
        relation: Relation | None,
        lane: str,
        trajectory: PiecewiseTrajectory,
        mz_side: float,
        t_arrival: float | None = None,
    ) -> VehicleRecord:
        vm = trajectory.terminal_speed
        if not vm > 0:
            raise InfeasibleError(f"vehicle {vehicle_id} would enter the merging zone at speed {vm}")
        tm = trajectory.tm
        return cls(
            vehicle_id, w, i, relation, lane, trajectory.t0, trajectory.initial_speed,
            tm, vm, tm + mz_side / vm, trajectory, t_arrival,
        )

    def position(self, t: float, cz_length: float) -> float:
        """Position with the constant-speed merging-zone phase appended after ``tm``."""
        if t <= self.tm:
            return self.trajectory.state(t)[0]
        return cz_length + self.vm * (t - self.tm)
