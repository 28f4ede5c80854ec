"""Run-time safety monitors for rear-end and lateral constraints."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .feasibility import min_gap, trajectory_gap_segments
from .model import IntersectionGeometry, PiecewiseTrajectory, Relation, SignalFreeError, VehicleRecord

__all__ = [
    "LateralViolation",
    "MonitorViolation",
    "RearEndReport",
    "monitor_lateral",
    "monitor_rear_end",
    "sample_grid",
]

# Rear-end gaps below delta by more than this count as violations.
REAR_END_SLACK = 1e-6
# Relative slack on merging-zone interval comparisons.
LATERAL_SLACK = 1e-9


class MonitorViolation(SignalFreeError):
    """A safety monitor fired during a coordinated run."""


@dataclass(frozen=True)
class RearEndReport:
    min_gap: float
    t_min: float
    violations: list[tuple[float, float]] = field(default_factory=list)
    analytic_min_gap: float = math.nan
    analytic_t_min: float = math.nan

    @property
    def violated(self) -> bool:
        return bool(self.violations)


def sample_grid(t_start: float, t_end: float, step: float) -> np.ndarray:
    """Grid of spacing at most ``step`` covering both endpoints exactly."""
    n = max(1, math.ceil((t_end - t_start) / step - 1e-9))
    return np.linspace(t_start, t_end, n + 1)


def _k_position(traj: PiecewiseTrajectory, t: np.ndarray, L: float) -> np.ndarray:
    out = L + traj.terminal_speed * (t - traj.tm)
    inside = t <= traj.tm
    if inside.any():
        out[inside] = traj.sample(t[inside])[0]
    return out


def monitor_rear_end(
    traj_k: PiecewiseTrajectory,
    traj_i: PiecewiseTrajectory,
    delta: float,
    sample_step: float,
    L: float,
    analytic: bool = True,
) -> RearEndReport:
    """Gap ``p_k - p_i`` over ``i``'s control-zone horizon, on a sampled grid.

    ``k`` keeps its merging-zone speed once past ``L``.  Violation intervals
    are runs of consecutive samples below ``delta - 1e-6``.  With
    ``analytic=True`` the exact minimum from the gap polynomials is also
    reported and a violation it reveals is added as a zero-width interval.
    """
    ts = sample_grid(traj_i.t0, traj_i.tm, sample_step)
    gap = _k_position(traj_k, ts, L) - traj_i.sample(ts)[0]
    threshold = delta - REAR_END_SLACK
    n = int(np.argmin(gap))
    intervals: list[tuple[float, float]] = []
    bad = gap < threshold
    start = None
    for t, b in zip(ts, bad):
        if b and start is None:
            start = t
        if b:
            end = t
        elif start is not None:
            intervals.append((float(start), float(end)))
            start = None
    if start is not None:
        intervals.append((float(start), float(end)))

    a_min = a_t = math.nan
    if analytic:
        m = min_gap(trajectory_gap_segments(traj_k, traj_i, L), L)
        a_min, a_t = m.s_star, m.t_star
        if a_min < threshold and not any(lo <= a_t <= hi for lo, hi in intervals):
            intervals.append((a_t, a_t))
            intervals.sort()
    return RearEndReport(float(gap[n]), float(ts[n]), intervals, a_min, a_t)


@dataclass(frozen=True)
class LateralViolation:
    first_id: int
    second_id: int
    overlap: float


def monitor_lateral(records: Sequence[VehicleRecord], geom: IntersectionGeometry) -> list[LateralViolation]:
    """Conflicting pairs whose merging-zone occupancy overlaps.

    The later vehicle may enter once the earlier one has covered the spacing
    ``r`` inside the zone (``r = S`` means disjoint intervals; touching is fine).
    """
    r = geom.mz_spacing
    ordered = sorted(records, key=lambda rec: (rec.tm, rec.vehicle_id))
    found: list[LateralViolation] = []
    for a, first in enumerate(ordered):
        clear = first.tm + r / first.vm
        for second in ordered[a + 1:]:
            if second.tm >= first.tf:
                break
            if geom.relation_table[(second.lane, first.lane)] is not Relation.CONFLICTING:
                continue
            overlap = clear - second.tm
            if overlap > LATERAL_SLACK * max(1.0, abs(clear)):
                found.append(LateralViolation(first.vehicle_id, second.vehicle_id, overlap))
    return found
