"""Closed-form energy-optimal trajectories over the control zone.

Each vehicle minimises ``0.5 * integral u^2`` from ``(t0, p=0, v0)`` to
``p(tm) = L`` with free terminal speed, so the costate condition gives
``u(tm) = 0``.  Without active limits the control is affine in time and the
four integration constants come from a 4x4 linear system.  With limits the
optimum pieces together a control-saturated arc, an unconstrained arc and a
speed-saturated arc; all junction times have closed forms derived below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    Arc,
    ArcKind,
    DomainError,
    InfeasibleError,
    PiecewiseTrajectory,
    VehicleLimits,
)

# Relative slack when deciding whether a limit is violated.
_LIMIT_SLACK = 1e-12
# Relative slack on the squared junction quantities before declaring infeasible.
_ROOT_SLACK = 1e-9


@dataclass(frozen=True)
class BoundaryConditions:
    t0: float
    v0: float
    tm: float
    L: float
    terminal_costate_zero: bool = True
    vm: float | None = None

    def __post_init__(self) -> None:
        if not self.tm > self.t0:
            raise DomainError(f"degenerate horizon: tm={self.tm} <= t0={self.t0}")
        if not self.L > 0:
            raise DomainError(f"L must be positive, got {self.L}")
        if self.v0 < 0:
            raise DomainError(f"v0 must be nonnegative, got {self.v0}")
        if not self.terminal_costate_zero or self.vm is not None:
            raise NotImplementedError("only the free-terminal-speed problem is supported")

    @property
    def horizon(self) -> float:
        return self.tm - self.t0


# The 4x4 system in time scaled by T = tm - t0 and position scaled by L, so
# that t0 -> 0 and tm -> 1.  Rows: p(0) = 0, v(0) = v0, p(1) = 1, u(1) = 0.
_SCALED_SYSTEM = np.array(
    [
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
        [1.0 / 6.0, 0.5, 1.0, 1.0],
        [-1.0, -1.0, 0.0, 0.0],
    ]
)


def _unconstrained_arc(t0: float, p0: float, v0: float, tm: float, L: float) -> Arc:
    T = tm - t0
    dist = L - p0
    if T <= 0:
        raise DomainError(f"degenerate horizon: tm={tm} <= t={t0}")
    if dist == 0 and v0 == 0:
        return Arc.from_state(ArcKind.UNCONSTRAINED, t0, tm, p0, 0.0, 0.0, 0.0)
    scale = dist if dist != 0 else v0 * T
    rhs = np.array([0.0, v0 * T / scale, dist / scale, 0.0])
    a_s, b_s, c_s, _ = np.linalg.solve(_SCALED_SYSTEM, rhs)
    jerk = scale * a_s / T**3
    u0 = scale * b_s / T**2
    v_start = scale * c_s / T
    return Arc.from_state(ArcKind.UNCONSTRAINED, t0, tm, p0, v_start, u0, jerk)


def solve_unconstrained(bc: BoundaryConditions) -> Arc:
    """Affine-control solution ``u = a t + b`` ignoring speed and control limits."""
    return _unconstrained_arc(bc.t0, 0.0, bc.v0, bc.tm, bc.L)


def resolve_feedback(bc: BoundaryConditions, t: float, p: float, v: float) -> Arc:
    """Re-solve the unconstrained problem from the measured state at time ``t``."""
    if not bc.t0 <= t < bc.tm:
        raise DomainError(f"t={t} outside [t0, tm) = [{bc.t0}, {bc.tm})")
    if p > bc.L:
        raise DomainError(f"position {p} already beyond L={bc.L}")
    return _unconstrained_arc(t, p, v, bc.tm, bc.L)


def dynamics_lower_bound(t0: float, v0: float, L: float, limits: VehicleLimits) -> tuple[float, float, float, float]:
    """Earliest merging-zone arrival under full throttle.

    Returns ``(t_c, vm_at_bound, t1, t2)`` where ``t1`` is the
    accelerate-then-cruise-at-v_max bound and ``t2`` the
    full-throttle-all-the-way bound; ``t_c`` picks whichever one applies.
    """
    u_max, v_max = limits.u_max, limits.v_max
    if v0 > v_max * (1 + _LIMIT_SLACK):
        raise InfeasibleError(f"entry speed {v0} exceeds v_max={v_max}")
    v0 = min(v0, v_max)
    t1 = t0 + L / v_max + (v_max - v0) ** 2 / (2.0 * u_max * v_max)
    v_reach = math.sqrt(2.0 * L * u_max + v0 * v0)
    t2 = t0 + (v_reach - v0) / u_max
    if (v_max * v_max - v0 * v0) / (2.0 * u_max) <= L:
        return t1, v_max, t1, t2
    return t2, v_reach, t1, t2


def _build(t0: float, v0: float, pieces: list[tuple[ArcKind, float, float, float]]) -> PiecewiseTrajectory:
    """Chain arcs given as (kind, duration, control at start, jerk) from p=0."""
    arcs: list[Arc] = []
    t, p, v = t0, 0.0, v0
    for kind, h, u, j in pieces:
        if h <= 0:
            continue
        arc = Arc.from_state(kind, t, t + h, p, v, u, j)
        arcs.append(arc)
        t = t + h
        p = p + v * h + 0.5 * u * h * h + j * h**3 / 6.0
        v = v + u * h + 0.5 * j * h * h
    return PiecewiseTrajectory(tuple(arcs))


def _fix_end(traj: PiecewiseTrajectory, tm: float) -> PiecewiseTrajectory:
    """Snap the last junction onto ``tm`` exactly (durations are summed in floats)."""
    last = traj.arcs[-1]
    if last.t_end == tm:
        return traj
    fixed = Arc(last.kind, last.t_start, tm, last.p0, last.v0, last.u0, last.jerk)
    return PiecewiseTrajectory(traj.arcs[:-1] + (fixed,))


def _sqrt_nonneg(x: float, scale: float, what: str) -> float:
    if x < 0:
        if x < -_ROOT_SLACK * scale:
            raise InfeasibleError(what)
        return 0.0
    return math.sqrt(x)


def solve_with_constraints(bc: BoundaryConditions, limits: VehicleLimits) -> PiecewiseTrajectory:
    """Energy-optimal trajectory respecting ``u`` and ``v`` limits.

    With a free terminal speed the unconstrained control ``k (tm - t)`` has a
    fixed sign, so at most one control bound ``u_b`` and one speed bound
    ``v_b`` of that sign can become active.  The arc sequence is always

        [u = u_b]  ->  unconstrained  ->  [v = v_b]

    with the control continuous across the first junction and vanishing when
    the speed bound is reached.  Any piece may be absent.
    """
    t0, v0, tm, L = bc.t0, bc.v0, bc.tm, bc.L
    T = tm - t0
    if v0 > limits.v_max * (1 + _LIMIT_SLACK) or v0 < limits.v_min * (1 - _LIMIT_SLACK):
        raise InfeasibleError(f"entry speed {v0} outside [{limits.v_min}, {limits.v_max}]")
    v0 = min(max(v0, limits.v_min), limits.v_max)

    D = L - v0 * T
    if D == 0.0:
        return _build(t0, v0, [(ArcKind.UNCONSTRAINED, T, 0.0, 0.0)])
    accelerating = D > 0
    ub = limits.u_max if accelerating else limits.u_min
    vb = limits.v_max if accelerating else limits.v_min
    sign = 1.0 if accelerating else -1.0

    def beyond(x: float, bound: float) -> bool:
        return sign * (x - bound) > _LIMIT_SLACK * abs(bound) + 1e-15

    k = 3.0 * D / T**3
    u_start = k * T
    v_end = v0 + 1.5 * D / T
    u_bad = beyond(u_start, ub)
    v_bad = beyond(v_end, vb)

    if not u_bad and not v_bad:
        return _fix_end(_build(t0, v0, [(ArcKind.UNCONSTRAINED, T, u_start, -k)]), tm)

    if v_bad and vb != v0:
        # Unconstrained arc reaching v_b with u = 0, then cruise at v_b.
        tau = 3.0 * (vb * T - L) / (vb - v0)
        u_tau = 2.0 * (vb - v0) / tau if tau > 0 else math.inf * sign
        if 0 < tau <= T and not beyond(u_tau, ub):
            pieces = [
                (ArcKind.UNCONSTRAINED, tau, u_tau, -u_tau / tau),
                (ArcKind.SPEED_SATURATED, T - tau, 0.0, 0.0),
            ]
            return _fix_end(_build(t0, v0, pieces), tm)
    elif not v_bad:
        # Saturated control, then an affine arc of length h down to u = 0.
        h = _sqrt_nonneg(3.0 * T * T - 6.0 * D / ub, T * T, f"horizon {T} too short for L={L} under u={ub}")
        h = min(h, T)
        v_final = v0 + ub * (T - 0.5 * h)
        if not beyond(v_final, vb):
            pieces = [
                (ArcKind.CONTROL_SATURATED, T - h, ub, 0.0),
                (ArcKind.UNCONSTRAINED, h, ub, -ub / h if h > 0 else 0.0),
            ]
            return _fix_end(_build(t0, v0, pieces), tm)

    # Both bounds: u_b for t1, affine down to zero over 2e reaching v_b, cruise.
    if vb == v0:
        raise InfeasibleError(f"cannot change speed beyond bound {vb} from v0={v0}")
    W = (vb - v0) / ub
    e = _sqrt_nonneg(
        6.0 * (vb * T - L) / ub - 3.0 * W * W,
        max(W * W, T * T),
        f"tm={tm} is outside the reachable window for L={L}, v0={v0}",
    )
    e = min(e, W)
    t_sat = W - e
    h = 2.0 * e
    if t_sat + h > T * (1 + 1e-12):
        raise InfeasibleError(f"no admissible arc composition for tm={tm}")
    pieces = [
        (ArcKind.CONTROL_SATURATED, t_sat, ub, 0.0),
        (ArcKind.UNCONSTRAINED, h, ub, -ub / h if h > 0 else 0.0),
        (ArcKind.SPEED_SATURATED, T - t_sat - h, 0.0, 0.0),
    ]
    return _fix_end(_build(t0, v0, pieces), tm)


def solve(bc: BoundaryConditions, limits: VehicleLimits | None = None) -> PiecewiseTrajectory:
    if limits is None:
        return PiecewiseTrajectory((solve_unconstrained(bc),))
    return solve_with_constraints(bc, limits)
