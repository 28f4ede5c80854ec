"""Rear-end feasibility of a control-zone entry ``(tau, upsilon)``.

The gap ``s(t) = p_k(t) - p_i(t)`` between a vehicle ``i`` and the vehicle
``k`` ahead of it in the same lane is a cubic in ``t`` on every interval where
both trajectories are single polynomials.  Splitting ``[tau, tm_i]`` at every
arc junction of either vehicle and at ``k``'s merging-zone entry gives a list
of :class:`GapPolynomial` segments whose minima are found exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

from .model import (
    Arc,
    ArcKind,
    DomainError,
    InfeasibleError,
    PiecewiseTrajectory,
    VehicleLimits,
    cruise_trajectory,
)
from .ocp import BoundaryConditions, dynamics_lower_bound, solve_with_constraints

# |A| below this (scaled by segment length^3 / L) is treated as zero.
_LEADING_EPS = 1e-12


@dataclass(frozen=True)
class PredecessorContext:
    """What vehicle ``i`` knows about the vehicle ``k`` ahead of it in its lane."""

    t_k0: float
    v_k0: float
    t_km: float
    v_km: float
    k_traj: PiecewiseTrajectory
    L: float
    S: float
    delta: float
    limits: VehicleLimits

    def __post_init__(self) -> None:
        if not self.t_k0 < self.t_km:
            raise DomainError(f"need t_k0 < t_km, got {self.t_k0}, {self.t_km}")
        if not 0 < self.delta < self.S:
            raise DomainError(f"need 0 < delta < S, got {self.delta}, {self.S}")

    @classmethod
    def from_trajectory(
        cls, traj: PiecewiseTrajectory, L: float, S: float, delta: float, limits: VehicleLimits
    ) -> PredecessorContext:
        return cls(traj.t0, traj.initial_speed, traj.tm, traj.terminal_speed, traj, L, S, delta, limits)

    @classmethod
    def constant_speed(
        cls, t0: float, v: float, L: float, S: float, delta: float, limits: VehicleLimits
    ) -> PredecessorContext:
        return cls.from_trajectory(cruise_trajectory(t0, v, t0 + L / v), L, S, delta, limits)

    @property
    def t_kf(self) -> float:
        return self.t_km + self.S / self.v_km

    def k_position(self, t):
        """Position of ``k``, continued at ``v_km`` beyond the merging-zone entry."""
        t = np.asarray(t, dtype=float)
        out = np.where(t >= self.t_km, self.L + self.v_km * (t - self.t_km), 0.0)
        inside = t < self.t_km
        if inside.any():
            out[inside] = self.k_traj.sample(t[inside])[0]
        return out


@dataclass(frozen=True)
class GapPolynomial:
    """``s(t) = A t^3 + B t^2 + C t + D`` on ``[t_start, t_end]``.

    Stored as ``local = (a3, a2, a1, a0)`` in local time ``x = t - t_start``
    and evaluated that way; the absolute-time ``A..D`` are derived.
    """

    t_start: float
    t_end: float
    local: tuple[float, float, float, float]
    provenance: str

    @classmethod
    def from_absolute(
        cls, t_start: float, t_end: float, A: float, B: float, C: float, D: float, provenance: str
    ) -> GapPolynomial:
        t = t_start
        local = (A, 3 * A * t + B, (3 * A * t + 2 * B) * t + C, ((A * t + B) * t + C) * t + D)
        return cls(t_start, t_end, tuple(float(x) for x in local), provenance)

    @property
    def A(self) -> float:
        return self.local[0]

    @property
    def B(self) -> float:
        a3, a2, _, _ = self.local
        return a2 - 3 * a3 * self.t_start

    @property
    def C(self) -> float:
        a3, a2, a1, _ = self.local
        t = self.t_start
        return a1 - 2 * a2 * t + 3 * a3 * t * t

    @property
    def D(self) -> float:
        a3, a2, a1, a0 = self.local
        t = self.t_start
        return a0 - a1 * t + a2 * t * t - a3 * t**3

    def value(self, t):
        a3, a2, a1, a0 = self.local
        x = t - self.t_start
        return ((a3 * x + a2) * x + a1) * x + a0

    def rate(self, t):
        """Relative speed ``v_k - v_i``."""
        a3, a2, a1, _ = self.local
        x = t - self.t_start
        return (3.0 * a3 * x + 2.0 * a2) * x + a1

    def curvature(self, t):
        """Relative control ``u_k - u_i``."""
        a3, a2, _, _ = self.local
        return 6.0 * a3 * (t - self.t_start) + 2.0 * a2

    @property
    def discriminant(self) -> float:
        return 4.0 * self.B**2 - 12.0 * self.A * self.C


class MinGap(NamedTuple):
    s_star: float
    t_star: float
    case_tag: str


class Feasibility(NamedTuple):
    feasible: bool
    s_star: float
    t_star: float
    case_tag: str


def _k_pieces(k_traj: PiecewiseTrajectory, L: float):
    """(arc, constrained, in_merging_zone) for k, the merging-zone phase open-ended."""
    for arc in k_traj.arcs:
        yield arc, arc.kind is not ArcKind.UNCONSTRAINED, False
    mz = Arc(ArcKind.UNCONSTRAINED, k_traj.tm, math.inf, L, k_traj.terminal_speed, 0.0, 0.0)
    yield mz, False, True


def _local_state(arc: Arc, t: float) -> np.ndarray:
    """Local cubic ``[jerk/6, u/2, v, p]`` of ``arc`` expanded about ``t``."""
    p, v, u = arc.state(t)
    return np.array([arc.jerk / 6.0, 0.5 * u, v, p])


def trajectory_gap_segments(
    k_traj: PiecewiseTrajectory,
    i_traj: PiecewiseTrajectory,
    L: float,
    t_from: float | None = None,
    t_to: float | None = None,
) -> list[GapPolynomial]:
    """Segment-wise gap polynomials between two solved trajectories.

    ``k`` is continued at its merging-zone speed after ``k_traj.tm``; the
    segments cover ``[t_from, t_to]`` (default: ``i``'s control-zone horizon).
    """
    lo = i_traj.t0 if t_from is None else t_from
    hi = i_traj.tm if t_to is None else t_to
    if lo < k_traj.t0:
        raise DomainError(f"vehicle i enters at {lo}, before its predecessor ({k_traj.t0})")
    k_pieces = list(_k_pieces(k_traj, L))
    i_arcs = i_traj.arcs
    cuts = {lo, hi}
    cuts.update(t for arc, _, _ in k_pieces for t in (arc.t_start, arc.t_end) if lo < t < hi)
    cuts.update(t for arc in i_arcs for t in (arc.t_start, arc.t_end) if lo < t < hi)
    bounds = sorted(cuts)
    segments: list[GapPolynomial] = []
    ki = ii = 0
    for a, b in zip(bounds, bounds[1:]):
        mid = 0.5 * (a + b)
        while k_pieces[ki][0].t_end <= mid and ki < len(k_pieces) - 1:
            ki += 1
        while i_arcs[ii].t_end <= mid and ii < len(i_arcs) - 1:
            ii += 1
        k_arc, k_con, k_mz = k_pieces[ki]
        i_arc = i_arcs[ii]
        i_con = i_arc.kind is not ArcKind.UNCONSTRAINED
        if k_con and i_con:
            tag = "2.1+2.2"
        elif k_con:
            tag = "2.1"
        elif i_con:
            tag = "2.2"
        else:
            tag = "1.2" if k_mz else "1.1"
        local = _local_state(k_arc, a) - _local_state(i_arc, a)
        segments.append(GapPolynomial(a, b, tuple(local.tolist()), tag))
    return segments


def _i_trajectory(ctx: PredecessorContext, tau: float, upsilon: float, tm: float) -> PiecewiseTrajectory:
    return solve_with_constraints(BoundaryConditions(tau, upsilon, tm, ctx.L), ctx.limits)


def gap_segments(
    ctx: PredecessorContext,
    tau: float,
    upsilon: float,
    tm: float,
    vm: float | None = None,
) -> list[GapPolynomial]:
    """Gap polynomials for ``i`` entering at ``(tau, upsilon)`` and reaching the MZ at ``tm``.

    ``i`` follows the energy-optimal trajectory for these boundary data.  When
    ``vm`` is given it must match that trajectory's terminal speed.
    """
    if tau < ctx.t_k0:
        raise DomainError(f"tau={tau} precedes the predecessor's entry t_k0={ctx.t_k0}")
    traj = _i_trajectory(ctx, tau, upsilon, tm)
    if vm is not None and not math.isclose(vm, traj.terminal_speed, rel_tol=1e-6, abs_tol=1e-9):
        raise DomainError(f"vm={vm} inconsistent with optimal terminal speed {traj.terminal_speed}")
    return trajectory_gap_segments(ctx.k_traj, traj, ctx.L)


def _segment_minimum(seg: GapPolynomial, L: float) -> tuple[float, float, str]:
    h = seg.t_end - seg.t_start
    best_t, best_s, where = seg.t_start, float(seg.value(seg.t_start)), "A"
    s_end = float(seg.value(seg.t_end))
    if s_end < best_s:
        best_t, best_s, where = seg.t_end, s_end, "B"
    if h <= 0:
        return best_s, best_t, where
    # Derivative in local time x = t - t_start: 3A x^2 + 2 q x + r.
    r = float(seg.rate(seg.t_start))
    q = 0.5 * float(seg.curvature(seg.t_start))
    A = seg.local[0]
    roots: list[float] = []
    if abs(A) * h**3 < _LEADING_EPS * L:
        if q != 0.0:
            roots.append(-r / (2.0 * q))
    else:
        disc = 4.0 * q * q - 12.0 * A * r
        if disc > 0:
            sq = math.sqrt(disc)
            big = -(2.0 * q + math.copysign(sq, q)) / 2.0
            if big != 0.0:
                roots.extend([big / (3.0 * A), r / big])
    for x in sorted(roots):
        if 0.0 < x < h and 2.0 * q + 6.0 * A * x >= 0.0:
            t = seg.t_start + x
            s = float(seg.value(t))
            if s < best_s:
                best_t, best_s, where = t, s, "C"
    return best_s, best_t, where


def min_gap(segments: Sequence[GapPolynomial], L: float = 400.0) -> MinGap:
    """Global minimum of the gap over all segments (ties go to the earlier time)."""
    if not segments:
        raise DomainError("min_gap needs at least one segment")
    best: MinGap | None = None
    for seg in segments:
        s, t, where = _segment_minimum(seg, L)
        if best is None or s < best.s_star:
            best = MinGap(s, t, f"{seg.provenance}.{where}")
    return best


def is_feasible(
    ctx: PredecessorContext,
    tau: float,
    upsilon: float,
    tm: float,
    vm: float | None = None,
    tolerance: float = 1e-9,
) -> Feasibility:
    """Whether the rear-end gap stays at least ``delta`` over ``[tau, tm]``."""
    m = min_gap(gap_segments(ctx, tau, upsilon, tm, vm), ctx.L)
    return Feasibility(m.s_star >= ctx.delta - tolerance, m.s_star, m.t_star, m.case_tag)


def same_lane_entry_time(ctx: PredecessorContext) -> Callable[[float, float], float]:
    """Entry-time rule for ``i`` directly behind ``k``: headway or full-throttle bound."""

    def rule(tau: float, upsilon: float) -> float:
        t_c = dynamics_lower_bound(tau, upsilon, ctx.L, ctx.limits)[0]
        return max(ctx.t_km + ctx.delta / ctx.v_km, t_c)

    return rule


@dataclass(frozen=True)
class FeasibilityRaster:
    tau: np.ndarray
    upsilon: np.ndarray
    tm: np.ndarray
    s_star: np.ndarray
    feasible: np.ndarray

    def rows(self) -> Iterator[tuple[float, float, float, bool]]:
        """Row-major ``(tau, upsilon, s_star, feasible)``."""
        for a, tau in enumerate(self.tau):
            for b, ups in enumerate(self.upsilon):
                yield float(tau), float(ups), float(self.s_star[a, b]), bool(self.feasible[a, b])


def feasibility_map(
    ctx: PredecessorContext,
    tau_range: tuple[float, float],
    upsilon_range: tuple[float, float],
    grid_resolution: int | tuple[int, int] = 200,
    entry_time: Callable[[float, float], float] | None = None,
    tolerance: float = 1e-9,
) -> FeasibilityRaster:
    """Evaluate :func:`is_feasible` on a ``tau x upsilon`` grid.

    ``entry_time(tau, upsilon)`` supplies ``tm`` for each point and defaults
    to :func:`same_lane_entry_time`.  Points whose boundary data admit no
    trajectory are reported infeasible with ``s_star = nan``.
    """
    n_tau, n_ups = (grid_resolution, grid_resolution) if isinstance(grid_resolution, int) else grid_resolution
    if n_tau < 2 or n_ups < 2:
        raise ValueError("grid_resolution must be at least 2 per axis")
    if not (tau_range[1] >= tau_range[0] and upsilon_range[1] >= upsilon_range[0]):
        raise ValueError("empty range")
    rule = entry_time or same_lane_entry_time(ctx)
    taus = np.linspace(tau_range[0], tau_range[1], n_tau)
    upss = np.linspace(upsilon_range[0], upsilon_range[1], n_ups)
    tm = np.empty((n_tau, n_ups))
    s_star = np.full((n_tau, n_ups), np.nan)
    feasible = np.zeros((n_tau, n_ups), dtype=bool)
    for a, tau in enumerate(taus):
        for b, ups in enumerate(upss):
            tm[a, b] = rule(float(tau), float(ups))
            try:
                res = is_feasible(ctx, float(tau), float(ups), float(tm[a, b]), tolerance=tolerance)
            except InfeasibleError:
                continue
            s_star[a, b] = res.s_star
            feasible[a, b] = res.feasible
    return FeasibilityRaster(taus, upss, tm, s_star, feasible)


def closed_form_gap_coefficients(
    ctx: PredecessorContext, tau: float, upsilon: float, tm: float, vm: float
) -> tuple[GapPolynomial, GapPolynomial]:
    """Explicit coefficient blocks for two unconstrained vehicles.

    The first polynomial covers ``[tau, t_km]`` (both in the control zone),
    the second ``[t_km, tm]`` (``k`` cruising in the merging zone).  Each
    coefficient is a constant ``K`` fixed by ``k``'s boundary data plus a
    rational term in ``(tau, upsilon)`` fixed by ``i``'s.
    """
    L = ctx.L
    tk0, vk0, tkm, vkm = ctx.t_k0, ctx.v_k0, ctx.t_km, ctx.v_km
    qk = (tk0 - tkm) ** 3
    qi = (tau - tm) ** 3

    KA = (2 * L + (vkm + vk0) * (tk0 - tkm)) / qk
    KB = -(3 * L * (tk0 + tkm) + (vk0 * (tk0 + 2 * tkm) + vkm * (2 * tk0 + tkm)) * (tk0 - tkm)) / qk
    KC = (6 * tk0 * tkm * L + (vk0 * (tkm**2 + 2 * tk0 * tkm) + vkm * (tk0**2 + 2 * tkm * tk0)) * (tk0 - tkm)) / qk
    KD = (L * (tk0**3 - 3 * tk0**2 * tkm) - (vk0 * tk0 * tkm**2 + vkm * tk0**2 * tkm) * (tk0 - tkm)) / qk

    PA = (2 * L + (vm + upsilon) * (tau - tm)) / qi
    PB = -(3 * L * (tau + tm) + (upsilon * (tau + 2 * tm) + vm * (2 * tau + tm)) * (tau - tm)) / qi
    PC = (6 * tau * tm * L + (upsilon * (tm**2 + 2 * tau * tm) + vm * (tau**2 + 2 * tm * tau)) * (tau - tm)) / qi
    PD = (L * (tau**3 - 3 * tau**2 * tm) - (upsilon * tau * tm**2 + vm * tau**2 * tm) * (tau - tm)) / qi

    cz = GapPolynomial.from_absolute(tau, min(tkm, tm), KA - PA, KB - PB, KC - PC, KD - PD, "1.1")
    mz = GapPolynomial.from_absolute(min(tkm, tm), tm, -PA, -PB, vkm - PC, L - vkm * tkm - PD, "1.2")
    return cz, mz
