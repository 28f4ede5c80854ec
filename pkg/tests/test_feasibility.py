import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import dense_min_gap
from signalfree.feasibility import (
    PredecessorContext,
    closed_form_gap_coefficients,
    feasibility_map,
    gap_segments,
    is_feasible,
    min_gap,
    same_lane_entry_time,
    trajectory_gap_segments,
)
from signalfree.model import ArcKind, DomainError, InfeasibleError, VehicleLimits, cruise_trajectory
from signalfree.monitors import monitor_rear_end
from signalfree.ocp import BoundaryConditions, dynamics_lower_bound, solve_with_constraints

L, S, DELTA = 400.0, 30.0, 10.0
CASE1 = VehicleLimits(-100.0, 0.2, 0.0, 13.0)
WIDE = VehicleLimits(-4.0, 2.0, 0.0, 16.0)
LEAD_AT_10 = PredecessorContext.constant_speed(0.0, 10.0, L, S, DELTA, CASE1)


def i_position(ctx, tau, ups, tm):
    traj = solve_with_constraints(BoundaryConditions(tau, ups, tm, ctx.L), ctx.limits)
    return lambda t: traj.sample(t)[0]


def test_unconstrained_pair_splits_at_merge_entry():
    k = solve_with_constraints(BoundaryConditions(0.0, 10.0, 41.0, L), CASE1)
    ctx = PredecessorContext.from_trajectory(k, L, S, DELTA, CASE1)
    segs = gap_segments(ctx, 3.0, 11.0, 43.0)
    assert [(s.t_start, s.t_end, s.provenance) for s in segs] == [(3.0, 41.0, "1.1"), (41.0, 43.0, "1.2")]


def test_constant_speed_predecessor_terms():
    tau, ups = 4.0, 11.0
    tm = same_lane_entry_time(LEAD_AT_10)(tau, ups)
    cz, mz = closed_form_gap_coefficients(LEAD_AT_10, tau, ups, tm, _vm(LEAD_AT_10, tau, ups, tm))
    i_coeffs = _i_arc(LEAD_AT_10, tau, ups, tm).position_coefficients()
    K = np.array([cz.A, cz.B, cz.C, cz.D]) + i_coeffs
    assert K == pytest.approx([0.0, 0.0, 10.0, 0.0], abs=1e-9)
    K2 = np.array([mz.A, mz.B, mz.C, mz.D]) + i_coeffs
    assert K2 == pytest.approx([0.0, 0.0, 10.0, L - 10.0 * 40.0], abs=1e-9)


def _i_arc(ctx, tau, ups, tm):
    traj = solve_with_constraints(BoundaryConditions(tau, ups, tm, ctx.L), ctx.limits)
    assert len(traj.arcs) == 1
    return traj.arcs[0]


def _vm(ctx, tau, ups, tm):
    return solve_with_constraints(BoundaryConditions(tau, ups, tm, ctx.L), ctx.limits).terminal_speed


def test_speed_saturated_predecessor_arc_terms():
    k = solve_with_constraints(BoundaryConditions(0.0, 10.0, 32.6, L), CASE1)
    assert [a.kind for a in k.arcs] == [ArcKind.CONTROL_SATURATED, ArcKind.UNCONSTRAINED, ArcKind.SPEED_SATURATED]
    ctx = PredecessorContext.from_trajectory(k, L, S, DELTA, CASE1)
    tau, ups = 2.0, 10.0
    tm = same_lane_entry_time(ctx)(tau, ups)
    i_traj = solve_with_constraints(BoundaryConditions(tau, ups, tm, L), CASE1)
    segs = trajectory_gap_segments(k, i_traj, L)
    cz = [s for s in segs if s.t_end <= k.tm]
    assert len(cz) >= 3
    t_I = k.arcs[2].t_start
    sat = next(s for s in segs if s.t_start == t_I)
    i_arc = next(a for a in i_traj.arcs if a.t_start <= t_I < a.t_end)
    K = np.array([sat.A, sat.B, sat.C, sat.D]) + i_arc.position_coefficients()
    assert K == pytest.approx([0.0, 0.0, 13.0, k.state(t_I)[0] - 13.0 * t_I], abs=1e-8)
    assert sat.provenance.startswith("2.1")


def test_constant_offset_ties_to_left_endpoint():
    k = cruise_trajectory(0.0, 10.0, 40.0)
    i = cruise_trajectory(2.0, 10.0, 42.0)
    m = min_gap(trajectory_gap_segments(k, i, L), L)
    assert m.s_star == 20.0
    assert m.t_star == 2.0


def test_decelerating_follower_reaches_minimum_at_merge_entry():
    limits = VehicleLimits(-0.2, 2.0, 0.0, 16.0)
    ctx = PredecessorContext.constant_speed(0.0, 8.0, L, S, DELTA, limits)
    segs = gap_segments(ctx, 12.0, 13.0, 53.0)
    m = min_gap(segs, L)
    assert m.t_star == 53.0
    assert m.s_star == pytest.approx(24.0, abs=1e-9)
    assert segs[0].provenance == "2.2"
    ref, _ = dense_min_gap(ctx.k_position, i_position(ctx, 12.0, 13.0, 53.0), 12.0, 53.0, 1e-3)
    assert abs(ref - m.s_star) <= 1e-6


def test_close_entry_violates_in_mid_course():
    tau, ups = 0.5, 13.0
    tm = same_lane_entry_time(LEAD_AT_10)(tau, ups)
    res = is_feasible(LEAD_AT_10, tau, ups, tm)
    assert not res.feasible and res.s_star < DELTA
    ref, _ = dense_min_gap(LEAD_AT_10.k_position, i_position(LEAD_AT_10, tau, ups, tm), tau, tm, 1e-3)
    assert abs(ref - res.s_star) <= 1e-6


def test_boundary_entry_is_feasible_at_zero_tolerance():
    # p_k(tau) = delta exactly, and i is slower than k from then on.
    res = is_feasible(LEAD_AT_10, 1.0, 8.0, 60.0, tolerance=0.0)
    assert res.s_star == 10.0
    assert res.feasible and res.case_tag == "1.1.A"


def test_entry_before_predecessor_is_rejected():
    with pytest.raises(DomainError):
        gap_segments(LEAD_AT_10, -1.0, 10.0, 45.0)


def test_degenerate_grid_after_predecessor_exits():
    raster = feasibility_map(LEAD_AT_10, (LEAD_AT_10.t_kf + 1.0, LEAD_AT_10.t_kf + 5.0), (5.0, 12.0), 2)
    assert raster.feasible.all()
    with pytest.raises(ValueError):
        feasibility_map(LEAD_AT_10, (0.0, 1.0), (5.0, 12.0), 1)


def test_unreachable_points_are_reported_infeasible():
    ctx = PredecessorContext.constant_speed(0.0, 10.0, L, S, DELTA, CASE1)
    raster = feasibility_map(ctx, (50.0, 51.0), (1.0, 2.0), 2, entry_time=lambda tau, ups: tau + 5.0)
    assert not raster.feasible.any()
    assert np.isnan(raster.s_star).all()


@st.composite
def contexts(draw):
    v_k0 = draw(st.floats(3.0, 15.0))
    t_c = dynamics_lower_bound(0.0, v_k0, L, WIDE)[0]
    T = draw(st.floats(t_c + 0.5, t_c + 40.0))
    try:
        k = solve_with_constraints(BoundaryConditions(0.0, v_k0, T, L), WIDE)
    except InfeasibleError:
        assume(False)
    assume(k.terminal_speed > 1.0)
    return PredecessorContext.from_trajectory(k, L, S, DELTA, WIDE)


@st.composite
def instances(draw):
    ctx = draw(contexts())
    tau = draw(st.floats(0.0, ctx.t_kf))
    ups = draw(st.floats(3.0, 15.0))
    tm = same_lane_entry_time(ctx)(tau, ups) + draw(st.floats(0.0, 15.0))
    try:
        segs = gap_segments(ctx, tau, ups, tm)
    except InfeasibleError:
        assume(False)
    return ctx, tau, ups, tm, segs


@settings(max_examples=60, deadline=None)
@given(ctx=contexts())
def test_entry_after_predecessor_exit_is_feasible(ctx):
    ups = 0.5 * (WIDE.v_min + WIDE.v_max)
    tm = same_lane_entry_time(ctx)(ctx.t_kf, ups)
    assert is_feasible(ctx, ctx.t_kf, ups, tm).feasible


@settings(max_examples=60, deadline=None)
@given(inst=instances())
def test_min_gap_matches_dense_sampling(inst):
    ctx, tau, ups, tm, segs = inst
    m = min_gap(segs, L)
    ref, _ = dense_min_gap(ctx.k_position, i_position(ctx, tau, ups, tm), tau, tm, 1e-4 * (tm - tau))
    assert m.s_star <= ref + 1e-9
    assert ref - m.s_star <= 1e-6 * L


@settings(max_examples=40, deadline=None)
@given(inst=instances())
def test_gap_derivatives_match_finite_differences(inst):
    ctx, tau, ups, tm, segs = inst
    for seg in segs:
        h = seg.t_end - seg.t_start
        if h < 1e-2:
            continue
        e = 1e-4 * h
        for t in np.linspace(seg.t_start + 2 * e, seg.t_end - 2 * e, 7):
            fd1 = (seg.value(t + e) - seg.value(t - e)) / (2 * e)
            fd2 = (seg.rate(t + e) - seg.rate(t - e)) / (2 * e)
            assert seg.rate(t) == pytest.approx(fd1, rel=1e-5, abs=1e-7)
            assert seg.curvature(t) == pytest.approx(fd2, rel=1e-5, abs=1e-7)


@settings(max_examples=40, deadline=None)
@given(inst=instances())
def test_segments_tile_and_reproduce_positions(inst):
    ctx, tau, ups, tm, segs = inst
    assert segs[0].t_start == tau and segs[-1].t_end == tm
    for a, b in zip(segs, segs[1:]):
        assert a.t_end == b.t_start
    i_pos = i_position(ctx, tau, ups, tm)
    for seg in segs:
        ts = np.linspace(seg.t_start, seg.t_end, 100)
        assert np.abs(seg.value(ts) - (ctx.k_position(ts) - i_pos(ts))).max() <= 1e-8 * L


@settings(max_examples=40, deadline=None)
@given(inst=instances())
def test_feasible_entries_pass_the_sampled_monitor(inst):
    ctx, tau, ups, tm, _ = inst
    res = is_feasible(ctx, tau, ups, tm)
    if res.feasible:
        i_traj = solve_with_constraints(BoundaryConditions(tau, ups, tm, L), WIDE)
        rep = monitor_rear_end(ctx.k_traj, i_traj, DELTA, 0.01, L, analytic=False)
        assert rep.min_gap >= DELTA - 1e-6
