import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import integrate_affine_control
from signalfree.model import (
    Arc,
    ArcKind,
    ConfigurationError,
    Direction,
    DomainError,
    InfeasibleError,
    IntersectionGeometry,
    Lane,
    PiecewiseTrajectory,
    Relation,
    VehicleLimits,
    VehicleRecord,
    classify_relation,
    cruise_trajectory,
    eval_state,
    four_approach_geometry,
    trajectory_cost,
)
from signalfree.ocp import BoundaryConditions, dynamics_lower_bound, solve_unconstrained, solve_with_constraints


def test_eval_state_constant_speed():
    traj = PiecewiseTrajectory((Arc.from_coefficients(ArcKind.UNCONSTRAINED, 0.0, 40.0, 0.0, 0.0, 10.0, 0.0),))
    assert eval_state(traj, 40.0) == (400.0, 10.0, 0.0)


def test_eval_state_at_entry_matches_boundary_data():
    traj = solve_unconstrained(BoundaryConditions(3.0, 11.0, 40.0, 400.0))
    p, v, _ = PiecewiseTrajectory((traj,)).state(3.0)
    assert p == pytest.approx(0.0, abs=1e-9)
    assert v == pytest.approx(11.0, abs=1e-12)


def test_eval_state_matches_numeric_integration():
    arc = solve_unconstrained(BoundaryConditions(0.0, 10.0, 50.0, 400.0))
    p_ref, v_ref = integrate_affine_control(arc.a, arc.b, 0.0, 10.0, np.array([0.0, 25.0]))
    p, v, _ = PiecewiseTrajectory((arc,)).state(25.0)
    assert p == pytest.approx(p_ref[-1], rel=1e-8)
    assert v == pytest.approx(v_ref[-1], rel=1e-8)


def test_eval_state_outside_domain():
    traj = cruise_trajectory(0.0, 10.0, 40.0)
    with pytest.raises(DomainError):
        traj.state(40.5)
    with pytest.raises(DomainError):
        traj.state(-0.1)


def test_arcs_must_tile():
    a = Arc(ArcKind.UNCONSTRAINED, 0.0, 1.0, 0, 0, 1, 0)
    b = Arc(ArcKind.UNCONSTRAINED, 1.5, 2.0, 0, 0, 1, 0)
    with pytest.raises(DomainError):
        PiecewiseTrajectory((a, b))
    with pytest.raises(DomainError):
        PiecewiseTrajectory(())


def test_relations_from_lanes():
    geom = four_approach_geometry()
    assert classify_relation(geom, "E", "E") is Relation.SAME_LANE
    assert classify_relation(geom, "N", "E") is Relation.CONFLICTING
    assert classify_relation(geom, "W", "E") is Relation.OPPOSITE_NO_CONFLICT
    with pytest.raises(ConfigurationError):
        classify_relation(geom, "X", "E")


def test_same_direction_lanes_are_r_related():
    lanes = (Lane("E1", Direction.EAST), Lane("E2", Direction.EAST), Lane("N", Direction.NORTH))
    geom = IntersectionGeometry(400.0, 30.0, lanes)
    assert classify_relation(geom, "E1", "E2") is Relation.SAME_DIRECTION_DIFFERENT_LANE
    assert classify_relation(geom, "E2", "N") is Relation.CONFLICTING
    assert [r.code for r in Relation] == [1, 2, 3, 4]


def test_geometry_validation():
    with pytest.raises(ConfigurationError):
        four_approach_geometry(400.0, 30.0, 40.0)
    with pytest.raises(ConfigurationError):
        four_approach_geometry(400.0, 30.0, 10.0, mz_spacing=31.0)
    lanes = (Lane("E", Direction.EAST), Lane("N", Direction.NORTH))
    with pytest.raises(ConfigurationError):
        IntersectionGeometry(400.0, 30.0, lanes, relation_table={("E", "N"): Relation.OPPOSITE_NO_CONFLICT})
    assert four_approach_geometry().mz_spacing == 30.0


def test_limits_validation():
    with pytest.raises(ConfigurationError):
        VehicleLimits(1.0, 2.0, 0.0, 10.0)
    with pytest.raises(ConfigurationError):
        VehicleLimits(-1.0, 2.0, 10.0, 10.0)


def test_cost_closed_form():
    assert trajectory_cost(cruise_trajectory(0.0, 10.0, 40.0)) == 0.0
    arc = Arc.from_state(ArcKind.CONTROL_SATURATED, 0.0, 10.0, 0.0, 5.0, 0.1, 0.0)
    assert arc.cost() == pytest.approx(0.05, rel=1e-12)


def test_cost_matches_quadrature():
    arc = solve_unconstrained(BoundaryConditions(2.0, 9.0, 41.0, 400.0))
    ts = np.linspace(arc.t_start, arc.t_end, 10_001)
    u = arc.control(ts)
    h = ts[1] - ts[0]
    simpson = h / 3 * (u[0] ** 2 + 4 * np.sum(u[1:-1:2] ** 2) + 2 * np.sum(u[2:-1:2] ** 2) + u[-1] ** 2)
    assert arc.cost() == pytest.approx(0.5 * simpson, rel=1e-9)


def test_vehicle_record_merge_transit():
    traj = cruise_trajectory(0.0, 10.0, 40.0)
    rec = VehicleRecord.build(1, 1, 1, None, "E", traj, 30.0)
    assert rec.tf - rec.tm == pytest.approx(3.0, rel=1e-12)
    assert rec.position(41.0, 400.0) == pytest.approx(410.0)
    assert rec.t_arrival == 0.0


LIMITS = VehicleLimits(-4.0, 1.0, 0.0, 16.0)


@settings(max_examples=60, deadline=None)
@given(
    v0=st.floats(2.0, 15.0),
    T=st.floats(20.0, 60.0),
    t0=st.floats(0.0, 500.0),
)
def test_trajectory_continuity_and_limits(v0, T, t0):
    L = 300.0
    T = max(T, dynamics_lower_bound(0.0, v0, L, LIMITS)[0] + 1e-6)
    try:
        traj = solve_with_constraints(BoundaryConditions(t0, v0, t0 + T, L), LIMITS)
    except InfeasibleError:
        return
    for left, right in zip(traj.arcs, traj.arcs[1:]):
        tj = left.t_end
        assert abs(left.position(tj) - right.position(tj)) <= 1e-9 * L
        assert abs(left.speed(tj) - right.speed(tj)) <= 1e-9 * LIMITS.v_max
    for arc in traj.arcs:
        ts = np.linspace(arc.t_start, arc.t_end, 1000)
        u = arc.control(ts)
        v = arc.speed(ts)
        assert u.min() >= LIMITS.u_min - 1e-9 and u.max() <= LIMITS.u_max + 1e-9
        assert v.min() >= LIMITS.v_min - 1e-9 and v.max() <= LIMITS.v_max + 1e-9
    p = traj.sample(np.linspace(traj.t0, traj.tm, 2000))[0]
    assert np.all(np.diff(p) >= -1e-9)
    assert math.isclose(traj.terminal_position, L, abs_tol=1e-9 * L)
