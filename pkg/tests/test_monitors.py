from dataclasses import replace

import pytest

from signalfree.model import VehicleRecord, cruise_trajectory, four_approach_geometry
from signalfree.monitors import monitor_lateral, monitor_rear_end, sample_grid

L, S, DELTA = 400.0, 30.0, 10.0
GEOM = four_approach_geometry(L, S, DELTA)


def record(vid, lane, t0, v):
    return VehicleRecord.build(vid, vid, vid, None, lane, cruise_trajectory(t0, v, t0 + L / v), S)


def test_sample_grid_covers_endpoints():
    ts = sample_grid(1.0, 2.05, 0.1)
    assert ts[0] == 1.0 and ts[-1] == 2.05
    assert max(ts[1:] - ts[:-1]) <= 0.1


def test_follower_entering_after_exit_is_safe():
    k = cruise_trajectory(0.0, 10.0, 40.0)
    i = cruise_trajectory(43.0, 10.0, 83.0)
    rep = monitor_rear_end(k, i, DELTA, 0.1, L)
    assert rep.min_gap > S and not rep.violated


def test_headway_shifted_copy_has_gap_delta():
    k = cruise_trajectory(0.0, 10.0, 40.0)
    i = cruise_trajectory(1.0, 10.0, 41.0)
    rep = monitor_rear_end(k, i, DELTA, 0.1, L)
    assert rep.min_gap == pytest.approx(DELTA, abs=1e-12)
    assert rep.analytic_min_gap == pytest.approx(DELTA, abs=1e-12)
    assert not rep.violated


def test_close_follower_violates_over_an_interval():
    k = cruise_trajectory(0.0, 10.0, 40.0)
    i = cruise_trajectory(0.5, 10.0, 40.5)
    rep = monitor_rear_end(k, i, DELTA, 0.1, L)
    assert rep.violated
    assert rep.violations == [(0.5, 40.5)]


def test_single_vehicle_has_no_lateral_violation():
    assert monitor_lateral([record(1, "E", 0.0, 10.0)], GEOM) == []


def test_touching_conflict_intervals_are_allowed():
    first = record(1, "E", 0.0, 10.0)
    second = record(2, "N", first.tf - L / 10.0, 10.0)
    assert second.tm == pytest.approx(first.tf)
    assert monitor_lateral([first, second], GEOM) == []


def test_shifted_schedule_is_reported():
    first = record(1, "E", 0.0, 10.0)
    second = record(2, "N", first.tf - L / 10.0, 10.0)
    early = replace(second, t0=second.t0 - 0.1, tm=second.tm - 0.1, tf=second.tf - 0.1)
    found = monitor_lateral([first, early], GEOM)
    assert len(found) == 1
    assert found[0].overlap == pytest.approx(0.1, abs=1e-12)


def test_compatible_lanes_may_overlap():
    first = record(1, "E", 0.0, 10.0)
    second = record(2, "W", 1.0, 10.0)
    assert monitor_lateral([first, second], GEOM) == []
