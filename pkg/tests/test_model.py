import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bisac.errors import InvalidConfig
from bisac.model import (MotionNoise, TargetState, UavPose, build_transition_matrix,
                         check_separation, check_speed, elevation_angle_deg,
                         propagate_target, slant_distance)

ZERO_NOISE = MotionNoise(0.0, 0.0, 0.0, 0.0)

coords = st.floats(min_value=-500.0, max_value=500.0)
speeds = st.floats(min_value=-30.0, max_value=30.0)


def make_state(x=100.0, y=100.0, vx=0.0, vy=0.0):
    return TargetState(x, y, vx, vy)


class TestTransitionMatrix:
    def test_slot_duration_entries(self):
        g = build_transition_matrix(0.5)
        assert g[0, 2] == 0.5 and g[1, 3] == 0.5
        expected = np.eye(4)
        expected[0, 2] = expected[1, 3] = 0.5
        assert np.array_equal(g, expected)

    def test_vanishing_dt_limit_is_identity(self):
        assert np.allclose(build_transition_matrix(1e-15), np.eye(4), atol=1e-14)

    def test_ballistic_advance(self):
        g = build_transition_matrix(0.5)
        out = g @ np.array([100.0, 100.0, 10.0, 0.0])
        assert np.allclose(out, [105.0, 100.0, 10.0, 0.0])

    def test_nonpositive_dt_rejected(self):
        with pytest.raises(InvalidConfig):
            build_transition_matrix(0.0)
        with pytest.raises(InvalidConfig):
            build_transition_matrix(-1.0)


class TestPropagate:
    def test_zero_noise_matches_direct_evaluation(self):
        v = 10.0 / math.sqrt(2.0)
        s = propagate_target(make_state(100.0, 100.0, v, v), 0.5, ZERO_NOISE,
                             np.random.default_rng(0))
        assert s.x == pytest.approx(100.0 + v * 0.5, abs=1e-12)
        assert s.y == pytest.approx(100.0 + v * 0.5, abs=1e-12)
        assert s.vx == v and s.vy == v

    def test_zero_velocity_fixed_point(self):
        s = propagate_target(make_state(), 0.5, ZERO_NOISE, np.random.default_rng(0))
        assert (s.x, s.y, s.vx, s.vy) == (100.0, 100.0, 0.0, 0.0)

    def test_deterministic_under_fixed_seed(self):
        noise = MotionNoise(1.0, 1.0, 0.5, 0.5)
        a = propagate_target(make_state(), 0.5, noise, np.random.default_rng(42))
        b = propagate_target(make_state(), 0.5, noise, np.random.default_rng(42))
        assert a == b

    @given(x=coords, y=coords, vx=speeds, vy=speeds,
           dt=st.floats(min_value=0.01, max_value=2.0))
    @settings(max_examples=50)
    def test_zero_noise_equals_transition_matrix(self, x, y, vx, vy, dt):
        s = TargetState(x, y, vx, vy)
        out = propagate_target(s, dt, ZERO_NOISE, np.random.default_rng(0))
        ref = build_transition_matrix(dt) @ s.as_vector()
        assert np.allclose(out.as_vector(), ref, rtol=0, atol=1e-9)

    @given(dt1=st.floats(min_value=0.01, max_value=2.0),
           dt2=st.floats(min_value=0.01, max_value=2.0))
    @settings(max_examples=50)
    def test_transition_semigroup(self, dt1, dt2):
        s = np.array([10.0, -20.0, 3.0, -4.0])
        g1, g2 = build_transition_matrix(dt1), build_transition_matrix(dt2)
        g12 = build_transition_matrix(dt1 + dt2)
        assert np.allclose(g2 @ (g1 @ s), g12 @ s, rtol=1e-12, atol=1e-12)


class TestGeometry:
    def test_initial_placement_distance(self):
        d = slant_distance(UavPose(140.0, 100.0, 50.0), make_state(100.0, 100.0))
        assert d == pytest.approx(math.sqrt(40.0 ** 2 + 50.0 ** 2), rel=1e-12)

    def test_directly_below_gives_height(self):
        assert slant_distance(UavPose(100.0, 100.0, 50.0), make_state()) == 50.0

    def test_offset_symmetry(self):
        s = make_state(0.0, 0.0)
        assert slant_distance(UavPose(30.0, 40.0, 50.0), s) == pytest.approx(
            slant_distance(UavPose(40.0, 30.0, 50.0), s), rel=1e-14)

    @given(qx=coords, qy=coords, h=st.floats(min_value=1.0, max_value=300.0))
    @settings(max_examples=100)
    def test_slant_at_least_height(self, qx, qy, h):
        s = make_state(0.0, 0.0)
        d = slant_distance(UavPose(qx, qy, h), s)
        assert d >= h
        assert (d == h) == (qx == 0.0 and qy == 0.0)

    def test_elevation_45_degrees_when_offset_equals_height(self):
        assert elevation_angle_deg(UavPose(150.0, 100.0, 50.0),
                                   make_state()) == pytest.approx(45.0, abs=1e-12)

    def test_elevation_zero_overhead(self):
        assert elevation_angle_deg(UavPose(100.0, 100.0, 50.0), make_state()) == 0.0

    def test_elevation_initial_placement(self):
        theta = elevation_angle_deg(UavPose(140.0, 100.0, 50.0), make_state())
        assert theta == pytest.approx(
            math.degrees(math.acos(50.0 / math.sqrt(4100.0))), abs=1e-10)

    def test_elevation_monotone_in_horizontal_distance(self):
        angles = [elevation_angle_deg(UavPose(100.0 + r, 100.0, 50.0), make_state())
                  for r in np.linspace(0.0, 400.0, 100)]
        assert all(b > a for a, b in zip(angles, angles[1:]))


class TestConstraints:
    def test_speed_boundary_displacement(self):
        prev = UavPose(0.0, 0.0, 50.0)
        assert check_speed(prev, UavPose(10.0, 0.0, 50.0), vmax=20.0, dt=0.5)
        assert not check_speed(prev, UavPose(10.001, 0.0, 50.0), vmax=20.0, dt=0.5)

    def test_zero_displacement(self):
        p = UavPose(5.0, 5.0, 50.0)
        assert check_speed(p, p, vmax=20.0, dt=0.5)

    def test_separation_initial_placements(self):
        a = UavPose(140.0, 100.0, 50.0)
        b = UavPose(120.0, 200.0, 50.0)
        assert math.hypot(20.0, 100.0) == pytest.approx(101.98, abs=0.01)
        assert check_separation(a, b, 40.0)

    def test_coincident_poses_fail(self):
        p = UavPose(1.0, 2.0, 50.0)
        assert not check_separation(p, p, 1.0)

    def test_zero_dmin_always_ok(self):
        p = UavPose(1.0, 2.0, 50.0)
        assert check_separation(p, p, 0.0)
