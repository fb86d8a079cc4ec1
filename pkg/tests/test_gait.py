import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from traybot.errors import PlannerStuckError
from traybot.gait import (
    GaitExecutor,
    GaitParams,
    PHASE_ORDER,
    hip_projection,
    kinematic_feasible,
    plan_foothold,
    raibert_target,
    replan_edge,
    replan_manway,
    support_polygon_check,
    support_polygon_report,
    swing_trajectory,
)
from traybot.geometry import BaseState, VelocityCommand, rect_contains, rot2

from conftest import make_world

PARAMS = GaitParams()


def base_at(x=0.0, y=0.0, yaw=0.0):
    return BaseState(np.array([x, y]), yaw, 0)


class TestRaibertTarget:
    def test_zero_velocity_gives_hip(self):
        base = base_at(0.1, 0.2, 0.0)
        target = raibert_target(base, VelocityCommand(0.0, 0.0), "FL", PARAMS)
        assert np.allclose(target, hip_projection(base, "FL", PARAMS))

    def test_velocity_offset_linear(self):
        base = base_at()
        target = raibert_target(base, VelocityCommand(0.1, 0.0), "FR", PARAMS)
        hip = hip_projection(base, "FR", PARAMS)
        assert np.allclose(target - hip, [0.03, 0.0], atol=1e-12)

    def test_yaw_rotates_stance_offsets(self):
        base = base_at(0.0, 0.0, math.pi / 2)
        cmd = VelocityCommand(0.05, -0.02)
        target = raibert_target(base, cmd, "BL", PARAMS)
        expected = rot2(math.pi / 2) @ PARAMS.hip_offset("BL") + PARAMS.raibert_gain * cmd.planar
        assert np.allclose(target, expected, atol=1e-12)


class TestReplanEdge:
    def test_scaling_factor_two(self, vendor_world):
        w = vendor_world
        direction = np.array([0.8, 0.6])
        p = w.tray_center + 2 * w.safe_radius * direction
        out = replan_edge(w, p)
        assert np.linalg.norm(out - w.tray_center) == pytest.approx(w.safe_radius, abs=1e-12)
        assert np.allclose(out, w.tray_center + w.safe_radius * direction, atol=1e-12)

    def test_inside_unchanged(self, vendor_world):
        p = vendor_world.tray_center + np.array([0.1, -0.2])
        assert np.allclose(replan_edge(vendor_world, p), p)

    def test_vendor_numeric_case(self, vendor_world):
        out = replan_edge(vendor_world, np.array([1.0, 0.3]))
        assert out == pytest.approx([0.612, 0.184], abs=1e-3)
        assert np.linalg.norm(out) == pytest.approx(0.639, abs=1e-9)

    @given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
    def test_idempotent(self, px, py):
        w = make_world()
        once = replan_edge(w, (px, py))
        twice = replan_edge(w, once)
        assert np.allclose(once, twice, atol=1e-12)

    @given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
    def test_preserves_ray_direction(self, px, py):
        w = make_world()
        p = np.array([px, py])
        out = replan_edge(w, p)
        rel_in = p - w.tray_center
        rel_out = out - w.tray_center
        cross = rel_in[0] * rel_out[1] - rel_in[1] * rel_out[0]
        assert abs(cross) <= 1e-9
        assert rel_in @ rel_out >= -1e-12


class TestReplanManway:
    def test_center_projects_to_long_edge_midline(self, vendor_world):
        w = vendor_world
        out = replan_manway(w, w.manway.center)
        half_short = w.manway.short_side / 2 + w.buffer_margin
        assert abs(out[0] - w.manway.center[0]) < 1e-9
        assert abs(abs(out[1] - w.manway.center[1]) - half_short) < 1e-6

    def test_outside_unchanged(self, vendor_world):
        p = np.array([0.0, 0.5])
        assert np.allclose(replan_manway(vendor_world, p), p)

    def test_one_cm_inside_long_edge(self, vendor_world):
        w = vendor_world
        start_v = w.manway.short_side / 2 - 0.01
        p = w.manway.center + np.array([0.0, start_v])
        out = replan_manway(w, p)
        displacement = out[1] - p[1]
        assert displacement == pytest.approx(0.01 + w.buffer_margin, abs=1e-6)

    def test_result_satisfies_foothold_invariants(self, vendor_world, rng):
        w = vendor_world
        for _ in range(300):
            p = rng.uniform(-0.9, 0.9, 2)
            try:
                out = replan_manway(w, replan_edge(w, p))
            except PlannerStuckError:
                continue
            assert np.linalg.norm(out - w.tray_center) <= w.safe_radius + 1e-9
            assert not rect_contains(w.manway, w.buffer_margin, out, tol=-1e-9)

    def test_planner_stuck_when_rect_exceeds_disk(self):
        w = make_world(
            plate_radius=0.5, base_offset=0.1,
            long_side=1.2, short_side=0.3,
            pad_long=0.05, pad_short=0.05, buffer_margin=0.05,
        )
        with pytest.raises(PlannerStuckError):
            replan_manway(w, np.array([0.35, 0.0]))


class TestSupportPolygon:
    TRIANGLE = np.array([[0.0, 0.0], [0.4, 0.0], [0.2, 0.2 * math.sqrt(3.0)]])

    def test_centroid_inside_no_shrink(self):
        assert support_polygon_check(self.TRIANGLE, self.TRIANGLE.mean(axis=0), 0.0)

    def test_outside_false(self):
        assert not support_polygon_check(self.TRIANGLE, (1.0, 1.0), 0.0)

    def test_equilateral_shrink_margin(self):
        # com 2 cm inside an edge is 1 cm outside the 3 cm shrunk edge
        com = np.array([0.2, 0.02])
        assert not support_polygon_check(self.TRIANGLE, com, 0.03)
        assert support_polygon_check(self.TRIANGLE, np.array([0.2, 0.04]), 0.03)

    def test_degenerate_flag(self):
        collinear = np.array([[0.0, 0.0], [0.2, 0.2], [0.4, 0.4]])
        report = support_polygon_report(collinear, (0.1, 0.1), 0.0)
        assert report.degenerate and not report.inside


class TestKinematicFeasible:
    def test_center_of_reach(self):
        base = base_at()
        hip = hip_projection(base, "FL", PARAMS)
        assert kinematic_feasible(base, "FL", hip, 0.18, PARAMS)

    def test_just_beyond_reach(self):
        base = base_at()
        hip = hip_projection(base, "FL", PARAMS)
        assert not kinematic_feasible(base, "FL", hip + [0.18 + 1e-3, 0.0], 0.18, PARAMS)

    def test_diagonal_case(self):
        base = base_at()
        hip = hip_projection(base, "BR", PARAMS)
        assert not kinematic_feasible(base, "BR", hip + [0.13, 0.13], 0.18, PARAMS)
        assert kinematic_feasible(base, "BR", hip + [0.12, 0.12], 0.18, PARAMS)


class TestSwingTrajectory:
    def test_boundary_conditions(self):
        a, b = np.array([0.0, 0.0]), np.array([0.1, 0.05])
        start = swing_trajectory(a, b, 0.06, 0.4, 0.0)
        end = swing_trajectory(a, b, 0.06, 0.4, 0.4)
        assert np.allclose(start, [0, 0, 0], atol=1e-12)
        assert np.allclose(end, [0.1, 0.05, 0.0], atol=1e-12)

    def test_midpoint_apex(self):
        a, b = np.array([0.0, 0.0]), np.array([0.1, 0.0])
        mid = swing_trajectory(a, b, 0.06, 0.4, 0.2)
        assert mid[0] == pytest.approx(0.05, abs=1e-12)
        assert mid[2] == pytest.approx(0.06, abs=1e-12)

    def test_zero_boundary_velocity_by_finite_difference(self):
        a, b = np.array([0.0, 0.0]), np.array([0.12, -0.04])
        h = 1e-10
        v0 = (swing_trajectory(a, b, 0.06, 0.4, h) - swing_trajectory(a, b, 0.06, 0.4, 0.0)) / h
        vT = (swing_trajectory(a, b, 0.06, 0.4, 0.4) - swing_trajectory(a, b, 0.06, 0.4, 0.4 - h)) / h
        assert np.all(np.abs(v0) <= 1e-9)
        assert np.all(np.abs(vT) <= 1e-9)

    def test_rejects_bad_duration(self):
        with pytest.raises(ValueError):
            swing_trajectory((0, 0), (1, 1), 0.06, 0.0, 0.0)


class TestGaitExecutor:
    @staticmethod
    def _follow(base, events, drift=(0.0, 0.0)):
        """Base controller stand-in: chase the lean target, else drift."""
        if events.lean_target is not None:
            step = np.clip(events.lean_target - base.position, -0.003, 0.003)
        else:
            step = np.asarray(drift)
        return BaseState(base.position + step, base.yaw, base.layer)

    def test_phase_cycle_order(self):
        world = make_world(plate_radius=5.0, base_offset=0.25,
                           center=(3.0, 3.0), layer_gap=0.5)
        base = base_at(0.0, 0.0)
        gait = GaitExecutor.with_nominal_stance(base, PARAMS)
        cmd = VelocityCommand(0.05, 0.0)
        for _ in range(1500):
            events = gait.tick(world, base, cmd, 0.01)
            base = self._follow(base, events, drift=(0.0005, 0.0))
        assert len(gait.phase_history) >= 4
        for i, leg in enumerate(gait.phase_history):
            assert leg == PHASE_ORDER[i % 4]

    def test_single_swing_foot(self):
        world = make_world(plate_radius=5.0, base_offset=0.25, center=(3.0, 3.0))
        base = base_at()
        gait = GaitExecutor.with_nominal_stance(base, PARAMS)
        cmd = VelocityCommand(0.0, 0.0)
        swinging_ticks = 0
        for _ in range(800):
            events = gait.tick(world, base, cmd, 0.01)
            base = self._follow(base, events)
            if gait.state.swinging:
                swinging_ticks += 1
                assert gait.swing_leg in PHASE_ORDER
        assert swinging_ticks > 0

    def test_holds_when_polygon_fails(self):
        world = make_world(plate_radius=5.0, base_offset=0.25, center=(3.0, 3.0))
        base = base_at()
        gait = GaitExecutor.with_nominal_stance(base, PARAMS)
        # teleport the base far outside the stance: polygon check must fail
        far = BaseState(np.array([1.0, 1.0]), 0.0, 0)
        events = None
        for _ in range(30):
            events = gait.tick(world, far, VelocityCommand(0.0, 0.0), 0.01)
        assert events.holding
        assert not gait.state.swinging
        assert gait.phase_history == []

    def test_committed_footholds_safe(self, vendor_world, rng):
        base = base_at(-0.25, 0.53)
        gait = GaitExecutor.with_nominal_stance(base, PARAMS)
        w = vendor_world
        committed = 0
        for _ in range(1500):
            cmd = VelocityCommand(0.06, 0.0)
            events = gait.tick(w, base, cmd, 0.01)
            base = TestGaitExecutor._follow(base, events, drift=(0.0004, 0.0))
            if events.foothold is not None:
                committed += 1
                r = np.linalg.norm(events.foothold - w.tray_center)
                assert r <= w.safe_radius + 1e-9
                assert not rect_contains(w.manway, w.buffer_margin, events.foothold, tol=-1e-9)
        assert committed > 0


class TestPlanFoothold:
    def test_reason_labels(self, vendor_world):
        w = vendor_world
        # near the rim: edge replanning
        base_rim = base_at(0.0, 0.55, math.pi / 2)
        cmd = VelocityCommand(0.3, 0.0)
        t1 = plan_foothold(w, base_rim, cmd, "FL", PARAMS)
        # over the manway: rectangle replanning
        base_mid = base_at(0.0, 0.32, -math.pi / 2)
        t2 = plan_foothold(w, base_mid, VelocityCommand(0.0, -0.3), "FL", PARAMS)
        assert t1.reason in ("edge", "both")
        assert t2.reason in ("manway", "both")
        assert not rect_contains(w.manway, w.buffer_margin, t2.replanned, tol=-1e-9)
