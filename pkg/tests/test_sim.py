import json
import math

import numpy as np
import pytest

from traybot.config import load_mission_config, load_sim_config, load_world_config
from traybot.errors import ConfigError
from traybot.geometry import BaseState, VelocityCommand
from traybot.mission import Node
from traybot.sim import (
    TRACE_HEADER,
    MissionRunner,
    VelocityLag,
    check_invariants,
    integrate_base,
    run_mission,
    write_outputs,
)


@pytest.fixture(scope="module")
def nominal(world_cfg, mission_cfg, sim_cfg):
    return run_mission(world_cfg, mission_cfg, sim_cfg)


class TestIntegrateBase:
    def test_zero_velocity_unchanged(self):
        s = BaseState(np.array([0.1, 0.2]), 0.3, 1)
        out = integrate_base(s, VelocityCommand(0.0, 0.0, 0.0), 0.01)
        assert np.allclose(out.position, s.position)
        assert out.yaw == s.yaw

    def test_forward_step(self):
        s = BaseState(np.zeros(2), 0.0, 0)
        out = integrate_base(s, VelocityCommand(0.1, 0.0, 0.0), 0.01)
        assert out.position[0] == pytest.approx(0.001, abs=1e-15)

    def test_yaw_wraps(self):
        s = BaseState(np.zeros(2), math.pi - 0.001, 0)
        out = integrate_base(s, VelocityCommand(0.0, 0.0, 0.5), 0.01)
        assert -math.pi < out.yaw <= math.pi
        assert out.yaw == pytest.approx(-math.pi + 0.004, abs=1e-9)

    def test_first_order_lag_step_response(self):
        lag = VelocityLag(tau=0.1)
        cmd = VelocityCommand(1.0, 0.0, 0.0)
        out = None
        for _ in range(10):  # 0.1 s at dt=0.01
            out = lag.apply(cmd, 0.01)
        assert out.vx == pytest.approx(1.0 - math.exp(-1.0), abs=0.03)


class TestNominalMission:
    def test_completes_with_one_layer_decrement(self, nominal):
        assert nominal.exit_status == "done"
        assert nominal.final_node == "Done"
        assert nominal.layer_start - nominal.layer_end == 1

    def test_trace_header_schema(self, nominal):
        assert nominal.trace_csv.splitlines()[0] == TRACE_HEADER

    def test_zone_progression(self, nominal):
        zones = []
        for row in nominal.trace_rows:
            zone = row.split(",")[-1]
            if not zones or zones[-1] != zone:
                zones.append(zone)
        assert zones == [
            "search", "inspect", "search", "waypoint", "approach",
            "premotion", "transition", "postmotion", "safe", "done",
        ]

    def test_barriers_positive_in_filter_zones(self, nominal):
        for row in nominal.trace_rows:
            parts = row.split(",")
            if parts[10] == "1":
                assert float(parts[8]) >= -1e-6
                assert float(parts[9]) >= -1e-6

    def test_deterministic_byte_identical(self, world_cfg, mission_cfg, sim_cfg, nominal):
        other = run_mission(world_cfg, mission_cfg, sim_cfg)
        assert other.trace_csv == nominal.trace_csv
        assert other.events_jsonl == nominal.events_jsonl

    def test_written_outputs_pass_invariants(self, nominal, world_cfg, tmp_path):
        write_outputs(nominal, tmp_path, world_cfg)
        assert (tmp_path / "trace.csv").exists()
        assert (tmp_path / "events.jsonl").exists()
        assert check_invariants(tmp_path) == []

    def test_tampered_trace_detected(self, nominal, world_cfg, tmp_path):
        write_outputs(nominal, tmp_path, world_cfg)
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        for i, line in enumerate(lines[1:], start=1):
            parts = line.split(",")
            if parts[10] == "1":
                parts[8] = "-0.5"
                lines[i] = ",".join(parts)
                break
        (tmp_path / "trace.csv").write_text("\n".join(lines) + "\n")
        violations = check_invariants(tmp_path)
        assert any("barrier violated" in v for v in violations)

    def test_schema_mismatch_detected(self, tmp_path, nominal, world_cfg):
        write_outputs(nominal, tmp_path, world_cfg)
        (tmp_path / "trace.csv").write_text("bogus,header\n1,2\n")
        with pytest.raises(ConfigError):
            check_invariants(tmp_path)


class TestFaultInjection:
    def test_transition_failure_halts(self, world_cfg, mission_cfg, sim_cfg):
        faulty = sim_cfg.model_copy(
            update={"faults": sim_cfg.faults.model_copy(
                update={"transition_failure_layers": [2]})}
        )
        result = run_mission(world_cfg, mission_cfg, faulty)
        assert result.exit_status == "halted"
        halt_events = [e for e in result.events
                       if e["type"] == "state" and e["to"] == "Halted"]
        assert halt_events[0]["from"] == "TransitionDown"
        assert halt_events[0]["reason"] == "transition-failure"


class TestEdgeConfigs:
    def test_zero_inspection_goals_goes_straight_to_waypoint(
            self, world_cfg, mission_cfg, sim_cfg):
        empty = mission_cfg.model_copy(update={"inspection_goals": {}})
        runner = MissionRunner(world_cfg, empty, sim_cfg)
        for _ in range(300):
            runner.tick()
            if runner.state.node is not Node.SEARCHING:
                break
        assert runner.state.node is Node.LOCOMOTION_TO_WAYPOINT

    def test_goal_outside_safe_set_rejected_before_ticks(
            self, world_cfg, mission_cfg, sim_cfg):
        bad = mission_cfg.model_copy(update={"waypoint": (0.0, 0.0)})
        with pytest.raises(ConfigError):
            MissionRunner(world_cfg, bad, sim_cfg)

    def test_missing_config_file(self):
        with pytest.raises(ConfigError):
            load_world_config("configs/does_not_exist.json")

    def test_bad_world_schema(self, tmp_path):
        bad = tmp_path / "w.json"
        bad.write_text(json.dumps({"tray_radius_m": "not-a-number"}))
        with pytest.raises(ConfigError):
            load_world_config(bad)

    def test_mission_with_missing_trajectory_file(self, tmp_path, mission_cfg):
        obj = json.loads(open("configs/mission.json").read())
        obj["transition_trajectories"] = {"down": {"file": "missing.json"}}
        path = tmp_path / "m.json"
        path.write_text(json.dumps(obj))
        with pytest.raises(ConfigError):
            load_mission_config(path)

    def test_velocity_lag_mode_runs(self, world_cfg, mission_cfg, sim_cfg):
        lagged = sim_cfg.model_copy(update={"velocity_lag": True})
        runner = MissionRunner(world_cfg, mission_cfg, lagged)
        for _ in range(200):
            runner.tick()
        assert runner.tick_index == 200
