"""Deterministic tick-loop simulator binding planner, filter, gait, perception
and the mission automaton; emits a CSV trace and JSON Lines event log.

Transitions between layers are kinematic playback of prerecorded
trajectories: the base moves along a scripted path and the layer index
changes, no contact dynamics are simulated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .config import MissionConfig, SimConfig, WorldConfig
from .contacts import (
    ContactSequenceProblem,
    JointTrajectory,
    com_guard,
    plan_contacts,
    segment_support_polygons,
    stitch_trajectories,
)
from .dynamics import PlanarQuadruped
from .errors import ConfigError, PlannerStuckError
from .gait import LEG_ORDER, GaitExecutor, GaitParams
from .geometry import BaseState, TrayWorld, VelocityCommand, rect_contains, wrap_angle
from .mission import (
    Node,
    Observations,
    ZONE_BY_NODE,
    initial_state,
    searching_command,
    step as mission_step,
)
from .perception import PerceptionAggregator, SimulatedSensor
from .qp import QpSolver
from .safety import (
    ReducedModel,
    ReferenceController,
    default_barriers,
    filter_velocity,
    heading_rate,
    manway_barrier,
    project_into_safe_set,
    tray_barrier,
)

TRACE_HEADER = (
    "tick,node,layer,x,y,yaw,vx,vy,h1,h2,filter,"
    "fl_x,fl_y,fr_x,fr_y,bl_x,bl_y,br_x,br_y,swing,zone"
)

TRACE_NAME = "trace.csv"
EVENTS_NAME = "events.jsonl"
WORLD_NAME = "world.json"
SUMMARY_NAME = "summary.json"


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def integrate_base(state: BaseState, cmd: VelocityCommand, dt: float) -> BaseState:
    """Single-integrator base update with yaw wrap to (-pi, pi]."""
    position = state.position + cmd.planar * dt
    yaw = wrap_angle(state.yaw + cmd.yaw_rate * dt)
    return BaseState(position, yaw, state.layer)


class VelocityLag:
    """Optional first-order command lag, config-gated at the simulator level."""

    def __init__(self, tau: float = 0.1):
        self.tau = tau
        self.velocity = np.zeros(2)
        self.yaw_rate = 0.0

    def apply(self, cmd: VelocityCommand, dt: float) -> VelocityCommand:
        k = dt / self.tau
        self.velocity = self.velocity + k * (cmd.planar - self.velocity)
        self.yaw_rate = self.yaw_rate + k * (cmd.yaw_rate - self.yaw_rate)
        return VelocityCommand(float(self.velocity[0]), float(self.velocity[1]), self.yaw_rate)


@dataclass
class RunResult:
    exit_status: str
    final_node: str
    ticks: int
    trace_rows: list[str]
    events: list[dict]
    perceived_world: Optional[WorldConfig]
    layer_start: int
    layer_end: int

    @property
    def trace_csv(self) -> str:
        return "\n".join([TRACE_HEADER] + self.trace_rows) + "\n"

    @property
    def events_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)


class MissionRunner:
    """One mission instance; single-threaded, owned state, seeded randomness."""

    def __init__(self, world_cfg: WorldConfig, mission_cfg: MissionConfig, sim_cfg: SimConfig):
        self.world_cfg = world_cfg
        self.mission_cfg = mission_cfg
        self.sim_cfg = sim_cfg
        self.true_world = world_cfg.build()
        self.plan = mission_cfg.plan()
        self._validate_goals()

        g = sim_cfg.gait
        self.gait_params = GaitParams(
            swing_duration=g.swing_duration_s,
            settle_duration=g.settle_duration_s,
            apex_height=g.apex_height_m,
            raibert_gain=g.raibert_gain_s,
            reach=g.reach_m,
            polygon_shrink=g.polygon_shrink_m,
            hip_x=g.hip_x_m,
            hip_y=g.hip_y_m,
            lean_bias=g.lean_bias_m,
            hold_patience=g.hold_patience_s,
            progress_window=g.progress_window_s,
        )
        f = sim_cfg.filter
        self.reduced = ReducedModel(
            -f.v_bound_mps * np.ones(2), f.v_bound_mps * np.ones(2)
        )
        self.position_gain = f.position_gain

        start = mission_cfg.start
        self.base = BaseState(np.asarray(start.position, dtype=float), start.yaw, start.layer)
        self.gait = GaitExecutor.with_nominal_stance(self.base, self.gait_params)
        self.state = initial_state(self.plan, start.layer)
        self.sensor = SimulatedSensor(self.true_world, sim_cfg.noise_sigma_m, sim_cfg.seed)
        self.aggregator = PerceptionAggregator(
            world_cfg.manway.L_l, world_cfg.manway.L_s, self.plan.search.required_samples
        )
        self.filter_solver = QpSolver()
        self.composite = PlanarQuadruped()
        self.lag = VelocityLag(sim_cfg.velocity_lag_tau_s) if sim_cfg.velocity_lag else None

        self.planner_world: Optional[TrayWorld] = None
        self.perceived_cfg: Optional[WorldConfig] = None
        self.tick_index = 0
        self.trace_rows: list[str] = []
        self.events: list[dict] = []

        self._entry_yaw = start.yaw
        self._pending_perception = None
        self._playback: Optional[JointTrajectory] = None
        self._playback_clock = 0.0
        self._playback_duration = 0.0
        self._com_guard_ok: Optional[bool] = None
        self._transition_from_pose: Optional[tuple[np.ndarray, float]] = None
        self._transition_fault = False
        self._planner_stuck = False
        self._filter_infeasible = False
        self._lean_target: Optional[np.ndarray] = None
        self._last_cmd = VelocityCommand(0.0, 0.0, 0.0)

    # -- setup checks -------------------------------------------------

    def _validate_goals(self) -> None:
        world = self.true_world
        named = {"waypoint": self.plan.waypoint, "safe_location": self.plan.safe_location}
        for layer, goals in self.plan.inspection_goals.items():
            for i, goal in enumerate(goals):
                named[f"inspection_goal[{layer}][{i}]"] = goal
        for name, goal in named.items():
            if manway_barrier(world, goal) <= 0.0 or tray_barrier(world, goal) <= 0.0:
                raise ConfigError(f"{name} {tuple(goal)} is outside the safe set")

    # -- mission loop -------------------------------------------------

    @property
    def time(self) -> float:
        return self.tick_index * self.sim_cfg.dt_s

    def run(self) -> RunResult:
        layer_start = self.state.layer
        while self.tick_index < self.sim_cfg.max_ticks:
            self.tick()
            if self.state.node in (Node.DONE, Node.HALTED):
                break
        exit_status = "done" if self.state.node is Node.DONE else "halted"
        return RunResult(
            exit_status=exit_status,
            final_node=self.state.node.value,
            ticks=self.tick_index,
            trace_rows=self.trace_rows,
            events=self.events,
            perceived_world=self.perceived_cfg,
            layer_start=layer_start,
            layer_end=self.state.layer,
        )

    def tick(self) -> None:
        obs = self._observe()
        new_state, directives, transitions = mission_step(self.state, obs, self.plan)
        for tr in transitions:
            self._log_event(
                {"tick": self.tick_index, "type": "state", "from": tr.source.value,
                 "to": tr.target.value, "reason": tr.reason}
            )
        if transitions:
            self._on_enter(new_state.node, transitions[-1].reason)
        self.state = new_state
        self.base.layer = new_state.layer
        if self.state.node not in (Node.DONE, Node.HALTED):
            self._execute(directives)
        self._record()
        self.tick_index += 1

    def _observe(self) -> Observations:
        perception = self._pending_perception
        self._pending_perception = None
        playback_done = False
        transition_result = None
        node = self.state.node
        if node in (Node.PRE_MOTION, Node.POST_MOTION):
            playback_done = self._playback_clock >= self._playback_duration
        elif node in (Node.TRANSITION_DOWN, Node.TRANSITION_UP):
            if self._playback_clock >= self._playback_duration:
                transition_result = "failure" if self._transition_fault else "success"
            elif self._transition_fault and self._playback_clock >= 0.5 * self._playback_duration:
                transition_result = "failure"
        return Observations(
            time=self.time,
            base=self.base,
            perception=perception,
            com_guard_ok=self._com_guard_ok if node is Node.PRE_MOTION else None,
            playback_done=playback_done,
            transition_result=transition_result,
            planner_stuck=self._planner_stuck,
            filter_infeasible=self._filter_infeasible,
        )

    def _on_enter(self, node: Node, reason: str) -> None:
        self._entry_yaw = self.base.yaw
        self.filter_solver.reset()
        if node is Node.SEARCHING:
            self.aggregator.reset()
        elif node in (Node.PRE_MOTION, Node.POST_MOTION):
            self._plan_intermediate(node)
        elif node in (Node.TRANSITION_DOWN, Node.TRANSITION_UP):
            name = "down" if node is Node.TRANSITION_DOWN else "up"
            traj = self.mission_cfg.trajectory(name)
            self._playback = None
            self._playback_clock = 0.0
            self._playback_duration = traj.duration
            self._transition_from_pose = (self.base.position.copy(), self.base.yaw)
            self._transition_fault = (
                self.state.layer in self.sim_cfg.faults.transition_failure_layers
            )
            if self._transition_fault:
                self._log_event(
                    {"tick": self.tick_index, "type": "fault",
                     "detail": f"transition failure injected at layer {self.state.layer}"}
                )

    def _plan_intermediate(self, node: Node) -> None:
        inter = self.mission_cfg.intermediate
        q_stand = np.asarray(inter.q_stand, dtype=float)
        q_trans = np.asarray(inter.q_transition, dtype=float)
        if node is Node.PRE_MOTION:
            q0, qt = q_stand, q_trans
        else:
            q0, qt = q_trans, q_stand
        problem = ContactSequenceProblem(
            horizon=inter.horizon,
            q_target=qt,
            q_initial=q0,
            weight=ContactSequenceProblem.default_weight(self.composite),
            model=self.composite,
        )
        plan = plan_contacts(problem)
        trajectory = stitch_trajectories(plan, inter.step_duration_s)
        polygons = segment_support_polygons(plan, self.composite, self.base.position, self.base.yaw)
        guard = com_guard(
            trajectory, polygons, self.composite, self.base.position, self.base.yaw,
            shrink=self.gait_params.polygon_shrink,
        )
        self._playback = trajectory
        self._playback_clock = 0.0
        self._playback_duration = trajectory.duration
        self._com_guard_ok = guard
        self._log_event(
            {"tick": self.tick_index, "type": "plan", "phase": ZONE_BY_NODE[node],
             "pattern": [list(s) for s in plan.pattern],
             "objective": plan.objective, "com_guard": guard}
        )

    def _execute(self, directives) -> None:
        dt = self.sim_cfg.dt_s
        node = self.state.node
        yaw_rate = self._yaw_command(directives)
        cmd = VelocityCommand(0.0, 0.0, yaw_rate)
        nominal_cmd = VelocityCommand(0.0, 0.0, 0.0)

        if directives.goal is not None:
            nominal = self.position_gain * (directives.goal - self.base.position)
            nominal_cmd = VelocityCommand(*nominal).clamped(self.reduced.v_min, self.reduced.v_max)
            target = directives.goal
            if directives.gait_on and self._lean_target is not None:
                target = self._lean_target
                if directives.filter_on and self.planner_world is not None:
                    target = project_into_safe_set(self.planner_world, target)
            ref = ReferenceController(target, self.position_gain * np.ones(2))
            if directives.filter_on:
                world = self.planner_world
                if world is None:
                    self._planner_stuck = True
                    return
                vel, diag = filter_velocity(
                    self.reduced, default_barriers(
                        world, self.sim_cfg.filter.gamma_manway, self.sim_cfg.filter.gamma_tray
                    ), ref, self.base.position, self.filter_solver,
                )
                if diag.infeasible:
                    self._filter_infeasible = True
                cmd = VelocityCommand(vel.vx, vel.vy, yaw_rate)
            else:
                raw = ref.nominal(self.base.position)
                clamped = VelocityCommand(*raw).clamped(self.reduced.v_min, self.reduced.v_max)
                cmd = VelocityCommand(clamped.vx, clamped.vy, yaw_rate)

        effective = self.lag.apply(cmd, dt) if self.lag is not None else cmd
        if node in (Node.TRANSITION_DOWN, Node.TRANSITION_UP):
            self._advance_transition(dt)
        else:
            self.base = integrate_base(self.base, effective, dt)
        self._last_cmd = cmd

        if directives.gait_on:
            world = self.planner_world if self.planner_world is not None else self.true_world
            try:
                events = self.gait.tick(world, self.base, nominal_cmd, dt)
            except PlannerStuckError as exc:
                self._planner_stuck = True
                self._log_event(
                    {"tick": self.tick_index, "type": "foot", "event": "stuck",
                     "detail": str(exc)}
                )
                return
            self._lean_target = events.lean_target
            if events.lifted:
                self._log_event(
                    {"tick": self.tick_index, "type": "foot", "event": "lift",
                     "leg": events.lifted, "reason": events.replan_reason}
                )
            if events.landed:
                self._log_event(
                    {"tick": self.tick_index, "type": "foot", "event": "land",
                     "leg": events.landed,
                     "pos": [float(events.foothold[0]), float(events.foothold[1])],
                     "reason": events.replan_reason}
                )
        else:
            self._lean_target = None

        if node is Node.SEARCHING:
            self._acquire_perception()
        if node in (Node.PRE_MOTION, Node.POST_MOTION):
            self._playback_clock += dt

    def _advance_transition(self, dt: float) -> None:
        self._playback_clock += dt
        frac = min(self._playback_clock / self._playback_duration, 1.0)
        start_pos, start_yaw = self._transition_from_pose
        landing = np.asarray(self.plan.landing_position, dtype=float)
        pos = start_pos + frac * (landing - start_pos)
        self.base = BaseState(pos, start_yaw, self.base.layer)
        # Feet ride along rigidly during playback; they are excluded from
        # foothold checks and re-set on landing. The phase cycle carries over.
        if frac >= 1.0 and not self._transition_fault:
            self.gait = GaitExecutor.with_nominal_stance(
                self.base, self.gait_params, self.gait.state.phase_index
            )

    def _yaw_command(self, directives) -> float:
        if directives.yaw_mode == "sweep":
            ref = self._entry_yaw + searching_command(
                self.time - self.state.entered_at, self.plan.search
            )
        elif directives.yaw_mode == "fixed" and directives.yaw_ref is not None:
            ref = directives.yaw_ref
        elif directives.yaw_mode == "goal" and directives.goal is not None:
            delta = directives.goal - self.base.position
            if float(np.linalg.norm(delta)) > 0.10:
                ref = math.atan2(delta[1], delta[0])
            else:
                ref = self.base.yaw
        else:
            ref = self.base.yaw
        return heading_rate(self.base.yaw, ref)

    def _acquire_perception(self) -> None:
        frame, measurement = self.sensor.measure(self.base)
        outcome = self.aggregator.add(frame, measurement)
        if outcome is None:
            return
        self._pending_perception = outcome
        if outcome.accepted:
            rect = outcome.rect
            world = TrayWorld.from_manway(
                rect,
                plate_radius=self.true_world.plate_radius,
                base_offset=self.true_world.base_offset,
                layer_count=self.true_world.layer_count,
                layer_gap=self.true_world.layer_gap,
                tray_center=rect.center,
                pad_long=self.true_world.pad_long,
                pad_short=self.true_world.pad_short,
                buffer_margin=self.true_world.buffer_margin,
            )
            self.planner_world = world
            self.perceived_cfg = WorldConfig.from_world(world)
            self._log_event(
                {"tick": self.tick_index, "type": "perception_accept",
                 "world": self.perceived_cfg.model_dump()}
            )
        else:
            self._log_event(
                {"tick": self.tick_index, "type": "perception_reject",
                 "detail": outcome.failure}
            )

    def _record(self) -> None:
        world = self.planner_world if self.planner_world is not None else self.true_world
        h1 = manway_barrier(world, self.base.position)
        h2 = tray_barrier(world, self.base.position)
        feet = []
        for leg in LEG_ORDER:
            feet.extend([self.gait.feet[leg][0], self.gait.feet[leg][1]])
        swing = self.gait.swing_leg or "-"
        row = ",".join(
            [
                str(self.tick_index),
                self.state.node.value,
                str(self.state.layer),
                _fmt(self.base.position[0]),
                _fmt(self.base.position[1]),
                _fmt(self.base.yaw),
                _fmt(self._last_cmd.vx),
                _fmt(self._last_cmd.vy),
                _fmt(h1),
                _fmt(h2),
                "1" if self.state.filter_active else "0",
            ]
            + [_fmt(v) for v in feet]
            + [swing, self.state.zone]
        )
        self.trace_rows.append(row)

    def _log_event(self, event: dict) -> None:
        self.events.append(event)


def run_mission(world_cfg: WorldConfig, mission_cfg: MissionConfig, sim_cfg: SimConfig
                ) -> RunResult:
    return MissionRunner(world_cfg, mission_cfg, sim_cfg).run()


def write_outputs(result: RunResult, out_dir: str | Path, world_cfg: WorldConfig) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / TRACE_NAME).write_text(result.trace_csv)
    (out / EVENTS_NAME).write_text(result.events_jsonl)
    (out / WORLD_NAME).write_text(json.dumps(world_cfg.model_dump(), indent=1, sort_keys=True))
    summary = {
        "exit_status": result.exit_status,
        "final_node": result.final_node,
        "ticks": result.ticks,
        "layer_start": result.layer_start,
        "layer_end": result.layer_end,
    }
    (out / SUMMARY_NAME).write_text(json.dumps(summary, indent=1, sort_keys=True))


# -- invariant checking over written traces ---------------------------------


def _parse_trace(text: str) -> list[dict]:
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != TRACE_HEADER:
        raise ConfigError("trace schema mismatch: unexpected header")
    cols = TRACE_HEADER.split(",")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(cols):
            raise ConfigError("trace schema mismatch: wrong column count")
        rows.append(dict(zip(cols, parts)))
    return rows

def check_invariants(trace_dir: str | Path, h_tol: float = 1e-6) -> list[str]:
    """Validate a written trace directory; returns human-readable violations."""
    trace_dir = Path(trace_dir)
    return check_invariants_data(
        (trace_dir / TRACE_NAME).read_text(),
        (trace_dir / EVENTS_NAME).read_text(),
        WorldConfig.model_validate(json.loads((trace_dir / WORLD_NAME).read_text())),
        h_tol=h_tol,
    )


def check_invariants_data(trace_csv: str, events_jsonl: str, base_world_cfg: WorldConfig,
                          h_tol: float = 1e-6) -> list[str]:
    """Invariant checks over in-memory trace data.

    Checks: barrier positivity in filter-active rows, committed-foothold
    safety against the world in force at each landing, zone/node agreement,
    and the gait phase cycle.
    """
    rows = _parse_trace(trace_csv)
    events = [json.loads(ln) for ln in events_jsonl.splitlines() if ln.strip()]

    # World timeline: perception acceptances supersede the configured world.
    world_timeline: list[tuple[int, TrayWorld]] = [(-1, base_world_cfg.build())]
    for e in events:
        if e.get("type") == "perception_accept":
            cfg = WorldConfig.model_validate(e["world"])
            world_timeline.append((int(e["tick"]), cfg.build()))

    def world_at(tick: int) -> TrayWorld:
        active = world_timeline[0][1]
        for t, w in world_timeline:
            if t <= tick:
                active = w
            else:
                break
        return active

    violations: list[str] = []
    for row in rows:
        tick = int(row["tick"])
        if row["zone"] != ZONE_BY_NODE[Node(row["node"])]:
            violations.append(f"tick {tick}: zone {row['zone']} != node {row['node']}")
        if row["filter"] == "1":
            h1, h2 = float(row["h1"]), float(row["h2"])
            if h1 < -h_tol or h2 < -h_tol:
                violations.append(f"tick {tick}: barrier violated (h1={h1}, h2={h2})")
            world = world_at(tick)
            p = np.array([float(row["x"]), float(row["y"])])
            if abs(manway_barrier(world, p) - h1) > 1e-6:
                violations.append(f"tick {tick}: stored h1 inconsistent with world")

    for e in events:
        if e.get("type") != "foot" or e.get("event") != "land":
            continue
        tick = int(e["tick"])
        world = world_at(tick)
        p = np.asarray(e["pos"], dtype=float)
        r = float(np.linalg.norm(p - world.tray_center))
        if r > world.safe_radius + 1e-6:
            violations.append(f"tick {tick}: foothold outside tray disk (r={r:.4f})")
        if rect_contains(world.manway, world.buffer_margin, p, tol=-1e-6):
            violations.append(f"tick {tick}: foothold inside buffered manway")

    lift_legs = [e["leg"] for e in events if e.get("type") == "foot" and e.get("event") == "lift"]
    cycle = ("FL", "BR", "FR", "BL")
    for i, leg in enumerate(lift_legs):
        if leg != cycle[i % 4]:
            violations.append(f"gait order broken at swing {i}: {leg}")
            break
    return violations
