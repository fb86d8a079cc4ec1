"""Quasi-static gait: phase scheduling, Raibert targets, safety replanning
near the manway and tray edge, and cubic swing trajectories.

One leg swings at a time in the fixed cycle FL -> BR -> FR -> BL. Liftoff is
gated on the shrunk three-foot support polygon containing the base; while the
gate fails the executor holds the phase and asks the base controller to lean
toward the stance centroid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import PlannerStuckError
from .geometry import (
    BaseState,
    TrayWorld,
    VelocityCommand,
    convex_polygon_margin,
    rect_boundary_projection,
    rect_contains,
    rot2,
)

PHASE_ORDER = ("FL", "BR", "FR", "BL")
LEG_ORDER = ("FL", "FR", "BL", "BR")

_PROJECTION_CLEARANCE = 1e-7


@dataclass(frozen=True)
class GaitParams:
    swing_duration: float = 0.4
    settle_duration: float = 0.1
    apex_height: float = 0.06
    raibert_gain: float = 0.3
    reach: float = 0.18
    polygon_shrink: float = 0.03
    hip_x: float = 0.15
    hip_y: float = 0.10
    # Liveness knobs: lean toward the stance centroid biased by the travel
    # direction; after holding too long, yield a window of goal pursuit.
    lean_bias: float = 0.03
    hold_patience: float = 1.5
    progress_window: float = 1.0

    def hip_offset(self, leg: str) -> np.ndarray:
        sx = 1.0 if leg[0] == "F" else -1.0
        sy = 1.0 if leg[1] == "L" else -1.0
        return np.array([sx * self.hip_x, sy * self.hip_y])


def hip_projection(base: BaseState, leg: str, params: GaitParams) -> np.ndarray:
    """Hip position projected to the ground plane, in the world frame."""
    return base.position + rot2(base.yaw) @ params.hip_offset(leg)


def raibert_target(base: BaseState, cmd: VelocityCommand, leg: str, params: GaitParams) -> np.ndarray:
    """Nominal swing-foot goal: hip projection plus a velocity-scaled offset."""
    return hip_projection(base, leg, params) + params.raibert_gain * cmd.planar


def replan_edge(world: TrayWorld, target) -> np.ndarray:
    """Pull a foothold radially back inside the shrunk tray disk."""
    p = np.asarray(target, dtype=float).reshape(2)
    d = p - world.tray_center
    dist = float(np.linalg.norm(d))
    if dist <= world.safe_radius:
        return p
    return world.tray_center + (world.safe_radius / dist) * d


def replan_manway(world: TrayWorld, target) -> np.ndarray:
    """Push a foothold out of the buffered manway rectangle.

    Projects to the nearest boundary point of the inflated rectangle, then
    re-applies the edge replanner. Raises PlannerStuckError if the result is
    dragged back inside the rectangle, which cannot be fixed by projection.
    """
    p = np.asarray(target, dtype=float).reshape(2)
    rect = world.manway
    if not rect_contains(rect, world.buffer_margin, p):
        return p
    projected = rect_boundary_projection(rect, world.buffer_margin, p, _PROJECTION_CLEARANCE)
    result = replan_edge(world, projected)
    if rect_contains(rect, world.buffer_margin, result, tol=-1e-9):
        raise PlannerStuckError(
            f"foothold {p.tolist()} cannot be projected clear of the manway"
        )
    return result


@dataclass(frozen=True)
class FootTarget:
    nominal: np.ndarray
    replanned: np.ndarray
    reason: str  # none | manway | edge | both


def plan_foothold(world: TrayWorld, base: BaseState, cmd: VelocityCommand,
                  leg: str, params: GaitParams) -> FootTarget:
    nominal = raibert_target(base, cmd, leg, params)
    after_edge = replan_edge(world, nominal)
    edge_moved = bool(np.linalg.norm(after_edge - nominal) > 1e-12)
    final = replan_manway(world, after_edge)
    manway_moved = bool(np.linalg.norm(final - after_edge) > 1e-12)
    reason = {
        (False, False): "none",
        (True, False): "edge",
        (False, True): "manway",
        (True, True): "both",
    }[(edge_moved, manway_moved)]
    return FootTarget(nominal, final, reason)


@dataclass(frozen=True)
class PolygonCheck:
    inside: bool
    degenerate: bool
    margin: float


def support_polygon_report(stance, com, shrink: float) -> PolygonCheck:
    margin, degenerate = convex_polygon_margin(stance, com)
    if degenerate:
        return PolygonCheck(False, True, -math.inf)
    return PolygonCheck(margin >= shrink, False, margin)


def support_polygon_check(stance, com, shrink: float) -> bool:
    """True iff com lies inside the stance triangle shrunk inward by ``shrink``."""
    return support_polygon_report(stance, com, shrink).inside


def kinematic_feasible(base: BaseState, leg: str, target, reach: float,
                       params: GaitParams) -> bool:
    p = np.asarray(target, dtype=float).reshape(2)
    return float(np.linalg.norm(p - hip_projection(base, leg, params))) <= reach


def _smoothstep(s: float) -> float:
    return s * s * (3.0 - 2.0 * s)


def swing_trajectory(p_start, p_end, apex_height: float, swing_duration: float,
                     t: float) -> np.ndarray:
    """Swing-foot pose at time t: cubic in the plane, two-segment cubic in z."""
    if swing_duration <= 0.0:
        raise ValueError("swing duration must be positive")
    a = np.asarray(p_start, dtype=float).reshape(2)
    b = np.asarray(p_end, dtype=float).reshape(2)
    s = min(max(t / swing_duration, 0.0), 1.0)
    xy = a + _smoothstep(s) * (b - a)
    if s < 0.5:
        z = apex_height * _smoothstep(2.0 * s)
    else:
        z = apex_height * _smoothstep(2.0 - 2.0 * s)
    return np.array([xy[0], xy[1], z])


@dataclass
class GaitState:
    """Phase-cycle bookkeeping; exactly one swing foot when ``swinging``."""

    phase_index: int = 0
    phase_clock: float = 0.0
    swinging: bool = False
    settle_clock: float = 0.0

    @property
    def swing_leg(self) -> str:
        return PHASE_ORDER[self.phase_index]


@dataclass
class GaitEvents:
    lifted: Optional[str] = None
    landed: Optional[str] = None
    replan_reason: str = "none"
    holding: bool = False
    lean_target: Optional[np.ndarray] = None
    foothold: Optional[np.ndarray] = None


class GaitExecutor:
    """Owns the gait cycle for one robot; ticked by the mission runner."""

    def __init__(self, params: GaitParams, feet: dict[str, np.ndarray]):
        self.params = params
        self.feet = {leg: np.asarray(p, dtype=float).copy() for leg, p in feet.items()}
        self.state = GaitState()
        self.phase_history: list[str] = []
        self._target: Optional[FootTarget] = None
        self._swing_start: Optional[np.ndarray] = None
        self.swing_height = 0.0
        self._hold_time = 0.0
        self._progress_time = 0.0

    @classmethod
    def with_nominal_stance(cls, base: BaseState, params: GaitParams,
                            phase_index: int = 0) -> "GaitExecutor":
        feet = {leg: hip_projection(base, leg, params) for leg in LEG_ORDER}
        executor = cls(params, feet)
        executor.state.phase_index = phase_index % len(PHASE_ORDER)
        return executor

    def stance_feet(self, exclude: Optional[str] = None) -> np.ndarray:
        legs = [l for l in LEG_ORDER if l != exclude]
        return np.array([self.feet[l] for l in legs])

    def stance_centroid(self, exclude: Optional[str] = None) -> np.ndarray:
        return self.stance_feet(exclude).mean(axis=0)

    @property
    def swing_leg(self) -> Optional[str]:
        return self.state.swing_leg if self.state.swinging else None

    def tick(self, world: TrayWorld, base: BaseState, nominal_cmd: VelocityCommand,
             dt: float) -> GaitEvents:
        """Advance the gait by one tick.

        ``nominal_cmd`` is the goal-directed velocity used for Raibert
        targeting; it is not necessarily the command the base executed.
        """
        events = GaitEvents()
        st = self.state
        if st.swinging:
            st.phase_clock += dt
            leg = st.swing_leg
            pose = swing_trajectory(
                self._swing_start, self._target.replanned,
                self.params.apex_height, self.params.swing_duration, st.phase_clock,
            )
            self.feet[leg] = pose[:2]
            self.swing_height = float(pose[2])
            events.lean_target = self.stance_centroid(exclude=leg)
            if st.phase_clock >= self.params.swing_duration:
                self.feet[leg] = self._target.replanned.copy()
                self.swing_height = 0.0
                events.landed = leg
                events.foothold = self._target.replanned.copy()
                events.replan_reason = self._target.reason
                st.swinging = False
                st.phase_clock = 0.0
                st.settle_clock = 0.0
                st.phase_index = (st.phase_index + 1) % len(PHASE_ORDER)
                self._target = None
                self._swing_start = None
            return events

        if st.settle_clock < self.params.settle_duration:
            st.settle_clock += dt
            return events

        leg = st.swing_leg
        target = plan_foothold(world, base, nominal_cmd, leg, self.params)
        stance = self.stance_feet(exclude=leg)
        polygon = support_polygon_report(stance, base.position, self.params.polygon_shrink)
        reachable = kinematic_feasible(base, leg, target.replanned, self.params.reach, self.params)
        if polygon.inside and reachable:
            st.swinging = True
            st.phase_clock = 0.0
            self._target = target
            self._swing_start = self.feet[leg].copy()
            self.phase_history.append(leg)
            self._hold_time = 0.0
            self._progress_time = 0.0
            events.lifted = leg
            events.replan_reason = target.reason
            events.lean_target = self.stance_centroid(exclude=leg)
        else:
            events.holding = True
            if self._progress_time > 0.0:
                # Yield: let the base pursue its goal before retrying liftoff.
                self._progress_time -= dt
                events.lean_target = None
            else:
                self._hold_time += dt
                lean = self.stance_centroid(exclude=leg)
                speed = float(np.linalg.norm(nominal_cmd.planar))
                if speed > 1e-9:
                    lean = lean + self.params.lean_bias * nominal_cmd.planar / speed
                events.lean_target = lean
                if self._hold_time >= self.params.hold_patience:
                    self._hold_time = 0.0
                    self._progress_time = self.params.progress_window
        return events
