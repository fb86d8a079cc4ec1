"""Mission autonomy: the inspection state machine.

Deterministic transition table over per-tick observations. The safety filter
is active exactly during inspection and waypoint locomotion; it is lifted for
the manway approach and everything that follows until locomotion resumes.
Halted and Done are absorbing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .geometry import BaseState, wrap_angle
from .perception import ValidationOutcome


class Node(str, enum.Enum):
    SEARCHING = "Searching"
    LOCOMOTION_INSPECT = "LocomotionInspect"
    LOCOMOTION_TO_WAYPOINT = "LocomotionToWaypoint"
    LOCOMOTION_TO_MANWAY = "LocomotionToManway"
    PRE_MOTION = "PreMotion"
    TRANSITION_UP = "TransitionUp"
    TRANSITION_DOWN = "TransitionDown"
    POST_MOTION = "PostMotion"
    LOCOMOTION_TO_SAFE = "LocomotionToSafe"
    HALTED = "Halted"
    DONE = "Done"


FILTER_ACTIVE_NODES = frozenset({Node.LOCOMOTION_INSPECT, Node.LOCOMOTION_TO_WAYPOINT})
GAIT_NODES = frozenset(
    {
        Node.LOCOMOTION_INSPECT,
        Node.LOCOMOTION_TO_WAYPOINT,
        Node.LOCOMOTION_TO_MANWAY,
        Node.LOCOMOTION_TO_SAFE,
    }
)
TRANSITION_NODES = frozenset({Node.TRANSITION_UP, Node.TRANSITION_DOWN})
ABSORBING_NODES = frozenset({Node.HALTED, Node.DONE})

ZONE_BY_NODE = {
    Node.SEARCHING: "search",
    Node.LOCOMOTION_INSPECT: "inspect",
    Node.LOCOMOTION_TO_WAYPOINT: "waypoint",
    Node.LOCOMOTION_TO_MANWAY: "approach",
    Node.PRE_MOTION: "premotion",
    Node.TRANSITION_UP: "transition",
    Node.TRANSITION_DOWN: "transition",
    Node.POST_MOTION: "postmotion",
    Node.LOCOMOTION_TO_SAFE: "safe",
    Node.HALTED: "halted",
    Node.DONE: "done",
}


def allowed_edges() -> frozenset[tuple[Node, Node]]:
    """Every legal (from, to) pair, self-loops excluded."""
    edges = set()
    for node in Node:
        if node not in ABSORBING_NODES:
            edges.add((node, Node.HALTED))
    edges.update(
        {
            (Node.SEARCHING, Node.LOCOMOTION_INSPECT),
            (Node.SEARCHING, Node.LOCOMOTION_TO_WAYPOINT),
            (Node.LOCOMOTION_INSPECT, Node.SEARCHING),
            (Node.LOCOMOTION_TO_WAYPOINT, Node.LOCOMOTION_TO_MANWAY),
            (Node.LOCOMOTION_TO_MANWAY, Node.PRE_MOTION),
            (Node.PRE_MOTION, Node.TRANSITION_UP),
            (Node.PRE_MOTION, Node.TRANSITION_DOWN),
            (Node.TRANSITION_UP, Node.POST_MOTION),
            (Node.TRANSITION_DOWN, Node.POST_MOTION),
            (Node.POST_MOTION, Node.LOCOMOTION_TO_SAFE),
            (Node.POST_MOTION, Node.LOCOMOTION_INSPECT),
            (Node.LOCOMOTION_TO_SAFE, Node.DONE),
        }
    )
    return frozenset(edges)


@dataclass(frozen=True)
class SearchMotion:
    amplitude: float = 0.3
    period: float = 2.0
    required_samples: int = 100


def searching_command(t_since_entry: float, search: SearchMotion) -> float:
    """Triangle-wave yaw offset: zero at entry, peaks at the quarter period."""
    period = search.period
    amp = search.amplitude
    t = t_since_entry % period
    quarter = period / 4.0
    if t < quarter:
        return amp * t / quarter
    if t < 3.0 * quarter:
        return amp * (1.0 - (t - quarter) / quarter)
    return amp * ((t - 3.0 * quarter) / quarter - 1.0)


@dataclass(frozen=True)
class MissionPlan:
    """Static mission script: goals, poses, tolerances, timeouts."""

    inspection_goals: dict[int, tuple[tuple[float, float], ...]]
    waypoint: tuple[float, float]
    transition_ready_position: tuple[float, float]
    transition_ready_yaw: float
    landing_position: tuple[float, float]
    safe_location: tuple[float, float]
    goal_tolerance: float = 0.05
    yaw_tolerance: float = 0.25
    search: SearchMotion = field(default_factory=SearchMotion)
    node_timeouts: dict[str, float] = field(default_factory=dict)
    transition_direction: dict[int, str] = field(default_factory=dict)
    default_timeout: float = 60.0

    def timeout_for(self, node: Node) -> float:
        return self.node_timeouts.get(node.value, self.default_timeout)

    def goals_for_layer(self, layer: int) -> list[np.ndarray]:
        return [np.asarray(g, dtype=float) for g in self.inspection_goals.get(layer, ())]


@dataclass(frozen=True)
class MissionState:
    node: Node
    goal: Optional[np.ndarray]
    goal_queue: tuple[tuple[float, float], ...]
    layer: int
    entered_at: float
    goal_yaw: Optional[float] = None

    @property
    def filter_active(self) -> bool:
        return self.node in FILTER_ACTIVE_NODES

    @property
    def gait_active(self) -> bool:
        return self.node in GAIT_NODES

    @property
    def zone(self) -> str:
        return ZONE_BY_NODE[self.node]


@dataclass(frozen=True)
class Observations:
    """Everything the automaton may consult in one tick."""

    time: float
    base: BaseState
    perception: Optional[ValidationOutcome] = None
    com_guard_ok: Optional[bool] = None
    playback_done: bool = False
    transition_result: Optional[str] = None  # "success" | "failure"
    planner_stuck: bool = False
    filter_infeasible: bool = False


@dataclass(frozen=True)
class Directives:
    filter_on: bool
    gait_on: bool
    playback: Optional[str]
    goal: Optional[np.ndarray]
    yaw_mode: str  # "goal" | "sweep" | "fixed"
    yaw_ref: Optional[float] = None


@dataclass(frozen=True)
class Transition:
    source: Node
    target: Node
    reason: str


def initial_state(plan: MissionPlan, start_layer: int, t: float = 0.0) -> MissionState:
    goals = tuple((float(g[0]), float(g[1])) for g in plan.goals_for_layer(start_layer))
    return MissionState(Node.SEARCHING, None, goals, start_layer, t)


def _goal_reached(state: MissionState, obs: Observations, plan: MissionPlan) -> bool:
    if state.goal is None:
        return False
    if float(np.linalg.norm(obs.base.position - state.goal)) > plan.goal_tolerance:
        return False
    if state.goal_yaw is not None:
        return abs(wrap_angle(obs.base.yaw - state.goal_yaw)) <= plan.yaw_tolerance
    return True


def _halt(state: MissionState, obs: Observations, reason: str):
    new = replace(state, node=Node.HALTED, goal=None, entered_at=obs.time)
    return new, [Transition(state.node, Node.HALTED, reason)]


def step(state: MissionState, obs: Observations, plan: MissionPlan
         ) -> tuple[MissionState, Directives, list[Transition]]:
    """One automaton step; returns the new state, directives and edge events."""
    node = state.node
    transitions: list[Transition] = []

    if node in ABSORBING_NODES:
        return state, _directives(state), transitions

    if obs.planner_stuck:
        state, transitions = _halt(state, obs, "planner-stuck")
        return state, _directives(state), transitions
    if obs.filter_infeasible:
        state, transitions = _halt(state, obs, "filter-infeasible")
        return state, _directives(state), transitions
    if obs.time - state.entered_at > plan.timeout_for(node):
        state, transitions = _halt(state, obs, "timeout")
        return state, _directives(state), transitions
    if obs.transition_result is not None and node not in TRANSITION_NODES:
        state, transitions = _halt(state, obs, "unexpected-observation")
        return state, _directives(state), transitions

    if node is Node.SEARCHING:
        if obs.perception is not None and obs.perception.accepted:
            if state.goal_queue:
                goal, rest = state.goal_queue[0], state.goal_queue[1:]
                state = replace(
                    state,
                    node=Node.LOCOMOTION_INSPECT,
                    goal=np.asarray(goal, dtype=float),
                    goal_queue=rest,
                    goal_yaw=None,
                    entered_at=obs.time,
                )
                transitions.append(
                    Transition(node, Node.LOCOMOTION_INSPECT, "manway-accepted")
                )
            else:
                state = replace(
                    state,
                    node=Node.LOCOMOTION_TO_WAYPOINT,
                    goal=np.asarray(plan.waypoint, dtype=float),
                    goal_yaw=None,
                    entered_at=obs.time,
                )
                transitions.append(
                    Transition(node, Node.LOCOMOTION_TO_WAYPOINT, "goals-exhausted")
                )

    elif node is Node.LOCOMOTION_INSPECT:
        if _goal_reached(state, obs, plan):
            if state.goal_queue:
                goal, rest = state.goal_queue[0], state.goal_queue[1:]
                state = replace(
                    state,
                    goal=np.asarray(goal, dtype=float),
                    goal_queue=rest,
                    entered_at=obs.time,
                )
                transitions.append(
                    Transition(node, Node.LOCOMOTION_INSPECT, "next-goal")
                )
            else:
                state = replace(
                    state, node=Node.SEARCHING, goal=None, goal_yaw=None, entered_at=obs.time
                )
                transitions.append(Transition(node, Node.SEARCHING, "inspection-complete"))

    elif node is Node.LOCOMOTION_TO_WAYPOINT:
        if _goal_reached(state, obs, plan):
            state = replace(
                state,
                node=Node.LOCOMOTION_TO_MANWAY,
                goal=np.asarray(plan.transition_ready_position, dtype=float),
                goal_yaw=plan.transition_ready_yaw,
                entered_at=obs.time,
            )
            transitions.append(Transition(node, Node.LOCOMOTION_TO_MANWAY, "waypoint-reached"))

    elif node is Node.LOCOMOTION_TO_MANWAY:
        if _goal_reached(state, obs, plan):
            state = replace(
                state, node=Node.PRE_MOTION, goal=None, goal_yaw=None, entered_at=obs.time
            )
            transitions.append(Transition(node, Node.PRE_MOTION, "transition-ready"))

    elif node is Node.PRE_MOTION:
        if obs.com_guard_ok is False:
            state, halt_events = _halt(state, obs, "com-guard")
            transitions.extend(halt_events)
        elif obs.playback_done:
            direction = plan.transition_direction.get(state.layer)
            if direction == "down":
                target = Node.TRANSITION_DOWN
            elif direction == "up":
                target = Node.TRANSITION_UP
            else:
                state, halt_events = _halt(state, obs, "no-transition-direction")
                transitions.extend(halt_events)
                return state, _directives(state), transitions
            state = replace(state, node=target, entered_at=obs.time)
            transitions.append(Transition(node, target, "premotion-complete"))

    elif node in TRANSITION_NODES:
        if obs.transition_result == "failure":
            state, halt_events = _halt(state, obs, "transition-failure")
            transitions.extend(halt_events)
        elif obs.transition_result == "success":
            new_layer = state.layer - 1 if node is Node.TRANSITION_DOWN else state.layer + 1
            state = replace(
                state, node=Node.POST_MOTION, layer=new_layer, entered_at=obs.time
            )
            transitions.append(Transition(node, Node.POST_MOTION, "transition-success"))

    elif node is Node.POST_MOTION:
        if obs.playback_done:
            next_goals = plan.goals_for_layer(state.layer)
            if next_goals:
                goal = next_goals[0]
                rest = tuple(
                    (float(g[0]), float(g[1])) for g in next_goals[1:]
                )
                state = replace(
                    state,
                    node=Node.LOCOMOTION_INSPECT,
                    goal=np.asarray(goal, dtype=float),
                    goal_queue=rest,
                    goal_yaw=None,
                    entered_at=obs.time,
                )
                transitions.append(Transition(node, Node.LOCOMOTION_INSPECT, "next-layer-goals"))
            else:
                state = replace(
                    state,
                    node=Node.LOCOMOTION_TO_SAFE,
                    goal=np.asarray(plan.safe_location, dtype=float),
                    goal_yaw=None,
                    entered_at=obs.time,
                )
                transitions.append(Transition(node, Node.LOCOMOTION_TO_SAFE, "postmotion-complete"))

    elif node is Node.LOCOMOTION_TO_SAFE:
        if _goal_reached(state, obs, plan):
            state = replace(state, node=Node.DONE, goal=None, entered_at=obs.time)
            transitions.append(Transition(node, Node.DONE, "safe-location-reached"))

    return state, _directives(state), transitions


def _directives(state: MissionState) -> Directives:
    node = state.node
    playback = None
    if node is Node.PRE_MOTION:
        playback = "premotion"
    elif node is Node.POST_MOTION:
        playback = "postmotion"
    elif node is Node.TRANSITION_DOWN:
        playback = "transition_down"
    elif node is Node.TRANSITION_UP:
        playback = "transition_up"
    if node is Node.SEARCHING:
        yaw_mode = "sweep"
    elif node is Node.LOCOMOTION_TO_MANWAY:
        yaw_mode = "fixed"
    elif node in GAIT_NODES:
        yaw_mode = "goal"
    else:
        yaw_mode = "fixed"
    return Directives(
        filter_on=state.filter_active,
        gait_on=state.gait_active,
        playback=playback,
        goal=None if state.goal is None else state.goal.copy(),
        yaw_mode=yaw_mode,
        yaw_ref=state.goal_yaw,
    )
