import itertools

import numpy as np
import pytest

from traybot.geometry import BaseState, ManwayRect
from traybot.mission import (
    ABSORBING_NODES,
    Directives,
    FILTER_ACTIVE_NODES,
    MissionPlan,
    MissionState,
    Node,
    Observations,
    SearchMotion,
    ZONE_BY_NODE,
    allowed_edges,
    initial_state,
    searching_command,
    step,
)
from traybot.perception import ValidationOutcome


def make_plan(**overrides):
    defaults = dict(
        inspection_goals={2: ((0.0, 0.55), (0.2, 0.5)), 1: ()},
        waypoint=(0.0, 0.55),
        transition_ready_position=(0.0, 0.30),
        transition_ready_yaw=-1.5708,
        landing_position=(0.0, 0.40),
        safe_location=(0.0, 0.55),
        transition_direction={2: "down"},
    )
    defaults.update(overrides)
    return MissionPlan(**defaults)


def accepted_outcome():
    rect = ManwayRect.from_center((0.0, 0.0), 0.0, 0.6985, 0.3810)
    return ValidationOutcome(True, rect, None)


def obs(time=0.0, position=(0.0, 0.0), yaw=0.0, layer=2, **kw):
    base = BaseState(np.asarray(position, dtype=float), yaw, layer)
    return Observations(time=time, base=base, **kw)


class TestSearchingCommand:
    def test_zero_at_entry(self):
        assert searching_command(0.0, SearchMotion()) == 0.0

    def test_peak_at_quarter_period(self):
        assert searching_command(0.5, SearchMotion()) == pytest.approx(0.3)

    def test_trough_at_three_quarters(self):
        assert searching_command(1.5, SearchMotion()) == pytest.approx(-0.3)

    def test_periodicity(self):
        for t in np.linspace(0.0, 2.0, 21):
            assert searching_command(t, SearchMotion()) == pytest.approx(
                searching_command(t + 2.0, SearchMotion()), abs=1e-12
            )

    def test_amplitude_bounds(self):
        vals = [searching_command(t, SearchMotion()) for t in np.linspace(0, 4, 401)]
        assert max(vals) == pytest.approx(0.3, abs=1e-9)
        assert min(vals) == pytest.approx(-0.3, abs=1e-9)
        assert all(abs(v) <= 0.3 + 1e-12 for v in vals)


class TestTransitions:
    def test_search_accept_with_goals_starts_inspection(self):
        plan = make_plan()
        state = initial_state(plan, 2)
        new, directives, events = step(state, obs(perception=accepted_outcome()), plan)
        assert new.node is Node.LOCOMOTION_INSPECT
        assert directives.filter_on and directives.gait_on
        assert np.allclose(new.goal, [0.0, 0.55])
        assert events[0].reason == "manway-accepted"

    def test_search_accept_without_goals_goes_to_waypoint(self):
        plan = make_plan(inspection_goals={2: ()})
        state = initial_state(plan, 2)
        new, directives, _ = step(state, obs(perception=accepted_outcome()), plan)
        assert new.node is Node.LOCOMOTION_TO_WAYPOINT
        assert directives.filter_on

    def test_search_reject_stays(self):
        plan = make_plan()
        state = initial_state(plan, 2)
        rejected = ValidationOutcome(False, None, "side-length")
        new, _, events = step(state, obs(perception=rejected), plan)
        assert new.node is Node.SEARCHING and not events

    def test_inspection_queue_advances(self):
        plan = make_plan()
        state = initial_state(plan, 2)
        state, _, _ = step(state, obs(perception=accepted_outcome()), plan)
        state, _, events = step(state, obs(time=1.0, position=(0.0, 0.55)), plan)
        assert state.node is Node.LOCOMOTION_INSPECT
        assert np.allclose(state.goal, [0.2, 0.5])
        assert events[0].reason == "next-goal"
        state, _, events = step(state, obs(time=2.0, position=(0.2, 0.5)), plan)
        assert state.node is Node.SEARCHING
        assert events[0].reason == "inspection-complete"

    def test_waypoint_to_manway_requires_yaw(self):
        plan = make_plan()
        state = MissionState(Node.LOCOMOTION_TO_MANWAY, np.array([0.0, 0.30]),
                             (), 2, 0.0, goal_yaw=-1.5708)
        wrong_yaw = obs(time=1.0, position=(0.0, 0.30), yaw=0.0)
        new, _, _ = step(state, wrong_yaw, plan)
        assert new.node is Node.LOCOMOTION_TO_MANWAY
        aligned = obs(time=1.0, position=(0.0, 0.30), yaw=-1.5708)
        new, directives, _ = step(state, aligned, plan)
        assert new.node is Node.PRE_MOTION
        assert directives.playback == "premotion"
        assert not directives.filter_on

    def test_premotion_guard_failure_halts(self):
        plan = make_plan()
        state = MissionState(Node.PRE_MOTION, None, (), 2, 0.0)
        new, _, events = step(state, obs(time=1.0, com_guard_ok=False), plan)
        assert new.node is Node.HALTED
        assert events[0].reason == "com-guard"

    def test_premotion_completion_picks_direction(self):
        plan = make_plan()
        state = MissionState(Node.PRE_MOTION, None, (), 2, 0.0)
        new, directives, _ = step(
            state, obs(time=1.0, com_guard_ok=True, playback_done=True), plan
        )
        assert new.node is Node.TRANSITION_DOWN
        assert directives.playback == "transition_down"

    def test_premotion_without_direction_halts(self):
        plan = make_plan(transition_direction={})
        state = MissionState(Node.PRE_MOTION, None, (), 2, 0.0)
        new, _, events = step(
            state, obs(time=1.0, com_guard_ok=True, playback_done=True), plan
        )
        assert new.node is Node.HALTED
        assert events[-1].reason == "no-transition-direction"

    def test_transition_failure_halts(self):
        plan = make_plan()
        state = MissionState(Node.TRANSITION_DOWN, None, (), 2, 0.0)
        new, _, events = step(state, obs(time=1.0, transition_result="failure"), plan)
        assert new.node is Node.HALTED
        assert events[0].reason == "transition-failure"

    def test_transition_success_decrements_layer(self):
        plan = make_plan()
        state = MissionState(Node.TRANSITION_DOWN, None, (), 2, 0.0)
        new, _, _ = step(state, obs(time=1.0, transition_result="success"), plan)
        assert new.node is Node.POST_MOTION
        assert new.layer == 1

    def test_postmotion_without_goals_heads_to_safety(self):
        plan = make_plan()
        state = MissionState(Node.POST_MOTION, None, (), 1, 0.0)
        new, _, _ = step(state, obs(time=1.0, layer=1, playback_done=True), plan)
        assert new.node is Node.LOCOMOTION_TO_SAFE
        assert np.allclose(new.goal, [0.0, 0.55])

    def test_postmotion_with_next_layer_goals_resumes_inspection(self):
        plan = make_plan(inspection_goals={2: (), 1: ((0.1, 0.5),)})
        state = MissionState(Node.POST_MOTION, None, (), 1, 0.0)
        new, _, _ = step(state, obs(time=1.0, layer=1, playback_done=True), plan)
        assert new.node is Node.LOCOMOTION_INSPECT
        assert np.allclose(new.goal, [0.1, 0.5])

    def test_safe_location_reached_completes(self):
        plan = make_plan()
        state = MissionState(Node.LOCOMOTION_TO_SAFE, np.array([0.0, 0.55]), (), 1, 0.0)
        new, _, events = step(state, obs(time=1.0, position=(0.0, 0.551)), plan)
        assert new.node is Node.DONE
        assert events[0].reason == "safe-location-reached"

    def test_timeout_halts_any_active_node(self):
        plan = make_plan()
        state = MissionState(Node.LOCOMOTION_INSPECT, np.array([0.0, 0.55]), (), 2, 0.0)
        new, _, events = step(state, obs(time=61.0), plan)
        assert new.node is Node.HALTED
        assert events[0].reason == "timeout"

    def test_planner_stuck_halts(self):
        plan = make_plan()
        state = MissionState(Node.LOCOMOTION_INSPECT, np.array([0.0, 0.55]), (), 2, 0.0)
        new, _, events = step(state, obs(time=1.0, planner_stuck=True), plan)
        assert new.node is Node.HALTED and events[0].reason == "planner-stuck"

    def test_filter_infeasible_halts(self):
        plan = make_plan()
        state = MissionState(Node.LOCOMOTION_TO_WAYPOINT, np.array([0.0, 0.55]), (), 2, 0.0)
        new, _, events = step(state, obs(time=1.0, filter_infeasible=True), plan)
        assert new.node is Node.HALTED and events[0].reason == "filter-infeasible"

    def test_unexpected_observation_halts(self):
        plan = make_plan()
        state = MissionState(Node.LOCOMOTION_INSPECT, np.array([0.0, 0.55]), (), 2, 0.0)
        new, _, events = step(state, obs(time=1.0, transition_result="success"), plan)
        assert new.node is Node.HALTED
        assert events[0].reason == "unexpected-observation"


def observation_alphabet():
    """Coarse but complete discretization of the observation space."""
    perceptions = (None, "accept", "reject")
    guards = (None, True, False)
    playbacks = (False, True)
    results = (None, "success", "failure")
    stucks = (False, True)
    infeasibles = (False, True)
    positions = ("far", "at-goal")
    times = (1.0, 100.0)
    for combo in itertools.product(perceptions, guards, playbacks, results,
                                   stucks, infeasibles, positions, times):
        yield combo


def build_obs(state: MissionState, combo) -> Observations:
    perception, guard, playback, result, stuck, infeasible, pos_kind, t = combo
    if perception == "accept":
        perception = accepted_outcome()
    elif perception == "reject":
        perception = ValidationOutcome(False, None, "side-length")
    if pos_kind == "at-goal" and state.goal is not None:
        position = state.goal
        yaw = state.goal_yaw if state.goal_yaw is not None else 0.0
    else:
        position = np.array([5.0, 5.0])
        yaw = 0.0
    base = BaseState(np.asarray(position, dtype=float), yaw, state.layer)
    return Observations(
        time=state.entered_at + t, base=base, perception=perception,
        com_guard_ok=guard, playback_done=playback, transition_result=result,
        planner_stuck=stuck, filter_infeasible=infeasible,
    )


class TestConformance:
    def test_reachable_edges_subset_of_graph(self):
        plan = make_plan(inspection_goals={2: ((0.0, 0.55),), 1: ((0.1, 0.5),)},
                         transition_direction={2: "down", 1: "up"})
        edges = allowed_edges()
        seen_states = set()
        frontier = [initial_state(plan, 2)]
        combos = list(observation_alphabet())
        while frontier:
            state = frontier.pop()
            key = (state.node, state.layer, len(state.goal_queue), state.goal is None)
            if key in seen_states:
                continue
            seen_states.add(key)
            for combo in combos:
                new, _, transitions = step(state, build_obs(state, combo), plan)
                for tr in transitions:
                    if tr.source != tr.target:
                        assert (tr.source, tr.target) in edges, (tr.source, tr.target)
                if new.node != state.node or transitions:
                    frontier.append(new)

    def test_absorbing_states(self):
        plan = make_plan()
        for node in ABSORBING_NODES:
            state = MissionState(node, None, (), 1, 0.0)
            for combo in itertools.islice(observation_alphabet(), 0, None, 7):
                new, _, transitions = step(state, build_obs(state, combo), plan)
                assert new.node is node
                assert not transitions

    def test_filter_active_exactly_in_locomotion_nodes(self):
        assert FILTER_ACTIVE_NODES == {Node.LOCOMOTION_INSPECT, Node.LOCOMOTION_TO_WAYPOINT}
        plan = make_plan()
        for node in Node:
            # goal far away so no transition fires before reading directives
            state = MissionState(node, np.array([5.0, 5.0]), (), 2, 0.0)
            new, directives, _ = step(state, obs(time=0.5), plan)
            assert new.node is node
            if node in FILTER_ACTIVE_NODES:
                assert directives.filter_on
            else:
                assert not directives.filter_on

    def test_zone_labels_cover_all_nodes(self):
        assert set(ZONE_BY_NODE) == set(Node)
