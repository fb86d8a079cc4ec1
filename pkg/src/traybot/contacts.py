"""Contact-sequence planning for the intermediate motions that bridge
locomotion and the prerecorded transition maneuvers.

The planner picks, per step, which limbs sit in stance at their
transition-ready joint values (a small integer program), then stitches a
piecewise-cubic joint trajectory through the step configurations with a
center-of-mass guard over each segment's support polygon.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import LIMB_NAMES, PlanarQuadruped
from .errors import StitchError
from .geometry import convex_hull, convex_polygon_margin
from .qp import (
    IntSumConstraint,
    MiqpProblem,
    QpProblem,
    SolveStatus,
    solve_miqp,
)

N_LIMBS = 5
# Admissible contact markers: wheel and back legs use {0, 2}, front legs {0, 1}.
LIMB_DOMAINS = ((0, 2), (0, 1), (0, 1), (0, 2), (0, 2))
_PIN_TOL = 1e-9


@dataclass(frozen=True)
class ContactSequenceProblem:
    horizon: int
    q_target: np.ndarray
    q_initial: np.ndarray
    weight: np.ndarray
    model: PlanarQuadruped = field(default_factory=PlanarQuadruped)
    regularization: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "q_target", np.asarray(self.q_target, dtype=float).ravel())
        object.__setattr__(self, "q_initial", np.asarray(self.q_initial, dtype=float).ravel())
        object.__setattr__(self, "weight", np.asarray(self.weight, dtype=float))
        if self.horizon < 3:
            raise ValueError("horizon must be at least 3")
        nq = self.model.nq
        if self.q_target.shape != (nq,) or self.q_initial.shape != (nq,):
            raise ValueError("configuration size does not match the model")
        if self.weight.shape != (nq, nq):
            raise ValueError("weight matrix size does not match the model")

    @classmethod
    def default_weight(cls, model: Optional[PlanarQuadruped] = None) -> np.ndarray:
        return np.eye((model or PlanarQuadruped()).nq)


@dataclass(frozen=True)
class ContactPlan:
    """Per-step contact markers and configurations, plus the terminal error."""

    pattern: tuple[tuple[int, ...], ...]
    knots: np.ndarray
    objective: float
    q_initial: np.ndarray
    q_target: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.pattern)

    def to_json_dict(self) -> dict:
        return {
            "pattern": [list(step) for step in self.pattern],
            "knots": self.knots.tolist(),
            "objective": self.objective,
            "q_initial": self.q_initial.tolist(),
            "q_target": self.q_target.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ContactPlan":
        return cls(
            tuple(tuple(int(v) for v in step) for step in d["pattern"]),
            np.asarray(d["knots"], dtype=float),
            float(d["objective"]),
            np.asarray(d["q_initial"], dtype=float),
            np.asarray(d["q_target"], dtype=float),
        )


def build_miqp(problem: ContactSequenceProblem) -> MiqpProblem:
    """Assemble the integer program over step-major contact markers.

    Integer variable (step j, limb i) sits at index 5*(j-1) + i so the
    solver's lexicographic tie-break prefers earlier steps and lower limbs.
    """
    ell = problem.horizon
    nq = problem.model.nq
    dim = ell * nq
    big_q = np.zeros((dim, dim))
    lin = np.zeros(dim)
    last = slice((ell - 1) * nq, ell * nq)
    big_q[last, last] += 2.0 * problem.weight
    lin[last] += -2.0 * problem.weight @ problem.q_target
    for j in range(ell):
        block = slice(j * nq, (j + 1) * nq)
        big_q[block, block] += 2.0 * problem.regularization * np.eye(nq)
        lin[block] += -2.0 * problem.regularization * problem.q_target
    template = QpProblem(big_q, lin)

    domains = tuple(LIMB_DOMAINS[i] for _ in range(ell) for i in range(N_LIMBS))
    sums = []
    for j in range(ell):
        coeffs = [0.0] * (ell * N_LIMBS)
        for i in range(N_LIMBS):
            coeffs[j * N_LIMBS + i] = 1.0
        rhs = 0.0 if j in (0, ell - 1) else 2.0
        sums.append(IntSumConstraint(tuple(coeffs), rhs))

    def coupling(var: int, value: int):
        if value == 0:
            return None
        j, i = divmod(var, N_LIMBS)
        sel = problem.model.selection_matrix(i)
        rows = np.zeros((2, dim))
        rows[:, j * nq:(j + 1) * nq] = sel
        return rows, sel @ problem.q_target

    return MiqpProblem(template, domains, tuple(sums), coupling)


def plan_contacts(problem: ContactSequenceProblem) -> ContactPlan:
    """Solve the contact-sequence program; result is constraint-exact."""
    miqp = build_miqp(problem)
    result = solve_miqp(miqp)
    if result.status is not SolveStatus.OPTIMAL:
        raise RuntimeError(
            "contact-sequence program infeasible; the admissible sets admit "
            "a solution for any horizon >= 3, so this indicates a bad problem"
        )
    ell = problem.horizon
    nq = problem.model.nq
    pattern = tuple(
        tuple(result.assignment[j * N_LIMBS:(j + 1) * N_LIMBS]) for j in range(ell)
    )
    knots = result.solution.x.reshape(ell, nq).copy()
    _validate_plan(problem, pattern, knots)
    err = problem.q_target - knots[-1]
    objective = float(err @ problem.weight @ err)
    return ContactPlan(pattern, knots, objective, problem.q_initial.copy(), problem.q_target.copy())


def _validate_plan(problem: ContactSequenceProblem, pattern, knots) -> None:
    ell = problem.horizon
    for j, step in enumerate(pattern):
        expected = 0 if j in (0, ell - 1) else 2
        if sum(step) != expected:
            raise RuntimeError(f"step {j + 1} contact sum {sum(step)} != {expected}")
        for i, v in enumerate(step):
            if v not in LIMB_DOMAINS[i]:
                raise RuntimeError(f"limb {LIMB_NAMES[i]} marker {v} outside admissible set")
            if v != 0:
                sel = problem.model.selection_matrix(i)
                gap = float(np.abs(sel @ (problem.q_target - knots[j])).max())
                if gap > _PIN_TOL:
                    raise RuntimeError(f"pin violated at step {j + 1} limb {LIMB_NAMES[i]}: {gap}")


@dataclass(frozen=True)
class JointTrajectory:
    """Piecewise-cubic joint trajectory with zero velocity at every knot."""

    knots: np.ndarray
    step_duration: float

    @property
    def duration(self) -> float:
        return (len(self.knots) - 1) * self.step_duration

    def sample(self, t: float):
        """(q, qd) at time t; clamped to the trajectory's time range."""
        n_seg = len(self.knots) - 1
        t = min(max(t, 0.0), self.duration)
        seg = min(int(t / self.step_duration), n_seg - 1)
        s = (t - seg * self.step_duration) / self.step_duration
        a = self.knots[seg]
        b = self.knots[seg + 1]
        blend = s * s * (3.0 - 2.0 * s)
        dblend = 6.0 * s * (1.0 - s) / self.step_duration
        return a + blend * (b - a), dblend * (b - a)


def stitch_trajectories(plan: ContactPlan, step_duration: float) -> JointTrajectory:
    """Connect q_initial, the step configurations and q_target.

    Segment j (ending at step-j's configuration) keeps the joints of limbs
    flagged in contact at step j constant; differing endpoints for a pinned
    joint are a conflict, not something to smooth over.
    """
    if step_duration <= 0:
        raise ValueError("step duration must be positive")
    knots = np.vstack([plan.q_initial, plan.knots, plan.q_target])
    for j, step in enumerate(plan.pattern, start=1):
        for i, v in enumerate(step):
            if v == 0:
                continue
            sl = slice(2 * i, 2 * i + 2)
            if float(np.abs(knots[j - 1, sl] - knots[j, sl]).max()) > _PIN_TOL:
                raise StitchError(
                    f"limb {LIMB_NAMES[i]} pinned at step {j} but its joints move"
                )
    return JointTrajectory(knots, step_duration)


def segment_support_polygons(
    plan: ContactPlan, model: PlanarQuadruped, base_position, yaw: float
) -> list[np.ndarray]:
    """Support polygon per stitched segment: feet of legs that do not move.

    The wheel limb never counts as support. Legs whose joints change across a
    segment are treated as repositioning and excluded from that segment.
    """
    knots = np.vstack([plan.q_initial, plan.knots, plan.q_target])
    polygons = []
    for seg in range(len(knots) - 1):
        stance_feet = []
        for limb in range(1, N_LIMBS):
            sl = slice(2 * limb, 2 * limb + 2)
            if float(np.abs(knots[seg, sl] - knots[seg + 1, sl]).max()) <= _PIN_TOL:
                stance_feet.append(model.foot_position(knots[seg], limb, base_position, yaw))
        if len(stance_feet) >= 3:
            polygons.append(convex_hull(np.array(stance_feet)))
        else:
            polygons.append(np.array(stance_feet).reshape(-1, 2))
    return polygons


def com_guard(
    trajectory: JointTrajectory,
    support_polygons: Sequence[np.ndarray],
    model: PlanarQuadruped,
    base_position,
    yaw: float,
    shrink: float = 0.03,
    samples_per_segment: int = 50,
) -> bool:
    """True iff the projected CoM stays inside every segment's shrunk polygon."""
    n_seg = len(trajectory.knots) - 1
    if len(support_polygons) != n_seg:
        raise ValueError("need one support polygon per segment")
    for seg in range(n_seg):
        poly = np.asarray(support_polygons[seg], dtype=float).reshape(-1, 2)
        if len(poly) < 3:
            return False
        t0 = seg * trajectory.step_duration
        for k in range(samples_per_segment + 1):
            t = t0 + trajectory.step_duration * k / samples_per_segment
            q, _ = trajectory.sample(t)
            com = model.com(q, base_position, yaw)
            margin, degenerate = convex_polygon_margin(poly, com)
            if degenerate or margin < shrink:
                return False
    return True
