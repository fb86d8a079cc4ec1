"""Reduced-order safety filter for base velocity commands.

The base follows single-integrator kinematics (position in, velocity out);
two barriers keep it outside the padded manway ellipse and inside the tray
disk. A small QP minimally modifies the reference velocity so that each
barrier's decrease rate stays above its class-K bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import TrayWorld, VelocityCommand
from .qp import QpProblem, QpSolver, SolveStatus

DEFAULT_GAMMA = 1.0
DEFAULT_V_BOUND = 0.3
YAW_RATE_LIMIT = 0.5
YAW_GAIN = 2.0


def manway_barrier(world: TrayWorld, position) -> float:
    """Ellipse barrier value: negative inside the padded manway ellipse."""
    p = np.asarray(position, dtype=float).reshape(2)
    return float(p @ world.ellipse_a @ p + world.ellipse_b @ p + world.ellipse_c)


def manway_barrier_gradient(world: TrayWorld, position) -> np.ndarray:
    p = np.asarray(position, dtype=float).reshape(2)
    return 2.0 * world.ellipse_a @ p + world.ellipse_b


def tray_barrier(world: TrayWorld, position) -> float:
    """Disk barrier value: negative outside the shrunk tray plate."""
    p = np.asarray(position, dtype=float).reshape(2)
    d = p - world.tray_center
    return float(world.safe_radius**2 - d @ d)


def tray_barrier_gradient(world: TrayWorld, position) -> np.ndarray:
    p = np.asarray(position, dtype=float).reshape(2)
    return -2.0 * (p - world.tray_center)


@dataclass(frozen=True)
class ReducedModel:
    """Planar kinematic base model with box-bounded velocity commands."""

    v_min: np.ndarray = field(default_factory=lambda: -DEFAULT_V_BOUND * np.ones(2))
    v_max: np.ndarray = field(default_factory=lambda: DEFAULT_V_BOUND * np.ones(2))

    def __post_init__(self):
        object.__setattr__(self, "v_min", np.asarray(self.v_min, dtype=float).reshape(2))
        object.__setattr__(self, "v_max", np.asarray(self.v_max, dtype=float).reshape(2))
        if not np.all(self.v_min < self.v_max):
            raise ValueError("velocity bounds must satisfy v_min < v_max componentwise")


@dataclass(frozen=True)
class BarrierSpec:
    """One barrier constraint: value/gradient callables plus its class-K gain."""

    kind: str
    gamma: float
    world: TrayWorld

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("class-K gain must be positive")
        if self.kind not in ("manway-ellipse", "tray-disk"):
            raise ValueError(f"unknown barrier kind {self.kind!r}")

    def value(self, position) -> float:
        if self.kind == "manway-ellipse":
            return manway_barrier(self.world, position)
        return tray_barrier(self.world, position)

    def gradient(self, position) -> np.ndarray:
        if self.kind == "manway-ellipse":
            return manway_barrier_gradient(self.world, position)
        return tray_barrier_gradient(self.world, position)


def default_barriers(world: TrayWorld, gamma_manway: float = DEFAULT_GAMMA,
                     gamma_tray: float = DEFAULT_GAMMA) -> tuple[BarrierSpec, BarrierSpec]:
    return (
        BarrierSpec("manway-ellipse", gamma_manway, world),
        BarrierSpec("tray-disk", gamma_tray, world),
    )


@dataclass(frozen=True)
class ReferenceController:
    """Proportional position controller producing the nominal velocity."""

    goal: np.ndarray
    gains: np.ndarray = field(default_factory=lambda: np.ones(2))

    def __post_init__(self):
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=float).reshape(2))
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=float).reshape(2))
        if not np.all(self.gains > 0):
            raise ValueError("controller gains must be positive")

    def nominal(self, position) -> np.ndarray:
        p = np.asarray(position, dtype=float).reshape(2)
        return self.gains * (self.goal - p)


@dataclass(frozen=True)
class FilterDiagnostics:
    barrier_values: tuple[float, ...]
    constraint_active: tuple[bool, ...]
    qp_status: SolveStatus
    nominal: np.ndarray
    infeasible: bool


def filter_velocity(
    model: ReducedModel,
    barriers: Sequence[BarrierSpec],
    ref: ReferenceController,
    position,
    solver: Optional[QpSolver] = None,
) -> tuple[VelocityCommand, FilterDiagnostics]:
    """Minimally modify the reference velocity to respect every barrier.

    Infeasibility returns a zero command with the infeasible flag set; the
    caller must halt rather than execute an unsafe motion.
    """
    p = np.asarray(position, dtype=float).reshape(2)
    k_d = ref.nominal(p)
    h_vals = tuple(b.value(p) for b in barriers)
    grads = [b.gradient(p) for b in barriers]
    rows = np.vstack(grads + [np.eye(2)]) if barriers else np.eye(2)
    lower = np.concatenate(
        [np.array([-b.gamma * h for b, h in zip(barriers, h_vals)]), model.v_min]
    )
    upper = np.concatenate([np.full(len(barriers), np.inf), model.v_max])
    problem = QpProblem(2.0 * np.eye(2), -2.0 * k_d, a_in=rows, lower=lower, upper=upper)
    solution = solver.solve(problem) if solver is not None else None
    if solution is None:
        from .qp import solve_qp

        solution = solve_qp(problem)
    if solution.status is not SolveStatus.OPTIMAL:
        diag = FilterDiagnostics(h_vals, tuple(False for _ in barriers), solution.status, k_d, True)
        return VelocityCommand(0.0, 0.0), diag
    v = solution.x
    slack = rows[: len(barriers)] @ v - lower[: len(barriers)]
    active = tuple(bool(s < 1e-7) for s in slack)
    diag = FilterDiagnostics(h_vals, active, solution.status, k_d, False)
    return VelocityCommand(float(v[0]), float(v[1])), diag


def heading_rate(yaw: float, yaw_ref: float, gain: float = YAW_GAIN,
                 limit: float = YAW_RATE_LIMIT) -> float:
    """Proportional yaw-rate command, wrapped and saturated; outside the filter."""
    err = math.remainder(yaw_ref - yaw, 2.0 * math.pi)
    return float(min(max(gain * err, -limit), limit))


def project_into_safe_set(world: TrayWorld, point, margin: float = 0.005,
                          iterations: int = 8) -> np.ndarray:
    """Nudge a reference point until both barriers clear ``margin``.

    First-order steps along the barrier gradients; used to keep lean targets
    from pulling the filtered base against a constraint it cannot cross.
    """
    p = np.asarray(point, dtype=float).copy()
    for _ in range(iterations):
        moved = False
        h1 = manway_barrier(world, p)
        if h1 < margin:
            g = manway_barrier_gradient(world, p)
            ng = float(np.linalg.norm(g))
            if ng > 1e-12:
                p = p + (margin - h1) / ng * (g / ng)
                moved = True
        h2 = tray_barrier(world, p)
        if h2 < margin:
            g = tray_barrier_gradient(world, p)
            ng = float(np.linalg.norm(g))
            if ng > 1e-12:
                p = p + (margin - h2) / ng * (g / ng)
                moved = True
        if not moved:
            return p
    # Alternating steps stall where the two boundaries pinch together; fall
    # back to the nearest point of a coarse polar sampling of the safe set.
    target = np.asarray(point, dtype=float)
    best = None
    best_dist = math.inf
    for radius in np.linspace(0.0, world.safe_radius, 25):
        for t in np.linspace(0.0, 2.0 * math.pi, 96, endpoint=False):
            cand = world.tray_center + radius * np.array([math.cos(t), math.sin(t)])
            if manway_barrier(world, cand) >= margin and tray_barrier(world, cand) >= margin:
                d = float(np.linalg.norm(cand - target))
                if d < best_dist:
                    best_dist = d
                    best = cand
    return best if best is not None else p
