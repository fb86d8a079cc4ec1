"""Full-body control: inverse-dynamics QP, reference integration, impedance law
and the simplified gravity-compensation controller used during transitions.

Runs against any DynamicsModel; validated on the bundled planar two-link arm.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import DynamicsModel
from .errors import ConfigError, IkFailureError
from .qp import QpProblem, QpSolution, SolveStatus, solve_qp

DEFAULT_FRICTION = 0.4


@dataclass(frozen=True)
class ControllerWeights:
    """QP weights, PD gains, torque bound and friction coefficient."""

    w_accel: np.ndarray
    w_torque: np.ndarray
    w_contact: np.ndarray
    kp: np.ndarray
    kd: np.ndarray
    torque_limit: np.ndarray
    friction: float = DEFAULT_FRICTION

    @classmethod
    def defaults(cls, model: DynamicsModel, friction: float = DEFAULT_FRICTION,
                 torque_limit: float = 33.5) -> "ControllerWeights":
        n = model.nq
        na = model.actuated_dim
        nc = model.contact_dim
        return cls(
            w_accel=np.eye(n),
            w_torque=1e-3 * np.eye(na),
            w_contact=1e-4 * np.eye(nc),
            kp=100.0 * np.ones(n),
            kd=20.0 * np.ones(n),
            torque_limit=torque_limit * np.ones(na),
            friction=friction,
        )

    def __post_init__(self):
        if self.friction <= 0:
            raise ValueError("friction coefficient must be positive")
        if np.any(self.kp <= 0) or np.any(self.kd <= 0):
            raise ValueError("PD gains must be positive")


@dataclass(frozen=True)
class ImpedanceGains:
    kp: np.ndarray
    kd: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kp", np.asarray(self.kp, dtype=float).ravel())
        object.__setattr__(self, "kd", np.asarray(self.kd, dtype=float).ravel())
        if np.any(self.kp <= 0) or np.any(self.kd <= 0):
            raise ValueError("impedance gains must be positive")


def ik_references(model, target, q_init, target_velocity=None,
                  tol: float = 1e-6, max_iter: int = 100):
    """Damped-least-squares IK for the model's contact point.

    Returns (q_d, qd_d); qd_d maps the target velocity through the damped
    Jacobian pseudo-inverse at the solution.
    """
    q = np.asarray(q_init, dtype=float).copy()
    target = np.asarray(target, dtype=float).reshape(-1)
    damping = 1e-8
    for _ in range(max_iter):
        err = target - model.tip_position(q)
        if float(np.linalg.norm(err)) < tol:
            break
        j = model.contact_jacobian(q)
        jjt = j @ j.T + damping * np.eye(j.shape[0])
        q = q + j.T @ np.linalg.solve(jjt, err)
    else:
        raise IkFailureError(
            f"IK did not reach {tol} within {max_iter} iterations"
        )
    if target_velocity is None:
        qd = np.zeros_like(q)
    else:
        j = model.contact_jacobian(q)
        jjt = j @ j.T + damping * np.eye(j.shape[0])
        qd = j.T @ np.linalg.solve(jjt, np.asarray(target_velocity, dtype=float))
    return q, qd


def friction_pyramid_rows(contact_dim: int, mu: float, block: int = 3):
    """Linearized cone rows (A, lower, upper) over the contact-force vector.

    2D contacts get the two tangent faces; 3D contacts a four-face pyramid.
    The normal component is the last coordinate of each contact block.
    """
    if contact_dim % block != 0:
        raise ValueError("contact dimension must be a multiple of the block size")
    rows, lower, upper = [], [], []
    n_blocks = contact_dim // block
    for b in range(n_blocks):
        base = b * block
        normal_idx = base + block - 1
        row = np.zeros(contact_dim)
        row[normal_idx] = 1.0
        rows.append(row)
        lower.append(0.0)
        upper.append(np.inf)
        for t in range(block - 1):
            row = np.zeros(contact_dim)
            row[base + t] = 1.0
            row[normal_idx] = -mu
            rows.append(row)
            lower.append(-np.inf)
            upper.append(0.0)
            row = np.zeros(contact_dim)
            row[base + t] = 1.0
            row[normal_idx] = mu
            rows.append(row)
            lower.append(0.0)
            upper.append(np.inf)
    return np.array(rows), np.array(lower), np.array(upper)


@dataclass(frozen=True)
class FbcSolution:
    qdd: np.ndarray
    tau: np.ndarray
    contact_force: np.ndarray
    status: str  # "ok" | "controller-infeasible"
    qp: QpSolution


def solve_fbc(model: DynamicsModel, weights: ControllerWeights, q, qd, q_d, qd_d) -> FbcSolution:
    """Inverse-dynamics QP: accelerations, torques and contact forces that
    satisfy the equation of motion, a non-accelerating contact, the friction
    pyramid and the torque bounds while tracking a PD acceleration target."""
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    n = model.nq
    na = model.actuated_dim
    nc = model.contact_dim
    d_mat = model.mass_matrix(q)
    h_vec = model.bias_forces(q, qd)
    s_mat = model.selection_matrix()
    j_c = model.contact_jacobian(q)
    jdot_qd = model.contact_jacobian_dot_qd(q, qd)
    qdd_des = weights.kp * (np.asarray(q_d) - q) + weights.kd * (np.asarray(qd_d) - qd)

    dim = n + na + nc
    big_q = np.zeros((dim, dim))
    big_q[:n, :n] = 2.0 * weights.w_accel
    big_q[n:n + na, n:n + na] = 2.0 * weights.w_torque
    big_q[n + na:, n + na:] = 2.0 * weights.w_contact
    lin = np.zeros(dim)
    lin[:n] = -2.0 * weights.w_accel @ qdd_des

    a_eq = np.zeros((n + j_c.shape[0], dim))
    a_eq[:n, :n] = d_mat
    a_eq[:n, n:n + na] = -s_mat.T
    a_eq[:n, n + na:] = -j_c.T
    a_eq[n:, :n] = j_c
    b_eq = np.concatenate([-h_vec, -jdot_qd])

    cone_rows, cone_low, cone_up = friction_pyramid_rows(nc, weights.friction, model.contact_block)
    a_in = np.zeros((cone_rows.shape[0] + na, dim))
    a_in[: cone_rows.shape[0], n + na:] = cone_rows
    a_in[cone_rows.shape[0]:, n:n + na] = np.eye(na)
    lower = np.concatenate([cone_low, -weights.torque_limit])
    upper = np.concatenate([cone_up, weights.torque_limit])

    problem = QpProblem(big_q, lin, a_eq=a_eq, b_eq=b_eq, a_in=a_in, lower=lower, upper=upper)
    sol = solve_qp(problem)
    status = "ok" if sol.status is SolveStatus.OPTIMAL else "controller-infeasible"
    x = sol.x
    return FbcSolution(x[:n], x[n:n + na], x[n + na:], status, sol)


def integrate_reference(q, qd, qdd, dt: float):
    """Semi-implicit Euler step of the optimal acceleration."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    qd_next = np.asarray(qd, dtype=float) + np.asarray(qdd, dtype=float) * dt
    q_next = np.asarray(q, dtype=float) + qd_next * dt
    return q_next, qd_next


def impedance_torque(tau_ff, q_ref, qd_ref, q, qd, gains: ImpedanceGains,
                     torque_limit: Optional[np.ndarray] = None):
    """Feedforward plus joint impedance; returns (tau_cmd, clamped_flag)."""
    tau = (
        np.asarray(tau_ff, dtype=float)
        + gains.kp * (np.asarray(q_ref) - np.asarray(q))
        + gains.kd * (np.asarray(qd_ref) - np.asarray(qd))
    )
    clamped = False
    if torque_limit is not None:
        limit = np.asarray(torque_limit, dtype=float)
        clipped = np.clip(tau, -limit, limit)
        clamped = bool(np.any(clipped != tau))
        tau = clipped
    return tau, clamped


def transition_torque(model: DynamicsModel, q_d, qd_d, q, qd, gains: ImpedanceGains) -> np.ndarray:
    """Simplified transition-mode law: gravity compensation plus PD on the
    desired trajectory directly (no QP, no integrated reference)."""
    tau, _ = impedance_torque(model.gravity_torque(np.asarray(q, dtype=float)),
                              q_d, qd_d, q, qd, gains)
    return tau


@dataclass(frozen=True)
class TransitionTrajectory:
    """Prerecorded joint trajectory, linearly interpolated at tick rate."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        if len(self.times) < 2:
            raise ConfigError("transition trajectory needs at least two knots")
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("transition knot times must be strictly increasing")

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def sample(self, t: float):
        t = min(max(t, float(self.times[0])), float(self.times[-1]))
        idx = int(np.searchsorted(self.times, t, side="right") - 1)
        idx = min(idx, len(self.times) - 2)
        t0, t1 = self.times[idx], self.times[idx + 1]
        s = (t - t0) / (t1 - t0)
        q = (1 - s) * self.positions[idx] + s * self.positions[idx + 1]
        qd = (1 - s) * self.velocities[idx] + s * self.velocities[idx + 1]
        return q, qd

    @classmethod
    def from_json_obj(cls, obj) -> "TransitionTrajectory":
        knots = obj["knots"] if isinstance(obj, dict) else obj
        try:
            times = np.array([k["t"] for k in knots], dtype=float)
            qs = np.array([k["q"] for k in knots], dtype=float)
            qds = np.array([k["qd"] for k in knots], dtype=float)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed transition trajectory: {exc}") from exc
        return cls(times, qs, qds)

    @classmethod
    def load(cls, path: str) -> "TransitionTrajectory":
        with open(path) as f:
            return cls.from_json_obj(json.load(f))
