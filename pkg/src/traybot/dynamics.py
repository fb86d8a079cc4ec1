"""Pluggable rigid-body dynamics interface with two bundled analytic models.

``TwoLinkArm`` is a fixed-base planar two-link chain with textbook closed-form
mass matrix, bias forces and tip-contact Jacobian; the full-body QP controller
is validated against it. ``PlanarQuadruped`` is a top-down composite (base plus
five two-link limbs) used only for center-of-mass and support-polygon
bookkeeping during intermediate motions.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import rot2


class DynamicsModel(abc.ABC):
    """Queries the full-body controller needs; all methods are pure."""

    @property
    @abc.abstractmethod
    def nq(self) -> int:
        """Configuration dimension."""

    @property
    @abc.abstractmethod
    def n_unactuated(self) -> int:
        """Number of unactuated coordinates (6 for a floating base)."""

    @property
    @abc.abstractmethod
    def contact_dim(self) -> int:
        """Dimension of the stacked contact force vector."""

    @property
    def contact_block(self) -> int:
        """Force components per contact point (2 planar, 3 spatial)."""
        return 3

    @abc.abstractmethod
    def mass_matrix(self, q: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def bias_forces(self, q: np.ndarray, qd: np.ndarray) -> np.ndarray:
        """Coriolis/centrifugal plus gravity terms."""

    @abc.abstractmethod
    def selection_matrix(self) -> np.ndarray: ...

    @abc.abstractmethod
    def contact_jacobian(self, q: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def contact_jacobian_dot_qd(self, q: np.ndarray, qd: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def gravity_torque(self, q: np.ndarray) -> np.ndarray: ...

    @property
    def actuated_dim(self) -> int:
        return self.nq - self.n_unactuated


@dataclass(frozen=True)
class TwoLinkArm(DynamicsModel):
    """Planar two-link chain in the vertical plane, fully actuated, tip contact.

    Angles are measured from the horizontal axis; gravity acts along -z.
    """

    l1: float = 0.25
    l2: float = 0.25
    m1: float = 1.2
    m2: float = 0.8
    gravity: float = 9.81

    @property
    def lc1(self) -> float:
        return self.l1 / 2

    @property
    def lc2(self) -> float:
        return self.l2 / 2

    @property
    def i1(self) -> float:
        return self.m1 * self.l1**2 / 12.0

    @property
    def i2(self) -> float:
        return self.m2 * self.l2**2 / 12.0

    @property
    def nq(self) -> int:
        return 2

    @property
    def n_unactuated(self) -> int:
        return 0

    @property
    def contact_dim(self) -> int:
        return 2

    @property
    def contact_block(self) -> int:
        return 2

    def mass_matrix(self, q):
        c2 = math.cos(q[1])
        d11 = (
            self.m1 * self.lc1**2
            + self.i1
            + self.m2 * (self.l1**2 + self.lc2**2 + 2 * self.l1 * self.lc2 * c2)
            + self.i2
        )
        d12 = self.m2 * (self.lc2**2 + self.l1 * self.lc2 * c2) + self.i2
        d22 = self.m2 * self.lc2**2 + self.i2
        return np.array([[d11, d12], [d12, d22]])

    def coriolis_matrix(self, q, qd):
        h = -self.m2 * self.l1 * self.lc2 * math.sin(q[1])
        return np.array([[h * qd[1], h * (qd[0] + qd[1])], [-h * qd[0], 0.0]])

    def gravity_torque(self, q):
        c1 = math.cos(q[0])
        c12 = math.cos(q[0] + q[1])
        g1 = (self.m1 * self.lc1 + self.m2 * self.l1) * self.gravity * c1 \
            + self.m2 * self.lc2 * self.gravity * c12
        g2 = self.m2 * self.lc2 * self.gravity * c12
        return np.array([g1, g2])

    def bias_forces(self, q, qd):
        return self.coriolis_matrix(q, qd) @ qd + self.gravity_torque(q)

    def selection_matrix(self):
        return np.eye(2)

    def tip_position(self, q):
        x = self.l1 * math.cos(q[0]) + self.l2 * math.cos(q[0] + q[1])
        z = self.l1 * math.sin(q[0]) + self.l2 * math.sin(q[0] + q[1])
        return np.array([x, z])

    def contact_jacobian(self, q):
        s1, c1 = math.sin(q[0]), math.cos(q[0])
        s12, c12 = math.sin(q[0] + q[1]), math.cos(q[0] + q[1])
        return np.array(
            [
                [-self.l1 * s1 - self.l2 * s12, -self.l2 * s12],
                [self.l1 * c1 + self.l2 * c12, self.l2 * c12],
            ]
        )

    def contact_jacobian_dot_qd(self, q, qd):
        s1, c1 = math.sin(q[0]), math.cos(q[0])
        s12, c12 = math.sin(q[0] + q[1]), math.cos(q[0] + q[1])
        w1 = qd[0]
        w12 = qd[0] + qd[1]
        jdot = np.array(
            [
                [-self.l1 * c1 * w1 - self.l2 * c12 * w12, -self.l2 * c12 * w12],
                [-self.l1 * s1 * w1 - self.l2 * s12 * w12, -self.l2 * s12 * w12],
            ]
        )
        return jdot @ qd

    def kinetic_energy(self, q, qd):
        """From link velocities directly; independent of the mass matrix."""
        v1 = self.lc1 * qd[0]
        elbow_v = np.array(
            [-self.l1 * math.sin(q[0]) * qd[0], self.l1 * math.cos(q[0]) * qd[0]]
        )
        w12 = qd[0] + qd[1]
        c_v = elbow_v + self.lc2 * w12 * np.array(
            [-math.sin(q[0] + q[1]), math.cos(q[0] + q[1])]
        )
        return (
            0.5 * self.m1 * v1**2
            + 0.5 * self.i1 * qd[0] ** 2
            + 0.5 * self.m2 * float(c_v @ c_v)
            + 0.5 * self.i2 * w12**2
        )


LIMB_NAMES = ("wheel", "FL", "FR", "BL", "BR")


@dataclass(frozen=True)
class PlanarQuadruped:
    """Top-down composite of a base and five two-link limbs (arm + four legs).

    Configuration is the ten limb joint angles in limb order wheel, FL, FR,
    BL, BR (two per limb, shoulder angle in the base frame then elbow angle).
    Only kinematics and mass bookkeeping: feet, projected CoM, selection
    matrices for the contact sequencer.
    """

    base_mass: float = 9.0
    limb_roots: tuple = (
        (0.20, 0.0),
        (0.15, 0.10),
        (0.15, -0.10),
        (-0.15, 0.10),
        (-0.15, -0.10),
    )
    limb_lengths: tuple = (
        (0.15, 0.15),
        (0.12, 0.12),
        (0.12, 0.12),
        (0.12, 0.12),
        (0.12, 0.12),
    )
    limb_masses: tuple = (
        (0.6, 0.4),
        (0.3, 0.2),
        (0.3, 0.2),
        (0.3, 0.2),
        (0.3, 0.2),
    )

    @property
    def nq(self) -> int:
        return 10

    def joint_slice(self, limb: int) -> slice:
        return slice(2 * limb, 2 * limb + 2)

    def selection_matrix(self, limb: int) -> np.ndarray:
        s = np.zeros((2, self.nq))
        s[0, 2 * limb] = 1.0
        s[1, 2 * limb + 1] = 1.0
        return s

    def _limb_points(self, q, limb: int, base_position, yaw: float):
        r = rot2(yaw)
        base = np.asarray(base_position, dtype=float).reshape(2)
        root = base + r @ np.asarray(self.limb_roots[limb])
        a1 = q[2 * limb] + yaw
        a2 = a1 + q[2 * limb + 1]
        l1, l2 = self.limb_lengths[limb]
        elbow = root + l1 * np.array([math.cos(a1), math.sin(a1)])
        tip = elbow + l2 * np.array([math.cos(a2), math.sin(a2)])
        return root, elbow, tip

    def foot_position(self, q, limb: int, base_position, yaw: float) -> np.ndarray:
        return self._limb_points(q, limb, base_position, yaw)[2]

    def com(self, q, base_position, yaw: float) -> np.ndarray:
        base = np.asarray(base_position, dtype=float).reshape(2)
        total = self.base_mass
        acc = self.base_mass * base
        for limb in range(5):
            root, elbow, tip = self._limb_points(q, limb, base_position, yaw)
            m1, m2 = self.limb_masses[limb]
            acc = acc + m1 * 0.5 * (root + elbow) + m2 * 0.5 * (elbow + tip)
            total += m1 + m2
        return acc / total

    def total_mass(self) -> float:
        return self.base_mass + sum(m1 + m2 for m1, m2 in self.limb_masses)
